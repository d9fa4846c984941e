//! Paths in a chart and parallel transport of linear systems along them.
//!
//! Horizontal sections satisfy `ds + ω s = 0`, so transport integrates
//! `dS/dτ = −Σᵢ Aᵢ(z(τ)) żᵢ(τ) S`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::connection::LinearMeromorphicSystem;
use crate::error::{Error, Result};
use crate::ode::{integrate_segment, IntegratorOptions, Trace};
use crate::rational::{Chart, CompiledMatrix, DEFAULT_EVAL_FLOOR};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PathSegment {
    Line {
        from: Vec<Complex64>,
        to: Vec<Complex64>,
    },
    /// `z_var = center + radius·e^{iθ}`, `θ` from `start_angle` through `sweep`;
    /// the other coordinates are those of `base`.
    Arc {
        base: Vec<Complex64>,
        var: usize,
        center: Complex64,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl PathSegment {
    pub fn point(&self, tau: f64) -> Vec<Complex64> {
        match self {
            PathSegment::Line { from, to } => from.iter().zip(to).map(|(a, b)| a + (b - a) * tau).collect(),
            PathSegment::Arc {
                base,
                var,
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let mut z = base.clone();
                z[*var] = center + Complex64::from_polar(*radius, start_angle + sweep * tau);
                z
            }
        }
    }

    /// `dz/dτ`.
    pub fn velocity(&self, tau: f64) -> Vec<Complex64> {
        match self {
            PathSegment::Line { from, to } => from.iter().zip(to).map(|(a, b)| b - a).collect(),
            PathSegment::Arc {
                base,
                var,
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let mut v = vec![Complex64::new(0.0, 0.0); base.len()];
                v[*var] = Complex64::new(0.0, *sweep) * Complex64::from_polar(*radius, start_angle + sweep * tau);
                v
            }
        }
    }

    pub fn start(&self) -> Vec<Complex64> {
        self.point(0.0)
    }

    pub fn end(&self) -> Vec<Complex64> {
        self.point(1.0)
    }

    pub fn reversed(&self) -> PathSegment {
        match self {
            PathSegment::Line { from, to } => PathSegment::Line {
                from: to.clone(),
                to: from.clone(),
            },
            PathSegment::Arc {
                base,
                var,
                center,
                radius,
                start_angle,
                sweep,
            } => PathSegment::Arc {
                base: base.clone(),
                var: *var,
                center: *center,
                radius: *radius,
                start_angle: start_angle + sweep,
                sweep: -sweep,
            },
        }
    }
}

/// A piecewise path; consecutive segments must join.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Path {
    segments: Vec<PathSegment>,
}

fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

impl Path {
    pub fn new(segments: Vec<PathSegment>) -> Result<Self> {
        for w in segments.windows(2) {
            if dist(&w[0].end(), &w[1].start()) > 1e-12 {
                return Err(Error::Validation("path segments do not join".into()));
            }
        }
        Ok(Self { segments })
    }

    pub fn polyline(points: &[Vec<Complex64>]) -> Result<Self> {
        Self::new(
            points
                .windows(2)
                .map(|w| PathSegment::Line {
                    from: w[0].clone(),
                    to: w[1].clone(),
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn start(&self) -> Option<Vec<Complex64>> {
        self.segments.first().map(|s| s.start())
    }

    pub fn end(&self) -> Option<Vec<Complex64>> {
        self.segments.last().map(|s| s.end())
    }

    pub fn is_closed(&self) -> bool {
        match (self.start(), self.end()) {
            (Some(a), Some(b)) => dist(&a, &b) < 1e-12,
            _ => true,
        }
    }

    /// `self` followed by `o`.
    pub fn concat(&self, o: &Path) -> Result<Path> {
        let mut s = self.segments.clone();
        s.extend(o.segments.iter().cloned());
        Path::new(s)
    }

    pub fn reversed(&self) -> Path {
        Path {
            segments: self.segments.iter().rev().map(|s| s.reversed()).collect(),
        }
    }

    /// Smallest divisor modulus over `samples` points per segment.
    pub fn min_divisor_distance(&self, chart: &Chart, samples: usize) -> f64 {
        let mut best = f64::INFINITY;
        for seg in &self.segments {
            for k in 0..=samples {
                best = best.min(chart.divisor_distance(&seg.point(k as f64 / samples as f64)));
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransportOptions {
    pub integrator: IntegratorOptions,
    /// The path must keep every divisor polynomial above this modulus.
    pub min_distance: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions {
                max_step: 0.02,
                ..IntegratorOptions::default().with_tolerance(1e-11)
            },
            min_distance: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Transported {
    /// Transported initial data.
    pub end: DMatrix<Complex64>,
    /// Chart points and states at accepted steps, including the start.
    pub samples: Vec<(Vec<Complex64>, DMatrix<Complex64>)>,
    pub min_divisor_distance: f64,
    pub step_ratio: f64,
}

/// A system compiled for repeated numeric transport.
#[derive(Clone, Debug)]
pub struct CompiledSystem {
    chart: Chart,
    rank: usize,
    matrices: Vec<CompiledMatrix>,
}

impl CompiledSystem {
    pub fn new(system: &LinearMeromorphicSystem) -> Self {
        Self {
            chart: system.chart().clone(),
            rank: system.rank(),
            matrices: system.compile(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// `Σᵢ Aᵢ(z) vᵢ`.
    pub fn form(&self, z: &[Complex64], v: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let mut out = DMatrix::zeros(self.rank, self.rank);
        for (m, &vi) in self.matrices.iter().zip(v) {
            m.accumulate(z, vi, DEFAULT_EVAL_FLOOR, &mut out)?;
        }
        Ok(out)
    }

    /// Transports the columns of `initial` along `path`.
    pub fn transport(&self, path: &Path, initial: &DMatrix<Complex64>, opts: &TransportOptions) -> Result<Transported> {
        let r = self.rank;
        let k = initial.ncols();
        assert_eq!(initial.nrows(), r);
        let chart = &self.chart;
        let to_state = |m: &DMatrix<Complex64>| -> Vec<Complex64> { m.iter().copied().collect() };
        let from_state = |y: &[Complex64]| DMatrix::from_column_slice(r, k, y);
        let mut y = to_state(initial);
        let mut min_dist = f64::INFINITY;
        let mut samples = Vec::new();
        let mut trace = Trace::default();
        if let Some(p) = path.start() {
            min_dist = chart.divisor_distance(&p);
            if min_dist < opts.min_distance {
                return Err(Error::PoleApproach {
                    parameter: 0.0,
                    last_state: y,
                });
            }
            samples.push((p, initial.clone()));
        }
        for seg in path.segments() {
            let rhs = |t: Complex64, y: &[Complex64], out: &mut [Complex64]| -> Result<()> {
                let z = seg.point(t.re);
                let a = self.form(&z, &seg.velocity(t.re))?;
                let s = from_state(y);
                let d = -(a * s);
                out.copy_from_slice(d.as_slice());
                Ok(())
            };
            let mut last = y.clone();
            let arc_base = trace.arclength;
            let monitor = |t: Complex64, y: &[Complex64]| -> Result<()> {
                let z = seg.point(t.re);
                let d = chart.divisor_distance(&z);
                if d < opts.min_distance {
                    return Err(Error::PoleApproach {
                        parameter: arc_base + t.re,
                        last_state: last.clone(),
                    });
                }
                min_dist = min_dist.min(d);
                last.copy_from_slice(y);
                samples.push((z, from_state(y)));
                Ok(())
            };
            y = integrate_segment(
                rhs,
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                &y,
                &opts.integrator,
                monitor,
                &mut trace,
            )?;
        }
        Ok(Transported {
            end: from_state(&y),
            samples,
            min_divisor_distance: min_dist,
            step_ratio: trace.step_ratio(),
        })
    }
}
