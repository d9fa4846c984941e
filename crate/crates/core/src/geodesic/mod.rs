//! Geodesics, distinguished curves on the frame bundle, and the spiral
//! classification of branched connections.

mod distinguished;
mod spiral;

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::connection::ChartConnection;
use crate::error::{Error, Result};
use crate::ode::{integrate_path, IntegratorOptions};
use crate::rational::{Chart, CompiledMatrix, DEFAULT_EVAL_FLOOR};

pub use distinguished::{
    distinguished_field, integrate_distinguished_curve, reparametrization_residual, Crossing, CurveOptions, CurveSample,
    DistinguishedCurveResult, DistinguishedField, FrameBundlePoint, ResidualReport,
};
pub use spiral::{classify_a01, spiral_search, spiral_verdict, strong_spiral_test, ComponentSpiralVerdict, SpiralOptions, SpiralWitness};

/// Divisor modulus below which `geodesic_rhs` refuses to evaluate.
pub const RHS_POLE_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicState {
    pub z: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub t: Complex64,
}

/// Christoffel symbols compiled for numeric contraction.
#[derive(Clone, Debug)]
pub struct ChristoffelEval {
    n: usize,
    /// One `n×n` matrix `(i, j) ↦ Γ^k_{ij}` per `k`.
    slices: Vec<CompiledMatrix>,
}

impl ChristoffelEval {
    pub fn new(conn: &ChartConnection) -> Self {
        let n = conn.nvars();
        let slices = (0..n)
            .map(|k| {
                let m = crate::rational::RatMatrix::from_fn(n, n, n, |i, j| conn.gamma(k, i, j).clone());
                CompiledMatrix::new(&m)
            })
            .collect();
        Self { n, slices }
    }

    /// `Γ(a, b)^k = Σᵢⱼ Γ^k_{ij} aᵢ bⱼ`.
    pub fn contract(&self, z: &[Complex64], a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (k, s) in self.slices.iter().enumerate() {
            if s.is_zero() {
                continue;
            }
            let g = s.eval(z, DEFAULT_EVAL_FLOOR)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..self.n {
                for j in 0..self.n {
                    acc += g[(i, j)] * a[i] * b[j];
                }
            }
            out[k] = acc;
        }
        Ok(out)
    }
}

/// `ż = v`, `v̇^k = −Σ Γ^k_{ij}(z) vᵢ vⱼ`.
pub fn geodesic_rhs(conn: &ChartConnection, state: &GeodesicState) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let d = conn.chart().divisor_distance(&state.z);
    if d < RHS_POLE_FLOOR {
        return Err(Error::NearPoleEvaluation { modulus: d });
    }
    let g = ChristoffelEval::new(conn).contract(&state.z, &state.v, &state.v)?;
    Ok((state.v.clone(), g.into_iter().map(|x| -x).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct GeodesicOptions {
    pub integrator: IntegratorOptions,
    /// Integration stops once a divisor polynomial drops below this modulus.
    pub pole_threshold: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            pole_threshold: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicTrajectory {
    pub samples: Vec<GeodesicState>,
    pub step_ratio: f64,
}

impl GeodesicTrajectory {
    pub fn endpoint(&self) -> &GeodesicState {
        self.samples.last().expect("trajectory has at least its initial state")
    }

    pub fn to_csv(&self, chart: &Chart) -> String {
        trace_csv(chart, self.samples.iter().map(|s| (s.t, s.z.as_slice())))
    }
}

/// Integrates a geodesic along the polyline of complex times `path`, which
/// must start at `initial.t`.
pub fn integrate_geodesic(
    conn: &ChartConnection,
    initial: &GeodesicState,
    path: &[Complex64],
    opts: &GeodesicOptions,
) -> Result<GeodesicTrajectory> {
    let n = conn.nvars();
    if initial.v.iter().all(|x| x.norm() == 0.0) {
        return Err(Error::DegenerateGeodesic);
    }
    if path.first() != Some(&initial.t) {
        return Err(Error::Validation("time path must start at the initial time".into()));
    }
    let chart = conn.chart();
    let start_dist = chart.divisor_distance(&initial.z);
    if start_dist < opts.pole_threshold {
        return Err(Error::PoleApproach {
            parameter: 0.0,
            last_state: initial.z.clone(),
        });
    }
    let gamma = ChristoffelEval::new(conn);
    let mut y0 = initial.z.clone();
    y0.extend_from_slice(&initial.v);
    let t0 = initial.t;
    let rhs = |_t: Complex64, y: &[Complex64], out: &mut [Complex64]| -> Result<()> {
        let (z, v) = y.split_at(n);
        let acc = gamma.contract(z, v, v)?;
        out[..n].copy_from_slice(v);
        for k in 0..n {
            out[n + k] = -acc[k];
        }
        Ok(())
    };
    let mut last_safe = y0.clone();
    let monitor = |t: Complex64, y: &[Complex64]| -> Result<()> {
        if chart.divisor_distance(&y[..n]) < opts.pole_threshold {
            return Err(Error::PoleApproach {
                parameter: (t - t0).norm(),
                last_state: last_safe.clone(),
            });
        }
        last_safe.copy_from_slice(y);
        Ok(())
    };
    let (_, trace) = integrate_path(rhs, path, &y0, &opts.integrator, monitor)?;
    let samples = trace
        .samples
        .iter()
        .map(|s| GeodesicState {
            z: s.y[..n].to_vec(),
            v: s.y[n..].to_vec(),
            t: s.t,
        })
        .collect();
    Ok(GeodesicTrajectory {
        samples,
        step_ratio: trace.step_ratio(),
    })
}

/// CSV rows `t_re, t_im, z_re, z_im…, q_re, q_im…` for a sampled curve.
pub fn trace_csv<'a>(chart: &Chart, rows: impl IntoIterator<Item = (Complex64, &'a [Complex64])>) -> String {
    let mut out = String::from("t_re,t_im");
    for name in chart.var_names() {
        let _ = write!(out, ",{name}_re,{name}_im");
    }
    for k in 1..=chart.divisor().len() {
        let _ = write!(out, ",q{k}_re,q{k}_im");
    }
    out.push('\n');
    for (t, z) in rows {
        let _ = write!(out, "{:e},{:e}", t.re, t.im);
        for c in z {
            let _ = write!(out, ",{:e},{:e}", c.re, c.im);
        }
        for d in chart.divisor() {
            let q = d.poly().eval(z);
            let _ = write!(out, ",{:e},{:e}", q.re, q.im);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::rational::{parse_rational, DivisorComponent, MultiPoly, RationalFn};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn chart() -> Chart {
        Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap()
    }

    fn p(s: &str) -> RationalFn {
        parse_rational(s, &["z1".into(), "z2".into()], &BTreeMap::new()).unwrap()
    }

    fn hopf() -> ChartConnection {
        let mut conn = ChartConnection::flat(chart());
        conn.set_gamma(0, 0, 0, p("1/z1"));
        conn
    }

    fn scalar(lambda: &str) -> ChartConnection {
        let mut conn = ChartConnection::flat(chart());
        let g = p(&format!("({lambda})/z1"));
        conn.set_gamma(0, 0, 0, g.clone());
        conn.set_gamma(1, 0, 1, g);
        conn
    }

    fn state(z: [Complex64; 2], v: [Complex64; 2]) -> GeodesicState {
        GeodesicState {
            z: z.to_vec(),
            v: v.to_vec(),
            t: c(0.0, 0.0),
        }
    }

    #[test]
    fn rhs_examples() {
        let flat = ChartConnection::flat(chart());
        let (_, a) = geodesic_rhs(&flat, &state([c(0.3, 0.0), c(1.0, 2.0)], [c(1.0, 1.0), c(0.0, 1.0)])).unwrap();
        assert!(a.iter().all(|x| x.norm() == 0.0));
        let (_, a) = geodesic_rhs(&hopf(), &state([c(1.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(a, vec![c(-1.0, 0.0), c(0.0, 0.0)]);
        let (_, a) = geodesic_rhs(&scalar("2"), &state([c(1.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(1.0, 0.0)])).unwrap();
        assert_eq!(a, vec![c(-2.0, 0.0), c(-2.0, 0.0)]);
        assert!(geodesic_rhs(&hopf(), &state([c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)])).is_err());
    }

    #[test]
    fn flat_line() {
        let flat = ChartConnection::flat(Chart::standard(2, vec![]).unwrap());
        let s = state([c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 1.0)]);
        let tr = integrate_geodesic(&flat, &s, &[c(0.0, 0.0), c(1.0, 0.0)], &GeodesicOptions::default()).unwrap();
        for st in &tr.samples {
            let tt = st.t;
            assert!((st.z[0] - tt).norm() < 1e-9 && (st.z[1] - c(0.0, 1.0) * tt).norm() < 1e-9);
        }
        let e = tr.endpoint();
        assert!((e.z[0] - c(1.0, 0.0)).norm() < 1e-9);
        assert!((e.z[1] - c(0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn hopf_square_root_branch() {
        let s = state([c(1.0, 0.0), c(0.0, 0.0)], [c(0.5, 0.0), c(0.0, 0.0)]);
        let tr = integrate_geodesic(&hopf(), &s, &[c(0.0, 0.0), c(3.0, 0.0)], &GeodesicOptions::default()).unwrap();
        assert!((tr.endpoint().z[0] - c(2.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn scalar_minus_one_is_exponential() {
        let s = state([c(1.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]);
        let tr = integrate_geodesic(&scalar("-1"), &s, &[c(0.0, 0.0), c(1.0, 0.0)], &GeodesicOptions::default()).unwrap();
        assert!((tr.endpoint().z[0] - c(1f64.exp(), 0.0)).norm() < 1e-8);
    }

    #[test]
    fn running_into_the_divisor_reports_pole_approach() {
        // z1 = √(1 + t) reaches 0 at t = −1
        let s = state([c(1.0, 0.0), c(0.0, 0.0)], [c(0.5, 0.0), c(0.0, 0.0)]);
        let r = integrate_geodesic(&hopf(), &s, &[c(0.0, 0.0), c(-2.0, 0.0)], &GeodesicOptions::default());
        match r {
            Err(Error::PoleApproach { last_state, .. }) => assert!(last_state[0].norm() > 1e-8),
            Err(Error::StepUnderflow { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_velocity_is_rejected() {
        let s = state([c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            integrate_geodesic(&hopf(), &s, &[c(0.0, 0.0), c(1.0, 0.0)], &GeodesicOptions::default()),
            Err(Error::DegenerateGeodesic)
        ));
    }

    #[test]
    fn csv_layout() {
        let s = state([c(1.0, 0.0), c(0.0, 0.0)], [c(0.5, 0.0), c(0.0, 0.0)]);
        let tr = integrate_geodesic(&hopf(), &s, &[c(0.0, 0.0), c(1.0, 0.0)], &GeodesicOptions::default()).unwrap();
        let csv = tr.to_csv(&chart());
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t_re,t_im,z1_re,z1_im,z2_re,z2_im,q1_re,q1_im");
        assert_eq!(lines.count(), tr.samples.len());
    }
}
