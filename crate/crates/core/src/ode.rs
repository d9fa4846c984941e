//! Embedded Dormand–Prince 5(4) integration of holomorphic ODEs along
//! straight segments of complex time.
//!
//! A segment `t₀ → t₁` is parametrized by `τ ∈ [0, 1]`, `t = t₀ + τΔ`, and the
//! real ODE `dy/dτ = Δ·f(t, y)` is integrated with error control in `τ`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct IntegratorOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Smallest admissible step in `τ`.
    pub min_step: f64,
    /// Largest step in `τ`.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            min_step: 1e-14,
            max_step: 0.05,
            max_steps: 500_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerance(self, tol: f64) -> Self {
        Self {
            atol: tol,
            rtol: tol,
            ..self
        }
    }
}

/// An accepted step: complex time, state, and the accepted `τ`-step that led here.
#[derive(Clone, Debug)]
pub struct Sample {
    pub t: Complex64,
    pub y: Vec<Complex64>,
    pub step: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub samples: Vec<Sample>,
    /// Complex-time arclength covered so far.
    pub arclength: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl Trace {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Ratio of the largest to the smallest accepted step.
    pub fn step_ratio(&self) -> f64 {
        if self.min_step > 0.0 {
            self.max_step / self.min_step
        } else {
            1.0
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for (idx, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += *c * k[idx];
        }
        *o = y[idx] + h * acc;
    }
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1`, appending accepted steps
/// to `trace`. `monitor` sees every accepted state and may abort.
pub fn integrate_segment<F, M>(
    mut f: F,
    t0: Complex64,
    t1: Complex64,
    y0: &[Complex64],
    opts: &IntegratorOptions,
    mut monitor: M,
    trace: &mut Trace,
) -> Result<Vec<Complex64>>
where
    F: FnMut(Complex64, &[Complex64], &mut [Complex64]) -> Result<()>,
    M: FnMut(Complex64, &[Complex64]) -> Result<()>,
{
    let delta = t1 - t0;
    let dim = y0.len();
    let span = delta.norm();
    if span == 0.0 {
        return Ok(y0.to_vec());
    }
    let base_arc = trace.arclength;
    let last_good = |y: &[Complex64]| y.to_vec();
    let mut rhs = |tau: f64, y: &[Complex64], out: &mut [Complex64], last: &[Complex64]| -> Result<()> {
        match f(t0 + delta * tau, y, out) {
            Ok(()) => {
                for o in out.iter_mut() {
                    *o *= delta;
                }
                Ok(())
            }
            Err(Error::NearPoleEvaluation { .. }) => Err(Error::PoleApproach {
                parameter: base_arc + tau * span,
                last_state: last_good(last),
            }),
            Err(e) => Err(e),
        }
    };

    let mut y = y0.to_vec();
    let mut k1 = vec![Complex64::new(0.0, 0.0); dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut tmp = k1.clone();
    let mut ynew = k1.clone();
    rhs(0.0, &y, &mut k1, &y)?;

    let mut tau = 0.0f64;
    let mut h = opts.max_step.min(0.01);
    let mut steps = 0usize;
    let mut prev_err = 1e-4f64;
    while tau < 1.0 {
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow {
                parameter: base_arc + tau * span,
                step: h,
            });
        }
        steps += 1;
        let last_step = tau + h >= 1.0;
        if last_step {
            h = 1.0 - tau;
        }
        axpy(&mut tmp, &y, h, &[(A21, &k1)]);
        let stage = (|| -> Result<()> {
            rhs(tau + C2 * h, &tmp, &mut k2, &y)?;
            axpy(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
            rhs(tau + C3 * h, &tmp, &mut k3, &y)?;
            axpy(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            rhs(tau + C4 * h, &tmp, &mut k4, &y)?;
            axpy(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            rhs(tau + C5 * h, &tmp, &mut k5, &y)?;
            axpy(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            rhs(tau + h, &tmp, &mut k6, &y)?;
            axpy(&mut ynew, &y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            rhs(tau + h, &ynew, &mut k7, &y)?;
            Ok(())
        })();
        if let Err(e) = stage {
            // a stage landed too close to a pole: retry with a smaller step, give up below the floor
            if matches!(e, Error::PoleApproach { .. }) && h * 0.25 >= opts.min_step {
                h *= 0.25;
                continue;
            }
            return Err(e);
        }
        let mut err = 0.0f64;
        for idx in 0..dim {
            let e = h * (E1 * k1[idx] + E3 * k3[idx] + E4 * k4[idx] + E5 * k5[idx] + E6 * k6[idx] + E7 * k7[idx]);
            let sc = opts.atol + opts.rtol * y[idx].norm().max(ynew[idx].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / dim.max(1) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            if h < opts.min_step {
                return Err(Error::StepUnderflow {
                    parameter: base_arc + tau * span,
                    step: h,
                });
            }
            continue;
        }
        if err <= 1.0 {
            tau = if last_step { 1.0 } else { tau + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            let t = t0 + delta * tau;
            monitor(t, &y)?;
            trace.min_step = if trace.min_step == 0.0 { h } else { trace.min_step.min(h) };
            trace.max_step = trace.max_step.max(h);
            trace.arclength = base_arc + tau * span;
            trace.samples.push(Sample { t, y: y.clone(), step: h });
            // PI step-size controller
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * prev_err.powf(0.4 / 5.0)).clamp(0.2, 5.0)
            };
            prev_err = err.max(1e-4);
            h = (h * fac).min(opts.max_step);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < opts.min_step {
                return Err(Error::StepUnderflow {
                    parameter: base_arc + tau * span,
                    step: h,
                });
            }
        }
    }
    Ok(y)
}

/// Integrates along a polyline of complex times, starting with a sample at `path[0]`.
pub fn integrate_path<F, M>(
    mut f: F,
    path: &[Complex64],
    y0: &[Complex64],
    opts: &IntegratorOptions,
    mut monitor: M,
) -> Result<(Vec<Complex64>, Trace)>
where
    F: FnMut(Complex64, &[Complex64], &mut [Complex64]) -> Result<()>,
    M: FnMut(Complex64, &[Complex64]) -> Result<()>,
{
    let mut trace = Trace::default();
    let Some(&start) = path.first() else {
        return Ok((y0.to_vec(), trace));
    };
    trace.samples.push(Sample {
        t: start,
        y: y0.to_vec(),
        step: 0.0,
    });
    let mut y = y0.to_vec();
    for w in path.windows(2) {
        y = integrate_segment(&mut f, w[0], w[1], &y, opts, &mut monitor, &mut trace)?;
    }
    Ok((y, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exponential_along_complex_path() {
        let f = |_t: Complex64, y: &[Complex64], out: &mut [Complex64]| {
            out[0] = y[0];
            Ok(())
        };
        let path = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        let (y, trace) = integrate_path(f, &path, &[c(1.0, 0.0)], &IntegratorOptions::default(), |_, _| Ok(())).unwrap();
        assert!((y[0] - c(0.0, 1.0).exp()).norm() < 1e-9);
        assert!(trace.samples.len() > 4);
        assert!((trace.arclength - 3.0).abs() < 1e-12);
    }

    #[test]
    fn loop_around_pole_picks_up_monodromy() {
        // y' = y/(2t) around t = 0: y = √t changes sign
        let f = |t: Complex64, y: &[Complex64], out: &mut [Complex64]| {
            out[0] = y[0] / (2.0 * t);
            Ok(())
        };
        let path: Vec<Complex64> = (0..=64)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 64.0))
            .collect();
        let (y, _) = integrate_path(f, &path, &[c(1.0, 0.0)], &IntegratorOptions::default(), |_, _| Ok(())).unwrap();
        assert!((y[0] + 1.0).norm() < 1e-8);
    }

    #[test]
    fn blow_up_underflows() {
        let f = |_t: Complex64, y: &[Complex64], out: &mut [Complex64]| {
            out[0] = y[0] * y[0];
            Ok(())
        };
        let r = integrate_path(
            f,
            &[c(0.0, 0.0), c(2.0, 0.0)],
            &[c(1.0, 0.0)],
            &IntegratorOptions::default(),
            |_, _| Ok(()),
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }

    #[test]
    fn monitor_aborts() {
        let f = |_t: Complex64, _y: &[Complex64], out: &mut [Complex64]| {
            out[0] = c(1.0, 0.0);
            Ok(())
        };
        let r = integrate_path(
            f,
            &[c(0.0, 0.0), c(1.0, 0.0)],
            &[c(0.0, 0.0)],
            &IntegratorOptions::default(),
            |t, y| {
                if y[0].re > 0.5 {
                    Err(Error::PoleApproach {
                        parameter: t.re,
                        last_state: y.to_vec(),
                    })
                } else {
                    Ok(())
                }
            },
        );
        assert!(matches!(r, Err(Error::PoleApproach { .. })));
    }
}
