//! `ω₀`-constant vector fields on `U × GLₙ` and their integral curves.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ChristoffelEval;
use crate::connection::{is_branched, ChartConnection, SubmoduleFrame};
use crate::error::{Error, Result};
use crate::ode::{integrate_path, IntegratorOptions};
use crate::rational::{order_along, Chart, CompiledMatrix, GaussianRational, MultiPoly, RatMatrix, RationalFn, DEFAULT_EVAL_FLOOR};

/// Frames with `|det g|` below this are treated as degenerate.
pub const FRAME_DET_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameBundlePoint {
    pub z: Vec<Complex64>,
    pub g: DMatrix<Complex64>,
}

impl FrameBundlePoint {
    pub fn identity_at(z: Vec<Complex64>) -> Self {
        let n = z.len();
        Self {
            z,
            g: DMatrix::identity(n, n),
        }
    }

    fn to_state(&self, t: Complex64) -> Vec<Complex64> {
        let n = self.z.len();
        let mut y = self.z.clone();
        for r in 0..n {
            for c in 0..n {
                y.push(self.g[(r, c)]);
            }
        }
        y.push(t);
        y
    }

    fn from_state(y: &[Complex64], n: usize) -> Self {
        Self {
            z: y[..n].to_vec(),
            g: DMatrix::from_fn(n, n, |r, c| y[n + r * n + c]),
        }
    }
}

/// The field `m·(Q g A, −Ã(ż) g)` with its clearing factor `m`.
#[derive(Clone, Debug)]
pub struct DistinguishedField {
    n: usize,
    chart: Chart,
    direction: Vec<GaussianRational>,
    clearing: RationalFn,
    cleared_frame: RatMatrix,
    frame_form: Vec<RatMatrix>,
    a: Vec<Complex64>,
    m_c: CompiledMatrix,
    mq_c: CompiledMatrix,
    form_c: Vec<CompiledMatrix>,
}

/// Smallest divisor monomial `m` with `m·Q` holomorphic, scaled so that the
/// first nonzero entry of `m·Q` has leading coefficient one.
fn clearing_factor(chart: &Chart, q: &RatMatrix) -> RationalFn {
    let n = chart.nvars();
    let mut m = MultiPoly::one(n);
    for d in chart.divisor() {
        let worst = q.entries().filter_map(|(_, _, e)| order_along(e, d).finite()).min().unwrap_or(0);
        if worst < 0 {
            m = m.mul(&d.poly().pow((-worst) as u32));
        }
    }
    let m = RationalFn::from_poly(m);
    let first = q.entries().map(|(_, _, e)| e.mul(&m)).find(|e| !e.is_zero());
    match first {
        Some(e) => {
            let c = &e.num().leading_coeff() / &e.den().leading_coeff();
            m.scale(&c.inv())
        }
        None => m,
    }
}

pub fn distinguished_field(conn: &ChartConnection, frame: &SubmoduleFrame, direction: &[GaussianRational]) -> Result<DistinguishedField> {
    let n = conn.nvars();
    if direction.len() != n {
        return Err(Error::Validation(format!("direction must have {n} components")));
    }
    if direction.iter().all(|c| c.is_zero()) {
        return Err(Error::Validation("direction must be nonzero".into()));
    }
    let report = is_branched(conn, frame);
    if !report.branched {
        return Err(Error::NotBranched {
            reason: report.offending.join("; "),
        });
    }
    let clearing = clearing_factor(conn.chart(), frame.q());
    let cleared_frame = frame.q().scale(&clearing);
    let frame_form = report.gauged.matrices().to_vec();
    Ok(DistinguishedField {
        n,
        chart: conn.chart().clone(),
        direction: direction.to_vec(),
        m_c: CompiledMatrix::from_vector(std::slice::from_ref(&clearing), n),
        mq_c: CompiledMatrix::new(&cleared_frame),
        form_c: frame_form.iter().map(CompiledMatrix::new).collect(),
        a: direction.iter().map(|c| c.to_c64()).collect(),
        clearing,
        cleared_frame,
        frame_form,
    })
}

impl DistinguishedField {
    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn direction(&self) -> &[GaussianRational] {
        &self.direction
    }

    /// The clearing factor `m`, i.e. `h_γ` along a curve.
    pub fn clearing(&self) -> &RationalFn {
        &self.clearing
    }

    pub fn cleared_frame(&self) -> &RatMatrix {
        &self.cleared_frame
    }

    pub fn frame_form(&self) -> &[RatMatrix] {
        &self.frame_form
    }

    /// Base components `ż = m·Q·g·A` over the variables `(z, g)`, with `g`
    /// stored row-major after `z`.
    pub fn symbolic_velocity(&self) -> Vec<RationalFn> {
        let n = self.n;
        let nv = n + n * n;
        let ga: Vec<RationalFn> = (0..n)
            .map(|r| {
                (0..n).fold(RationalFn::zero(nv), |acc, c| {
                    if self.direction[c].is_zero() {
                        acc
                    } else {
                        acc.add(&RationalFn::var(nv, n + r * n + c).scale(&self.direction[c]))
                    }
                })
            })
            .collect();
        (0..n)
            .map(|k| {
                (0..n).fold(RationalFn::zero(nv), |acc, r| {
                    let e = self.cleared_frame.get(k, r);
                    if e.is_zero() {
                        acc
                    } else {
                        acc.add(&e.extend_vars(nv).mul(&ga[r]))
                    }
                })
            })
            .collect()
    }

    pub fn h_factor(&self, z: &[Complex64]) -> Result<Complex64> {
        Ok(self.m_c.eval(z, DEFAULT_EVAL_FLOOR)?[(0, 0)])
    }

    /// `ż` at `(z, g)`.
    pub fn velocity(&self, z: &[Complex64], g: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
        let mq = self.mq_c.eval(z, DEFAULT_EVAL_FLOOR)?;
        let a = nalgebra::DVector::from_column_slice(&self.a);
        let v = mq * (g * a);
        Ok(v.iter().copied().collect())
    }

    fn rhs(&self, y: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let n = self.n;
        let z = &y[..n];
        let g = DMatrix::from_fn(n, n, |r, c| y[n + r * n + c]);
        let zdot = self.velocity(z, &g)?;
        let mut form = DMatrix::zeros(n, n);
        for (i, f) in self.form_c.iter().enumerate() {
            f.accumulate(z, zdot[i], DEFAULT_EVAL_FLOOR, &mut form)?;
        }
        let gdot = -(form * &g);
        out[..n].copy_from_slice(&zdot);
        for r in 0..n {
            for c in 0..n {
                out[n + r * n + c] = gdot[(r, c)];
            }
        }
        out[n + n * n] = self.h_factor(z)?;
        Ok(())
    }

    /// Flows a raw state from `s0` to `s1`.
    fn flow(&self, y: &[Complex64], s0: f64, s1: f64, opts: &IntegratorOptions) -> Result<Vec<Complex64>> {
        let path = [Complex64::new(s0, 0.0), Complex64::new(s1, 0.0)];
        let (y, _) = integrate_path(|_, y, out| self.rhs(y, out), &path, y, opts, |_, _| Ok(()))?;
        Ok(y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CurveOptions {
    /// Final value of the curve parameter `s` (may be negative).
    pub s_end: f64,
    pub integrator: IntegratorOptions,
    /// `|q|` below which a refined minimum counts as a crossing.
    pub crossing_tol: f64,
    /// `|dq/ds|` above which a crossing is transverse.
    pub transversality_tol: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            s_end: 2.0,
            integrator: IntegratorOptions::default(),
            crossing_tol: 1e-9,
            transversality_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Crossing {
    pub component: usize,
    pub parameter: f64,
    pub point: Vec<Complex64>,
    /// `d/ds q(z(s))` at the crossing.
    pub derivative: Complex64,
    pub transverse: bool,
}

#[derive(Clone, Debug)]
pub struct CurveSample {
    pub s: f64,
    pub point: FrameBundlePoint,
    /// Affine time `t(s) = ∫ m ds` of the projected geodesic.
    pub t: Complex64,
    pub h: Complex64,
}

#[derive(Clone, Debug)]
pub struct DistinguishedCurveResult {
    pub samples: Vec<CurveSample>,
    pub crossings: Vec<Crossing>,
    /// Components containing the whole (moving) curve.
    pub contained_in: Vec<usize>,
    pub step_ratio: f64,
}

impl DistinguishedCurveResult {
    pub fn crossing(&self) -> Option<&Crossing> {
        self.crossings.first()
    }

    pub fn h_factor(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.samples.iter().map(|s| s.h)
    }

    pub fn to_csv(&self, chart: &Chart) -> String {
        super::trace_csv(chart, self.samples.iter().map(|s| (Complex64::new(s.s, 0.0), s.point.z.as_slice())))
    }
}

pub fn integrate_distinguished_curve(
    conn: &ChartConnection,
    frame: &SubmoduleFrame,
    direction: &[GaussianRational],
    start: &FrameBundlePoint,
    opts: &CurveOptions,
) -> Result<DistinguishedCurveResult> {
    let field = distinguished_field(conn, frame, direction)?;
    field.integrate(start, opts)
}

impl DistinguishedField {
    pub fn integrate(&self, start: &FrameBundlePoint, opts: &CurveOptions) -> Result<DistinguishedCurveResult> {
        let n = self.n;
        let det0 = start.g.determinant().norm();
        if det0 < FRAME_DET_FLOOR {
            return Err(Error::SingularFrame { parameter: 0.0, det: det0 });
        }
        let y0 = start.to_state(Complex64::new(0.0, 0.0));
        let path = [Complex64::new(0.0, 0.0), Complex64::new(opts.s_end, 0.0)];
        let monitor = |t: Complex64, y: &[Complex64]| -> Result<()> {
            let det = DMatrix::from_fn(n, n, |r, c| y[n + r * n + c]).determinant().norm();
            if det < FRAME_DET_FLOOR {
                return Err(Error::SingularFrame { parameter: t.re, det });
            }
            Ok(())
        };
        let (_, trace) = integrate_path(|_, y, out| self.rhs(y, out), &path, &y0, &opts.integrator, monitor)?;
        let mut samples = Vec::with_capacity(trace.samples.len());
        let mut states = Vec::with_capacity(trace.samples.len());
        for s in &trace.samples {
            let point = FrameBundlePoint::from_state(&s.y, n);
            samples.push(CurveSample {
                s: s.t.re,
                h: self.h_factor(&point.z)?,
                t: s.y[n + n * n],
                point,
            });
            states.push(s.y.clone());
        }
        let mut crossings = Vec::new();
        let mut contained_in = Vec::new();
        for (a, comp) in self.chart.divisor().iter().enumerate() {
            let q = comp.poly();
            let grad: Vec<MultiPoly> = (0..n).map(|k| q.partial(k)).collect();
            let qs: Vec<f64> = samples.iter().map(|s| q.eval(&s.point.z).norm()).collect();
            let derivative = |y: &[Complex64]| -> Result<Complex64> {
                let p = FrameBundlePoint::from_state(y, n);
                let v = self.velocity(&p.z, &p.g)?;
                Ok(grad.iter().zip(&v).map(|(g, vk)| g.eval(&p.z) * vk).sum())
            };
            if qs.iter().all(|&x| x < opts.crossing_tol) {
                let moved = samples
                    .iter()
                    .map(|s| s.point.z.iter().zip(&start.z).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                if moved > 1e-12 {
                    contained_in.push(a);
                } else {
                    let d = derivative(&y0)?;
                    crossings.push(Crossing {
                        component: a,
                        parameter: 0.0,
                        point: start.z.clone(),
                        derivative: d,
                        transverse: d.norm() > opts.transversality_tol,
                    });
                }
                continue;
            }
            let len = qs.len();
            let mut last_param = f64::NAN;
            for k in 0..len {
                let left = if k > 0 { qs[k - 1] } else { f64::INFINITY };
                let right = if k + 1 < len { qs[k + 1] } else { f64::INFINITY };
                if !(qs[k] <= left && qs[k] <= right) {
                    continue;
                }
                let lo = k.saturating_sub(1);
                let hi = (k + 1).min(len - 1);
                let (s_lo, s_hi) = (samples[lo].s, samples[hi].s);
                let base = &states[lo];
                let eval_at = |s: f64| -> Result<(f64, Vec<Complex64>)> {
                    let y = self.flow(base, s_lo, s, &opts.integrator)?;
                    Ok((q.eval(&y[..n]).norm(), y))
                };
                let (s_star, y_star) = golden_min(eval_at, s_lo, s_hi, 1e-12)?;
                let qm = q.eval(&y_star[..n]).norm();
                if qm >= opts.crossing_tol || (s_star - last_param).abs() < 1e-9 {
                    continue;
                }
                last_param = s_star;
                let d = derivative(&y_star)?;
                crossings.push(Crossing {
                    component: a,
                    parameter: s_star,
                    point: y_star[..n].to_vec(),
                    derivative: d,
                    transverse: d.norm() > opts.transversality_tol,
                });
            }
        }
        crossings.sort_by(|x, y| x.parameter.abs().total_cmp(&y.parameter.abs()).then(x.component.cmp(&y.component)));
        Ok(DistinguishedCurveResult {
            samples,
            crossings,
            contained_in,
            step_ratio: trace.step_ratio(),
        })
    }
}

/// Golden-section minimization of a unimodal modulus on `[a, b]`.
fn golden_min(mut f: impl FnMut(f64) -> Result<(f64, Vec<Complex64>)>, a: f64, b: f64, tol: f64) -> Result<(f64, Vec<Complex64>)> {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1.0 <= f2.0 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let mut best = if f1.0 <= f2.0 { (x1, f1) } else { (x2, f2) };
    for end in [a, b] {
        let fe = f(end)?;
        if fe.0 < best.1 .0 {
            best = (end, fe);
        }
    }
    Ok((best.0, best.1 .1))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Residual of `d/ds(γ'/m) + Γ(γ', γ'/m) = 0` along a projected distinguished curve.
///
/// The derivative is a twice Richardson-extrapolated central difference from
/// re-integrated neighbours; samples within `margin` of the divisor are skipped.
pub fn reparametrization_residual(
    conn: &ChartConnection,
    field: &DistinguishedField,
    curve: &DistinguishedCurveResult,
    margin: f64,
) -> Result<ResidualReport> {
    let n = field.n;
    let gamma = ChristoffelEval::new(conn);
    let tight = IntegratorOptions::default().with_tolerance(1e-13);
    let mut report = ResidualReport {
        max_residual: 0.0,
        evaluated: 0,
        skipped: 0,
    };
    let v_of = |y: &[Complex64]| -> Result<Vec<Complex64>> {
        let p = FrameBundlePoint::from_state(y, n);
        let zd = field.velocity(&p.z, &p.g)?;
        let m = field.h_factor(&p.z)?;
        Ok(zd.iter().map(|x| x / m).collect())
    };
    for s in &curve.samples {
        let dist = conn.chart().divisor_distance(&s.point.z);
        let zdot = field.velocity(&s.point.z, &s.point.g)?;
        let speed = zdot.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if dist < margin || s.h.norm() < 1e-12 || speed == 0.0 {
            report.skipped += 1;
            continue;
        }
        let y = s.point.to_state(s.t);
        let delta = 1e-2 * (dist / speed).min(1.0);
        let diff = |d: f64| -> Result<Vec<Complex64>> {
            let plus = v_of(&field.flow(&y, s.s, s.s + d, &tight)?)?;
            let minus = v_of(&field.flow(&y, s.s, s.s - d, &tight)?)?;
            Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * d)).collect())
        };
        let d1 = diff(delta)?;
        let d2 = diff(delta / 2.0)?;
        let d4 = diff(delta / 4.0)?;
        let v = v_of(&y)?;
        let g = gamma.contract(&s.point.z, &zdot, &v)?;
        let r = (0..n)
            .map(|k| {
                let coarse = (4.0 * d2[k] - d1[k]) / 3.0;
                let fine = (4.0 * d4[k] - d2[k]) / 3.0;
                ((16.0 * fine - coarse) / 15.0 + g[k]).norm()
            })
            .fold(0.0, f64::max);
        report.max_residual = report.max_residual.max(r);
        report.evaluated += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::connection::GaugeMatrix;
    use crate::geodesic::{integrate_geodesic, GeodesicOptions, GeodesicState};
    use crate::rational::{parse_rational, DivisorComponent};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn names() -> Vec<String> {
        vec!["z1".into(), "z2".into()]
    }

    fn p(s: &str) -> RationalFn {
        parse_rational(s, &names(), &BTreeMap::new()).unwrap()
    }

    fn chart() -> Chart {
        Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap()
    }

    fn hopf() -> (ChartConnection, SubmoduleFrame) {
        let mut conn = ChartConnection::flat(chart());
        conn.set_gamma(0, 0, 0, p("1/z1"));
        let g = GaugeMatrix::diagonal(vec![p("1/(2*z1)"), p("1")]).unwrap();
        let frame = SubmoduleFrame::new(g, &chart()).unwrap();
        (conn, frame)
    }

    fn e(k: usize) -> Vec<GaussianRational> {
        (0..2)
            .map(|i| {
                if i == k {
                    GaussianRational::one()
                } else {
                    GaussianRational::zero()
                }
            })
            .collect()
    }

    #[test]
    fn clearing_examples() {
        let flat = ChartConnection::flat(chart());
        let f = distinguished_field(&flat, &SubmoduleFrame::identity(&chart()), &e(0)).unwrap();
        assert!(f.clearing().is_one());

        let (conn, frame) = hopf();
        let f = distinguished_field(&conn, &frame, &e(0)).unwrap();
        assert_eq!(f.clearing(), &p("2*z1"));
        let nv = 6;
        let v = f.symbolic_velocity();
        // (z1, z2, g11, g12, g21, g22)
        assert_eq!(v[0], RationalFn::var(nv, 2));
        assert_eq!(
            v[1],
            RationalFn::var(nv, 0)
                .mul(&RationalFn::var(nv, 4))
                .scale(&GaussianRational::from_int(2))
        );
        assert!(f.frame_form().iter().all(|m| m.is_zero()));
    }

    #[test]
    fn not_branched_is_gated() {
        let mut conn = ChartConnection::flat(chart());
        conn.set_gamma(0, 0, 0, p("1/(2*z1)"));
        conn.set_gamma(1, 0, 1, p("1/(2*z1)"));
        let r = distinguished_field(&conn, &SubmoduleFrame::identity(&chart()), &e(0));
        assert!(matches!(r, Err(Error::NotBranched { .. })));
    }

    #[test]
    fn hopf_crosses_transversally() {
        let (conn, frame) = hopf();
        let start = FrameBundlePoint::identity_at(vec![c(-1.0, 0.0), c(0.0, 0.0)]);
        let r = integrate_distinguished_curve(&conn, &frame, &e(0), &start, &CurveOptions::default()).unwrap();
        assert_eq!(r.crossings.len(), 1);
        let x = r.crossing().unwrap();
        assert!(x.transverse);
        assert!((x.parameter - 1.0).abs() < 1e-9);
        assert!(r.samples.iter().all(|s| s.point.z[1].norm() < 1e-14));
        // h = 2 z1 along z1 = s − 1
        for s in &r.samples {
            assert!((s.h - 2.0 * s.point.z[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_motion_inside_divisor() {
        let flat = ChartConnection::flat(chart());
        let start = FrameBundlePoint::identity_at(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        let r = integrate_distinguished_curve(&flat, &SubmoduleFrame::identity(&chart()), &e(1), &start, &CurveOptions::default()).unwrap();
        assert!(r.crossings.is_empty());
        assert_eq!(r.contained_in, vec![0]);
    }

    #[test]
    fn hopf_e2_from_divisor_is_tangent() {
        let (conn, frame) = hopf();
        let start = FrameBundlePoint::identity_at(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        let r = integrate_distinguished_curve(&conn, &frame, &e(1), &start, &CurveOptions::default()).unwrap();
        let x = r.crossing().unwrap();
        assert!(!x.transverse);
        assert_eq!(x.parameter, 0.0);
    }

    #[test]
    fn reparametrized_geodesic_residual_is_small() {
        let (conn, frame) = hopf();
        let field = distinguished_field(&conn, &frame, &e(0)).unwrap();
        let mut g = DMatrix::identity(2, 2);
        g[(1, 0)] = c(0.5, 0.25);
        let start = FrameBundlePoint {
            z: vec![c(-1.0, 0.2), c(0.3, 0.0)],
            g,
        };
        let r = field.integrate(&start, &CurveOptions::default()).unwrap();
        let rep = reparametrization_residual(&conn, &field, &r, 1e-2).unwrap();
        assert!(rep.evaluated > 5);
        assert!(rep.max_residual < 1e-6, "{rep:?}");
    }

    #[test]
    fn projection_matches_geodesic_in_affine_time() {
        let (conn, frame) = hopf();
        let field = distinguished_field(&conn, &frame, &e(0)).unwrap();
        let start = FrameBundlePoint::identity_at(vec![c(1.0, 0.5), c(0.2, 0.0)]);
        let opts = CurveOptions {
            s_end: 0.5,
            ..CurveOptions::default()
        };
        let r = field.integrate(&start, &opts).unwrap();
        let v0 = field.velocity(&start.z, &start.g).unwrap();
        let m0 = field.h_factor(&start.z).unwrap();
        let init = GeodesicState {
            z: start.z.clone(),
            v: v0.iter().map(|x| x / m0).collect(),
            t: c(0.0, 0.0),
        };
        let path: Vec<Complex64> = r.samples.iter().map(|s| s.t).collect();
        let geo = integrate_geodesic(&conn, &init, &path, &GeodesicOptions::default()).unwrap();
        let end = &r.samples.last().unwrap().point.z;
        for (a, b) in geo.endpoint().z.iter().zip(end) {
            assert!((a - b).norm() < 1e-7);
        }
    }
}
