//! Local monodromy of meromorphic linear systems around divisor components,
//! the residue criterion, the extension property and quotient monodromy.

use num_complex::Complex64;
use serde::Serialize;

use crate::connection::LinearMeromorphicSystem;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::path::{CompiledSystem, Path, PathSegment, TransportOptions};
use crate::rational::{order_along, ComponentLabel, DivisorComponent, MultiPoly, RatMatrix, RationalFn};

/// Smallest divisor modulus a loop may reach.
pub const LOOP_MARGIN: f64 = 1e-6;
const LOOP_SAMPLES: usize = 512;

/// A closed path in the divisor complement.
#[derive(Clone, Debug, Serialize)]
pub struct Loop {
    pub basepoint: Vec<Complex64>,
    pub path: Path,
    /// Component encircled, for loops built by [`loop_around`].
    pub component: Option<usize>,
}

impl Loop {
    pub fn new(path: Path, chart: &crate::rational::Chart) -> Result<Self> {
        let basepoint = path.start().ok_or_else(|| Error::Validation("empty loop".into()))?;
        if !path.is_closed() {
            return Err(Error::Validation("loop is not closed".into()));
        }
        let d = path.min_divisor_distance(chart, LOOP_SAMPLES);
        if d < LOOP_MARGIN {
            return Err(Error::DegenerateTransversal(format!("loop comes within {d:.3e} of the divisor")));
        }
        Ok(Self {
            basepoint,
            path,
            component: None,
        })
    }

    /// First `self`, then `o`.
    pub fn then(&self, o: &Loop) -> Result<Loop> {
        Ok(Loop {
            basepoint: self.basepoint.clone(),
            path: self.path.concat(&o.path)?,
            component: None,
        })
    }

    pub fn inverse(&self) -> Loop {
        Loop {
            basepoint: self.basepoint.clone(),
            path: self.path.reversed(),
            component: self.component,
        }
    }
}

fn winding_number(q: &MultiPoly, path: &Path) -> i64 {
    let mut total = 0.0;
    for seg in path.segments() {
        let mut prev = q.eval(&seg.start());
        for k in 1..=4 * LOOP_SAMPLES {
            let cur = q.eval(&seg.point(k as f64 / (4 * LOOP_SAMPLES) as f64));
            total += (cur / prev).arg();
            prev = cur;
        }
    }
    (total / std::f64::consts::TAU).round() as i64
}

/// Segment to the transverse line, a positive circle of `radius` around the
/// component inside that line, and the segment back.
pub fn loop_around(chart: &crate::rational::Chart, component: usize, basepoint: &[Complex64], radius: f64) -> Result<Loop> {
    let comp = chart
        .divisor()
        .get(component)
        .ok_or_else(|| Error::Validation(format!("no divisor component {}", component + 1)))?;
    let g = comp.graph_form().ok_or_else(|| Error::UnsupportedComponent {
        reason: "component is not a graph over a coordinate".into(),
    })?;
    if chart.divisor_distance(basepoint) < LOOP_MARGIN {
        return Err(Error::DegenerateTransversal("basepoint lies on the divisor".into()));
    }
    let center = g.solve().eval(basepoint);
    let offset = basepoint[g.var] - center;
    let dist = offset.norm();
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::DegenerateTransversal("radius must be positive".into()));
    }
    let angle = offset.arg();
    let mut on_circle = basepoint.to_vec();
    on_circle[g.var] = center + Complex64::from_polar(radius, angle);
    let arc = PathSegment::Arc {
        base: on_circle.clone(),
        var: g.var,
        center,
        radius,
        start_angle: angle,
        sweep: std::f64::consts::TAU,
    };
    let mut segments = Vec::new();
    let radial = (dist - radius).abs() > 1e-15;
    if radial {
        segments.push(PathSegment::Line {
            from: basepoint.to_vec(),
            to: on_circle.clone(),
        });
    }
    segments.push(arc.clone());
    if radial {
        segments.push(PathSegment::Line {
            from: on_circle,
            to: basepoint.to_vec(),
        });
    }
    let path = Path::new(segments)?;
    let circle = Path::new(vec![arc])?;
    for (idx, d) in chart.divisor().iter().enumerate() {
        let expect = i64::from(idx == component);
        if winding_number(d.poly(), &circle) != expect {
            return Err(Error::DegenerateTransversal(format!(
                "circle of radius {radius} does not isolate component {}",
                component + 1
            )));
        }
    }
    let mut lp = Loop::new(path, chart)?;
    lp.component = Some(component);
    Ok(lp)
}

fn complex_pairs<S: serde::Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect();
    rows.serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonodromyMatrix {
    #[serde(serialize_with = "complex_pairs")]
    pub matrix: CMatrix,
    #[serde(skip)]
    pub loop_: Loop,
    /// Ratio of largest to smallest accepted integration step.
    pub condition: f64,
    pub det_modulus: f64,
}

impl MonodromyMatrix {
    pub fn distance_from_identity(&self) -> f64 {
        let n = self.matrix.nrows();
        (&self.matrix - CMatrix::identity(n, n)).norm()
    }
}

/// Transports the identity frame once around `lp`.
pub fn monodromy(system: &LinearMeromorphicSystem, lp: &Loop) -> Result<MonodromyMatrix> {
    monodromy_with(&CompiledSystem::new(system), lp, &TransportOptions::default())
}

pub fn monodromy_with(system: &CompiledSystem, lp: &Loop, opts: &TransportOptions) -> Result<MonodromyMatrix> {
    let r = system.rank();
    let t = system.transport(&lp.path, &CMatrix::identity(r, r), opts)?;
    let det_modulus = t.end.determinant().norm();
    if det_modulus < 1e-8 {
        return Err(Error::Validation(format!(
            "monodromy determinant {det_modulus:.3e} is not invertible"
        )));
    }
    Ok(MonodromyMatrix {
        matrix: t.end,
        loop_: lp.clone(),
        condition: t.step_ratio,
        det_modulus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidueOptions {
    pub integer_tol: f64,
    /// Singular-value threshold for eigenspace dimensions.
    pub eigenspace_tol: f64,
}

impl Default for ResidueOptions {
    fn default() -> Self {
        Self {
            integer_tol: 1e-8,
            eigenspace_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidueData {
    pub component: ComponentLabel,
    /// Coefficient of `dq/q` restricted to the component, in straightened coordinates.
    #[serde(skip)]
    pub residue: RatMatrix,
    #[serde(serialize_with = "complex_pairs")]
    pub sample: CMatrix,
    #[serde(serialize_with = "crate::monodromy::complex_list")]
    pub sample_point: Vec<Complex64>,
    #[serde(serialize_with = "crate::monodromy::complex_list")]
    pub eigenvalues: Vec<Complex64>,
    pub diagonalizable: bool,
}

pub(crate) fn complex_list<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ResidueVerdict {
    Trivial { data: ResidueData },
    Nontrivial { data: ResidueData },
    Inconclusive { reason: String },
}

impl ResidueVerdict {
    pub fn predicted_trivial(&self) -> Option<bool> {
        match self {
            ResidueVerdict::Trivial { .. } => Some(true),
            ResidueVerdict::Nontrivial { .. } => Some(false),
            ResidueVerdict::Inconclusive { .. } => None,
        }
    }

    pub fn data(&self) -> Option<&ResidueData> {
        match self {
            ResidueVerdict::Trivial { data } | ResidueVerdict::Nontrivial { data } => Some(data),
            ResidueVerdict::Inconclusive { .. } => None,
        }
    }
}

/// Eigenvalues from the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let (_, t) = m.clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Whether every eigenvalue cluster has geometric multiplicity equal to its size.
pub fn is_diagonalizable(m: &CMatrix, eigs: &[Complex64], tol: f64) -> bool {
    let n = m.nrows();
    let scale = m.norm().max(1.0);
    let mut seen = vec![false; eigs.len()];
    for i in 0..eigs.len() {
        if seen[i] {
            continue;
        }
        let cluster: Vec<usize> = (0..eigs.len()).filter(|&j| (eigs[j] - eigs[i]).norm() < 1e-6 * scale).collect();
        for &j in &cluster {
            seen[j] = true;
        }
        let shifted = m - CMatrix::identity(n, n) * eigs[i];
        if linalg::null_space(&shifted, tol * scale).len() < cluster.len() {
            return false;
        }
    }
    true
}

fn straightened_component(system: &LinearMeromorphicSystem, component: usize) -> Result<(LinearMeromorphicSystem, DivisorComponent)> {
    let comp = &system.chart().divisor()[component];
    let s = comp.straightening()?;
    let st = system.straighten(&s);
    let y0 = DivisorComponent::new(MultiPoly::var(st.nvars(), 0), comp.multiplicity())?;
    Ok((st, y0))
}

/// Predicts trivial local monodromy from the residue along a first-order pole.
pub fn residue_criterion(system: &LinearMeromorphicSystem, component: usize, opts: &ResidueOptions) -> Result<ResidueVerdict> {
    let label = system.chart().component_label(component);
    let (st, y0) = straightened_component(system, component)?;
    let n = st.nvars();
    let r = st.rank();
    for (i, a) in st.matrices().iter().enumerate() {
        let bound = if i == 0 { -1 } else { 0 };
        for (_, _, v) in a.entries() {
            if !order_along(v, &y0).is_at_least(bound) {
                return Ok(ResidueVerdict::Inconclusive {
                    reason: format!("pole of order greater than {} in the dz{} coefficient", -bound, i + 1),
                });
            }
        }
    }
    let mut restrict: Vec<RationalFn> = (0..n).map(|k| RationalFn::var(n, k)).collect();
    restrict[0] = RationalFn::zero(n);
    let y = RationalFn::var(n, 0);
    let residue = RatMatrix::from_fn(r, r, n, |a, b| st.matrix(0).get(a, b).mul(&y).compose(&restrict));
    let sample_point = [0.5, -0.375, 0.625, 0.3125, -0.5625, 0.4375];
    let mut point = vec![Complex64::new(0.0, 0.0); n];
    let mut sample = None;
    for shift in 0..8 {
        for k in 1..n {
            point[k] = Complex64::new(sample_point[(k + shift) % sample_point.len()], 0.125 * shift as f64);
        }
        if let Ok(m) = residue.eval(&point) {
            sample = Some(m);
            break;
        }
    }
    let sample = sample.ok_or_else(|| Error::UnsupportedComponent {
        reason: "residue has poles at every sample point".into(),
    })?;
    let eigs = eigenvalues(&sample);
    let diagonalizable = is_diagonalizable(&sample, &eigs, opts.eigenspace_tol);
    let integral = eigs
        .iter()
        .all(|e| (e - Complex64::new(e.re.round(), 0.0)).norm() < opts.integer_tol);
    let data = ResidueData {
        component: label,
        residue,
        sample,
        sample_point: point,
        eigenvalues: eigs,
        diagonalizable,
    };
    Ok(if integral && diagonalizable {
        ResidueVerdict::Trivial { data }
    } else {
        ResidueVerdict::Nontrivial { data }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtensionOptions {
    pub radius: f64,
    pub identity_tol: f64,
    pub invariance_tol: f64,
    pub transport: TransportOptions,
    pub residue: ResidueOptions,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        Self {
            radius: 0.5,
            identity_tol: 1e-6,
            invariance_tol: 1e-6,
            transport: TransportOptions::default(),
            residue: ResidueOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentMonodromy {
    pub component: ComponentLabel,
    pub radius: f64,
    pub monodromy: MonodromyMatrix,
    /// `‖M − I‖` on the restriction.
    pub deviation: f64,
    pub trivial_local_monodromy: bool,
    pub residue: Option<bool>,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionVerdict {
    pub components: Vec<ComponentMonodromy>,
    pub extends: bool,
}

impl ExtensionVerdict {
    pub fn evidence(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.deviation).collect()
    }
}

/// Loop around `component`, halving the radius until it isolates the component.
pub fn isolating_loop(chart: &crate::rational::Chart, component: usize, basepoint: &[Complex64], radius: f64) -> Result<(Loop, f64)> {
    let mut r = radius;
    let mut last = None;
    for _ in 0..12 {
        match loop_around(chart, component, basepoint, r) {
            Ok(lp) => return Ok((lp, r)),
            Err(e @ Error::DegenerateTransversal(_)) => {
                last = Some(e);
                r /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Orthonormal basis of `span` and the restriction of `m` to it, checking invariance.
fn restrict(m: &CMatrix, span: &[CVector], tol: f64) -> Result<CMatrix> {
    let q = linalg::orthonormalize(span, 1e-12);
    let b = CMatrix::from_fn(m.nrows(), q.len(), |r, c| q[c][r]);
    let image = m * &b;
    let inside = &b * (b.adjoint() * &image);
    let defect = (&image - inside).norm() / image.norm().max(1.0);
    if defect > tol {
        return Err(Error::NotInvariant { defect });
    }
    Ok(b.adjoint() * image)
}

/// Trivial local monodromy around every component, optionally restricted to an
/// invariant subspace of the fibre at `basepoint`.
pub fn extension_property(
    system: &LinearMeromorphicSystem,
    basepoint: &[Complex64],
    subspace: Option<&[CVector]>,
    opts: &ExtensionOptions,
) -> Result<ExtensionVerdict> {
    let compiled = CompiledSystem::new(system);
    let chart = system.chart();
    let mut components = Vec::new();
    for idx in 0..chart.divisor().len() {
        let (lp, radius) = isolating_loop(chart, idx, basepoint, opts.radius)?;
        let m = monodromy_with(&compiled, &lp, &opts.transport)?;
        let restricted = match subspace {
            Some(span) => restrict(&m.matrix, span, opts.invariance_tol)?,
            None => m.matrix.clone(),
        };
        let d = restricted.nrows();
        let deviation = (&restricted - CMatrix::identity(d, d)).norm();
        let trivial = deviation < opts.identity_tol;
        let residue = if subspace.is_none() {
            residue_criterion(system, idx, &opts.residue)
                .ok()
                .and_then(|v| v.predicted_trivial())
        } else {
            None
        };
        let diagnostic = match residue {
            Some(p) if p != trivial => Some(format!(
                "residue criterion predicts {} local monodromy but transport gives ‖M − I‖ = {deviation:.3e}",
                if p { "trivial" } else { "nontrivial" }
            )),
            _ => None,
        };
        components.push(ComponentMonodromy {
            component: chart.component_label(idx),
            radius,
            monodromy: m,
            deviation,
            trivial_local_monodromy: trivial,
            residue,
            diagnostic,
        });
    }
    let extends = components.iter().all(|c| c.trivial_local_monodromy);
    Ok(ExtensionVerdict { components, extends })
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientMonodromy {
    /// Induced map on `V/⟨A⟩` in an orthonormal complement basis.
    #[serde(serialize_with = "complex_pairs")]
    pub matrix: CMatrix,
    /// `A ↦ M·A` leaves the line up to this residual.
    pub line_defect: f64,
    pub deviation: f64,
    pub trivial: bool,
}

/// Monodromy on `V/⟨A⟩`, where `V` is `subspace` (default: the whole fibre).
pub fn quotient_monodromy(
    system: &LinearMeromorphicSystem,
    a: &CVector,
    lp: &Loop,
    subspace: Option<&[CVector]>,
    tol: f64,
) -> Result<QuotientMonodromy> {
    let r = system.rank();
    if a.len() != r {
        return Err(Error::Validation(format!("direction has length {}, system rank is {r}", a.len())));
    }
    let an = a.norm();
    if an == 0.0 {
        return Err(Error::Validation("quotient direction is zero".into()));
    }
    let a = a / Complex64::new(an, 0.0);
    let full: Vec<CVector> = match subspace {
        Some(s) => s.to_vec(),
        None => (0..r)
            .map(|k| CVector::from_fn(r, |i, _| Complex64::new(f64::from(u8::from(i == k)), 0.0)))
            .collect(),
    };
    if linalg::distance_to_span(&a, &full) > tol {
        return Err(Error::QuotientIllDefined {
            defect: linalg::distance_to_span(&a, &full),
        });
    }
    let m = monodromy(system, lp)?.matrix;
    let ma = &m * &a;
    let line_defect = (&ma - &a * a.dotc(&ma)).norm();
    if line_defect > tol {
        return Err(Error::QuotientIllDefined { defect: line_defect });
    }
    let mut ordered = vec![a.clone()];
    ordered.extend(full.iter().cloned());
    let basis = linalg::orthonormalize(&ordered, 1e-9);
    let complement = &basis[1..];
    let k = complement.len();
    let matrix = CMatrix::from_fn(k, k, |i, j| complement[i].dotc(&(&m * &complement[j])));
    let deviation = (&matrix - CMatrix::identity(k, k)).norm();
    Ok(QuotientMonodromy {
        matrix,
        line_defect,
        deviation,
        trivial: deviation < tol,
    })
}
