//! Spiral witnesses, the strongly spiral test and the surface criterion for
//! geodesics contained in a divisor component.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::distinguished::{distinguished_field, Crossing, CurveOptions, DistinguishedField, FrameBundlePoint};
use crate::connection::{ChartConnection, SubmoduleFrame};
use crate::error::{Error, Result};
use crate::rational::{order_along, vanishes_on, ComponentLabel, GaussianRational, MultiPoly, RationalFn};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpiralOptions {
    /// Number of (base point, direction) pairs tried.
    pub budget: usize,
    /// Radius of the polydisc from which free coordinates of base points are drawn.
    pub radius: f64,
    /// Approximate displacement of the replay segment on either side of the divisor.
    pub replay_span: f64,
    pub curve: CurveOptions,
}

impl Default for SpiralOptions {
    fn default() -> Self {
        Self {
            budget: 64,
            radius: 0.5,
            replay_span: 0.25,
            curve: CurveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpiralWitness {
    pub component: usize,
    pub base_point: Vec<Complex64>,
    pub direction: Vec<GaussianRational>,
    /// Off-divisor frame-bundle point the replay starts from.
    pub replay_start: Vec<Complex64>,
    pub replay_length: f64,
    pub crossing: Crossing,
}

fn basis(n: usize, k: usize) -> Vec<GaussianRational> {
    (0..n)
        .map(|i| {
            if i == k {
                GaussianRational::one()
            } else {
                GaussianRational::zero()
            }
        })
        .collect()
}

fn candidate_directions<R: Rng>(n: usize, extra: usize, rng: &mut R) -> Vec<Vec<GaussianRational>> {
    let mut out: Vec<_> = (0..n).map(|k| basis(n, k)).collect();
    while out.len() < n + extra {
        let d: Vec<GaussianRational> = (0..n).map(|_| GaussianRational::from_int(rng.random_range(-2..=2))).collect();
        if d.iter().any(|c| !c.is_zero()) && !out.contains(&d) {
            out.push(d);
        }
    }
    out
}

/// Random point of the component with exact dyadic free coordinates.
fn point_on_component<R: Rng>(conn: &ChartConnection, component: usize, radius: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    let comp = &conn.chart().divisor()[component];
    let g = comp.graph_form().ok_or_else(|| Error::UnsupportedComponent {
        reason: "component is not a graph over a coordinate".into(),
    })?;
    let n = conn.nvars();
    let grid = (radius * 8.0).round().max(1.0) as i64;
    let mut exact: Vec<GaussianRational> = (0..n)
        .map(|_| GaussianRational::from_parts((rng.random_range(-grid..=grid), 8), (rng.random_range(-grid..=grid), 8)))
        .collect();
    exact[g.var] = g.solve().eval_exact(&exact);
    Ok(exact.iter().map(|c| c.to_c64()).collect())
}

fn normal_derivative(q: &MultiPoly, z: &[Complex64], v: &[Complex64]) -> Complex64 {
    (0..z.len()).map(|k| q.partial(k).eval(z) * v[k]).sum()
}

/// Tries to replay a transverse crossing through `x0` from an off-divisor point.
fn replay(
    field: &DistinguishedField,
    q: &MultiPoly,
    component: usize,
    x0: &[Complex64],
    opts: &SpiralOptions,
) -> Result<Option<(Vec<Complex64>, f64, Crossing)>> {
    let start = FrameBundlePoint::identity_at(x0.to_vec());
    let v = field.velocity(&start.z, &start.g)?;
    let speed = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if speed == 0.0 {
        return Ok(None);
    }
    let delta = opts.replay_span / speed;
    let back = field.integrate(
        &start,
        &CurveOptions {
            s_end: -delta,
            ..opts.curve
        },
    )?;
    let pre = back.samples.last().expect("integration yields samples").point.clone();
    if q.eval(&pre.z).norm() < 1e-6 {
        return Ok(None);
    }
    let fwd = field.integrate(
        &pre,
        &CurveOptions {
            s_end: 2.0 * delta,
            ..opts.curve
        },
    )?;
    let hits: Vec<&Crossing> = fwd.crossings.iter().filter(|c| c.component == component).collect();
    match hits.as_slice() {
        [c] if c.transverse => Ok(Some((pre.z.clone(), 2.0 * delta, (*c).clone()))),
        _ => Ok(None),
    }
}

/// Searches for a distinguished curve crossing the component transversally.
pub fn spiral_search<R: Rng>(
    conn: &ChartConnection,
    frame: &SubmoduleFrame,
    component: usize,
    opts: &SpiralOptions,
    rng: &mut R,
) -> Result<Option<SpiralWitness>> {
    let n = conn.nvars();
    let chart = conn.chart();
    let q = chart.divisor()[component].poly().clone();
    let directions = candidate_directions(n, 2, rng);
    let fields: Vec<DistinguishedField> = directions
        .iter()
        .map(|d| distinguished_field(conn, frame, d))
        .collect::<Result<_>>()?;
    let mut tried = 0;
    while tried < opts.budget {
        let x0 = point_on_component(conn, component, opts.radius, rng)?;
        let near_other = chart
            .divisor()
            .iter()
            .enumerate()
            .any(|(b, d)| b != component && d.poly().eval(&x0).norm() < 1e-6);
        if near_other {
            tried += 1;
            continue;
        }
        for (dir, field) in directions.iter().zip(&fields) {
            if tried >= opts.budget {
                break;
            }
            tried += 1;
            let v = field.velocity(&x0, &nalgebra::DMatrix::identity(n, n))?;
            if normal_derivative(&q, &x0, &v).norm() <= opts.curve.transversality_tol {
                continue;
            }
            if let Some((replay_start, replay_length, crossing)) = replay(field, &q, component, &x0, opts)? {
                return Ok(Some(SpiralWitness {
                    component,
                    base_point: x0,
                    direction: dir.clone(),
                    replay_start,
                    replay_length,
                    crossing,
                }));
            }
        }
    }
    Ok(None)
}

/// Whether `L_Z q` restricted to `{q = 0}` is not identically zero, for the
/// cleared field `Z` on the section `g = Id`.
pub fn strong_spiral_test(
    conn: &ChartConnection,
    frame: &SubmoduleFrame,
    component: usize,
    direction: &[GaussianRational],
) -> Result<bool> {
    let n = conn.nvars();
    let field = distinguished_field(conn, frame, direction)?;
    let comp = &conn.chart().divisor()[component];
    let nv = n + n * n;
    let vel = field.symbolic_velocity();
    let lie = (0..n).fold(RationalFn::zero(nv), |acc, k| {
        let dq = comp.poly().partial(k);
        if dq.is_zero() || vel[k].is_zero() {
            acc
        } else {
            acc.add(&RationalFn::from_poly(dq.extend_vars(nv)).mul(&vel[k]))
        }
    });
    let mut images: Vec<RationalFn> = (0..n).map(|k| RationalFn::var(n, k)).collect();
    for r in 0..n {
        for c in 0..n {
            images.push(if r == c { RationalFn::one(n) } else { RationalFn::zero(n) });
        }
    }
    let on_section = lie.compose(&images);
    Ok(!vanishes_on(&on_section, comp)?)
}

/// Surface criterion: in coordinates where the component is `{z₁ = 0}`,
/// `Γ¹₂₂` vanishes on it and `Γ²₂₂` is holomorphic.
pub fn classify_a01(conn: &ChartConnection, component: usize) -> Result<bool> {
    if conn.nvars() != 2 {
        return Err(Error::Validation("the surface criterion needs a two-dimensional chart".into()));
    }
    let comp = &conn.chart().divisor()[component];
    let s = comp.straightening()?;
    let straight = conn.change_coordinates(&s);
    let new_comp = &straight.chart().divisor()[component];
    let c2 = straight.gamma(0, 1, 1);
    let d2 = straight.gamma(1, 1, 1);
    let c2_vanishes = match vanishes_on(c2, new_comp) {
        Ok(v) => v,
        Err(Error::PoleOnComponent { .. }) => false,
        Err(e) => return Err(e),
    };
    let d2_holomorphic =
        straight.chart().divisor().iter().all(|d| order_along(d2, d).is_at_least(0)) && straight.chart().pole_free_off_divisor(d2.den());
    Ok(c2_vanishes && d2_holomorphic)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentSpiralVerdict {
    pub component: ComponentLabel,
    /// Surface criterion; absent outside dimension two or for non-graph components.
    pub in_a01: Option<bool>,
    pub witness: Option<SpiralWitness>,
    /// Strong-spiral test for each translation basis direction.
    pub strong_spiral: Vec<bool>,
    pub strongly_spiral: bool,
}

pub fn spiral_verdict<R: Rng>(
    conn: &ChartConnection,
    frame: &SubmoduleFrame,
    component: usize,
    opts: &SpiralOptions,
    rng: &mut R,
) -> Result<ComponentSpiralVerdict> {
    let n = conn.nvars();
    let in_a01 = match classify_a01(conn, component) {
        Ok(v) => Some(v),
        Err(Error::Validation(_) | Error::UnsupportedComponent { .. }) => None,
        Err(e) => return Err(e),
    };
    let strong_spiral = (0..n)
        .map(|k| strong_spiral_test(conn, frame, component, &basis(n, k)))
        .collect::<Result<Vec<_>>>()?;
    let witness = spiral_search(conn, frame, component, opts, rng)?;
    Ok(ComponentSpiralVerdict {
        component: conn.chart().component_label(component),
        in_a01,
        witness,
        strongly_spiral: strong_spiral.iter().any(|&b| b),
        strong_spiral,
    })
}
