//! Branched frames, the affine Cartan curvature and the tractor trace.
//!
//! Elements of `g = ℂⁿ ⋊ glₙ` are vectors of length `n + n²`: translations
//! first, then the elementary matrices `E_{kl}` in row-major order.

use num_complex::Complex64;
use serde::Serialize;

use super::{gauge_transform, ChartConnection, LinearMeromorphicSystem, SubmoduleFrame};
use crate::error::{Error, Result};
use crate::rational::{order_along, CompiledMatrix, RatMatrix, RationalFn};

#[derive(Clone, Debug)]
pub struct BranchedReport {
    pub branched: bool,
    /// Connection form in the frame basis.
    pub gauged: LinearMeromorphicSystem,
    /// Human-readable description of every polar entry.
    pub offending: Vec<String>,
}

pub fn is_branched(conn: &ChartConnection, frame: &SubmoduleFrame) -> BranchedReport {
    let gauged = gauge_transform(&conn.connection_form(), frame.gauge());
    let chart = conn.chart();
    let mut offending = Vec::new();
    for (i, m) in gauged.matrices().iter().enumerate() {
        for (r, c, e) in m.entries() {
            if e.is_polynomial() {
                continue;
            }
            for (a, d) in chart.divisor().iter().enumerate() {
                if let Some(k) = order_along(e, d).finite().filter(|&k| k < 0) {
                    offending.push(format!(
                        "A'{}[{},{}] has order {k} along {}",
                        i + 1,
                        r + 1,
                        c + 1,
                        chart.component_label(a).equation
                    ));
                }
            }
            if !chart.pole_free_off_divisor(e.den()) {
                offending.push(format!("A'{}[{},{}] has a pole off the divisor", i + 1, r + 1, c + 1));
            }
        }
    }
    BranchedReport {
        branched: offending.is_empty(),
        gauged,
        offending,
    }
}

fn lie_dim(n: usize) -> usize {
    n + n * n
}

/// `[(v,B),(w,C)] = (Bw − Cv, BC − CB)`.
fn bracket(x: &[RationalFn], y: &[RationalFn], n: usize, nvars: usize) -> Vec<RationalFn> {
    let mat = |z: &[RationalFn]| RatMatrix::from_fn(n, n, nvars, |k, l| z[n + k * n + l].clone());
    let (bx, by) = (mat(x), mat(y));
    let t1 = bx.apply(&y[..n]);
    let t2 = by.apply(&x[..n]);
    let mut out: Vec<RationalFn> = t1.iter().zip(&t2).map(|(a, b)| a.sub(b)).collect();
    let c = bx.commutator(&by);
    for k in 0..n {
        for l in 0..n {
            out.push(c.get(k, l).clone());
        }
    }
    out
}

/// Matrix of `y ↦ [x, y]` in the graded basis.
fn ad_matrix(x: &[RationalFn], n: usize, nvars: usize) -> RatMatrix {
    let dim = lie_dim(n);
    let mut m = RatMatrix::zeros(dim, dim, nvars);
    for col in 0..dim {
        let mut e = vec![RationalFn::zero(nvars); dim];
        e[col] = RationalFn::one(nvars);
        for (row, v) in bracket(x, &e, n, nvars).into_iter().enumerate() {
            m.set(row, col, v);
        }
    }
    m
}

/// `ω₀(∂ᵢ)` at the section `g = Id`: `(Q⁻¹eᵢ, Ãᵢ)`.
fn cartan_form(gauged: &LinearMeromorphicSystem, frame: &SubmoduleFrame) -> Vec<Vec<RationalFn>> {
    let n = gauged.nvars();
    (0..n)
        .map(|i| {
            let mut w = frame.inverse().column(i);
            let a = gauged.matrix(i);
            for k in 0..n {
                for l in 0..n {
                    w.push(a.get(k, l).clone());
                }
            }
            w
        })
        .collect()
}

/// `(dω₀)_{ij}` and `[ω₀(∂ᵢ), ω₀(∂ⱼ)]` for `i < j`.
type StructurePair = ((usize, usize), Vec<RationalFn>, Vec<RationalFn>);

fn structure_pairs(omega: &[Vec<RationalFn>], n: usize) -> Vec<StructurePair> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d: Vec<RationalFn> = omega[j]
                .iter()
                .zip(&omega[i])
                .map(|(wj, wi)| wj.partial(i).sub(&wi.partial(j)))
                .collect();
            let b = bracket(&omega[i], &omega[j], n, n);
            out.push(((i, j), d, b));
        }
    }
    out
}

/// Cartan curvature `K(eₐ, e_b)` of the induced affine geometry, one vector
/// of length `n + n²` per frame pair `a < b`.
#[derive(Clone, Debug, Serialize)]
pub struct CartanCurvature {
    pub n: usize,
    pub pairs: Vec<(usize, usize)>,
    pub values: Vec<Vec<Complex64>>,
}

impl CartanCurvature {
    /// Translation components: the torsion in the frame basis.
    pub fn translation_part(&self, pair: usize) -> &[Complex64] {
        &self.values[pair][..self.n]
    }

    /// Linear components: the curvature in the frame basis.
    pub fn linear_part(&self, pair: usize) -> &[Complex64] {
        &self.values[pair][self.n..]
    }

    pub fn max_translation(&self) -> f64 {
        (0..self.pairs.len())
            .flat_map(|p| self.translation_part(p).iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_linear(&self) -> f64 {
        (0..self.pairs.len())
            .flat_map(|p| self.linear_part(p).iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }
}

/// Evaluates `K = dω₀ + ½[ω₀ ∧ ω₀]` at `(point, Id)` on pairs of frame vectors.
pub fn cartan_structure_functions(conn: &ChartConnection, frame: &SubmoduleFrame, point: &[Complex64]) -> Result<CartanCurvature> {
    let n = conn.nvars();
    let dim = lie_dim(n);
    let gauged = gauge_transform(&conn.connection_form(), frame.gauge());
    let omega = cartan_form(&gauged, frame);
    let floor = crate::rational::DEFAULT_EVAL_FLOOR;
    let mut kij = Vec::new();
    for ((i, j), d, b) in structure_pairs(&omega, n) {
        let total: Vec<RationalFn> = d.iter().zip(&b).map(|(x, y)| x.add(y)).collect();
        let v = CompiledMatrix::from_vector(&total, n).eval(point, floor)?;
        kij.push(((i, j), v));
    }
    let q = CompiledMatrix::new(frame.q()).eval(point, floor)?;
    let mut pairs = Vec::new();
    let mut values = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut acc = vec![Complex64::new(0.0, 0.0); dim];
            for ((i, j), v) in &kij {
                let w = q[(*i, a)] * q[(*j, b)] - q[(*j, a)] * q[(*i, b)];
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (slot, x) in acc.iter_mut().zip(v.iter()) {
                    *slot += w * x;
                }
            }
            pairs.push((a, b));
            values.push(acc);
        }
    }
    Ok(CartanCurvature { n, pairs, values })
}

/// Trace of `ad(dω₀) + ad(ω₀ ∧ ω₀)` as an antisymmetric matrix of 2-form
/// coefficients: entry `(i, j)` multiplies `dzᵢ ∧ dzⱼ`.
pub fn tractor_curvature_trace(conn: &ChartConnection, frame: &SubmoduleFrame) -> Result<RatMatrix> {
    let report = is_branched(conn, frame);
    if !report.branched {
        return Err(Error::NotBranched {
            reason: report.offending.join("; "),
        });
    }
    let n = conn.nvars();
    let omega = cartan_form(&report.gauged, frame);
    let mut out = RatMatrix::zeros(n, n, n);
    for ((i, j), d, b) in structure_pairs(&omega, n) {
        let r = ad_matrix(&d, n, n).add(&ad_matrix(&b, n, n));
        let t = r.trace();
        out.set(j, i, t.neg());
        out.set(i, j, t);
    }
    Ok(out)
}
