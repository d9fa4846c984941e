//! Dense complex linear algebra helpers built on `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values of `m`, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tol`.
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|&s| s > tol).count()
}

/// Orthonormal basis of `{x : m x = 0}`, with singular values `≤ tol` treated as zero.
pub fn null_space(m: &CMatrix, tol: f64) -> Vec<CVector> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return (0..n)
            .map(|i| CVector::from_fn(n, |k, _| Complex64::new(if k == i { 1.0 } else { 0.0 }, 0.0)))
            .collect();
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let rows = m.nrows().max(n);
    let mut padded = CMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested");
    (0..n)
        .filter(|&i| svd.singular_values[i] <= tol)
        .map(|i| vt.row(i).adjoint())
        .collect()
}

/// Orthonormalizes the columns of `vectors`, dropping those within `tol` of the span so far.
pub fn orthonormalize(vectors: &[CVector], tol: f64) -> Vec<CVector> {
    let mut out: Vec<CVector> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let c = u.dotc(&w);
                w -= u * c;
            }
        }
        let nrm = w.norm();
        if nrm > tol {
            out.push(w / Complex64::new(nrm, 0.0));
        }
    }
    out
}

/// Principal angles between the spans of two families, ascending, in radians.
///
/// Small angles come from sines and large ones from cosines, so both ends are accurate.
pub fn principal_angles(a: &[CVector], b: &[CVector]) -> Vec<f64> {
    let mut qa = orthonormalize(a, 1e-12);
    let mut qb = orthonormalize(b, 1e-12);
    if qa.is_empty() || qb.is_empty() {
        return Vec::new();
    }
    if qb.len() > qa.len() {
        std::mem::swap(&mut qa, &mut qb);
    }
    let m = CMatrix::from_fn(qa.len(), qb.len(), |i, j| qa[i].dotc(&qb[j]));
    let cosines = singular_values(&m);
    let mut residual = CMatrix::zeros(qb[0].len(), qb.len());
    for (j, v) in qb.iter().enumerate() {
        let mut w = v.clone();
        for u in &qa {
            let c = u.dotc(&w);
            w -= u * c;
        }
        residual.set_column(j, &w);
    }
    let mut sines = singular_values(&residual);
    sines.reverse();
    cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            if c * c < 0.5 {
                c.clamp(0.0, 1.0).acos()
            } else {
                s.clamp(0.0, 1.0).asin()
            }
        })
        .collect()
}

/// Largest principal angle between two spans of equal dimension, or `π/2` if the dimensions differ.
pub fn subspace_distance(a: &[CVector], b: &[CVector]) -> f64 {
    let qa = orthonormalize(a, 1e-12);
    let qb = orthonormalize(b, 1e-12);
    if qa.len() != qb.len() {
        return std::f64::consts::FRAC_PI_2;
    }
    principal_angles(&qa, &qb).into_iter().fold(0.0, f64::max)
}

/// Residual of projecting `v` onto the orthonormal family `basis`.
pub fn distance_to_span(v: &CVector, basis: &[CVector]) -> f64 {
    let q = orthonormalize(basis, 1e-12);
    let mut w = v.clone();
    for u in &q {
        let c = u.dotc(&w);
        w -= u * c;
    }
    w.norm()
}
