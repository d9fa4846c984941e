//! Multivariate GCD by recursive primitive pseudo-remainder sequences.
//!
//! Polynomials are viewed in `K[rest][z_v]` with `v` the smallest variable
//! that occurs; contents in `K[rest]` are computed recursively. Monomial
//! content is split off first since divisor components are usually
//! coordinate hyperplanes.

use super::{GaussianRational, MultiPoly};

/// Monic greatest common divisor. `gcd(0, 0) = 0`.
pub fn gcd(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    let n = a.nvars();
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return MultiPoly::one(n);
    }
    let ma = a.monomial_content();
    let mb = b.monomial_content();
    let mg: Vec<u32> = ma.iter().zip(&mb).map(|(x, y)| *x.min(y)).collect();
    let mono = MultiPoly::monomial(mg, GaussianRational::one());
    if a.is_monomial() || b.is_monomial() {
        return mono;
    }
    let a1 = a.div_monomial(&ma);
    let b1 = b.div_monomial(&mb);
    gcd_no_monomial(&a1, &b1).mul(&mono).monic()
}

fn gcd_no_monomial(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    let n = a.nvars();
    if a.is_constant() || b.is_constant() {
        return MultiPoly::one(n);
    }
    if a == b {
        return a.monic();
    }
    let v = (0..n).find(|&v| a.uses_var(v) || b.uses_var(v)).unwrap();
    if !a.uses_var(v) {
        return gcd(a, &content_in(b, v));
    }
    if !b.uses_var(v) {
        return gcd(&content_in(a, v), b);
    }
    let ca = content_in(a, v);
    let cb = content_in(b, v);
    let pa = a.exact_div(&ca).expect("content divides");
    let pb = b.exact_div(&cb).expect("content divides");
    let c = gcd(&ca, &cb);
    let g = primitive_prs(pa, pb, v);
    c.mul(&g).monic()
}

/// GCD of the coefficients of `p` viewed as a polynomial in `z_var`.
pub fn content_in(p: &MultiPoly, var: usize) -> MultiPoly {
    let mut acc = MultiPoly::zero(p.nvars());
    for c in p.coeffs_in(var).into_iter().filter(|c| !c.is_zero()) {
        acc = gcd(&acc, &c);
        if acc.is_constant() {
            return MultiPoly::one(p.nvars());
        }
    }
    acc
}

fn primitive_part_in(p: &MultiPoly, var: usize) -> MultiPoly {
    let c = content_in(p, var);
    p.exact_div(&c).expect("content divides")
}

fn lead_in(p: &MultiPoly, var: usize) -> MultiPoly {
    p.coeffs_in(var).pop().unwrap_or_else(|| MultiPoly::zero(p.nvars()))
}

/// Pseudo-remainder of `a` by `b` in `z_var`, up to a unit factor in `K[rest]`.
fn pseudo_rem(a: &MultiPoly, b: &MultiPoly, var: usize) -> MultiPoly {
    let n = a.nvars();
    let db = b.degree_in(var);
    let lb = lead_in(b, var);
    let mut r = a.clone();
    while !r.is_zero() && r.uses_var(var) && r.degree_in(var) >= db {
        let dr = r.degree_in(var);
        let lr = lead_in(&r, var);
        let mut shift = vec![0; n];
        shift[var] = dr - db;
        r = lb.mul(&r).sub(&lr.mul(&b.mul_monomial(&shift)));
    }
    if db == 0 {
        // b is free of var; the remainder is zero up to units
        return MultiPoly::zero(n);
    }
    r
}

fn primitive_prs(mut a: MultiPoly, mut b: MultiPoly, var: usize) -> MultiPoly {
    if a.degree_in(var) < b.degree_in(var) {
        std::mem::swap(&mut a, &mut b);
    }
    loop {
        let r = pseudo_rem(&a, &b, var);
        if r.is_zero() {
            return primitive_part_in(&b, var).monic();
        }
        if !r.uses_var(var) {
            return MultiPoly::one(a.nvars());
        }
        a = b;
        b = primitive_part_in(&r, var);
    }
}
