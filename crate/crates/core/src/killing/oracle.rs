//! Symbolic Killing equation `L_X ∇ = 0` and an exact polynomial-ansatz solver.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::connection::ChartConnection;
use crate::rational::gcd::gcd;
use crate::rational::linear;
use crate::rational::{GaussianRational, Monomial, MultiPoly, RationalFn};

#[derive(Clone, Debug)]
pub struct KillingOracleResult {
    /// `residual[k·n² + i·n + j]` is the `(L_X Γ)^k_{ij}` component.
    pub residual: Vec<RationalFn>,
    pub is_killing: bool,
}

impl KillingOracleResult {
    pub fn residual_at(&self, n: usize, k: usize, i: usize, j: usize) -> &RationalFn {
        &self.residual[k * n * n + i * n + j]
    }
}

/// `(L_X Γ)^k_{ij} = ∂ᵢ∂ⱼX^k + Σ_m [X^m ∂_mΓ^k_{ij} − Γ^m_{ij} ∂_mX^k + Γ^k_{mj} ∂ᵢX^m + Γ^k_{im} ∂ⱼX^m]`.
pub fn killing_oracle(conn: &ChartConnection, x: &[RationalFn]) -> KillingOracleResult {
    let n = conn.nvars();
    assert_eq!(x.len(), n, "field has wrong dimension");
    let dx: Vec<Vec<RationalFn>> = x.iter().map(|xk| (0..n).map(|i| xk.partial(i)).collect()).collect();
    let mut residual = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut r = dx[k][j].partial(i);
                for m in 0..n {
                    let g = conn.gamma(k, i, j);
                    if !g.is_zero() && !x[m].is_zero() {
                        r = r.add(&x[m].mul(&g.partial(m)));
                    }
                    let gm = conn.gamma(m, i, j);
                    if !gm.is_zero() {
                        r = r.sub(&gm.mul(&dx[k][m]));
                    }
                    let a = conn.gamma(k, m, j);
                    if !a.is_zero() {
                        r = r.add(&a.mul(&dx[m][i]));
                    }
                    let b = conn.gamma(k, i, m);
                    if !b.is_zero() {
                        r = r.add(&b.mul(&dx[m][j]));
                    }
                }
                residual.push(r);
            }
        }
    }
    let is_killing = residual.iter().all(RationalFn::is_zero);
    KillingOracleResult { residual, is_killing }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AnsatzOptions {
    /// Largest total degree of the numerator monomial.
    pub degree: u32,
    /// Largest exponent of each divisor polynomial in the denominator.
    pub max_pole_order: u32,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self {
            degree: 2,
            max_pole_order: 2,
        }
    }
}

/// Killing fields found inside the ansatz family, as a basis of exact rational fields.
#[derive(Clone, Debug)]
pub struct AnsatzResult {
    pub options: AnsatzOptions,
    /// Number of linearly independent fields in the family.
    pub family_dimension: usize,
    pub fields: Vec<Vec<RationalFn>>,
}

impl AnsatzResult {
    pub fn dimension(&self) -> usize {
        self.fields.len()
    }
}

fn monomials(n: usize, degree: u32) -> Vec<Monomial> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|m: Monomial| {
                let used: u32 = m.iter().sum();
                (0..=degree - used).map(move |e| {
                    let mut m = m.clone();
                    m.push(e);
                    m
                })
            })
            .collect();
    }
    out
}

fn exponent_vectors(count: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..count {
        out = out
            .into_iter()
            .flat_map(|e: Vec<u32>| {
                (0..=max).map(move |k| {
                    let mut e = e.clone();
                    e.push(k);
                    e
                })
            })
            .collect();
    }
    out
}

fn lcm(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    let g = gcd(a, b);
    a.exact_div(&g).expect("gcd divides").mul(b)
}

/// Appends one row per monomial of `Σ_b c_b·polys[b]`.
fn coefficient_rows(polys: &[MultiPoly], rows: &mut Vec<Vec<GaussianRational>>) {
    let mut by_monomial: BTreeMap<&Monomial, Vec<GaussianRational>> = BTreeMap::new();
    for (b, p) in polys.iter().enumerate() {
        for (m, c) in p.terms() {
            by_monomial.entry(m).or_insert_with(|| vec![GaussianRational::zero(); polys.len()])[b] = c.clone();
        }
    }
    rows.extend(by_monomial.into_values());
}

/// Numerators of `fs` over their least common denominator.
fn over_common_denominator(fs: &[&RationalFn], nvars: usize) -> Vec<MultiPoly> {
    let mut l = MultiPoly::one(nvars);
    for f in fs {
        if !f.is_zero() {
            l = lcm(&l, f.den());
        }
    }
    fs.iter()
        .map(|f| f.num().mul(&l.exact_div(f.den()).expect("lcm is a multiple")))
        .collect()
}

/// Solves the Killing equation exactly over fields `z^α / Π q_a^{e_a} · ∂_k`.
pub fn killing_ansatz(conn: &ChartConnection, opts: &AnsatzOptions) -> AnsatzResult {
    let n = conn.nvars();
    let divisor = conn.chart().divisor();
    let one = MultiPoly::one(n);
    let dens: Vec<MultiPoly> = exponent_vectors(divisor.len(), opts.max_pole_order)
        .into_iter()
        .map(|e| e.iter().zip(divisor).fold(one.clone(), |acc, (&k, q)| acc.mul(&q.poly().pow(k))))
        .collect();
    let mons = monomials(n, opts.degree);

    // Independent scalar functions of the family.
    let scalars: Vec<RationalFn> = dens
        .iter()
        .flat_map(|d| {
            mons.iter()
                .map(move |m| RationalFn::new(MultiPoly::monomial(m.clone(), GaussianRational::one()), d.clone()))
        })
        .collect();
    let refs: Vec<&RationalFn> = scalars.iter().collect();
    let mut rows = Vec::new();
    coefficient_rows(&over_common_denominator(&refs, n), &mut rows);
    let pivots = linear::row_reduce(&mut rows, scalars.len());
    let basis: Vec<RationalFn> = pivots.iter().map(|&p| scalars[p].clone()).collect();

    let family: Vec<Vec<RationalFn>> = (0..n)
        .flat_map(|k| {
            basis.iter().map(move |f| {
                let mut x = vec![RationalFn::zero(n); n];
                x[k] = f.clone();
                x
            })
        })
        .collect();
    let residuals: Vec<Vec<RationalFn>> = family.iter().map(|x| killing_oracle(conn, x).residual).collect();
    let mut eqs = Vec::new();
    for c in 0..n * n * n {
        let col: Vec<&RationalFn> = residuals.iter().map(|r| &r[c]).collect();
        if col.iter().all(|f| f.is_zero()) {
            continue;
        }
        coefficient_rows(&over_common_denominator(&col, n), &mut eqs);
    }
    let kernel = linear::null_space(&eqs, family.len());
    let fields = kernel
        .iter()
        .map(|coeffs| {
            let mut x = vec![RationalFn::zero(n); n];
            for (c, f) in coeffs.iter().zip(&family) {
                if c.is_zero() {
                    continue;
                }
                for (xk, fk) in x.iter_mut().zip(f) {
                    if !fk.is_zero() {
                        *xk = xk.add(&fk.scale(c));
                    }
                }
            }
            x
        })
        .collect();
    AnsatzResult {
        options: *opts,
        family_dimension: family.len(),
        fields,
    }
}
