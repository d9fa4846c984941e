#![allow(dead_code)]

use std::collections::BTreeMap;

use meroconn::connection::{ChartConnection, GaugeMatrix, LinearMeromorphicSystem};
use meroconn::rational::{parse_rational, Chart, DivisorComponent, GaussianRational, MultiPoly, RatMatrix, RationalFn};
use num_complex::Complex64;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn names(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("z{k}")).collect()
}

pub fn expr(n: usize, text: &str) -> RationalFn {
    parse_rational(text, &names(n), &BTreeMap::new()).unwrap()
}

pub fn chart_z1(n: usize) -> Chart {
    Chart::standard(n, vec![DivisorComponent::new(MultiPoly::var(n, 0), 1).unwrap()]).unwrap()
}

pub fn hopf() -> ChartConnection {
    let mut conn = ChartConnection::flat(chart_z1(2));
    conn.set_gamma(0, 0, 0, expr(2, "1/z1"));
    conn
}

pub fn heisenberg() -> ChartConnection {
    let mut conn = ChartConnection::flat(Chart::standard(3, vec![]).unwrap());
    conn.set_gamma(2, 1, 0, RationalFn::int(3, -1));
    conn
}

fn small_int<R: Rng>(rng: &mut R) -> GaussianRational {
    GaussianRational::from(rng.random_range(-3i64..=3))
}

/// Polynomial with at most `terms` terms of total degree ≤ `degree`.
pub fn random_poly<R: Rng>(rng: &mut R, n: usize, degree: u32, terms: usize) -> MultiPoly {
    let mut p = MultiPoly::zero(n);
    for _ in 0..terms {
        let mut e = vec![0u32; n];
        let mut left = rng.random_range(0..=degree);
        while left > 0 {
            e[rng.random_range(0..n)] += 1;
            left -= 1;
        }
        p = p.add(&MultiPoly::monomial(e, small_int(rng)));
    }
    p
}

/// `p / z1^a` with a random numerator; poles only along `z1 = 0`.
pub fn random_rational<R: Rng>(rng: &mut R, n: usize) -> RationalFn {
    let num = random_poly(rng, n, 2, 3);
    let a = rng.random_range(0..=2);
    RationalFn::new(num, MultiPoly::var(n, 0).pow(a))
}

pub fn random_system<R: Rng>(rng: &mut R, n: usize, rank: usize) -> LinearMeromorphicSystem {
    let matrices = (0..n)
        .map(|_| {
            RatMatrix::from_fn(rank, rank, n, |_, _| {
                if rng.random_bool(0.5) {
                    random_rational(rng, n)
                } else {
                    RationalFn::zero(n)
                }
            })
        })
        .collect();
    LinearMeromorphicSystem::new(chart_z1(n), matrices).unwrap()
}

/// Products of elementary and diagonal monomial matrices, with exact inverses.
pub fn random_gauge<R: Rng>(rng: &mut R, n: usize, rank: usize) -> GaugeMatrix {
    let mut g = GaugeMatrix::identity(rank, n);
    for _ in 0..3 {
        let step = if rank > 1 && rng.random_bool(0.6) {
            let i = rng.random_range(0..rank);
            let j = (i + rng.random_range(1..rank)) % rank;
            let p = RationalFn::from_poly(random_poly(rng, n, 1, 2));
            let mut q = RatMatrix::identity(rank, n);
            let mut qi = RatMatrix::identity(rank, n);
            q.set(i, j, p.clone());
            qi.set(i, j, p.neg());
            GaugeMatrix::new(q, qi).unwrap()
        } else {
            let entries = (0..rank)
                .map(|_| {
                    let k = rng.random_range(-1i32..=1);
                    let s = GaussianRational::from(rng.random_range(1i64..=3));
                    RationalFn::var(n, 0).pow(k).scale(&s)
                })
                .collect();
            GaugeMatrix::diagonal(entries).unwrap()
        };
        g = g.compose(&step);
    }
    g
}
