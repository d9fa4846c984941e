//! Floating-point evaluators compiled from exact rational functions.
//!
//! Exact coefficients are converted once; evaluation shares a power table
//! across all entries of a matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{MultiPoly, RatMatrix, RationalFn};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<(Vec<u32>, Complex64)>,
}

impl CompiledPoly {
    fn new(p: &MultiPoly) -> Self {
        Self {
            terms: p.terms().map(|(e, c)| (e.clone(), c.to_c64())).collect(),
        }
    }

    fn max_degrees(&self, into: &mut [u32]) {
        for (e, _) in &self.terms {
            for (m, &k) in into.iter_mut().zip(e) {
                *m = (*m).max(k);
            }
        }
    }

    fn eval(&self, powers: &PowerTable) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (v, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= powers.get(v, k);
                }
            }
            acc += t;
        }
        acc
    }
}

struct PowerTable {
    table: Vec<Vec<Complex64>>,
}

impl PowerTable {
    fn new(point: &[Complex64], max: &[u32]) -> Self {
        let table = point
            .iter()
            .zip(max)
            .map(|(&z, &m)| {
                let mut row = Vec::with_capacity(m as usize + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                row.push(acc);
                for _ in 0..m {
                    acc *= z;
                    row.push(acc);
                }
                row
            })
            .collect();
        Self { table }
    }

    fn get(&self, v: usize, k: u32) -> Complex64 {
        self.table[v][k as usize]
    }
}

#[derive(Clone, Debug)]
pub struct CompiledRational {
    num: CompiledPoly,
    den: CompiledPoly,
    den_is_one: bool,
}

impl CompiledRational {
    pub fn new(f: &RationalFn) -> Self {
        Self {
            num: CompiledPoly::new(f.num()),
            den: CompiledPoly::new(f.den()),
            den_is_one: f.den().constant_value().is_some_and(|c| c.is_one()),
        }
    }

    fn eval(&self, powers: &PowerTable, floor: f64) -> Result<Complex64> {
        let n = self.num.eval(powers);
        if self.den_is_one {
            return Ok(n);
        }
        let d = self.den.eval(powers);
        if d.norm() <= floor {
            return Err(Error::NearPoleEvaluation { modulus: d.norm() });
        }
        Ok(n / d)
    }
}

/// A matrix of rational functions prepared for repeated numeric evaluation.
/// Zero entries are skipped.
#[derive(Clone, Debug)]
pub struct CompiledMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: Vec<(usize, usize, CompiledRational)>,
    max_deg: Vec<u32>,
}

impl CompiledMatrix {
    pub fn new(m: &RatMatrix) -> Self {
        let mut max_deg = vec![0; m.nvars()];
        let entries: Vec<_> = m
            .entries()
            .filter(|(_, _, e)| !e.is_zero())
            .map(|(r, c, e)| {
                let ce = CompiledRational::new(e);
                ce.num.max_degrees(&mut max_deg);
                ce.den.max_degrees(&mut max_deg);
                (r, c, ce)
            })
            .collect();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            nvars: m.nvars(),
            entries,
            max_deg,
        }
    }

    pub fn from_vector(v: &[RationalFn], nvars: usize) -> Self {
        let m = RatMatrix::from_fn(v.len(), 1, nvars, |r, _| v[r].clone());
        Self::new(&m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eval(&self, point: &[Complex64], floor: f64) -> Result<DMatrix<Complex64>> {
        debug_assert_eq!(point.len(), self.nvars);
        let powers = PowerTable::new(point, &self.max_deg);
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, e) in &self.entries {
            m[(*r, *c)] = e.eval(&powers, floor)?;
        }
        Ok(m)
    }

    /// Adds `weight · self(point)` into `out`.
    pub fn accumulate(&self, point: &[Complex64], weight: Complex64, floor: f64, out: &mut DMatrix<Complex64>) -> Result<()> {
        if weight == Complex64::new(0.0, 0.0) || self.entries.is_empty() {
            return Ok(());
        }
        let powers = PowerTable::new(point, &self.max_deg);
        for (r, c, e) in &self.entries {
            out[(*r, *c)] += weight * e.eval(&powers, floor)?;
        }
        Ok(())
    }
}
