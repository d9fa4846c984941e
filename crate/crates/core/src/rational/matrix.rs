//! Dense matrices of rational functions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::RationalFn;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    data: Vec<RationalFn>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        Self {
            rows,
            cols,
            nvars,
            data: vec![RationalFn::zero(nvars); rows * cols],
        }
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        let mut m = Self::zeros(n, n, nvars);
        for k in 0..n {
            m.set(k, k, RationalFn::one(nvars));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, nvars: usize, mut f: impl FnMut(usize, usize) -> RationalFn) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                debug_assert_eq!(v.nvars(), nvars);
                data.push(v);
            }
        }
        Self { rows, cols, nvars, data }
    }

    pub fn diagonal(entries: Vec<RationalFn>) -> Self {
        let n = entries.len();
        let nvars = entries.first().map(|e| e.nvars()).unwrap_or(0);
        let mut m = Self::zeros(n, n, nvars);
        for (k, e) in entries.into_iter().enumerate() {
            m.set(k, k, e);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &RationalFn {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: RationalFn) {
        self.data[r * self.cols + c] = v;
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &RationalFn)> {
        self.data.iter().enumerate().map(move |(k, v)| (k / self.cols, k % self.cols, v))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|e| e.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && self.entries().all(|(r, c, e)| if r == c { e.is_one() } else { e.is_zero() })
    }

    pub fn map(&self, f: impl Fn(&RationalFn) -> RationalFn) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self {
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect(),
            ..self.clone()
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self {
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect(),
            ..self.clone()
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|e| e.neg())
    }

    pub fn scale(&self, f: &RationalFn) -> Self {
        self.map(|e| e.mul(f))
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "matrix shape mismatch");
        let mut out = Self::zeros(self.rows, o.cols, self.nvars);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..o.cols {
                    let b = o.get(k, c);
                    if b.is_zero() {
                        continue;
                    }
                    let idx = r * out.cols + c;
                    out.data[idx] = out.data[idx].add(&a.mul(b));
                }
            }
        }
        out
    }

    /// `self·o − o·self`.
    pub fn commutator(&self, o: &Self) -> Self {
        self.mul(o).sub(&o.mul(self))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.nvars, |r, c| self.get(c, r).clone())
    }

    pub fn partial(&self, var: usize) -> Self {
        self.map(|e| e.partial(var))
    }

    pub fn trace(&self) -> RationalFn {
        let mut acc = RationalFn::zero(self.nvars);
        for k in 0..self.rows.min(self.cols) {
            acc = acc.add(self.get(k, k));
        }
        acc
    }

    pub fn compose(&self, images: &[RationalFn]) -> Self {
        let target = images.first().map(|r| r.nvars()).unwrap_or(0);
        Self {
            rows: self.rows,
            cols: self.cols,
            nvars: target,
            data: self.data.iter().map(|e| e.compose(images)).collect(),
        }
    }

    pub fn eval(&self, point: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, e) in self.entries() {
            if !e.is_zero() {
                m[(r, c)] = e.eval(point)?;
            }
        }
        Ok(m)
    }

    pub fn column(&self, c: usize) -> Vec<RationalFn> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn apply(&self, v: &[RationalFn]) -> Vec<RationalFn> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                (0..self.cols).fold(RationalFn::zero(self.nvars), |acc, c| {
                    let a = self.get(r, c);
                    if a.is_zero() || v[c].is_zero() {
                        acc
                    } else {
                        acc.add(&a.mul(&v[c]))
                    }
                })
            })
            .collect()
    }
}
