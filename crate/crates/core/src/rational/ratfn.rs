//! Reduced rational functions `num/den` over ℚ(i).

use std::fmt;

use num_complex::Complex64;

use super::gcd::gcd;
use super::{DivisorComponent, GaussianRational, MultiPoly};
use crate::error::{Error, Result};

/// Default modulus floor for `|den(point)|` during numeric evaluation.
pub const DEFAULT_EVAL_FLOOR: f64 = 1e-13;

/// Canonical form: `gcd(num, den) = 1`, `den` monic, zero is `0/1`.
/// Structural equality is therefore mathematical equality.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RationalFn {
    num: MultiPoly,
    den: MultiPoly,
}

/// Order of a rational function along a divisor component; `Infinite` for zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Order {
    Finite(i64),
    Infinite,
}

impl Order {
    pub fn finite(self) -> Option<i64> {
        match self {
            Order::Finite(k) => Some(k),
            Order::Infinite => None,
        }
    }

    pub fn is_at_least(self, k: i64) -> bool {
        match self {
            Order::Finite(d) => d >= k,
            Order::Infinite => true,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(k) => write!(f, "{k}"),
            Order::Infinite => write!(f, "+inf"),
        }
    }
}

impl RationalFn {
    pub fn new(num: MultiPoly, den: MultiPoly) -> Self {
        assert!(!den.is_zero(), "rational function with zero denominator");
        assert_eq!(num.nvars(), den.nvars());
        let mut r = Self { num, den };
        r.reduce();
        r
    }

    pub fn from_poly(p: MultiPoly) -> Self {
        let n = p.nvars();
        Self {
            num: p,
            den: MultiPoly::one(n),
        }
    }

    pub fn zero(nvars: usize) -> Self {
        Self::from_poly(MultiPoly::zero(nvars))
    }

    pub fn one(nvars: usize) -> Self {
        Self::from_poly(MultiPoly::one(nvars))
    }

    pub fn constant(nvars: usize, c: GaussianRational) -> Self {
        Self::from_poly(MultiPoly::constant(nvars, c))
    }

    pub fn int(nvars: usize, k: i64) -> Self {
        Self::constant(nvars, GaussianRational::from_int(k))
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::from_poly(MultiPoly::var(nvars, i))
    }

    fn reduce(&mut self) {
        let n = self.num.nvars();
        if self.num.is_zero() {
            self.den = MultiPoly::one(n);
            return;
        }
        if !self.den.is_constant() {
            let g = gcd(&self.num, &self.den);
            if !g.is_constant() {
                self.num = self.num.exact_div(&g).expect("gcd divides numerator");
                self.den = self.den.exact_div(&g).expect("gcd divides denominator");
            }
        }
        let lc = self.den.leading_coeff();
        if !lc.is_one() {
            let inv = lc.inv();
            self.num = self.num.scale(&inv);
            self.den = self.den.scale(&inv);
        }
    }

    pub fn num(&self) -> &MultiPoly {
        &self.num
    }

    pub fn den(&self) -> &MultiPoly {
        &self.den
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_constant() && self.num.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    pub fn is_constant(&self) -> bool {
        self.den.is_constant() && self.num.is_constant()
    }

    pub fn constant_value(&self) -> Option<GaussianRational> {
        if self.den.is_constant() {
            self.num.constant_value()
        } else {
            None
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return Self::new(self.num.add(&o.num), self.den.clone());
        }
        let g = gcd(&self.den, &o.den);
        let bd = self.den.exact_div(&g).unwrap();
        let dd = o.den.exact_div(&g).unwrap();
        let num = self.num.mul(&dd).add(&o.num.mul(&bd));
        Self::new(num, self.den.mul(&dd))
    }

    pub fn neg(&self) -> Self {
        Self {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero(self.nvars());
        }
        if self.den.is_constant() && o.den.is_constant() {
            return Self::new(self.num.mul(&o.num), self.den.mul(&o.den));
        }
        let g1 = gcd(&self.num, &o.den);
        let g2 = gcd(&o.num, &self.den);
        let a = self.num.exact_div(&g1).unwrap();
        let d = o.den.exact_div(&g1).unwrap();
        let c = o.num.exact_div(&g2).unwrap();
        let b = self.den.exact_div(&g2).unwrap();
        let mut r = Self {
            num: a.mul(&c),
            den: b.mul(&d),
        };
        let lc = r.den.leading_coeff();
        if !lc.is_one() {
            let inv = lc.inv();
            r.num = r.num.scale(&inv);
            r.den = r.den.scale(&inv);
        }
        r
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars());
        }
        Self {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "inverse of the zero rational function");
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.inv())
    }

    pub fn pow(&self, k: i32) -> Self {
        if k < 0 {
            return self.inv().pow(-k);
        }
        Self {
            num: self.num.pow(k as u32),
            den: self.den.pow(k as u32),
        }
    }

    /// Exact symbolic partial derivative by the quotient rule.
    pub fn partial(&self, var: usize) -> Self {
        let dn = self.num.partial(var);
        if self.den.is_constant() {
            return Self::new(dn, self.den.clone());
        }
        let dd = self.den.partial(var);
        if dd.is_zero() {
            return Self::new(dn, self.den.clone());
        }
        let num = dn.mul(&self.den).sub(&self.num.mul(&dd));
        Self::new(num, self.den.mul(&self.den))
    }

    /// Numeric value, failing when `|den(point)|` is at or below `floor`.
    pub fn eval_with_floor(&self, point: &[Complex64], floor: f64) -> Result<Complex64> {
        let d = self.den.eval(point);
        if d.norm() <= floor {
            return Err(Error::NearPoleEvaluation { modulus: d.norm() });
        }
        Ok(self.num.eval(point) / d)
    }

    pub fn eval(&self, point: &[Complex64]) -> Result<Complex64> {
        self.eval_with_floor(point, DEFAULT_EVAL_FLOOR)
    }

    /// Exact value at a rational point; `None` when the denominator vanishes there.
    pub fn eval_exact(&self, point: &[GaussianRational]) -> Option<GaussianRational> {
        let d = self.den.eval_exact(point);
        if d.is_zero() {
            return None;
        }
        Some(&self.num.eval_exact(point) / &d)
    }

    /// Substitutes rational functions for the variables.
    pub fn compose(&self, images: &[RationalFn]) -> RationalFn {
        let target = images.first().map(|r| r.nvars()).unwrap_or(0);
        let eval_poly = |p: &MultiPoly| -> RationalFn {
            let mut acc = RationalFn::zero(target);
            for (e, c) in p.terms() {
                let mut t = RationalFn::constant(target, c.clone());
                for (v, &k) in e.iter().enumerate() {
                    if k > 0 {
                        t = t.mul(&images[v].pow(k as i32));
                    }
                }
                acc = acc.add(&t);
            }
            acc
        };
        if images.iter().all(|r| r.is_polynomial()) {
            let polys: Vec<MultiPoly> = images.iter().map(|r| r.num.scale(&r.den.constant_value().unwrap().inv())).collect();
            let n = self.num.compose(&polys);
            let d = self.den.compose(&polys);
            assert!(!d.is_zero(), "substitution annihilates the denominator");
            return RationalFn::new(n, d);
        }
        eval_poly(&self.num).div(&eval_poly(&self.den))
    }

    pub fn extend_vars(&self, nvars: usize) -> RationalFn {
        RationalFn {
            num: self.num.extend_vars(nvars),
            den: self.den.extend_vars(nvars),
        }
    }

    pub fn display_with<'a>(&'a self, names: &'a [String]) -> RatDisplay<'a> {
        RatDisplay { f: self, names }
    }
}

/// `max k` with `q^k | p`, for nonzero `p` and non-constant `q`.
pub fn poly_order(p: &MultiPoly, q: &MultiPoly) -> i64 {
    assert!(!p.is_zero());
    let mut k = 0;
    let mut cur = p.clone();
    while let Some(next) = cur.exact_div(q) {
        k += 1;
        cur = next;
    }
    k
}

/// Order of `f` along the component: `ord_q(num) − ord_q(den)`, `+∞` for zero.
pub fn order_along(f: &RationalFn, q: &DivisorComponent) -> Order {
    if f.is_zero() {
        return Order::Infinite;
    }
    Order::Finite(poly_order(&f.num, q.poly()) - poly_order(&f.den, q.poly()))
}

/// Whether `f`, holomorphic along the component, vanishes on it.
pub fn vanishes_on(f: &RationalFn, q: &DivisorComponent) -> Result<bool> {
    match order_along(f, q) {
        Order::Infinite => Ok(true),
        Order::Finite(k) if k < 0 => Err(Error::PoleOnComponent { order: k }),
        Order::Finite(k) => Ok(k >= 1),
    }
}

pub fn partial(f: &RationalFn, var: usize) -> RationalFn {
    f.partial(var)
}

pub struct RatDisplay<'a> {
    f: &'a RationalFn,
    names: &'a [String],
}

impl fmt::Display for RatDisplay<'_> {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = self.f.num.display_with(self.names).to_string();
        if self.f.den.is_constant() {
            return write!(fm, "{num}");
        }
        let den = self.f.den.display_with(self.names).to_string();
        let wrap = |s: String, p: &MultiPoly| {
            if p.num_terms() > 1 {
                format!("({s})")
            } else {
                s
            }
        };
        let den_s = if self.f.den.is_monomial() && !den.contains('*') && !den.contains('^') {
            den
        } else {
            format!("({den})")
        };
        write!(fm, "{}/{}", wrap(num, &self.f.num), den_s)
    }
}
