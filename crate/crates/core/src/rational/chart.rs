//! Coordinate charts with a polynomial divisor.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::{GaussianRational, MultiPoly, RationalFn};
use crate::error::{Error, Result};

/// An irreducible divisor component `{q = 0}` with multiplicity.
///
/// Irreducibility is the caller's promise; it is not checked.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DivisorComponent {
    poly: MultiPoly,
    multiplicity: u32,
}

impl DivisorComponent {
    pub fn new(poly: MultiPoly, multiplicity: u32) -> Result<Self> {
        if poly.is_constant() {
            return Err(Error::Validation("divisor component must be non-constant".into()));
        }
        if multiplicity == 0 {
            return Err(Error::Validation("divisor multiplicity must be positive".into()));
        }
        Ok(Self {
            poly: poly.monic(),
            multiplicity,
        })
    }

    pub fn poly(&self) -> &MultiPoly {
        &self.poly
    }

    pub fn multiplicity(&self) -> u32 {
        self.multiplicity
    }

    pub fn nvars(&self) -> usize {
        self.poly.nvars()
    }

    /// Writes the component as `c·z_v − p(rest)`, trying `z₁` first.
    pub fn graph_form(&self) -> Option<GraphForm> {
        (0..self.nvars()).find_map(|v| self.graph_form_over(v))
    }

    pub fn graph_form_over(&self, var: usize) -> Option<GraphForm> {
        if self.poly.degree_in(var) != 1 {
            return None;
        }
        let cs = self.poly.coeffs_in(var);
        let coeff = cs[1].constant_value()?;
        Some(GraphForm {
            var,
            coeff,
            rest: cs[0].neg(),
        })
    }

    /// Coordinates in which this component becomes `{y₁ = 0}`.
    pub fn straightening(&self) -> Result<Straightening> {
        let g = self.graph_form().ok_or_else(|| Error::UnsupportedComponent {
            reason: "component is not a graph over a coordinate".into(),
        })?;
        Ok(Straightening::from_graph(&g, self.nvars()))
    }
}

/// `q = coeff·z_var − rest`, with `rest` free of `z_var`.
#[derive(Clone, Debug)]
pub struct GraphForm {
    pub var: usize,
    pub coeff: GaussianRational,
    pub rest: MultiPoly,
}

impl GraphForm {
    /// `z_var` on the component as a function of the other coordinates.
    pub fn solve(&self) -> MultiPoly {
        self.rest.scale(&self.coeff.inv())
    }
}

/// A polynomial change of coordinates `y = forward(z)`, `z = inverse(y)`.
#[derive(Clone, Debug)]
pub struct Straightening {
    pub forward: Vec<MultiPoly>,
    pub inverse: Vec<MultiPoly>,
    /// Old index of the coordinate that became `y₁`.
    pub var: usize,
}

impl Straightening {
    fn from_graph(g: &GraphForm, n: usize) -> Self {
        let others: Vec<usize> = (0..n).filter(|&k| k != g.var).collect();
        let sol = g.solve();
        let mut forward = vec![MultiPoly::var(n, g.var).sub(&sol)];
        forward.extend(others.iter().map(|&k| MultiPoly::var(n, k)));
        // z_k = y_{pos(k)} for k ≠ var; z_var = y_0 + sol(z ↦ y)
        let mut to_new = vec![MultiPoly::zero(n); n];
        for (pos, &k) in others.iter().enumerate() {
            to_new[k] = MultiPoly::var(n, pos + 1);
        }
        let sol_new = sol.compose(&to_new);
        let mut inverse = vec![MultiPoly::zero(n); n];
        inverse[g.var] = MultiPoly::var(n, 0).add(&sol_new);
        for (pos, &k) in others.iter().enumerate() {
            inverse[k] = MultiPoly::var(n, pos + 1);
        }
        Self {
            forward,
            inverse,
            var: g.var,
        }
    }

    pub fn inverse_as_rational(&self) -> Vec<RationalFn> {
        self.inverse.iter().cloned().map(RationalFn::from_poly).collect()
    }

    pub fn forward_as_rational(&self) -> Vec<RationalFn> {
        self.forward.iter().cloned().map(RationalFn::from_poly).collect()
    }
}

/// A coordinate chart `U ⊂ ℂⁿ` carrying a polynomial divisor.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    var_names: Vec<String>,
    divisor: Vec<DivisorComponent>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentLabel {
    pub index: usize,
    pub equation: String,
    pub multiplicity: u32,
}

impl Chart {
    pub fn new(var_names: Vec<String>, divisor: Vec<DivisorComponent>) -> Result<Self> {
        let n = var_names.len();
        for (i, a) in var_names.iter().enumerate() {
            if var_names[..i].contains(a) {
                return Err(Error::Validation(format!("duplicate variable name `{a}`")));
            }
        }
        if divisor.iter().any(|d| d.nvars() != n) {
            return Err(Error::Validation("divisor component arity does not match chart".into()));
        }
        Ok(Self { var_names, divisor })
    }

    /// `n` variables named `z1..zn`.
    pub fn standard(n: usize, divisor: Vec<DivisorComponent>) -> Result<Self> {
        Self::new((1..=n).map(|k| format!("z{k}")).collect(), divisor)
    }

    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn divisor(&self) -> &[DivisorComponent] {
        &self.divisor
    }

    pub fn with_divisor(&self, divisor: Vec<DivisorComponent>) -> Self {
        Self {
            var_names: self.var_names.clone(),
            divisor,
        }
    }

    pub fn component_label(&self, index: usize) -> ComponentLabel {
        let c = &self.divisor[index];
        ComponentLabel {
            index,
            equation: c.poly().display_with(&self.var_names).to_string(),
            multiplicity: c.multiplicity(),
        }
    }

    /// Smallest `|q(point)|` over the divisor components (`∞` without components).
    pub fn divisor_distance(&self, point: &[Complex64]) -> f64 {
        self.divisor
            .iter()
            .map(|d| d.poly().eval(point).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Strips every divisor factor from `p`; what is left must not vanish on `U`.
    pub fn strip_divisor_factors(&self, p: &MultiPoly) -> MultiPoly {
        let mut cur = p.clone();
        for d in &self.divisor {
            while let Some(next) = cur.exact_div(d.poly()) {
                cur = next;
            }
        }
        cur
    }

    /// Whether `den` has no zeros off the divisor.
    ///
    /// Components are irreducible, so after removing divisor factors any
    /// non-constant residual has a zero set outside `D`.
    pub fn pole_free_off_divisor(&self, den: &MultiPoly) -> bool {
        self.strip_divisor_factors(den).is_constant()
    }

    /// Random point with dyadic rational coordinates in the polydisc of `radius`.
    pub fn random_point<R: Rng>(&self, rng: &mut R, radius: f64) -> Vec<Complex64> {
        (0..self.nvars())
            .map(|_| {
                let re = (rng.random_range(-64i32..=64) as f64) / 64.0 * radius;
                let im = (rng.random_range(-64i32..=64) as f64) / 64.0 * radius;
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect()
    }

    /// Random point at least `margin` away from every divisor component.
    pub fn random_point_off_divisor<R: Rng>(&self, rng: &mut R, radius: f64, margin: f64) -> Vec<Complex64> {
        loop {
            let p = self.random_point(rng, radius);
            if self.divisor_distance(&p) > margin {
                return p;
            }
        }
    }
}
