//! Meromorphic affine connections and linear systems on a chart.
//!
//! The matrix form of a connection is `Σ dzᵢ ⊗ Aᵢ` with `(Aᵢ)_{kj} = Γ^k_{ij}`,
//! so `∇_{∂ᵢ}∂ⱼ = Σₖ Γ^k_{ij} ∂ₖ` and horizontal sections solve `ds + A s = 0`.

mod cartan;
mod pullback;

use crate::error::{Error, Result};
use crate::rational::{order_along, Chart, CompiledMatrix, RatMatrix, RationalFn, Straightening};

pub use cartan::{cartan_structure_functions, is_branched, tractor_curvature_trace, BranchedReport, CartanCurvature};
pub use pullback::{pullback_along_curve, Pullback};

/// Christoffel symbols `Γ^k_{ij}` on a chart, stored with index `(k, i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartConnection {
    chart: Chart,
    gamma: Vec<RationalFn>,
}

impl ChartConnection {
    /// `gamma` is laid out as `k·n² + i·n + j`.
    pub fn new(chart: Chart, gamma: Vec<RationalFn>) -> Result<Self> {
        let n = chart.nvars();
        if gamma.len() != n * n * n {
            return Err(Error::Validation(format!(
                "expected {} Christoffel symbols, got {}",
                n * n * n,
                gamma.len()
            )));
        }
        if gamma.iter().any(|g| g.nvars() != n) {
            return Err(Error::Validation("Christoffel symbol arity does not match chart".into()));
        }
        Ok(Self { chart, gamma })
    }

    pub fn from_fn(chart: Chart, mut f: impl FnMut(usize, usize, usize) -> RationalFn) -> Self {
        let n = chart.nvars();
        let mut gamma = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gamma.push(f(k, i, j));
                }
            }
        }
        Self { chart, gamma }
    }

    pub fn flat(chart: Chart) -> Self {
        let n = chart.nvars();
        Self::from_fn(chart, |_, _, _| RationalFn::zero(n))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn nvars(&self) -> usize {
        self.chart.nvars()
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> &RationalFn {
        let n = self.nvars();
        &self.gamma[k * n * n + i * n + j]
    }

    pub fn set_gamma(&mut self, k: usize, i: usize, j: usize, v: RationalFn) {
        let n = self.nvars();
        self.gamma[k * n * n + i * n + j] = v;
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize, usize), &RationalFn)> {
        let n = self.nvars();
        self.gamma
            .iter()
            .enumerate()
            .map(move |(idx, g)| ((idx / (n * n), (idx / n) % n, idx % n), g))
    }

    pub fn is_flat_coordinates(&self) -> bool {
        self.gamma.iter().all(|g| g.is_zero())
    }

    /// Checks that every pole lies on the divisor, with order bounded by the component multiplicity.
    pub fn validate(&self) -> Result<()> {
        for ((k, i, j), g) in self.entries() {
            for (a, comp) in self.chart.divisor().iter().enumerate() {
                if !order_along(g, comp).is_at_least(-(comp.multiplicity() as i64)) {
                    return Err(Error::Validation(format!(
                        "Γ^{}_{}{} exceeds the pole bound on component {}",
                        k + 1,
                        i + 1,
                        j + 1,
                        self.chart.component_label(a).equation
                    )));
                }
            }
            if !self.chart.pole_free_off_divisor(g.den()) {
                return Err(Error::Validation(format!(
                    "Γ^{}_{}{} has a pole off the divisor",
                    k + 1,
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn connection_form(&self) -> LinearMeromorphicSystem {
        let n = self.nvars();
        let matrices = (0..n)
            .map(|i| RatMatrix::from_fn(n, n, n, |k, j| self.gamma(k, i, j).clone()))
            .collect();
        LinearMeromorphicSystem {
            chart: self.chart.clone(),
            rank: n,
            matrices,
        }
    }

    /// Christoffel symbols in the straightened coordinates `y`.
    ///
    /// `Γ'^c_{ab} = (∂y^c/∂z^k)(Γ^k_{ij} ∂z^i/∂y^a ∂z^j/∂y^b + ∂²z^k/∂y^a∂y^b)`.
    pub fn change_coordinates(&self, s: &Straightening) -> ChartConnection {
        let n = self.nvars();
        let fwd = s.forward_as_rational();
        let inv = s.inverse_as_rational();
        // dz/dy as functions of y, dy/dz composed back to y
        let dzdy: Vec<Vec<RationalFn>> = (0..n).map(|i| (0..n).map(|a| inv[i].partial(a)).collect()).collect();
        let dydz: Vec<Vec<RationalFn>> = (0..n).map(|c| (0..n).map(|k| fwd[c].partial(k).compose(&inv)).collect()).collect();
        let gamma_y: Vec<RationalFn> = self.gamma.iter().map(|g| g.compose(&inv)).collect();
        let chart = self.chart.with_divisor(
            self.chart
                .divisor()
                .iter()
                .map(|d| crate::rational::DivisorComponent::new(d.poly().compose(&s.inverse), d.multiplicity()))
                .collect::<Result<Vec<_>>>()
                .expect("straightening keeps components non-constant"),
        );
        let mut out = ChartConnection::flat(chart);
        for a in 0..n {
            for b in 0..n {
                let mut inner = Vec::with_capacity(n);
                for k in 0..n {
                    let mut acc = dzdy[k][a].partial(b);
                    for i in 0..n {
                        if dzdy[i][a].is_zero() {
                            continue;
                        }
                        for j in 0..n {
                            let g = &gamma_y[k * n * n + i * n + j];
                            if g.is_zero() || dzdy[j][b].is_zero() {
                                continue;
                            }
                            acc = acc.add(&g.mul(&dzdy[i][a]).mul(&dzdy[j][b]));
                        }
                    }
                    inner.push(acc);
                }
                for (c, row) in dydz.iter().enumerate() {
                    let mut acc = RationalFn::zero(n);
                    for (k, v) in inner.iter().enumerate() {
                        if !v.is_zero() {
                            acc = acc.add(&row[k].mul(v));
                        }
                    }
                    out.set_gamma(c, a, b, acc);
                }
            }
        }
        out
    }
}

/// A square matrix together with its declared inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeMatrix {
    q: RatMatrix,
    qinv: RatMatrix,
}

impl GaugeMatrix {
    pub fn new(q: RatMatrix, qinv: RatMatrix) -> Result<Self> {
        if !q.is_square() || q.rows() != qinv.rows() || q.cols() != qinv.cols() {
            return Err(Error::Validation("gauge matrix and inverse must be square of equal size".into()));
        }
        if !q.mul(&qinv).is_identity() {
            return Err(Error::Validation("declared inverse does not satisfy Q·Q⁻¹ = Id".into()));
        }
        Ok(Self { q, qinv })
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        Self {
            q: RatMatrix::identity(n, nvars),
            qinv: RatMatrix::identity(n, nvars),
        }
    }

    /// Diagonal gauge; every entry must be nonzero.
    pub fn diagonal(entries: Vec<RationalFn>) -> Result<Self> {
        if entries.iter().any(|e| e.is_zero()) {
            return Err(Error::Validation("diagonal gauge entry is zero".into()));
        }
        let inv = entries.iter().map(|e| e.inv()).collect();
        Self::new(RatMatrix::diagonal(entries), RatMatrix::diagonal(inv))
    }

    pub fn q(&self) -> &RatMatrix {
        &self.q
    }

    pub fn inverse(&self) -> &RatMatrix {
        &self.qinv
    }

    pub fn size(&self) -> usize {
        self.q.rows()
    }

    pub fn compose(&self, o: &Self) -> Self {
        Self {
            q: self.q.mul(&o.q),
            qinv: o.qinv.mul(&self.qinv),
        }
    }
}

/// A frame of a module `TM ⊂ 𝓔 ⊂ TM(*D)`: the columns of `Q` span `𝓔`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmoduleFrame {
    gauge: GaugeMatrix,
}

impl SubmoduleFrame {
    pub fn new(gauge: GaugeMatrix, chart: &Chart) -> Result<Self> {
        if gauge.size() != chart.nvars() {
            return Err(Error::Validation("frame size must equal the chart dimension".into()));
        }
        for (r, c, e) in gauge.q().entries() {
            if !chart.pole_free_off_divisor(e.den()) {
                return Err(Error::Validation(format!(
                    "frame entry Q[{},{}] has a pole off the divisor",
                    r + 1,
                    c + 1
                )));
            }
        }
        for (r, c, e) in gauge.inverse().entries() {
            let holo = chart.divisor().iter().all(|d| order_along(e, d).is_at_least(0)) && chart.pole_free_off_divisor(e.den());
            if !holo {
                return Err(Error::Validation(format!(
                    "frame inverse entry Q⁻¹[{},{}] is not holomorphic",
                    r + 1,
                    c + 1
                )));
            }
        }
        Ok(Self { gauge })
    }

    pub fn identity(chart: &Chart) -> Self {
        let n = chart.nvars();
        Self {
            gauge: GaugeMatrix::identity(n, n),
        }
    }

    pub fn gauge(&self) -> &GaugeMatrix {
        &self.gauge
    }

    pub fn q(&self) -> &RatMatrix {
        self.gauge.q()
    }

    pub fn inverse(&self) -> &RatMatrix {
        self.gauge.inverse()
    }
}

/// The one-form `Σ dzᵢ ⊗ Aᵢ` of a rank-`r` system on a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMeromorphicSystem {
    chart: Chart,
    rank: usize,
    matrices: Vec<RatMatrix>,
}

impl LinearMeromorphicSystem {
    pub fn new(chart: Chart, matrices: Vec<RatMatrix>) -> Result<Self> {
        let n = chart.nvars();
        if matrices.len() != n {
            return Err(Error::Validation(format!(
                "expected {n} coefficient matrices, got {}",
                matrices.len()
            )));
        }
        let rank = matrices.first().map(|m| m.rows()).unwrap_or(0);
        if matrices.iter().any(|m| m.rows() != rank || m.cols() != rank || m.nvars() != n) {
            return Err(Error::Validation(
                "coefficient matrices must be square, of equal rank, over the chart".into(),
            ));
        }
        Ok(Self { chart, rank, matrices })
    }

    pub fn zero(chart: Chart, rank: usize) -> Self {
        let n = chart.nvars();
        Self {
            matrices: vec![RatMatrix::zeros(rank, rank, n); n],
            chart,
            rank,
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nvars(&self) -> usize {
        self.chart.nvars()
    }

    pub fn matrices(&self) -> &[RatMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, i: usize) -> &RatMatrix {
        &self.matrices[i]
    }

    pub fn is_zero(&self) -> bool {
        self.matrices.iter().all(|m| m.is_zero())
    }

    /// Every entry has its poles on the divisor.
    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.matrices.iter().enumerate() {
            for (r, c, e) in m.entries() {
                if !self.chart.pole_free_off_divisor(e.den()) {
                    return Err(Error::Validation(format!(
                        "entry ({},{}) of A{} has a pole off the divisor",
                        r + 1,
                        c + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Vec<CompiledMatrix> {
        self.matrices.iter().map(CompiledMatrix::new).collect()
    }

    /// Pulls the form back along `z = images(y)` into `target`.
    pub fn pullback_map(&self, images: &[RationalFn], target: Chart) -> LinearMeromorphicSystem {
        let m = target.nvars();
        let composed: Vec<RatMatrix> = self.matrices.iter().map(|a| a.compose(images)).collect();
        let matrices = (0..m)
            .map(|a| {
                let mut acc = RatMatrix::zeros(self.rank, self.rank, m);
                for (i, ai) in composed.iter().enumerate() {
                    let d = images[i].partial(a);
                    if !d.is_zero() && !ai.is_zero() {
                        acc = acc.add(&ai.scale(&d));
                    }
                }
                acc
            })
            .collect();
        LinearMeromorphicSystem {
            chart: target,
            rank: self.rank,
            matrices,
        }
    }

    pub fn straighten(&self, s: &Straightening) -> LinearMeromorphicSystem {
        let divisor = self
            .chart
            .divisor()
            .iter()
            .map(|d| crate::rational::DivisorComponent::new(d.poly().compose(&s.inverse), d.multiplicity()))
            .collect::<Result<Vec<_>>>()
            .expect("straightening keeps components non-constant");
        self.pullback_map(&s.inverse_as_rational(), self.chart.with_divisor(divisor))
    }
}

/// `A'ᵢ = Q⁻¹∂ᵢQ + Q⁻¹AᵢQ`.
pub fn gauge_transform(system: &LinearMeromorphicSystem, q: &GaugeMatrix) -> LinearMeromorphicSystem {
    assert_eq!(q.size(), system.rank, "gauge size must equal system rank");
    let matrices = system
        .matrices
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let dq = q.inverse().mul(&q.q().partial(i));
            if a.is_zero() {
                dq
            } else {
                dq.add(&q.inverse().mul(a).mul(q.q()))
            }
        })
        .collect();
    LinearMeromorphicSystem {
        chart: system.chart.clone(),
        rank: system.rank,
        matrices,
    }
}

/// `T^k_{ij} = Γ^k_{ij} − Γ^k_{ji}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionTensor {
    n: usize,
    t: Vec<RationalFn>,
}

impl TorsionTensor {
    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &RationalFn {
        &self.t[k * self.n * self.n + i * self.n + j]
    }

    pub fn is_zero(&self) -> bool {
        self.t.iter().all(|e| e.is_zero())
    }

    /// Nonzero components with `i < j`.
    pub fn nonzero(&self) -> Vec<((usize, usize, usize), RationalFn)> {
        let n = self.n;
        let mut out = Vec::new();
        for k in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    let v = self.get(k, i, j);
                    if !v.is_zero() {
                        out.push(((k, i, j), v.clone()));
                    }
                }
            }
        }
        out
    }
}

pub fn torsion(conn: &ChartConnection) -> TorsionTensor {
    let n = conn.nvars();
    let mut t = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                t.push(conn.gamma(k, i, j).sub(conn.gamma(k, j, i)));
            }
        }
    }
    TorsionTensor { n, t }
}

/// `R_{ij} = ∂ᵢAⱼ − ∂ⱼAᵢ + [Aᵢ, Aⱼ]`, stored for `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureTensor {
    n: usize,
    rank: usize,
    pairs: Vec<RatMatrix>,
}

impl CurvatureTensor {
    fn pair_index(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The matrix `R_{ij}`; antisymmetric in `(i, j)`.
    pub fn matrix(&self, i: usize, j: usize) -> RatMatrix {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.pairs[Self::pair_index(self.n, i, j)].clone(),
            Greater => self.pairs[Self::pair_index(self.n, j, i)].neg(),
            Equal => RatMatrix::zeros(self.rank, self.rank, self.n),
        }
    }

    /// `R^k_{l,ij}`.
    pub fn component(&self, k: usize, l: usize, i: usize, j: usize) -> RationalFn {
        self.matrix(i, j).get(k, l).clone()
    }

    pub fn is_zero(&self) -> bool {
        self.pairs.iter().all(|m| m.is_zero())
    }

    /// Applies `M ↦ P·M·S` to every component.
    pub fn conjugate(&self, p: &RatMatrix, s: &RatMatrix) -> CurvatureTensor {
        CurvatureTensor {
            n: self.n,
            rank: self.rank,
            pairs: self.pairs.iter().map(|m| p.mul(m).mul(s)).collect(),
        }
    }

    /// Nonzero components `((k, l, i, j), value)` with `i < j`.
    pub fn nonzero(&self) -> Vec<((usize, usize, usize, usize), RationalFn)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let m = &self.pairs[Self::pair_index(self.n, i, j)];
                for (k, l, v) in m.entries() {
                    if !v.is_zero() {
                        out.push(((k, l, i, j), v.clone()));
                    }
                }
            }
        }
        out
    }
}

pub fn curvature(system: &LinearMeromorphicSystem) -> CurvatureTensor {
    let n = system.nvars();
    let a = &system.matrices;
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(a[j].partial(i).sub(&a[i].partial(j)).add(&a[i].commutator(&a[j])));
        }
    }
    CurvatureTensor {
        n,
        rank: system.rank,
        pairs,
    }
}
