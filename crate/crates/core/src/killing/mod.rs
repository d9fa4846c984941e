//! Infinitesimal automorphisms: the prolonged Killing system on the chart,
//! its local system of horizontal jets, and transport of Killing fields.
//!
//! A jet `s = (X, A)` has `A^k_j = ∂ⱼX^k` and is stored as the vector
//! `[X⁰ … X^{n−1}, A^0_0, A^0_1, …]`, translations first and then `A` row-major.

mod oracle;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Serialize, Serializer};

pub use oracle::{killing_ansatz, killing_oracle, AnsatzOptions, AnsatzResult, KillingOracleResult};

use crate::connection::{curvature, ChartConnection, LinearMeromorphicSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, CVector};
use crate::path::{CompiledSystem, Path, TransportOptions};
use crate::rational::{RatMatrix, RationalFn, DEFAULT_EVAL_FLOOR};

/// Numeric rank threshold on singular values of unit-normalized obstruction rows.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct KillingJet {
    n: usize,
    values: Vec<Complex64>,
}

fn serialize_complex<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

impl Serialize for KillingJet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            #[serde(serialize_with = "serialize_complex")]
            x: &'a [Complex64],
            #[serde(serialize_with = "serialize_complex")]
            a: &'a [Complex64],
        }
        Repr {
            x: self.x(),
            a: &self.values[self.n..],
        }
        .serialize(s)
    }
}

impl KillingJet {
    pub fn from_vector(n: usize, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), n + n * n, "jet has wrong length");
        Self { n, values }
    }

    pub fn new(x: &[Complex64], a: &DMatrix<Complex64>) -> Self {
        let n = x.len();
        let mut values = x.to_vec();
        for k in 0..n {
            for j in 0..n {
                values.push(a[(k, j)]);
            }
        }
        Self { n, values }
    }

    /// Jet `(X(p), ∂X(p))` of a rational field.
    pub fn of_field(field: &[RationalFn], point: &[Complex64]) -> Result<Self> {
        let n = field.len();
        let mut values = Vec::with_capacity(n + n * n);
        for f in field {
            values.push(f.eval(point)?);
        }
        for f in field {
            for j in 0..n {
                values.push(f.partial(j).eval(point)?);
            }
        }
        Ok(Self { n, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn x(&self) -> &[Complex64] {
        &self.values[..self.n]
    }

    /// `A^k_j`.
    pub fn a(&self, k: usize, j: usize) -> Complex64 {
        self.values[self.n + k * self.n + j]
    }

    pub fn as_vector(&self) -> CVector {
        CVector::from_column_slice(&self.values)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_difference(&self, o: &Self) -> f64 {
        self.values.iter().zip(&o.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// The rank-`(n+n²)` system whose horizontal sections are Killing jets.
#[derive(Clone, Debug)]
pub struct ProlongedSystem {
    base: LinearMeromorphicSystem,
    n: usize,
}

fn a_index(n: usize, k: usize, j: usize) -> usize {
    n + k * n + j
}

/// Assembles `Ωᵢ` with `∂ᵢs + Ωᵢs = 0`.
///
/// The `X`-block reads `∂ᵢX^k = A^k_i`; the `A`-block is the Killing equation
/// solved for `∂ᵢA^k_j = ∂ᵢ∂ⱼX^k`.
#[allow(clippy::needless_range_loop)]
pub fn build_prolonged_system(conn: &ChartConnection) -> ProlongedSystem {
    let n = conn.nvars();
    let nv = n;
    let rank = n + n * n;
    let dgamma: Vec<Vec<RationalFn>> = (0..n * n * n)
        .map(|idx| {
            let (k, i, j) = (idx / (n * n), (idx / n) % n, idx % n);
            (0..n).map(|m| conn.gamma(k, i, j).partial(m)).collect()
        })
        .collect();
    let matrices = (0..n)
        .map(|i| {
            let mut om = RatMatrix::zeros(rank, rank, nv);
            let mut add = |r: usize, c: usize, v: &RationalFn| {
                if !v.is_zero() {
                    let cur = om.get(r, c).add(v);
                    om.set(r, c, cur);
                }
            };
            for k in 0..n {
                add(k, a_index(n, k, i), &RationalFn::int(nv, -1));
            }
            for k in 0..n {
                for j in 0..n {
                    let row = a_index(n, k, j);
                    for m in 0..n {
                        add(row, m, &dgamma[k * n * n + i * n + j][m]);
                        add(row, a_index(n, k, m), &conn.gamma(m, i, j).neg());
                        add(row, a_index(n, m, i), conn.gamma(k, m, j));
                        add(row, a_index(n, m, j), conn.gamma(k, i, m));
                    }
                }
            }
            om
        })
        .collect();
    let base = LinearMeromorphicSystem::new(conn.chart().clone(), matrices).expect("prolonged matrices are well formed");
    ProlongedSystem { base, n }
}

impl ProlongedSystem {
    pub fn base(&self) -> &LinearMeromorphicSystem {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.base.rank()
    }

    /// Symbolic jet `(X, ∂X)`.
    pub fn symbolic_jet(&self, field: &[RationalFn]) -> Vec<RationalFn> {
        let n = self.n;
        let mut s: Vec<RationalFn> = field.to_vec();
        for f in field {
            for j in 0..n {
                s.push(f.partial(j));
            }
        }
        s
    }

    /// Exact check that `(X, ∂X)` satisfies `∂ᵢs + Ωᵢs = 0` for every `i`.
    pub fn jet_is_horizontal(&self, field: &[RationalFn]) -> bool {
        let s = self.symbolic_jet(field);
        (0..self.n).all(|i| {
            let om = self.base.matrix(i).apply(&s);
            s.iter().zip(&om).all(|(sk, ok)| sk.partial(i).add(ok).is_zero())
        })
    }

    /// Largest `|∂ᵢs + Ωᵢs|` at `point` for the jet of `field`.
    pub fn jet_residual_at(&self, field: &[RationalFn], point: &[Complex64]) -> Result<f64> {
        let s = self.symbolic_jet(field);
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let om = self.base.matrix(i).apply(&s);
            for (sk, ok) in s.iter().zip(&om) {
                worst = worst.max(sk.partial(i).add(ok).eval(point)?.norm());
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KillingSubspace {
    #[serde(serialize_with = "serialize_complex")]
    pub basepoint: Vec<Complex64>,
    pub basis: Vec<KillingJet>,
    /// Rank of the accumulated obstructions at the basepoint, per iteration.
    pub obstruction_ranks: Vec<usize>,
    /// Dimension of the same construction at an independent random point.
    pub second_point_dimension: usize,
}

impl KillingSubspace {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Whether the basepoint rank agrees with the independent point.
    pub fn basepoint_is_generic(&self) -> bool {
        self.second_point_dimension == self.basis.len()
    }

    pub fn vectors(&self) -> Vec<CVector> {
        self.basis.iter().map(KillingJet::as_vector).collect()
    }

    /// Distance of `jet` from the span of the basis.
    pub fn distance(&self, jet: &KillingJet) -> f64 {
        linalg::distance_to_span(&jet.as_vector(), &self.vectors())
    }
}

fn eval_row(row: &[RationalFn], point: &[Complex64]) -> Result<CVector> {
    let mut v = CVector::zeros(row.len());
    for (k, f) in row.iter().enumerate() {
        v[k] = f.eval_with_floor(point, DEFAULT_EVAL_FLOOR)?;
    }
    Ok(v)
}

fn unit(v: CVector) -> Option<CVector> {
    let nrm = v.norm();
    (nrm > 1e-300).then(|| v / Complex64::new(nrm, 0.0))
}

fn stacked(rows: &[CVector], ncols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c])
}

/// Row functionals `φ` annihilating horizontal jets, closed under `φ ↦ ∂ₖφ − φΩₖ`.
struct Obstructions {
    omega_cols: Vec<Vec<Vec<(usize, RationalFn)>>>,
    kept: Vec<Vec<RationalFn>>,
    probe: Vec<Complex64>,
    probe_span: Vec<CVector>,
}

impl Obstructions {
    fn new(system: &ProlongedSystem, probe: Vec<Complex64>) -> Self {
        let r = system.rank();
        let omega_cols = system
            .base
            .matrices()
            .iter()
            .map(|m| {
                (0..r)
                    .map(|c| {
                        (0..r)
                            .filter(|&k| !m.get(k, c).is_zero())
                            .map(|k| (k, m.get(k, c).clone()))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            omega_cols,
            kept: Vec::new(),
            probe,
            probe_span: Vec::new(),
        }
    }

    fn derivative(&self, row: &[RationalFn], k: usize) -> Vec<RationalFn> {
        (0..row.len())
            .map(|c| {
                let mut v = row[c].partial(k);
                for (m, om) in &self.omega_cols[k][c] {
                    if !row[*m].is_zero() {
                        v = v.sub(&row[*m].mul(om));
                    }
                }
                v
            })
            .collect()
    }

    /// Keeps the candidates that raise the rank at the probe point; returns them.
    fn absorb(&mut self, candidates: Vec<Vec<RationalFn>>) -> Result<Vec<Vec<RationalFn>>> {
        let mut added = Vec::new();
        for row in candidates {
            if row.iter().all(RationalFn::is_zero) {
                continue;
            }
            let Some(v) = unit(eval_row(&row, &self.probe)?) else {
                continue;
            };
            if linalg::distance_to_span(&v, &self.probe_span) > RANK_TOL {
                self.probe_span = linalg::orthonormalize(&[self.probe_span.clone(), vec![v]].concat(), RANK_TOL);
                self.kept.push(row.clone());
                added.push(row);
            }
        }
        Ok(added)
    }

    fn rows_at(&self, point: &[Complex64]) -> Result<Vec<CVector>> {
        let mut out = Vec::new();
        for row in &self.kept {
            if let Some(v) = unit(eval_row(row, point)?) {
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Horizontal jets at `basepoint`: the joint kernel of the curvature of the
/// prolonged system and its iterated covariant derivatives.
pub fn killing_subspace_at<R: Rng>(prolonged: &ProlongedSystem, basepoint: &[Complex64], rng: &mut R) -> Result<KillingSubspace> {
    let chart = prolonged.base.chart();
    let d = chart.divisor_distance(basepoint);
    if d < 1e-8 {
        return Err(Error::NearPoleEvaluation { modulus: d });
    }
    let n = prolonged.n;
    let r = prolonged.rank();
    let probe = chart.random_point_off_divisor(rng, 1.0, 0.25);
    let mut obs = Obstructions::new(prolonged, probe);

    let curv = curvature(&prolonged.base);
    let mut level = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let m = curv.matrix(i, j);
            for row in 0..r {
                level.push((0..r).map(|c| m.get(row, c).clone()).collect::<Vec<_>>());
            }
        }
    }
    let mut frontier = obs.absorb(level)?;
    let cap = r;
    let mut ranks = vec![linalg::rank(&stacked(&obs.rows_at(basepoint)?, r), RANK_TOL)];
    let mut iterations = 0;
    while !frontier.is_empty() {
        iterations += 1;
        if iterations > cap {
            return Err(Error::NoStabilization { iterations: cap });
        }
        let candidates: Vec<Vec<RationalFn>> = frontier
            .iter()
            .flat_map(|row| (0..n).map(|k| obs.derivative(row, k)).collect::<Vec<_>>())
            .collect();
        frontier = obs.absorb(candidates)?;
        ranks.push(linalg::rank(&stacked(&obs.rows_at(basepoint)?, r), RANK_TOL));
    }

    let kernel = |rows: Vec<CVector>| linalg::null_space(&stacked(&rows, r), RANK_TOL);
    let basis = kernel(obs.rows_at(basepoint)?)
        .into_iter()
        .map(|v| KillingJet::from_vector(n, v.iter().copied().collect()))
        .collect();
    let second = kernel(obs.rows_at(&obs.probe.clone())?).len();
    Ok(KillingSubspace {
        basepoint: basepoint.to_vec(),
        basis,
        obstruction_ranks: ranks,
        second_point_dimension: second,
    })
}

/// Transport operator of the prolonged system along `path`.
#[derive(Clone, Debug)]
pub struct KillingTransport {
    compiled: CompiledSystem,
    n: usize,
    pub options: TransportOptions,
}

impl KillingTransport {
    pub fn new(prolonged: &ProlongedSystem) -> Self {
        Self {
            compiled: CompiledSystem::new(&prolonged.base),
            n: prolonged.n,
            options: TransportOptions::default(),
        }
    }

    pub fn transport(&self, path: &Path, jet: &KillingJet) -> Result<KillingJet> {
        let init = DMatrix::from_column_slice(jet.values.len(), 1, &jet.values);
        let t = self.compiled.transport(path, &init, &self.options)?;
        Ok(KillingJet::from_vector(self.n, t.end.iter().copied().collect()))
    }

    /// Full `(n+n²)`-square transport matrix.
    pub fn transport_matrix(&self, path: &Path) -> Result<DMatrix<Complex64>> {
        let r = self.compiled.rank();
        Ok(self.compiled.transport(path, &DMatrix::identity(r, r), &self.options)?.end)
    }

    pub fn evaluate(&self, path: &Path, jet: &KillingJet) -> Result<Vec<FieldSample>> {
        let init = DMatrix::from_column_slice(jet.values.len(), 1, &jet.values);
        let t = self.compiled.transport(path, &init, &self.options)?;
        Ok(t.samples
            .into_iter()
            .map(|(point, s)| FieldSample {
                point,
                x: s.iter().take(self.n).copied().collect(),
            })
            .collect())
    }
}

pub fn transport_killing_jet(prolonged: &ProlongedSystem, path: &Path, jet: &KillingJet) -> Result<KillingJet> {
    KillingTransport::new(prolonged).transport(path, jet)
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldSample {
    #[serde(serialize_with = "serialize_complex")]
    pub point: Vec<Complex64>,
    #[serde(serialize_with = "serialize_complex")]
    pub x: Vec<Complex64>,
}

/// Values of the Killing field with jet `jet` at the path start, along `path`.
pub fn evaluate_killing_field(prolonged: &ProlongedSystem, jet: &KillingJet, path: &Path) -> Result<Vec<FieldSample>> {
    KillingTransport::new(prolonged).evaluate(path, jet)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::f64::consts::TAU;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::path::PathSegment;
    use crate::rational::{parse_rational, Chart, DivisorComponent, MultiPoly};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("z{i}")).collect()
    }

    fn field(n: usize, xs: &[&str]) -> Vec<RationalFn> {
        xs.iter().map(|s| parse_rational(s, &names(n), &BTreeMap::new()).unwrap()).collect()
    }

    fn flat2() -> ChartConnection {
        ChartConnection::flat(Chart::standard(2, vec![]).unwrap())
    }

    fn hopf() -> ChartConnection {
        let chart = Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap();
        let mut conn = ChartConnection::flat(chart);
        conn.set_gamma(0, 0, 0, field(2, &["1/z1"]).remove(0));
        conn
    }

    fn scalar(lambda: &str) -> ChartConnection {
        let chart = Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap();
        let mut conn = ChartConnection::flat(chart);
        let f = field(2, &[&format!("({lambda})/z1")]).remove(0);
        conn.set_gamma(0, 0, 0, f.clone());
        conn.set_gamma(1, 0, 1, f);
        conn
    }

    fn heisenberg() -> ChartConnection {
        let chart = Chart::standard(3, vec![]).unwrap();
        let mut conn = ChartConnection::flat(chart);
        conn.set_gamma(2, 1, 0, RationalFn::int(3, -1));
        conn
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn oracle_examples() {
        assert!(killing_oracle(&flat2(), &field(2, &["1", "0"])).is_killing);
        assert!(!killing_oracle(&flat2(), &field(2, &["z1^2", "0"])).is_killing);
        assert!(killing_oracle(&hopf(), &field(2, &["z1", "0"])).is_killing);
        for x in [["z1", "z2"], ["z2", "-z1"], ["3 + z2", "z1 - 2*z2"]] {
            assert!(killing_oracle(&flat2(), &field(2, &x)).is_killing);
        }
    }

    #[test]
    fn ansatz_counts() {
        let opts = AnsatzOptions::default();
        assert_eq!(killing_ansatz(&flat2(), &opts).dimension(), 6);
        let hopf_fields = killing_ansatz(&hopf(), &opts);
        assert_eq!(hopf_fields.dimension(), 6);
        for f in &hopf_fields.fields {
            assert!(killing_oracle(&hopf(), f).is_killing);
        }
        let h = killing_ansatz(&heisenberg(), &opts);
        assert!(h.dimension() >= 3);
    }

    #[test]
    fn prolongation_agrees_with_oracle() {
        for conn in [flat2(), hopf(), scalar("1/2"), heisenberg()] {
            let sys = build_prolonged_system(&conn);
            for f in killing_ansatz(&conn, &AnsatzOptions::default()).fields {
                assert!(sys.jet_is_horizontal(&f));
            }
        }
        let sys = build_prolonged_system(&flat2());
        assert!(!sys.jet_is_horizontal(&field(2, &["z1^2", "0"])));
        assert!(sys.base().matrices().iter().all(|m| m.entries().all(|(_, _, v)| v.is_constant())));
        let scalar_sys = build_prolonged_system(&scalar("1/3"));
        for m in scalar_sys.base().matrices() {
            for (_, _, v) in m.entries() {
                assert!(v.den().is_constant() || *v.den() == MultiPoly::var(2, 0).pow(v.den().total_degree()));
            }
        }
    }

    #[test]
    fn subspace_dimensions_match_oracle() {
        let opts = AnsatzOptions::default();
        let cases: Vec<(ChartConnection, Vec<Complex64>)> = vec![
            (flat2(), vec![c(1.0, 0.0), c(1.0, 0.0)]),
            (hopf(), vec![c(1.0, 0.0), c(1.0, 0.0)]),
            (heisenberg(), vec![c(0.0, 0.0); 3]),
        ];
        for (conn, p) in cases {
            let sys = build_prolonged_system(&conn);
            let sub = killing_subspace_at(&sys, &p, &mut rng()).unwrap();
            let oracle = killing_ansatz(&conn, &opts);
            assert_eq!(sub.dimension(), oracle.dimension());
            assert!(sub.basepoint_is_generic());
            for f in &oracle.fields {
                assert!(sub.distance(&KillingJet::of_field(f, &p).unwrap()) < 1e-9);
            }
        }
    }

    #[test]
    fn near_pole_basepoint_is_refused() {
        let sys = build_prolonged_system(&hopf());
        assert!(matches!(
            killing_subspace_at(&sys, &[c(0.0, 0.0), c(1.0, 0.0)], &mut rng()),
            Err(Error::NearPoleEvaluation { .. })
        ));
    }

    fn line(a: [f64; 2], b: [f64; 2]) -> Path {
        Path::polyline(&[vec![c(a[0], 0.0), c(a[1], 0.0)], vec![c(b[0], 0.0), c(b[1], 0.0)]]).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let hopf_sys = build_prolonged_system(&hopf());
        let jet = KillingJet::of_field(&field(2, &["z1", "0"]), &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let samples = evaluate_killing_field(&hopf_sys, &jet, &line([1.0, 1.0], [2.0, 1.0])).unwrap();
        let end = &samples.last().unwrap().x;
        assert!((end[0] - c(2.0, 0.0)).norm() < 1e-7 && end[1].norm() < 1e-7);

        let flat_sys = build_prolonged_system(&flat2());
        let rot = KillingJet::of_field(&field(2, &["-z2", "z1"]), &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let samples = evaluate_killing_field(&flat_sys, &rot, &line([1.0, 0.0], [0.0, 1.0])).unwrap();
        let end = &samples.last().unwrap().x;
        assert!((end[0] - c(-1.0, 0.0)).norm() < 1e-7 && end[1].norm() < 1e-7);

        let tr = KillingJet::of_field(&field(2, &["1", "0"]), &[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        for s in evaluate_killing_field(&flat_sys, &tr, &line([0.0, 0.0], [1.0, 3.0])).unwrap() {
            assert!((s.x[0] - c(1.0, 0.0)).norm() < 1e-12 && s.x[1].norm() < 1e-12);
        }
    }

    fn hopf_loop() -> Path {
        Path::new(vec![PathSegment::Arc {
            base: vec![c(1.0, 0.0), c(1.0, 0.0)],
            var: 0,
            center: c(0.0, 0.0),
            radius: 1.0,
            start_angle: 0.0,
            sweep: TAU,
        }])
        .unwrap()
    }

    #[test]
    fn hopf_loop_is_trivial_on_killing_jets() {
        let sys = build_prolonged_system(&hopf());
        let p = [c(1.0, 0.0), c(1.0, 0.0)];
        let sub = killing_subspace_at(&sys, &p, &mut rng()).unwrap();
        let tr = KillingTransport::new(&sys);
        for jet in &sub.basis {
            let back = tr.transport(&hopf_loop(), jet).unwrap();
            assert!(back.max_difference(jet) < 1e-6);
        }
        let flat = build_prolonged_system(&flat2());
        let m = KillingTransport::new(&flat).transport_matrix(&hopf_loop()).unwrap();
        assert!((m - DMatrix::identity(6, 6)).norm() < 1e-9);
    }
}
