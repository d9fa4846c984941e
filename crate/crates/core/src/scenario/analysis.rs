use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::report::{AnalysisReport, ChartEcho, Failure, Section, Tool, Trace, Verdict, SCHEMA_VERSION};
use super::spec::Scenario;
use crate::connection::{curvature, is_branched, torsion, tractor_curvature_trace};
use crate::error::{Error, Result};
use crate::geodesic::{
    distinguished_field, integrate_geodesic, spiral_verdict, ComponentSpiralVerdict, CurveOptions, FrameBundlePoint, GeodesicOptions,
    GeodesicState, SpiralOptions,
};
use crate::killing::{
    build_prolonged_system, killing_ansatz, killing_subspace_at, AnsatzOptions, KillingSubspace, ProlongedSystem, RANK_TOL,
};
use crate::linalg::CVector;
use crate::monodromy::{
    extension_property, isolating_loop, monodromy_with, quotient_monodromy, residue_criterion, ExtensionOptions, ResidueOptions,
};
use crate::ode::IntegratorOptions;
use crate::path::{CompiledSystem, TransportOptions};
use crate::rational::GaussianRational;

/// Numeric thresholds; every verdict echoes the one it used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub integrator: f64,
    pub transport: f64,
    pub identity: f64,
    pub invariance: f64,
    pub integer: f64,
    pub crossing: f64,
    pub transversality: f64,
    pub rank: f64,
    pub loop_radius: f64,
    pub spiral_budget: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            integrator: 1e-10,
            transport: 1e-11,
            identity: 1e-6,
            invariance: 1e-6,
            integer: 1e-8,
            crossing: 1e-9,
            transversality: 1e-8,
            rank: RANK_TOL,
            loop_radius: 0.5,
            spiral_budget: 64,
        }
    }
}

impl Tolerances {
    /// Applies `key=value` pairs separated by commas.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("tolerance override `{item}` is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite() && *x > 0.0)
                    .ok_or_else(|| Error::Validation(format!("tolerance `{k}` needs a positive number, got `{v}`")))
            };
            match k {
                "integrator" => self.integrator = num()?,
                "transport" => self.transport = num()?,
                "identity" => self.identity = num()?,
                "invariance" => self.invariance = num()?,
                "integer" => self.integer = num()?,
                "crossing" => self.crossing = num()?,
                "transversality" => self.transversality = num()?,
                "loop_radius" => self.loop_radius = num()?,
                "spiral_budget" => {
                    self.spiral_budget = v
                        .parse()
                        .map_err(|_| Error::Validation(format!("spiral_budget needs an integer, got `{v}`")))?
                }
                "rank" => return Err(Error::Validation("the rank threshold is fixed at 1e-9".into())),
                _ => return Err(Error::Validation(format!("unknown tolerance `{k}`"))),
            }
        }
        Ok(self)
    }

    fn curve(&self, s_end: f64) -> CurveOptions {
        CurveOptions {
            s_end,
            integrator: IntegratorOptions::default().with_tolerance(self.integrator),
            crossing_tol: self.crossing,
            transversality_tol: self.transversality,
        }
    }

    fn spiral(&self) -> SpiralOptions {
        SpiralOptions {
            budget: self.spiral_budget,
            curve: self.curve(CurveOptions::default().s_end),
            ..SpiralOptions::default()
        }
    }

    fn transport(&self) -> TransportOptions {
        let d = TransportOptions::default();
        TransportOptions {
            integrator: d.integrator.with_tolerance(self.transport),
            ..d
        }
    }

    fn extension(&self) -> ExtensionOptions {
        ExtensionOptions {
            radius: self.loop_radius,
            identity_tol: self.identity,
            invariance_tol: self.invariance,
            transport: self.transport(),
            residue: ResidueOptions {
                integer_tol: self.integer,
                ..ResidueOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicRequest {
    pub velocity: Vec<Complex64>,
    pub t_end: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistinguishedRequest {
    pub direction: Vec<GaussianRational>,
    pub s_end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonodromySystem {
    Connection,
    Killing,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Analyze,
    Torsion,
    Curvature,
    Geodesic(GeodesicRequest),
    Distinguished(DistinguishedRequest),
    Spiral,
    Killing,
    Monodromy(MonodromySystem),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Torsion => "torsion",
            Command::Curvature => "curvature",
            Command::Geodesic(_) => "geodesic",
            Command::Distinguished(_) => "distinguished",
            Command::Spiral => "spiral",
            Command::Killing => "killing",
            Command::Monodromy(MonodromySystem::Connection) => "monodromy --system connection",
            Command::Monodromy(MonodromySystem::Killing) => "monodromy --system killing",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AnalysisOptions {
    pub seed: u64,
    pub tolerances: Tolerances,
}

/// Random streams: one per job, so the outcome does not depend on scheduling.
const STREAM_KILLING: u64 = 1;
const STREAM_SPIRAL: u64 = 16;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report data serializes")
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

struct Builder<'a> {
    scenario: &'a Scenario,
    opts: AnalysisOptions,
    verdicts: Vec<Verdict>,
    sections: Vec<Section>,
    failures: Vec<Failure>,
    traces: Vec<Trace>,
}

impl<'a> Builder<'a> {
    fn verdict(&mut self, key: impl Into<String>, value: impl Into<Value>, operation: &str, tolerance: Option<f64>) {
        self.verdicts.push(Verdict {
            key: key.into(),
            value: value.into(),
            operation: operation.to_string(),
            tolerance,
        });
    }

    fn section(&mut self, name: &str, operation: &str, data: Value) {
        self.sections.push(Section {
            name: name.to_string(),
            operation: operation.to_string(),
            data,
        });
    }

    fn fail(&mut self, stage: &str, e: &Error) {
        self.failures.push(Failure {
            stage: stage.to_string(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        });
    }

    fn names(&self) -> &[String] {
        self.scenario.chart().var_names()
    }

    fn torsion(&mut self) {
        let t = torsion(&self.scenario.connection);
        let names = self.names().to_vec();
        let nonzero: Vec<Value> = t
            .nonzero()
            .into_iter()
            .map(|((k, i, j), v)| json!({"index": [k + 1, i + 1, j + 1], "value": v.display_with(&names).to_string()}))
            .collect();
        let constant = t.nonzero().iter().all(|(_, v)| v.is_constant());
        self.verdict("torsion_zero", t.is_zero(), "torsion", None);
        self.verdict("torsion_constant", constant, "torsion", None);
        self.section("torsion", "torsion", json!({"zero": t.is_zero(), "nonzero": nonzero}));
    }

    fn curvature(&mut self) {
        let r = curvature(&self.scenario.connection.connection_form());
        let names = self.names().to_vec();
        let nonzero: Vec<Value> = r
            .nonzero()
            .into_iter()
            .map(|((k, l, i, j), v)| json!({"index": [k + 1, l + 1, i + 1, j + 1], "value": v.display_with(&names).to_string()}))
            .collect();
        self.verdict("curvature_zero", r.is_zero(), "curvature", None);
        self.section("curvature", "curvature", json!({"zero": r.is_zero(), "nonzero": nonzero}));
    }

    fn branched(&mut self) {
        let sc = self.scenario;
        let b = is_branched(&sc.connection, &sc.frame);
        self.verdict("branched", b.branched, "is_branched", None);
        let mut data = json!({"branched": b.branched, "offending": b.offending});
        if b.branched {
            match tractor_curvature_trace(&sc.connection, &sc.frame) {
                Ok(tr) => {
                    self.verdict("tractor_trace_zero", tr.is_zero(), "tractor_curvature_trace", None);
                    data["tractor_trace_zero"] = json!(tr.is_zero());
                }
                Err(e) => self.fail("tractor_curvature_trace", &e),
            }
        }
        self.section("branched", "is_branched", data);
    }

    fn spiral(&mut self) -> Vec<Option<ComponentSpiralVerdict>> {
        let sc = self.scenario;
        let ncomp = sc.chart().divisor().len();
        let opts = self.opts.tolerances.spiral();
        let seed = self.opts.seed;
        let comps: Vec<usize> = (0..ncomp).collect();
        let results = par_map(&comps, |&c| {
            let mut rng = rng_for(seed, STREAM_SPIRAL + c as u64);
            spiral_verdict(&sc.connection, &sc.frame, c, &opts, &mut rng)
        });
        let tol = self.opts.tolerances;
        let mut out = Vec::new();
        let mut data = Vec::new();
        for (c, r) in results.into_iter().enumerate() {
            let k = c + 1;
            match r {
                Ok(v) => {
                    self.verdict(
                        format!("spiral_witness.{k}"),
                        v.witness.is_some(),
                        "spiral_search",
                        Some(tol.transversality),
                    );
                    if let Some(w) = &v.witness {
                        let dir = w.direction.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",");
                        self.verdict(format!("spiral_direction.{k}"), dir, "spiral_search", None);
                        self.verdict(
                            format!("crossing_derivative.{k}"),
                            w.crossing.derivative.norm(),
                            "spiral_search",
                            Some(tol.transversality),
                        );
                    }
                    for (d, s) in v.strong_spiral.iter().enumerate() {
                        self.verdict(format!("strong_spiral.{k}.e{}", d + 1), *s, "strong_spiral_test", None);
                    }
                    self.verdict(format!("strongly_spiral.{k}"), v.strongly_spiral, "strong_spiral_test", None);
                    if let Some(a) = v.in_a01 {
                        self.verdict(format!("in_a01.{k}"), a, "classify_a01", None);
                    }
                    data.push(to_value(&v));
                    out.push(Some(v));
                }
                Err(Error::NotBranched { reason }) => {
                    self.verdict(format!("spiral_witness.{k}"), "not applicable", "spiral_search", None);
                    if let Ok(a) = crate::geodesic::classify_a01(&sc.connection, c) {
                        self.verdict(format!("in_a01.{k}"), a, "classify_a01", None);
                    }
                    data.push(json!({"component": sc.chart().component_label(c), "not_applicable": reason}));
                    out.push(None);
                }
                Err(e) => {
                    self.fail(&format!("spiral component {k}"), &e);
                    data.push(json!({"component": sc.chart().component_label(c), "error": e.to_string()}));
                    out.push(None);
                }
            }
        }
        self.section("spiral", "spiral_verdict", Value::Array(data));
        out
    }

    fn killing(&mut self) -> Option<(ProlongedSystem, KillingSubspace)> {
        let sc = self.scenario;
        let prolonged = build_prolonged_system(&sc.connection);
        let mut rng = rng_for(self.opts.seed, STREAM_KILLING);
        let sub = match killing_subspace_at(&prolonged, &sc.basepoint, &mut rng) {
            Ok(s) => s,
            Err(e) => {
                self.fail("killing_subspace_at", &e);
                return None;
            }
        };
        let oracle = killing_ansatz(&sc.connection, &AnsatzOptions::default());
        let names = self.names().to_vec();
        let oracle_fields: Vec<Vec<String>> = oracle
            .fields
            .iter()
            .map(|f| f.iter().map(|x| x.display_with(&names).to_string()).collect())
            .collect();
        let tol = self.opts.tolerances.rank;
        self.verdict("killing_dimension", sub.dimension(), "killing_subspace_at", Some(tol));
        self.verdict("killing_oracle_dimension", oracle.dimension(), "killing_ansatz", None);
        self.verdict(
            "killing_basepoint_generic",
            sub.basepoint_is_generic(),
            "killing_subspace_at",
            Some(tol),
        );
        self.section(
            "killing",
            "killing_subspace_at",
            json!({
                "dimension": sub.dimension(),
                "subspace": to_value(&sub),
                "oracle": {"options": to_value(&oracle.options), "family_dimension": oracle.family_dimension, "fields": oracle_fields},
            }),
        );
        Some((prolonged, sub))
    }

    fn extension(&mut self, prolonged: &ProlongedSystem, sub: &KillingSubspace) {
        let sc = self.scenario;
        let opts = self.opts.tolerances.extension();
        match extension_property(prolonged.base(), &sc.basepoint, Some(&sub.vectors()), &opts) {
            Ok(v) => {
                self.verdict("killing_extends", v.extends, "extension_property", Some(opts.identity_tol));
                for c in &v.components {
                    let k = c.component.index + 1;
                    self.verdict(
                        format!("killing_monodromy_trivial.{k}"),
                        c.trivial_local_monodromy,
                        "extension_property",
                        Some(opts.identity_tol),
                    );
                }
                self.section("extension", "extension_property", to_value(&v));
            }
            Err(e) => self.fail("extension_property", &e),
        }
    }

    fn quotient(&mut self, prolonged: &ProlongedSystem, sub: &KillingSubspace, spiral: &[Option<ComponentSpiralVerdict>]) {
        let sc = self.scenario;
        let n = sc.nvars();
        let tol = self.opts.tolerances;
        let mut data = Vec::new();
        for (c, v) in spiral.iter().enumerate() {
            let Some(v) = v else { continue };
            let lp = match isolating_loop(sc.chart(), c, &sc.basepoint, tol.loop_radius) {
                Ok((lp, _)) => lp,
                Err(e) => {
                    self.fail(&format!("quotient loop {}", c + 1), &e);
                    continue;
                }
            };
            for (d, strong) in v.strong_spiral.iter().enumerate() {
                if !strong {
                    continue;
                }
                let mut a = CVector::zeros(n + n * n);
                a[d] = Complex64::new(1.0, 0.0);
                let key = format!("quotient_trivial.{}.e{}", c + 1, d + 1);
                match quotient_monodromy(prolonged.base(), &a, &lp, Some(&sub.vectors()), tol.identity) {
                    Ok(q) => {
                        self.verdict(key, q.trivial, "quotient_monodromy", Some(tol.identity));
                        data.push(json!({"component": c + 1, "direction": d + 1, "result": to_value(&q)}));
                    }
                    Err(Error::QuotientIllDefined { defect }) => {
                        self.verdict(key, "ill-defined", "quotient_monodromy", Some(tol.identity));
                        data.push(json!({"component": c + 1, "direction": d + 1, "ill_defined_defect": defect}));
                    }
                    Err(e) => self.fail("quotient_monodromy", &e),
                }
            }
        }
        self.section("quotient", "quotient_monodromy", Value::Array(data));
    }

    fn monodromy(&mut self, system: MonodromySystem, killing: Option<&(ProlongedSystem, KillingSubspace)>) {
        let sc = self.scenario;
        let tol = self.opts.tolerances;
        let (label, sys) = match system {
            MonodromySystem::Connection => ("connection", sc.connection.connection_form()),
            MonodromySystem::Killing => match killing {
                Some((p, _)) => ("killing", p.base().clone()),
                None => return,
            },
        };
        let compiled = CompiledSystem::new(&sys);
        let topts = tol.transport();
        let ropts = tol.extension().residue;
        let comps: Vec<usize> = (0..sc.chart().divisor().len()).collect();
        let results = par_map(&comps, |&c| -> Result<_> {
            let (lp, radius) = isolating_loop(sc.chart(), c, &sc.basepoint, tol.loop_radius)?;
            let m = monodromy_with(&compiled, &lp, &topts)?;
            let residue = residue_criterion(&sys, c, &ropts).ok();
            Ok((radius, m, residue))
        });
        let mut data = Vec::new();
        for (c, r) in results.into_iter().enumerate() {
            let k = c + 1;
            match r {
                Ok((radius, m, residue)) => {
                    let dev = m.distance_from_identity();
                    self.verdict(
                        format!("{label}_monodromy_trivial.{k}"),
                        dev < tol.identity,
                        "monodromy",
                        Some(tol.identity),
                    );
                    self.verdict(format!("{label}_monodromy_deviation.{k}"), dev, "monodromy", Some(tol.transport));
                    if let Some(p) = residue.as_ref().and_then(|r| r.predicted_trivial()) {
                        self.verdict(format!("{label}_residue_trivial.{k}"), p, "residue_criterion", Some(tol.integer));
                    }
                    let mut entry = json!({
                        "component": sc.chart().component_label(c),
                        "radius": radius,
                        "monodromy": to_value(&m),
                        "deviation": dev,
                        "residue": to_value(&residue),
                    });
                    if let (MonodromySystem::Killing, Some((_, sub))) = (system, killing) {
                        let restricted = {
                            let b = sub.vectors();
                            let q = crate::linalg::orthonormalize(&b, 1e-12);
                            let bm = crate::linalg::CMatrix::from_fn(m.matrix.nrows(), q.len(), |r, c| q[c][r]);
                            let rm = bm.adjoint() * &m.matrix * &bm;
                            (rm.clone() - crate::linalg::CMatrix::identity(rm.nrows(), rm.ncols())).norm()
                        };
                        entry["restricted_deviation"] = json!(restricted);
                        self.verdict(
                            format!("killing_restricted_deviation.{k}"),
                            restricted,
                            "monodromy",
                            Some(tol.identity),
                        );
                    }
                    data.push(entry);
                }
                Err(e) => self.fail(&format!("{label} monodromy component {k}"), &e),
            }
        }
        self.section("monodromy", &format!("monodromy --system {label}"), Value::Array(data));
    }

    fn geodesic(&mut self, req: &GeodesicRequest) {
        let sc = self.scenario;
        let initial = GeodesicState {
            z: sc.basepoint.clone(),
            v: req.velocity.clone(),
            t: Complex64::new(0.0, 0.0),
        };
        let opts = GeodesicOptions {
            integrator: IntegratorOptions::default().with_tolerance(self.opts.tolerances.integrator),
            ..GeodesicOptions::default()
        };
        match integrate_geodesic(&sc.connection, &initial, &[initial.t, req.t_end], &opts) {
            Ok(tr) => {
                let end = tr.endpoint();
                self.verdict("geodesic_completed", true, "integrate_geodesic", Some(opts.integrator.rtol));
                self.section(
                    "geodesic",
                    "integrate_geodesic",
                    json!({
                        "samples": tr.samples.len(),
                        "step_ratio": tr.step_ratio,
                        "endpoint": end.z.iter().copied().map(pair).collect::<Vec<_>>(),
                        "velocity": end.v.iter().copied().map(pair).collect::<Vec<_>>(),
                    }),
                );
                self.traces.push(Trace {
                    name: "geodesic.csv".into(),
                    csv: tr.to_csv(sc.chart()),
                });
            }
            Err(e) => {
                self.verdict("geodesic_completed", false, "integrate_geodesic", Some(opts.integrator.rtol));
                self.fail("integrate_geodesic", &e);
            }
        }
    }

    fn distinguished(&mut self, req: &DistinguishedRequest) {
        let sc = self.scenario;
        let opts = self.opts.tolerances.curve(req.s_end);
        let run = || -> Result<_> {
            let field = distinguished_field(&sc.connection, &sc.frame, &req.direction)?;
            field.integrate(&FrameBundlePoint::identity_at(sc.basepoint.clone()), &opts)
        };
        match run() {
            Ok(curve) => {
                self.verdict(
                    "distinguished_crossings",
                    curve.crossings.len(),
                    "integrate_distinguished_curve",
                    Some(opts.crossing_tol),
                );
                for x in &curve.crossings {
                    self.verdict(
                        format!("crossing_transverse.{}", x.component + 1),
                        x.transverse,
                        "integrate_distinguished_curve",
                        Some(opts.transversality_tol),
                    );
                }
                self.section(
                    "distinguished",
                    "integrate_distinguished_curve",
                    json!({"samples": curve.samples.len(), "crossings": to_value(&curve.crossings), "contained_in": curve.contained_in, "step_ratio": curve.step_ratio}),
                );
                self.traces.push(Trace {
                    name: "distinguished.csv".into(),
                    csv: curve.to_csv(sc.chart()),
                });
            }
            Err(e) => self.fail("integrate_distinguished_curve", &e),
        }
    }
}

/// Runs `command` on `scenario`; stage failures are recorded in the report.
pub fn run_analysis(scenario: &Scenario, command: &Command, opts: &AnalysisOptions) -> AnalysisReport {
    let mut b = Builder {
        scenario,
        opts: *opts,
        verdicts: Vec::new(),
        sections: Vec::new(),
        failures: Vec::new(),
        traces: Vec::new(),
    };
    match command {
        Command::Analyze => {
            b.torsion();
            b.curvature();
            b.branched();
            let spiral = b.spiral();
            b.monodromy(MonodromySystem::Connection, None);
            if let Some(k) = b.killing() {
                b.extension(&k.0, &k.1);
                b.quotient(&k.0, &k.1, &spiral);
            }
        }
        Command::Torsion => b.torsion(),
        Command::Curvature => b.curvature(),
        Command::Geodesic(req) => b.geodesic(req),
        Command::Distinguished(req) => b.distinguished(req),
        Command::Spiral => {
            b.branched();
            b.spiral();
        }
        Command::Killing => {
            if let Some(k) = b.killing() {
                b.extension(&k.0, &k.1);
            }
        }
        Command::Monodromy(system) => {
            let k = if *system == MonodromySystem::Killing { b.killing() } else { None };
            b.monodromy(*system, k.as_ref());
        }
    }
    let chart = scenario.chart();
    AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        scenario: scenario.spec.name.clone(),
        command: command.name().to_string(),
        seed: opts.seed,
        tolerances: opts.tolerances,
        chart: ChartEcho {
            vars: chart.var_names().to_vec(),
            divisor: (0..chart.divisor().len()).map(|c| chart.component_label(c)).collect(),
            basepoint: scenario.basepoint.iter().copied().map(pair).collect(),
            params: scenario.spec.params.clone(),
        },
        verdicts: b.verdicts,
        sections: b.sections,
        failures: b.failures,
        traces: b.traces,
    }
}
