//! Browser bindings: a handful of entry points behind `www/index.html`.
//!
//! Every export returns plain strings or number arrays, so the same
//! functions run natively in tests.

use std::collections::BTreeMap;

use meroconn::connection::LinearMeromorphicSystem;
use meroconn::geodesic::{distinguished_field, CurveOptions, FrameBundlePoint};
use meroconn::monodromy::{loop_around, residue_criterion, ResidueOptions};
use meroconn::path::{CompiledSystem, TransportOptions};
use meroconn::rational::{parse_constant, parse_rational, Chart, DivisorComponent, MultiPoly, RatMatrix};
use meroconn::scenario::{bundled, parse_spec, run_analysis, AnalysisOptions, Command, BUNDLED};
use nalgebra::DMatrix;
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

/// Names of the bundled scenarios, newline separated.
#[wasm_bindgen]
pub fn scenario_names() -> String {
    BUNDLED.iter().map(|(n, _)| *n).collect::<Vec<_>>().join("\n")
}

/// Source text of a bundled scenario, empty if unknown.
#[wasm_bindgen]
pub fn scenario_text(name: &str) -> String {
    bundled(name).unwrap_or_default().to_string()
}

/// Full analysis of a scenario given as text; returns the text summary.
#[wasm_bindgen]
pub fn analyze(text: &str, seed: u64) -> String {
    let scenario = match parse_spec(text).and_then(|s| s.build()) {
        Ok(s) => s,
        Err(e) => return format!("error: {e}"),
    };
    let opts = AnalysisOptions {
        seed,
        ..AnalysisOptions::default()
    };
    run_analysis(&scenario, &Command::Analyze, &opts).to_text()
}

/// Loop monodromy of `d + λ dz/z` around the unit circle.
///
/// Layout: `[ok, m_re, m_im, exact_re, exact_im, predicted_trivial, path...]`
/// where `path` lists `(re, im)` of the section along the loop and
/// `predicted_trivial` is 1, 0 or NaN when inconclusive. On a bad
/// expression `ok` is 0 and nothing follows.
#[wasm_bindgen]
pub fn scalar_monodromy(lambda: &str) -> Vec<f64> {
    scalar_monodromy_inner(lambda).unwrap_or_else(|| vec![0.0])
}

fn scalar_monodromy_inner(lambda: &str) -> Option<Vec<f64>> {
    let value = parse_constant(lambda, &BTreeMap::new()).ok()?.to_c64();
    let chart = Chart::standard(1, vec![DivisorComponent::new(MultiPoly::var(1, 0), 1).ok()?]).ok()?;
    let a = parse_rational(&format!("({lambda})/z1"), &["z1".to_string()], &BTreeMap::new()).ok()?;
    let system = LinearMeromorphicSystem::new(chart.clone(), vec![RatMatrix::diagonal(vec![a])]).ok()?;
    let lp = loop_around(&chart, 0, &[Complex64::new(1.0, 0.0)], 1.0).ok()?;
    let moved = CompiledSystem::new(&system)
        .transport(&lp.path, &DMatrix::identity(1, 1), &TransportOptions::default())
        .ok()?;
    let m = moved.end[(0, 0)];
    let exact = (Complex64::new(0.0, -std::f64::consts::TAU) * value).exp();
    let predicted = match residue_criterion(&system, 0, &ResidueOptions::default())
        .ok()
        .and_then(|v| v.predicted_trivial())
    {
        Some(true) => 1.0,
        Some(false) => 0.0,
        None => f64::NAN,
    };
    let mut out = vec![1.0, m.re, m.im, exact.re, exact.im, predicted];
    for (_, s) in &moved.samples {
        out.extend([s[(0, 0)].re, s[(0, 0)].im]);
    }
    Some(out)
}

/// Projection to the first two coordinates of a distinguished curve.
///
/// Starts from the identity frame at the scenario basepoint and moves along
/// the frame direction `(d1, d2, 0, ...)` for `s_end`. Layout:
/// `[ok, crossings, z1_re, z1_im, z2_re, z2_im, ...]`.
#[wasm_bindgen]
pub fn distinguished_curve(text: &str, d1: &str, d2: &str, s_end: f64) -> Vec<f64> {
    distinguished_inner(text, d1, d2, s_end).unwrap_or_else(|| vec![0.0])
}

fn distinguished_inner(text: &str, d1: &str, d2: &str, s_end: f64) -> Option<Vec<f64>> {
    let scenario = parse_spec(text).and_then(|s| s.build()).ok()?;
    let n = scenario.nvars();
    let params = BTreeMap::new();
    let mut dir = vec![parse_constant(d1, &params).ok()?, parse_constant(d2, &params).ok()?];
    dir.resize(n.max(2), parse_constant("0", &params).ok()?);
    dir.truncate(n);
    let field = distinguished_field(&scenario.connection, &scenario.frame, &dir).ok()?;
    let opts = CurveOptions {
        s_end,
        ..CurveOptions::default()
    };
    let curve = field
        .integrate(&FrameBundlePoint::identity_at(scenario.basepoint.clone()), &opts)
        .ok()?;
    let mut out = vec![1.0, curve.crossings.len() as f64];
    for s in &curve.samples {
        let z2 = s.point.z.get(1).copied().unwrap_or_default();
        out.extend([s.point.z[0].re, s.point.z[0].im, z2.re, z2.im]);
    }
    Some(out)
}
