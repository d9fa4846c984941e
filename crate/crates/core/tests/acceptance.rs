//! End-to-end acceptance checks, run without the libtest harness so that
//! each check prints one `PASS`/`FAIL` line under a plain `cargo test`.

mod common;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use common::*;
use meroconn::connection::{
    curvature, gauge_transform, is_branched, pullback_along_curve, torsion, ChartConnection, LinearMeromorphicSystem,
};
use meroconn::geodesic::{classify_a01, distinguished_field, reparametrization_residual, CurveOptions, FrameBundlePoint};
use meroconn::killing::{
    build_prolonged_system, killing_ansatz, killing_oracle, killing_subspace_at, AnsatzOptions, KillingJet, KillingTransport,
};
use meroconn::linalg::{orthonormalize, CMatrix};
use meroconn::monodromy::{loop_around, monodromy, residue_criterion, ResidueOptions};
use meroconn::path::Path;
use meroconn::rational::{GaussianRational, MultiPoly, RatMatrix, RationalFn};
use meroconn::scenario::{load_bundled, run_analysis, AnalysisOptions, AnalysisReport, Command};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Runs `body` and prints the verdict line; errors and overruns fail.
fn check(name: &str, limit: Duration, body: impl FnOnce() -> Result<String, String>) -> bool {
    let start = Instant::now();
    let outcome = body();
    let took = start.elapsed();
    let outcome = match outcome {
        Ok(detail) if took > limit => Err(format!("{detail}; took {took:.2?}, limit {limit:.0?}")),
        other => other,
    };
    match &outcome {
        Ok(detail) => println!("acceptance | {name:<34} | PASS | {detail} | {took:.2?}"),
        Err(why) => println!("acceptance | {name:<34} | FAIL | {why} | {took:.2?}"),
    }
    outcome.is_ok()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn unit_basepoint(n: usize) -> Vec<num_complex::Complex64> {
    vec![c(1.0, 0.0); n]
}

fn null_pullback_along_the_divisor() -> bool {
    check("null pullback", secs(1), || {
        let chart = chart_z1(2);
        let a2 = RatMatrix::identity(2, 2).scale(&expr(2, "1/z1"));
        let system = LinearMeromorphicSystem::new(chart, vec![RatMatrix::zeros(2, 2, 2), a2]).map_err(|e| e.to_string())?;
        let curve = vec![MultiPoly::zero(1), MultiPoly::var(1, 0)];
        let pb = pullback_along_curve(&system, &curve).map_err(|e| e.to_string())?;
        ensure(pb.is_null(), || format!("expected the null morphism, got {pb:?}"))?;
        Ok("(dz2/z1)·Id along t ↦ (0, t) is the null morphism".into())
    })
}

fn gauge_and_curvature_covariance() -> bool {
    check("gauge/curvature covariance", secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..50 {
            let rank = rng.random_range(1..=3);
            let s = random_system(&mut rng, 2, rank);
            let q = random_gauge(&mut rng, 2, rank);
            let p = random_gauge(&mut rng, 2, rank);
            let gauged = gauge_transform(&s, &q);
            ensure(curvature(&gauged) == curvature(&s).conjugate(q.inverse(), q.q()), || {
                format!("covariance fails in case {case}")
            })?;
            ensure(gauge_transform(&gauged, &p) == gauge_transform(&s, &q.compose(&p)), || {
                format!("composition fails in case {case}")
            })?;
        }
        Ok("50 random systems, exact equality".into())
    })
}

fn scalar_system(lambda: &str) -> LinearMeromorphicSystem {
    let chart = chart_z1(1);
    let a = expr(1, &format!("({lambda})/z1"));
    LinearMeromorphicSystem::new(chart, vec![RatMatrix::diagonal(vec![a])]).unwrap()
}

fn scalar_monodromy_is_exact() -> bool {
    check("scalar monodromy exactness", secs(10), || {
        let mut worst: f64 = 0.0;
        for (lambda, value, integer) in [("1/3", 1.0 / 3.0, false), ("1/2", 0.5, false), ("2", 2.0, true), ("-1", -1.0, true)] {
            let sys = scalar_system(lambda);
            let lp = loop_around(sys.chart(), 0, &[c(1.0, 0.0)], 0.5).map_err(|e| e.to_string())?;
            let m = monodromy(&sys, &lp).map_err(|e| e.to_string())?.matrix[(0, 0)];
            let exact = (c(0.0, -TAU) * value).exp();
            let err = (m - exact).norm();
            worst = worst.max(err);
            ensure(err < 1e-8, || format!("λ = {lambda}: |M − e^(−2πiλ)| = {err:e}"))?;
            let numeric_trivial = (m - c(1.0, 0.0)).norm() < 1e-6;
            let predicted = residue_criterion(&sys, 0, &ResidueOptions::default())
                .map_err(|e| e.to_string())?
                .predicted_trivial();
            ensure(predicted == Some(integer) && numeric_trivial == integer, || {
                format!("λ = {lambda}: predicted {predicted:?}, numerically trivial {numeric_trivial}")
            })?;
        }
        Ok(format!("λ ∈ {{1/3, 1/2, 2, −1}}, max error {worst:.1e}, residue test agrees"))
    })
}

fn residue_jordan_criterion() -> bool {
    check("residue/Jordan criterion", secs(10), || {
        let chart = chart_z1(1);
        let inv = expr(1, "1/z1");
        let mut nil = RatMatrix::zeros(2, 2, 1);
        nil.set(0, 1, inv.clone());
        let diag = RatMatrix::diagonal(vec![inv.clone(), inv.scale(&GaussianRational::from(2))]);
        let mut out = Vec::new();
        for (label, a, expect_trivial) in [("nilpotent", nil, false), ("diag(1,2)", diag, true)] {
            let sys = LinearMeromorphicSystem::new(chart.clone(), vec![a]).map_err(|e| e.to_string())?;
            let lp = loop_around(&chart, 0, &[c(1.0, 0.0)], 0.5).map_err(|e| e.to_string())?;
            let dev = monodromy(&sys, &lp).map_err(|e| e.to_string())?.distance_from_identity();
            let predicted = residue_criterion(&sys, 0, &ResidueOptions::default())
                .map_err(|e| e.to_string())?
                .predicted_trivial();
            if expect_trivial {
                ensure(dev < 1e-6, || format!("{label}: ‖M − I‖ = {dev:e}"))?;
            } else {
                ensure(dev > 1.0, || format!("{label}: ‖M − I‖ = {dev:e}"))?;
            }
            ensure(predicted == Some(expect_trivial), || format!("{label}: predicted {predicted:?}"))?;
            out.push(format!("{label} ‖M−I‖ = {dev:.2e}"));
        }
        Ok(out.join(", "))
    })
}

fn flat_killing_algebra() -> bool {
    check("flat Killing algebra", secs(30), || {
        let conn = ChartConnection::flat(chart_z1(2));
        let oracle = killing_ansatz(&conn, &AnsatzOptions::default());
        ensure(oracle.dimension() == 6, || format!("oracle dimension {}", oracle.dimension()))?;
        let sys = build_prolonged_system(&conn);
        let p = unit_basepoint(2);
        let sub = killing_subspace_at(&sys, &p, &mut ChaCha8Rng::seed_from_u64(1)).map_err(|e| e.to_string())?;
        ensure(sub.dimension() == oracle.dimension(), || {
            format!("prolongation {} vs oracle {}", sub.dimension(), oracle.dimension())
        })?;
        let mut worst: f64 = 0.0;
        for f in &oracle.fields {
            ensure(sys.jet_is_horizontal(f), || {
                "an oracle field is not horizontal for the prolongation".into()
            })?;
            let jet = KillingJet::of_field(f, &p).map_err(|e| e.to_string())?;
            worst = worst.max(sub.distance(&jet));
        }
        ensure(worst < 1e-9, || format!("oracle jets are {worst:e} from the subspace"))?;
        Ok(format!("dimension 6 from both, field-by-field distance {worst:.1e}"))
    })
}

fn verdict<'a>(r: &'a AnalysisReport, key: &str) -> Result<&'a Value, String> {
    r.verdict(key).map(|v| &v.value).ok_or_else(|| format!("missing verdict {key}"))
}

fn section<'a>(r: &'a AnalysisReport, name: &str) -> Result<&'a Value, String> {
    r.section(name).map(|s| &s.data).ok_or_else(|| format!("missing section {name}"))
}

fn hopf_end_to_end() -> bool {
    check("Hopf end-to-end", secs(120), || {
        let sc = load_bundled("hopf").map_err(|e| e.to_string())?;
        let r = run_analysis(&sc, &Command::Analyze, &AnalysisOptions::default());
        ensure(r.failures.is_empty(), || format!("stage failures {:?}", r.failures))?;
        for (key, want) in [
            ("branched", Value::Bool(true)),
            ("curvature_zero", Value::Bool(true)),
            ("spiral_witness.1", Value::Bool(true)),
            ("spiral_direction.1", Value::from("1,0")),
            ("strong_spiral.1.e1", Value::Bool(true)),
            ("strong_spiral.1.e2", Value::Bool(false)),
            ("killing_monodromy_trivial.1", Value::Bool(true)),
            ("quotient_trivial.1.e1", Value::Bool(true)),
        ] {
            let got = verdict(&r, key)?;
            ensure(*got == want, || format!("{key} = {got}, expected {want}"))?;
        }
        let spiral = section(&r, "spiral")?;
        let crossing = &spiral[0]["witness"]["crossing"];
        let d = crossing["derivative"].as_array().ok_or("crossing derivative missing")?;
        let speed = d[0].as_f64().unwrap_or(0.0).hypot(d[1].as_f64().unwrap_or(0.0));
        ensure(speed > 1e-8 && crossing["transverse"] == Value::Bool(true), || {
            format!("|d/dt z1| = {speed:e} at the crossing")
        })?;
        let ext = section(&r, "extension")?;
        let kdev = ext["components"][0]["deviation"].as_f64().ok_or("extension deviation missing")?;
        ensure(kdev < 1e-6, || format!("Killing monodromy deviation {kdev:e}"))?;
        let quotient = section(&r, "quotient")?;
        let q = quotient
            .as_array()
            .and_then(|a| a.iter().find(|e| e["direction"] == 1))
            .ok_or("no quotient along e1")?;
        let qdev = q["result"]["deviation"].as_f64().ok_or("quotient deviation missing")?;
        ensure(qdev < 1e-6, || format!("quotient deviation {qdev:e}"))?;
        Ok(format!(
            "|dz1/dt| = {speed:.3}, Killing ‖M−I‖ = {kdev:.1e}, quotient ‖M−I‖ = {qdev:.1e}"
        ))
    })
}

fn distinguished_curves_are_reparametrized_geodesics() -> bool {
    check("reparametrization consistency", secs(30), || {
        let mut worst: f64 = 0.0;
        let mut curves = 0;
        let mut evaluated = 0;
        for name in ["hopf", "flat"] {
            let sc = load_bundled(name).map_err(|e| e.to_string())?;
            for dir in [["1", "0"], ["-1", "0"], ["0", "1"], ["1", "1"], ["-1", "1/2"]] {
                let dir: Vec<GaussianRational> = dir.iter().map(|s| expr(0, s).constant_value().unwrap()).collect();
                let field = distinguished_field(&sc.connection, &sc.frame, &dir).map_err(|e| e.to_string())?;
                let opts = CurveOptions {
                    s_end: 1.5,
                    ..CurveOptions::default()
                };
                let curve = field
                    .integrate(&FrameBundlePoint::identity_at(sc.basepoint.clone()), &opts)
                    .map_err(|e| e.to_string())?;
                let res = reparametrization_residual(&sc.connection, &field, &curve, 1e-2).map_err(|e| e.to_string())?;
                ensure(res.evaluated + res.skipped == curve.samples.len(), || {
                    "not every sample was examined".into()
                })?;
                ensure(res.max_residual < 1e-6, || {
                    format!("{name} {dir:?}: residual {:e}", res.max_residual)
                })?;
                worst = worst.max(res.max_residual);
                curves += 1;
                evaluated += res.evaluated;
            }
        }
        Ok(format!("{curves} curves, {evaluated} pole-free samples, max residual {worst:.1e}"))
    })
}

fn killing_fields_form_a_local_system() -> bool {
    check("Killing local system", secs(60), || {
        let conn = hopf();
        let sys = build_prolonged_system(&conn);
        let tr = KillingTransport::new(&sys);
        let a = unit_basepoint(2);
        let b = vec![c(0.6, -0.8), c(-1.0, 0.5)];
        // both stay in Re z1 > 0; the second takes a long detour
        let direct = Path::polyline(&[a.clone(), b.clone()]).map_err(|e| e.to_string())?;
        let detour = Path::polyline(&[
            a.clone(),
            vec![c(3.0, 2.0), c(2.0, 2.0)],
            vec![c(0.2, 1.5), c(-2.0, 0.0)],
            vec![c(0.3, -2.0), c(0.0, -1.5)],
            b.clone(),
        ])
        .map_err(|e| e.to_string())?;
        let sub = killing_subspace_at(&sys, &a, &mut ChaCha8Rng::seed_from_u64(8)).map_err(|e| e.to_string())?;
        let mut path_gap: f64 = 0.0;
        for jet in &sub.basis {
            let x = tr.transport(&direct, jet).map_err(|e| e.to_string())?;
            let y = tr.transport(&detour, jet).map_err(|e| e.to_string())?;
            path_gap = path_gap.max(x.max_difference(&y));
        }
        ensure(path_gap < 1e-6, || format!("homotopic paths differ by {path_gap:e}"))?;
        let lp = loop_around(conn.chart(), 0, &a, 0.5).map_err(|e| e.to_string())?;
        let m = tr.transport_matrix(&lp.path).map_err(|e| e.to_string())?;
        let q = orthonormalize(&sub.vectors(), 1e-12);
        let basis = CMatrix::from_fn(m.nrows(), q.len(), |r, k| q[k][r]);
        let loop_dev = (&m * &basis - &basis).norm();
        ensure(loop_dev < 1e-6, || {
            format!("loop transport moves the Killing subspace by {loop_dev:e}")
        })?;
        Ok(format!(
            "dimension {}, path gap {path_gap:.1e}, loop ‖(M−I)|_K‖ = {loop_dev:.1e}",
            sub.dimension()
        ))
    })
}

/// Adds `Σ dzᵢ ⊗ φᵢ` with `φᵢ = [[aᵢ, z1·fᵢ], [bᵢ, gᵢ]]` holomorphic.
fn perturb(conn: &ChartConnection, rng: &mut ChaCha8Rng) -> ChartConnection {
    let mut out = conn.clone();
    let z1 = RationalFn::var(2, 0);
    for i in 0..2 {
        let mut hol = || RationalFn::from_poly(random_poly(rng, 2, 2, 3));
        let phi = [[hol(), z1.mul(&hol())], [hol(), hol()]];
        for (k, row) in phi.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                out.set_gamma(k, i, j, out.gamma(k, i, j).add(entry));
            }
        }
    }
    out
}

fn spiral_dichotomy_spot_check() -> bool {
    check("dichotomy spot-check", secs(30), || {
        let nonspiral = load_bundled("nonspiral_c2").map_err(|e| e.to_string())?;
        let base = classify_a01(&nonspiral.connection, 0).map_err(|e| e.to_string())?;
        ensure(!base, || "nonspiral_c2 passes classify_a01".into())?;
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut cases = 0;
        for name in ["hopf", "flat", "nonspiral_c2"] {
            let sc = load_bundled(name).map_err(|e| e.to_string())?;
            let before = classify_a01(&sc.connection, 0).map_err(|e| e.to_string())?;
            if name != "nonspiral_c2" {
                ensure(before && is_branched(&sc.connection, &sc.frame).branched, || {
                    format!("{name} is not a conforming connection")
                })?;
            }
            for k in 0..10 {
                let p = perturb(&sc.connection, &mut rng);
                let after = classify_a01(&p, 0).map_err(|e| e.to_string())?;
                ensure(after == before, || format!("{name}, perturbation {k}: verdict changed to {after}"))?;
                cases += 1;
            }
        }
        Ok(format!("nonspiral_c2 fails, {cases} perturbations keep the verdict"))
    })
}

fn heisenberg_fixture() -> bool {
    check("Heisenberg fixture", secs(30), || {
        let sc = load_bundled("heisenberg").map_err(|e| e.to_string())?;
        let t = torsion(&sc.connection);
        let nonzero = t.nonzero();
        ensure(!nonzero.is_empty(), || "torsion vanishes".into())?;
        ensure(nonzero.iter().all(|(_, v)| v.is_constant()), || {
            "torsion has non-constant components".into()
        })?;
        ensure(curvature(&sc.connection.connection_form()).is_zero(), || {
            "curvature is nonzero".into()
        })?;
        let n = sc.nvars();
        for col in 0..n {
            let x: Vec<RationalFn> = (0..n).map(|r| sc.frame.q().get(r, col).clone()).collect();
            ensure(killing_oracle(&sc.connection, &x).is_killing, || {
                format!("frame field {} is not Killing", col + 1)
            })?;
        }
        let dim = killing_ansatz(&sc.connection, &AnsatzOptions::default()).dimension();
        ensure(dim >= 3, || format!("oracle Killing dimension {dim}"))?;
        Ok(format!(
            "torsion constant ({} entries), flat, frame fields Killing, oracle dimension {dim}",
            nonzero.len()
        ))
    })
}

fn main() {
    let checks: &[fn() -> bool] = &[
        null_pullback_along_the_divisor,
        gauge_and_curvature_covariance,
        scalar_monodromy_is_exact,
        residue_jordan_criterion,
        flat_killing_algebra,
        hopf_end_to_end,
        distinguished_curves_are_reparametrized_geodesics,
        killing_fields_form_a_local_system,
        spiral_dichotomy_spot_check,
        heisenberg_fixture,
    ];
    let failed = checks.iter().filter(|f| !f()).count();
    println!("acceptance | {} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
