mod common;

use std::collections::BTreeMap;

use common::*;
use meroconn::connection::{curvature, gauge_transform, ChartConnection};
use meroconn::killing::{build_prolonged_system, killing_oracle};
use meroconn::monodromy::{loop_around, monodromy};
use meroconn::path::{CompiledSystem, Path, TransportOptions};
use meroconn::rational::{order_along, Chart, DivisorComponent, MultiPoly, Order, RationalFn};
use meroconn::scenario::{emit_spec, load_bundled, parse_spec, run_analysis, AnalysisOptions, Command, ConnectionSpec, Expectation};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn curved_component() -> DivisorComponent {
    DivisorComponent::new(expr(2, "z1 - z2^2").num().clone(), 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn order_is_additive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (f, g) = (random_rational(&mut r, 2), random_rational(&mut r, 2));
        prop_assume!(!f.is_zero() && !g.is_zero());
        for q in [DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap(), curved_component()] {
            let (Order::Finite(a), Order::Finite(b)) = (order_along(&f, &q), order_along(&g, &q)) else {
                panic!("nonzero function with infinite order");
            };
            prop_assert_eq!(order_along(&f.mul(&g), &q), Order::Finite(a + b));
            prop_assert_eq!(order_along(&f.inv(), &q), Order::Finite(-a));
        }
    }

    #[test]
    fn mixed_partials_commute(seed in any::<u64>()) {
        let mut r = rng(seed);
        let den = random_poly(&mut r, 3, 1, 2).add(&MultiPoly::one(3));
        prop_assume!(!den.is_zero());
        let f = random_rational(&mut r, 3).div(&RationalFn::from_poly(den));
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            prop_assert_eq!(f.partial(i).partial(j), f.partial(j).partial(i));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gauge_transforms_compose(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rank = r.random_range(1..=3);
        let s = random_system(&mut r, 2, rank);
        let (p, q) = (random_gauge(&mut r, 2, rank), random_gauge(&mut r, 2, rank));
        prop_assert_eq!(gauge_transform(&gauge_transform(&s, &p), &q), gauge_transform(&s, &p.compose(&q)));
    }

    #[test]
    fn curvature_is_gauge_covariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rank = r.random_range(1..=3);
        let s = random_system(&mut r, 2, rank);
        let q = random_gauge(&mut r, 2, rank);
        prop_assert_eq!(curvature(&gauge_transform(&s, &q)), curvature(&s).conjugate(q.inverse(), q.q()));
    }

    #[test]
    fn oracle_and_prolongation_agree_on_random_fields(seed in any::<u64>()) {
        let mut r = rng(seed);
        let conn = match r.random_range(0..3) {
            0 => ChartConnection::flat(chart_z1(2)),
            1 => hopf(),
            _ => {
                let mut c = ChartConnection::flat(chart_z1(2));
                c.set_gamma(0, 1, 1, RationalFn::int(2, 1));
                c
            }
        };
        let sys = build_prolonged_system(&conn);
        // affine parts are mixed in so that some samples are Killing
        let base = [expr(2, "1"), expr(2, "z2"), expr(2, "z1")];
        let x: Vec<RationalFn> = (0..2)
            .map(|_| {
                let mut f = RationalFn::zero(2);
                for b in &base {
                    if r.random_bool(0.5) {
                        f = f.add(b);
                    }
                }
                if r.random_bool(0.5) { f.add(&random_rational(&mut r, 2)) } else { f }
            })
            .collect();
        prop_assert_eq!(killing_oracle(&conn, &x).is_killing, sys.jet_is_horizontal(&x));
    }

    #[test]
    fn spec_text_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=3);
        let names = names(n);
        let mut christoffel = BTreeMap::new();
        for _ in 0..r.random_range(0..5) {
            let key = (r.random_range(0..n), r.random_range(0..n), r.random_range(0..n));
            christoffel.insert(key, random_rational(&mut r, n).display_with(&names).to_string());
        }
        let spec = ConnectionSpec {
            name: format!("case{}", seed % 1000),
            description: r.random_bool(0.5).then(|| "random case".to_string()),
            params: if r.random_bool(0.5) { BTreeMap::from([("lambda".to_string(), "1/3".to_string())]) } else { BTreeMap::new() },
            var_names: names.clone(),
            basepoint: r.random_bool(0.5).then(|| (0..n).map(|k| format!("{}", k + 1)).collect()),
            divisor: vec![("z1".to_string(), 2)],
            christoffel,
            frame: None,
            expect: vec![Expectation { key: "branched".into(), value: "true".into(), provenance: "by inspection".into() }],
        };
        let text = emit_spec(&spec);
        let back = parse_spec(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(emit_spec(&back), text);
        let conn = back.build().unwrap().connection;
        prop_assert_eq!(conn.nvars(), n);
    }

    #[test]
    fn transport_is_invariant_under_homotopy(seed in any::<u64>()) {
        // polylines in the convex region Re z1 ≥ 0.3 are homotopic rel endpoints off {z1 = 0}
        let mut r = rng(seed);
        let sys = CompiledSystem::new(&hopf().connection_form());
        let point = |r: &mut ChaCha8Rng| vec![c(r.random_range(0.3..2.0), r.random_range(-1.0..1.0)), c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))];
        let (a, b) = (point(&mut r), point(&mut r));
        let mid1 = point(&mut r);
        let mid2 = point(&mut r);
        let p1 = Path::polyline(&[a.clone(), mid1, b.clone()]).unwrap();
        let p2 = Path::polyline(&[a, mid2, b]).unwrap();
        let opts = TransportOptions::default();
        let t1 = sys.transport(&p1, &DMatrix::identity(2, 2), &opts).unwrap().end;
        let t2 = sys.transport(&p2, &DMatrix::identity(2, 2), &opts).unwrap().end;
        prop_assert!((t1 - t2).norm() < 1e-7);
    }

    #[test]
    fn inverse_loop_inverts_monodromy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let lambda = format!("{}/{}", r.random_range(-5..=5), r.random_range(1..=4));
        let chart = Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap();
        let mut conn = ChartConnection::flat(chart.clone());
        conn.set_gamma(0, 0, 0, expr(2, &format!("({lambda})/z1")));
        conn.set_gamma(1, 0, 1, expr(2, "z2"));
        let sys = conn.connection_form();
        let lp = loop_around(&chart, 0, &[c(1.0, 0.0), c(0.5, -0.5)], 0.5).unwrap();
        let m = monodromy(&sys, &lp).unwrap().matrix;
        let mi = monodromy(&sys, &lp.inverse()).unwrap().matrix;
        prop_assert!((m * mi - DMatrix::identity(2, 2)).norm() < 1e-7);
    }
}

#[test]
fn json_report_is_deterministic_for_a_seed() {
    let sc = load_bundled("hopf").unwrap();
    let opts = AnalysisOptions {
        seed: 11,
        ..AnalysisOptions::default()
    };
    let a = run_analysis(&sc, &Command::Analyze, &opts).to_json();
    let b = run_analysis(&sc, &Command::Analyze, &opts).to_json();
    assert_eq!(a, b);
}
