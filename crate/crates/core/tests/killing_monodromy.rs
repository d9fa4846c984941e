use std::collections::BTreeMap;

use meroconn::connection::ChartConnection;
use meroconn::killing::{build_prolonged_system, killing_subspace_at, KillingJet, KillingTransport};
use meroconn::linalg::{subspace_distance, CVector};
use meroconn::monodromy::{extension_property, loop_around, quotient_monodromy, ExtensionOptions};
use meroconn::path::Path;
use meroconn::rational::{parse_rational, Chart, DivisorComponent, MultiPoly};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn hopf() -> ChartConnection {
    let chart = Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap();
    let mut conn = ChartConnection::flat(chart);
    let names = vec!["z1".to_string(), "z2".to_string()];
    conn.set_gamma(0, 0, 0, parse_rational("1/z1", &names, &BTreeMap::new()).unwrap());
    conn
}

fn base() -> Vec<Complex64> {
    vec![c(1.0, 0.0), c(1.0, 0.0)]
}

#[test]
fn hopf_killing_system_extends_on_the_killing_subspace() {
    let conn = hopf();
    let sys = build_prolonged_system(&conn);
    let sub = killing_subspace_at(&sys, &base(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let v = extension_property(sys.base(), &base(), Some(&sub.vectors()), &ExtensionOptions::default()).unwrap();
    assert!(v.extends, "{:?}", v.evidence());
    assert!(v.evidence().iter().all(|&d| d < 1e-6));
}

#[test]
fn flat_killing_system_with_declared_divisor_extends() {
    let chart = Chart::standard(2, vec![DivisorComponent::new(MultiPoly::var(2, 0), 1).unwrap()]).unwrap();
    let sys = build_prolonged_system(&ChartConnection::flat(chart));
    let v = extension_property(sys.base(), &base(), None, &ExtensionOptions::default()).unwrap();
    assert!(v.extends);
    assert_eq!(v.components[0].residue, Some(true));
}

#[test]
fn hopf_quotient_along_translation_is_trivial() {
    let conn = hopf();
    let sys = build_prolonged_system(&conn);
    let sub = killing_subspace_at(&sys, &base(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let lp = loop_around(conn.chart(), 0, &base(), 0.5).unwrap();
    let mut e1 = CVector::zeros(6);
    e1[0] = c(1.0, 0.0);
    let q = quotient_monodromy(sys.base(), &e1, &lp, Some(&sub.vectors()), 1e-6).unwrap();
    assert!(q.trivial, "deviation {}", q.deviation);
    assert_eq!(q.matrix.nrows(), sub.dimension() - 1);
}

#[test]
fn transport_preserves_the_killing_subspace() {
    let conn = hopf();
    let sys = build_prolonged_system(&conn);
    let tr = KillingTransport::new(&sys);
    let start = base();
    let end = vec![c(-0.5, 0.75), c(0.25, -1.0)];
    let path = Path::polyline(&[start.clone(), vec![c(0.5, 1.0), c(1.0, 0.0)], end.clone()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let here = killing_subspace_at(&sys, &start, &mut rng).unwrap();
    let there = killing_subspace_at(&sys, &end, &mut rng).unwrap();
    let moved: Vec<CVector> = here.basis.iter().map(|j| tr.transport(&path, j).unwrap().as_vector()).collect();
    assert!(subspace_distance(&moved, &there.vectors()) < 1e-6);
}

fn heisenberg() -> ChartConnection {
    let mut conn = ChartConnection::flat(Chart::standard(3, vec![]).unwrap());
    conn.set_gamma(2, 1, 0, meroconn::rational::RationalFn::int(3, -1));
    conn
}

#[test]
fn homotopic_paths_agree_on_killing_jets_only() {
    let conn = heisenberg();
    let sys = build_prolonged_system(&conn);
    let tr = KillingTransport::new(&sys);
    let start = vec![c(0.0, 0.0); 3];
    let end = vec![c(1.0, 0.5), c(-1.0, 0.25), c(0.5, 0.0)];
    let upper = Path::polyline(&[start.clone(), vec![c(1.0, 0.0), c(0.5, 0.5), c(0.0, 1.0)], end.clone()]).unwrap();
    let lower = Path::polyline(&[start.clone(), vec![c(0.0, 1.0), c(-1.0, 0.0), c(1.0, -0.5)], end.clone()]).unwrap();
    let sub = killing_subspace_at(&sys, &start, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert!(sub.dimension() < sys.rank());
    for jet in &sub.basis {
        let a = tr.transport(&upper, jet).unwrap();
        let b = tr.transport(&lower, jet).unwrap();
        assert!(a.max_difference(&b) < 1e-6);
    }
    let full_a = tr.transport_matrix(&upper).unwrap();
    let full_b = tr.transport_matrix(&lower).unwrap();
    assert!((full_a - full_b).norm() > 1e-3);
}

#[test]
fn transport_is_linear() {
    let sys = build_prolonged_system(&hopf());
    let tr = KillingTransport::new(&sys);
    let path = Path::polyline(&[base(), vec![c(1.5, 0.5), c(0.0, 1.0)]]).unwrap();
    let jet = KillingJet::from_vector(2, (0..6).map(|k| c(k as f64 - 2.0, 0.5 * k as f64)).collect());
    let s = c(0.3, -1.7);
    let a = tr.transport(&path, &jet.scale(s)).unwrap();
    let b = tr.transport(&path, &jet).unwrap().scale(s);
    assert!(a.max_difference(&b) < 1e-9);
}
