use osc_lab::measure::{make_classical, make_named, multiindices};
use osc_lab::{NamedMeasure, OscError, SignedMeasure};
use proptest::prelude::*;

fn builders() -> Vec<SignedMeasure> {
    let mut out: Vec<SignedMeasure> = (1..=8).map(|l| make_classical(l).unwrap()).collect();
    out.push(make_named(NamedMeasure::Sym1, 1).unwrap());
    out.push(make_named(NamedMeasure::Sym2, 1).unwrap());
    out
}

#[test]
fn classical_moments_are_exact() {
    for ell in 1..=8 {
        let s = make_classical(ell).unwrap();
        let r = s.check_vanishing(ell - 1).unwrap();
        assert!(r.pass && r.exact);
        assert_eq!(r.tolerance, 0.0);
        assert!(r.first_offender().is_none());
        assert_ne!(s.moment(&[ell]).unwrap(), 0.0);
        assert!(!s.check_vanishing(ell).unwrap().pass);
    }
}

#[test]
fn classical_total_variation_is_binomial_sum() {
    for ell in 1..=8 {
        assert_eq!(make_classical(ell).unwrap().total_variation(), 2f64.powi(ell as i32));
    }
}

#[test]
fn cumulative_vanishes_outside_support() {
    for s in builders() {
        let m = s.support_radius();
        for k in 0..20 {
            let beyond = m * (1.0 + 1e-9) + k as f64 * 0.37;
            assert_eq!(s.cumulative(beyond).unwrap(), 0.0);
            assert_eq!(s.cumulative(-m - k as f64 * 0.37).unwrap(), 0.0);
        }
    }
}

#[test]
fn sym2_has_order_one() {
    let s = make_named(NamedMeasure::Sym2, 1).unwrap();
    assert_eq!(s.declared_moment_order(), 1);
    assert!(s.check_vanishing(1).unwrap().pass);
    assert_eq!(s.moment(&[2]).unwrap(), 2.0);
}

#[test]
fn two_dimensional_multiindices() {
    assert_eq!(multiindices(2, 2).len(), 3);
    assert_eq!(multiindices(3, 2).len(), 6);
    let s = make_named(NamedMeasure::Sym2, 2).unwrap();
    assert!(s.check_vanishing(1).unwrap().pass);
}

#[test]
fn nonzero_mass_is_rejected() {
    let r = make_named(NamedMeasure::General { points: vec![vec![0.0], vec![1.0]], weights: vec![1.0, 0.5] }, 1);
    assert!(matches!(r, Err(OscError::NonzeroMass { .. })));
}

fn general(points: &[f64], weights: &[f64]) -> SignedMeasure {
    let mut w = weights.to_vec();
    let total: f64 = w.iter().sum();
    w.push(-total);
    let mut p: Vec<Vec<f64>> = points.iter().map(|x| vec![*x]).collect();
    p.push(vec![0.0]);
    make_named(NamedMeasure::General { points: p, weights: w }, 1).unwrap()
}

proptest! {
    #[test]
    fn moment_is_linear(
        pts in prop::collection::vec(-2.0f64..2.0, 3),
        w1 in prop::collection::vec(-1.0f64..1.0, 3),
        w2 in prop::collection::vec(-1.0f64..1.0, 3),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        k in 0u32..5,
    ) {
        let s1 = general(&pts, &w1);
        let s2 = general(&pts, &w2);
        let combo = SignedMeasure::linear_combination(a, &s1, b, &s2).unwrap();
        let lhs = combo.moment(&[k]).unwrap();
        let rhs = a * s1.moment(&[k]).unwrap() + b * s2.moment(&[k]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn scaling_scales_moments(ell in 1u32..8, c in -4i32..4, k in 0u32..9) {
        let s = make_classical(ell).unwrap();
        let scaled = s.scaled(c as f64);
        prop_assert_eq!(scaled.moment(&[k]).unwrap(), c as f64 * s.moment(&[k]).unwrap());
    }
}

#[test]
fn descriptor_round_trip() {
    let json = r#"{"dim":1,"atoms":[[[1],1.0],[[-1],1.0],[[0],-2.0]],"sphere":null}"#;
    let d: osc_lab::MeasureDescriptor = serde_json::from_str(json).unwrap();
    let s = SignedMeasure::from_descriptor(&d).unwrap();
    assert_eq!(s.declared_moment_order(), 1);
    assert_eq!(s.descriptor(), d);
    let bad = r#"{"dim":1,"atoms":[[[1],1.0],[[0],-0.5]]}"#;
    let d: osc_lab::MeasureDescriptor = serde_json::from_str(bad).unwrap();
    assert!(matches!(SignedMeasure::from_descriptor(&d), Err(OscError::NonzeroMass { .. })));
}
