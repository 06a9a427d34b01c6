use osc_lab::sharpness::{a_coeff, coefficient_sum, lacunary_gap, lil_lower_experiment, n_of_eps, upsilon, SharpnessConfig};
use osc_lab::measure::make_named;
use osc_lab::oscillation::theta;
use osc_lab::{FunctionKind, FunctionSpec, NamedMeasure, OscillationRequest};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gap_stays_bounded_in_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for b in [2.0, 3.0] {
        let xs: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let per_n: Vec<f64> = (4..=16)
            .map(|n| xs.iter().map(|x| lacunary_gap(b, *x, 2f64.powi(-n)).unwrap()).fold(0.0, f64::max))
            .collect();
        let (early, late) = per_n.split_at(6);
        let early_max = early.iter().copied().fold(0.0, f64::max);
        let late_max = late.iter().copied().fold(0.0, f64::max);
        assert!(late_max <= 2.0 * early_max, "b {b}: {per_n:?}");
    }
}

#[test]
fn coefficients_approach_minus_pi() {
    for b in [2.0, 3.0, 10.0] {
        let a = a_coeff(b, 20, 0.0, 1e-12).unwrap();
        assert!((a + std::f64::consts::PI).abs() < 3.0 / b.powi(20), "b {b}: {a}");
    }
}

#[test]
fn experiment_rows_are_consistent() {
    let cfg = SharpnessConfig::standard(2.0, 10, 8, 11).unwrap();
    let t = lil_lower_experiment(&cfg).unwrap();
    assert_eq!(t.rows.len(), 8 * cfg.eps.len());
    for row in &t.rows {
        assert_eq!(row.cutoff, n_of_eps(2.0, row.eps).unwrap());
        assert!((row.gap - (row.upsilon - row.partial_sum).abs()).abs() <= 1e-15);
        assert!(row.running_max >= row.ratio);
    }
    assert!((0.0..=1.0).contains(&t.fraction_above));
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(n_of_eps(1.05, 0.1).is_err());
    assert!(n_of_eps(2.0, 0.0).is_err());
    assert!(a_coeff(2.0, 0, 0.1, 1e-10).is_err());
    assert!(SharpnessConfig::standard(2.0, 2, 4, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn exchange_identity(x in 0.0f64..std::f64::consts::TAU, n in 2i32..12, which in 0usize..2) {
        let b = [2.0, 3.0][which];
        let eps = 2f64.powi(-n);
        let f = FunctionSpec::new(FunctionKind::ZygmundWeierstrass { b }).unwrap();
        let sigma = make_named(NamedMeasure::Sym2, 1).unwrap();
        let r = theta(&OscillationRequest::new(&f, &sigma, &[x], eps, 0, 1.0).quad_tol(1e-10)).unwrap();
        let rhs = coefficient_sum(b, x, eps, 1e-12).unwrap();
        prop_assert!((r.value - rhs).abs() <= 1e-8, "{} vs {rhs}", r.value);
        prop_assert!((upsilon(b, x, eps).unwrap() - rhs).abs() <= 1e-5);
    }

    #[test]
    fn cutoff_is_minimal(b in 1.1f64..12.0, eps in 1e-12f64..1.0) {
        let n = n_of_eps(b, eps).unwrap();
        prop_assert!(eps * b.powi(n as i32) >= 1.0 * (1.0 - 1e-12));
        if n > 0 {
            prop_assert!(eps * b.powi(n as i32 - 1) < 1.0 * (1.0 + 1e-12));
        }
    }
}
