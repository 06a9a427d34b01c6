use osc_lab::measure::make_named;
use osc_lab::oscillation::{delta_sigma, theta, theta_sweep, DEFAULT_BUDGET};
use osc_lab::quadrature::{integrate, QuadOptions};
use osc_lab::{FunctionKind, FunctionSpec, NamedMeasure, OscError, OscillationRequest, Route, SignedMeasure};
use proptest::prelude::*;

const TOL: f64 = 1e-8;

fn sym1() -> SignedMeasure {
    make_named(NamedMeasure::Sym1, 1).unwrap()
}

fn sym2() -> SignedMeasure {
    make_named(NamedMeasure::Sym2, 1).unwrap()
}

fn sampled(values: &[f64]) -> FunctionSpec {
    let grid: Vec<f64> = (0..values.len()).map(|i| -1.5 + 4.0 * i as f64 / (values.len() - 1) as f64).collect();
    FunctionSpec::new(FunctionKind::Sampled { grid, values: values.to_vec() }).unwrap()
}

fn theta_of(f: &FunctionSpec, s: &SignedMeasure, x: f64, eps: f64, alpha: f64) -> f64 {
    theta(&OscillationRequest::new(f, s, &[x], eps, 0, alpha).quad_tol(TOL)).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn theta_is_additive_in_f(
        v1 in prop::collection::vec(-1.0f64..1.0, 17),
        v2 in prop::collection::vec(-1.0f64..1.0, 17),
        x in 0.0f64..1.0,
        n in 2u32..10,
    ) {
        let sum: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
        let eps = 2f64.powi(-(n as i32));
        let s = sym2();
        let lhs = theta_of(&sampled(&sum), &s, x, eps, 1.0);
        let rhs = theta_of(&sampled(&v1), &s, x, eps, 1.0) + theta_of(&sampled(&v2), &s, x, eps, 1.0);
        prop_assert!((lhs - rhs).abs() <= 2.0 * TOL, "{lhs} vs {rhs}");
    }

    #[test]
    fn theta_is_homogeneous_in_f(
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..5),
        c in -3.0f64..3.0,
        x in -1.0f64..1.0,
    ) {
        let scaled: Vec<f64> = coeffs.iter().map(|a| c * a).collect();
        let f = FunctionSpec::new(FunctionKind::Polynomial { coeffs }).unwrap();
        let g = FunctionSpec::new(FunctionKind::Polynomial { coeffs: scaled }).unwrap();
        let s = sym2();
        let lhs = theta_of(&g, &s, x, 1e-3, 1.0);
        let rhs = c * theta_of(&f, &s, x, 1e-3, 1.0);
        prop_assert!((lhs - rhs).abs() <= 2.0 * TOL * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn interval_additivity() {
    let cases = [
        (FunctionSpec::new(FunctionKind::Cusp { alpha: 0.5 }).unwrap(), sym1(), 0.5),
        (FunctionSpec::new(FunctionKind::Hat { center: 0.3, half_width: 0.4 }).unwrap(), sym2(), 1.0),
        (FunctionSpec::new(FunctionKind::Bump { center: 0.0, width: 0.8 }).unwrap(), sym2(), 1.0),
    ];
    for (f, s, alpha) in cases {
        for x in [0.0, 0.21, 0.55] {
            let (eps, eps2) = (1e-3, 0.07);
            let whole = theta_of(&f, &s, x, eps, alpha);
            let upper = theta_of(&f, &s, x, eps2, alpha);
            let kinks: Vec<f64> = (1..12).map(|j| j as f64 * 0.05).collect();
            let r = integrate(
                |h: f64| delta_sigma(&f, &s, &[x], h).unwrap() / h.powf(alpha + 1.0),
                eps,
                eps2,
                &kinks,
                QuadOptions::new(TOL / 10.0, 1_000_000),
            );
            assert!(r.converged);
            assert!((whole - upper - r.value).abs() <= 2.0 * TOL, "{} at {x}: {whole} vs {}", f.kind().name(), upper + r.value);
        }
    }
}

#[test]
fn halving_tolerance_stays_within_the_error_estimate() {
    let cases = [
        (FunctionSpec::new(FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 }).unwrap(), sym1(), 0.5),
        (FunctionSpec::new(FunctionKind::ZygmundWeierstrass { b: 3.0 }).unwrap(), sym2(), 1.0),
        (FunctionSpec::new(FunctionKind::Hat { center: 0.3, half_width: 0.4 }).unwrap(), sym2(), 1.0),
    ];
    for (f, s, alpha) in cases {
        for x in [0.1, 0.37, 0.8] {
            let coarse = theta(&OscillationRequest::new(&f, &s, &[x], 1e-4, 0, alpha).quad_tol(1e-6)).unwrap();
            let fine = theta(&OscillationRequest::new(&f, &s, &[x], 1e-4, 0, alpha).quad_tol(5e-7)).unwrap();
            let diff = (coarse.value - fine.value).abs();
            assert!(diff <= coarse.quad_error_estimate.max(1e-14), "{} at {x}: {diff} vs {}", f.kind().name(), coarse.quad_error_estimate);
        }
    }
}

#[test]
fn theta_grows_at_most_logarithmically() {
    let eps: Vec<f64> = (2..=20).map(|n| 2f64.powi(-n)).collect();
    let xs: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64 / 16.0 + 0.01]).collect();
    let cases = [
        (FunctionSpec::new(FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 }).unwrap(), sym1(), 0.5),
        (FunctionSpec::new(FunctionKind::ZygmundWeierstrass { b: 2.0 }).unwrap(), sym2(), 1.0),
        (FunctionSpec::new(FunctionKind::Cusp { alpha: 0.7 }).unwrap(), sym1(), 0.7),
    ];
    for (f, s, alpha) in cases {
        let sweep = theta_sweep(&f, &s, &xs, &eps, 0, alpha, TOL, Route::Auto, DEFAULT_BUDGET).unwrap();
        let c = |lo: usize, hi: usize| {
            sweep
                .iter()
                .filter(|p| (lo..hi).contains(&((-p.eps.log2()).round() as usize)))
                .map(|p| p.value.abs() / (1.0 / p.eps).ln())
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (c(2, 11), c(11, 21));
        assert!(fine <= 1.1 * coarse, "{}: {fine} vs {coarse}", f.kind().name());
    }
}

#[test]
fn inadmissible_measure_is_rejected() {
    let f = FunctionSpec::new(FunctionKind::ZygmundWeierstrass { b: 2.0 }).unwrap();
    let r = theta(&OscillationRequest::new(&f, &sym1(), &[0.2], 0.01, 0, 1.0));
    assert!(matches!(r, Err(OscError::MomentCondition { .. })));
}

#[test]
fn routes_agree_on_the_two_dimensional_lift() {
    let f = FunctionSpec::with_options(FunctionKind::SmoothedWeierstrass { b: 2.0, alpha: 0.5, m: 2 }, 2, None, 1e-10).unwrap();
    let s = make_named(NamedMeasure::Sym2, 2).unwrap();
    let req = OscillationRequest::new(&f, &s, &[0.3, 0.7], 0.05, 0, 1.0).quad_tol(1e-9);
    let a = theta(&req.clone().route(Route::Spectral)).unwrap().value;
    let b = theta(&req.route(Route::Direct)).unwrap().value;
    assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
}

#[test]
fn results_meet_the_tolerance_or_report_exhaustion() {
    let cases = [
        (FunctionSpec::new(FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 }).unwrap(), sym1(), 0.5),
        (FunctionSpec::new(FunctionKind::ZygmundWeierstrass { b: 3.0 }).unwrap(), sym2(), 1.0),
        (FunctionSpec::new(FunctionKind::Cusp { alpha: 0.5 }).unwrap(), sym1(), 0.5),
        (FunctionSpec::new(FunctionKind::Bump { center: 0.3, width: 0.4 }).unwrap(), sym2(), 1.0),
    ];
    for (f, s, alpha) in cases {
        for tol in [1e-6, 1e-8, 1e-10] {
            for eps in [1e-1, 1e-4, 1e-6] {
                match theta(&OscillationRequest::new(&f, &s, &[0.37], eps, 0, alpha).quad_tol(tol)) {
                    Ok(r) => assert!(r.quad_error_estimate <= tol, "{} eps {eps} tol {tol}: {}", f.kind().name(), r.quad_error_estimate),
                    Err(e) => {
                        assert!(matches!(e, OscError::BudgetExhausted { .. }), "{e}");
                        // Only the roundoff-limited corner may run out.
                        assert!(tol < 1e-8 && eps < 1e-4, "{} eps {eps} tol {tol}: {e}", f.kind().name());
                    }
                }
            }
        }
    }
}
