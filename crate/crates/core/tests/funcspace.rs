use osc_lab::funcspace::{estimate_seminorm, membership_check, FunctionDescriptor};
use osc_lab::{FunctionKind, FunctionSpec, SamplePlan};
use proptest::prelude::*;

fn spec(kind: FunctionKind) -> FunctionSpec {
    FunctionSpec::new(kind).unwrap()
}

#[test]
fn truncation_is_stable_under_doubling() {
    for kind in [
        FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 },
        FunctionKind::Weierstrass { b: 3.0, alpha: 0.25 },
        FunctionKind::ZygmundWeierstrass { b: 2.0 },
        FunctionKind::SmoothedWeierstrass { b: 2.0, alpha: 0.5, m: 1 },
    ] {
        let f = spec(kind);
        let series = *f.lacunary().unwrap();
        let k = f.truncation_index();
        for i in 0..50 {
            let x = -3.0 + 0.123 * i as f64;
            let diff = (f.eval(&[x]).unwrap() - series.sum(x, 2 * k, 0)).abs();
            assert!(diff < f.eval_tol(), "{} at {x}: {diff}", f.kind().name());
        }
    }
}

fn smooth_corpus() -> Vec<(FunctionSpec, u32)> {
    let grid: Vec<f64> = (0..=40).map(|i| -1.0 + 0.1 * i as f64).collect();
    let values = grid.iter().map(|x| (2.0 * x).sin()).collect();
    vec![
        (spec(FunctionKind::Polynomial { coeffs: vec![1.0, -2.0, 0.5, 0.25] }), 3),
        (spec(FunctionKind::Bump { center: 0.2, width: 0.7 }), 3),
        (spec(FunctionKind::Sampled { grid, values }), 1),
        (spec(FunctionKind::SmoothedWeierstrass { b: 2.0, alpha: 0.5, m: 3 }), 2),
    ]
}

#[test]
fn derivatives_match_central_differences() {
    let h = 1e-5;
    for (f, max_order) in smooth_corpus() {
        for order in 1..=max_order {
            for i in 0..40 {
                let x = -0.45 + 0.0237 * i as f64;
                let fd = (f.eval_derivative(x + h, order - 1).unwrap() - f.eval_derivative(x - h, order - 1).unwrap()) / (2.0 * h);
                let d = f.eval_derivative(x, order).unwrap();
                assert!((fd - d).abs() <= 1e-4 * (1.0 + d.abs()), "{} order {order} at {x}: {d} vs {fd}", f.kind().name());
            }
        }
    }
}

#[test]
fn membership_is_independent_of_difference_order() {
    let plan = SamplePlan::standard();
    let corpus = [
        (FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 }, 0.5f64, true),
        (FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 }, 0.8, false),
        (FunctionKind::Cusp { alpha: 0.4 }, 0.4, true),
        (FunctionKind::ZygmundWeierstrass { b: 2.0 }, 1.0, true),
        (FunctionKind::Polynomial { coeffs: vec![0.0, 1.0, 3.0] }, 1.0, true),
    ];
    for (kind, alpha, expected) in corpus {
        let f = spec(kind);
        let first = (alpha.floor() as u32) + 1;
        for ell in first..=first + 2 {
            let r = membership_check(&f, 0, alpha, ell, &plan).unwrap();
            assert_eq!(r.pass, expected, "{} alpha {alpha} ell {ell}: {r:?}", f.kind().name());
        }
    }
}

#[test]
fn descriptor_round_trip() {
    let json = r#"{"kind":"weierstrass","b":2.0,"alpha":0.5}"#;
    let d: FunctionDescriptor = serde_json::from_str(json).unwrap();
    let f = FunctionSpec::from_descriptor(&d).unwrap();
    assert_eq!(f.dim(), 1);
    let back = serde_json::to_string(&f.descriptor()).unwrap();
    let again: FunctionDescriptor = serde_json::from_str(&back).unwrap();
    assert_eq!(FunctionSpec::from_descriptor(&again).unwrap().eval(&[0.3]).unwrap(), f.eval(&[0.3]).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn seminorm_grows_under_refinement(
        keep_x in prop::collection::vec(any::<bool>(), 32),
        keep_h in prop::collection::vec(any::<bool>(), 8),
        which in 0usize..3,
    ) {
        let f = match which {
            0 => spec(FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 }),
            1 => spec(FunctionKind::Cusp { alpha: 0.5 }),
            _ => spec(FunctionKind::ZygmundWeierstrass { b: 3.0 }),
        };
        let alpha = if which == 2 { 1.0 } else { 0.5 };
        let fine = SamplePlan {
            xs: (0..32).map(|i| i as f64 / 31.0).collect(),
            hs: (2..10).map(|j| 2f64.powi(-j)).collect(),
        };
        let mut coarse = SamplePlan {
            xs: fine.xs.iter().zip(&keep_x).filter(|(_, k)| **k).map(|(x, _)| *x).collect(),
            hs: fine.hs.iter().zip(&keep_h).filter(|(_, k)| **k).map(|(h, _)| *h).collect(),
        };
        if coarse.xs.is_empty() { coarse.xs.push(fine.xs[16]); }
        if coarse.hs.is_empty() { coarse.hs.push(fine.hs[0]); }
        let a = estimate_seminorm(&f, 0, alpha, &coarse, false).unwrap();
        let b = estimate_seminorm(&f, 0, alpha, &fine, false).unwrap();
        prop_assert!(a <= b);
    }
}
