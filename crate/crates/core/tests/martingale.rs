use osc_lab::martingale::{self, adjacent_increment_sup, comparison_gap, s_value, DyadicCube, MartingaleOptions};
use osc_lab::measure::make_named;
use osc_lab::{FunctionKind, FunctionSpec, NamedMeasure, Route};

fn corpus(dim: usize) -> Vec<(FunctionSpec, NamedMeasure, f64)> {
    let with = |kind| FunctionSpec::with_options(kind, dim, None, 1e-10).unwrap();
    vec![
        (with(FunctionKind::Weierstrass { b: 2.0, alpha: 0.5 }), NamedMeasure::Sym1, 0.5),
        (with(FunctionKind::ZygmundWeierstrass { b: 3.0 }), NamedMeasure::Sym2, 1.0),
        (with(FunctionKind::Polynomial { coeffs: vec![0.5, -1.0, 2.0] }), NamedMeasure::Sym2, 1.0),
    ]
}

#[test]
fn parents_are_means_of_children() {
    let quad_tol = 1e-8;
    for (dim, n_max) in [(1, 9), (2, 5)] {
        for (f, name, alpha) in corpus(dim) {
            let s = make_named(name.clone(), dim).unwrap();
            let mart = martingale::build(&f, &s, n_max, 0, alpha, MartingaleOptions { quad_tol, ..Default::default() }).unwrap();
            let bound = 2f64.powi(dim as i32 + 1) * quad_tol;
            assert!(mart.martingale_defect() <= bound, "{} d={dim}: {}", f.kind().name(), mart.martingale_defect());
        }
    }
}

#[test]
fn direct_cube_values_match_the_table() {
    let f = FunctionSpec::new(FunctionKind::Hat { center: 0.4, half_width: 0.3 }).unwrap();
    let s = make_named(NamedMeasure::Sym2, 1).unwrap();
    let mart = martingale::build(&f, &s, 5, 0, 1.0, MartingaleOptions { quad_tol: 1e-8, ..Default::default() }).unwrap();
    assert_eq!(mart.route(), Route::Direct);
    for flat in [0, 7, 13, 31] {
        let cube = DyadicCube::from_flat(1, 5, flat);
        let v = s_value(&f, &s, &cube, 0, 1.0, 1e-8).unwrap().value;
        assert!((v - mart.value(&cube).unwrap()).abs() <= 2e-8);
    }
}

#[test]
fn increments_stay_bounded() {
    for (f, name, alpha) in corpus(1).into_iter().take(2) {
        let s = make_named(name, 1).unwrap();
        let mart = martingale::build(&f, &s, 14, 0, alpha, MartingaleOptions::default()).unwrap();
        let inc = mart.increments();
        let running: Vec<f64> = inc
            .iter()
            .scan(0.0f64, |m, v| {
                *m = m.max(*v);
                Some(*m)
            })
            .collect();
        let n = running.len();
        assert!(running[n - 1] <= 1.1 * running[n - 5], "{}: {running:?}", f.kind().name());
        assert!(mart.sb_norm() >= adjacent_increment_sup(&mart, 14).unwrap() / 2.0 - 1e-12);
    }
}

#[test]
fn comparison_gap_is_uniform_in_n() {
    let f = FunctionSpec::new(FunctionKind::ZygmundWeierstrass { b: 2.0 }).unwrap();
    let s = make_named(NamedMeasure::Sym2, 1).unwrap();
    let mart = martingale::build(&f, &s, 12, 0, 1.0, MartingaleOptions::default()).unwrap();
    let xs: Vec<Vec<f64>> = (0..64).map(|i| vec![(i as f64 + 0.5) / 64.0]).collect();
    let gaps: Vec<f64> = (4..=12).map(|n| comparison_gap(&mart, n, &xs).unwrap()).collect();
    let max = gaps.iter().copied().fold(0.0, f64::max);
    assert!(max <= 2.0 * osc_lab::funcspace::median(&gaps), "{gaps:?}");
}

#[test]
fn scaling_slopes_in_two_dimensions() {
    let cube = DyadicCube::new(2, vec![1, 2]).unwrap();
    let hs: Vec<f64> = (2..=9).map(|j| cube.side() * 2f64.powi(-j)).collect();
    for (f, name, alpha) in corpus(2) {
        let s = make_named(name, 2).unwrap();
        let slope = martingale::scaling_slope(&f, &s, &cube, &hs).unwrap();
        let min = if alpha < 1.0 { 0.9 } else { 1.8 };
        assert!(slope >= min, "{}: {slope}", f.kind().name());
    }
}

#[test]
fn cusp_unit_cube_matches_binomial_series() {
    // S_Q for Q = [0, 1] reduces to (2/(α+1)) Σ_{j odd} C(α+1, j)/(j − α);
    // reference values summed in 40-digit arithmetic.
    let s = make_named(NamedMeasure::Sym1, 1).unwrap();
    let cube = DyadicCube::unit(1);
    for (alpha, expected) in [(0.3, 2.825_834_124_418_349_2), (0.5, 3.961_530_786_047_309_6), (0.9, 19.984_587_569_020_976)] {
        let f = FunctionSpec::new(FunctionKind::Cusp { alpha }).unwrap();
        let r = s_value(&f, &s, &cube, 0, alpha, 1e-10).unwrap();
        assert!((r.value - expected).abs() <= 1e-9, "alpha {alpha}: {} vs {expected}", r.value);
    }
}
