//! The Zygmund-class sharpness example f(x) = Σ_{k≥1} b^{−k} cos(b^k x) with
//! σ = δ₁ + δ₋₁ − 2δ₀.
//!
//! Integrating term by term, Υ_ε f(x) = Σ_k a_k(ε) cos(b^k x) with
//! a_k(ε) = −2∫_{b^kε}^{b^k} (1 − cos t)/t² dt. Note that a_k(0) → −π, so the
//! coefficients are negative; only their size matters for the lower bound.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Mutex, OnceLock};

use num::{BigRational, One};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OscError, Result};
use crate::funcspace::{median, FunctionKind, FunctionSpec};
use crate::measure::{make_named, NamedMeasure};
use crate::oscillation::{theta, theta_sweep, OscillationRequest, Route, DEFAULT_BUDGET, DEFAULT_QUAD_TOL};

/// Smallest admissible base; N(ε) grows like log(1/ε)/log b.
pub const MIN_BASE: f64 = 1.1;
/// Beyond this point G(T) uses its asymptotic expansion.
const ASYMPTOTIC_FROM: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessConfig {
    pub b: f64,
    /// Strictly decreasing ε values in (0, 1).
    pub eps: Vec<f64>,
    pub xs: Vec<f64>,
    pub quad_tol: f64,
    /// Threshold for the lower-ratio fraction; half the median of final running maxima when absent.
    pub theta0: Option<f64>,
}

impl SharpnessConfig {
    /// ε = 2^{−n} for n = 4..=n_max and `samples` seeded points in [0, 2π).
    pub fn standard(b: f64, n_max: u32, samples: usize, seed: u64) -> Result<Self> {
        if n_max < 4 {
            return Err(OscError::invalid("n_max must be at least 4"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SharpnessConfig {
            b,
            eps: (4..=n_max).map(|n| (-(n as f64)).exp2()).collect(),
            xs: (0..samples).map(|_| 2.0 * PI * rng.gen::<f64>()).collect(),
            quad_tol: DEFAULT_QUAD_TOL,
            theta0: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_base(self.b)?;
        if self.eps.is_empty() || self.xs.is_empty() {
            return Err(OscError::EmptyPlan);
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(OscError::invalid("epsilon grid must lie in (0, 1)"));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(OscError::invalid("epsilon grid must be strictly decreasing"));
        }
        if !(self.quad_tol > 0.0) {
            return Err(OscError::invalid("quad_tol must be positive"));
        }
        Ok(())
    }
}

fn check_base(b: f64) -> Result<()> {
    if !(b >= MIN_BASE) || !b.is_finite() {
        return Err(OscError::invalid(format!("base must be at least {MIN_BASE}")));
    }
    Ok(())
}

fn zygmund(b: f64) -> Result<FunctionSpec> {
    FunctionSpec::new(FunctionKind::ZygmundWeierstrass { b })
}

/// Υ_ε f(x) for the lacunary Zygmund function with base b.
pub fn upsilon(b: f64, x: f64, eps: f64) -> Result<f64> {
    check_base(b)?;
    let f = zygmund(b)?;
    let sigma = make_named(NamedMeasure::Sym2, 1)?;
    Ok(theta(&OscillationRequest::new(&f, &sigma, &[x], eps, 0, 1.0))?.value)
}

/// G(T) = ∫₀^T (1 − cos t)/t² dt.
fn g_integral(t_max: f64, quad_tol: f64) -> Result<f64> {
    if t_max <= 1.0 {
        return Ok(g_series(t_max));
    }
    if t_max >= ASYMPTOTIC_FROM {
        return Ok(FRAC_PI_2 - g_tail(t_max));
    }
    // The integrand oscillates with period 2π; split at its half periods.
    let breaks: Vec<f64> = (1..).map(|j| j as f64 * PI).take_while(|p| *p < t_max).collect();
    let r = crate::quadrature::integrate(
        |t: f64| (1.0 - t.cos()) / (t * t),
        1.0,
        t_max,
        &breaks,
        crate::quadrature::QuadOptions::new(quad_tol, 1_000_000),
    );
    if !r.converged {
        return Err(OscError::BudgetExhausted { budget: 1_000_000, error: r.error, context: "sharpness coefficient".into() });
    }
    Ok(g_series(1.0) + r.value)
}

/// Σ_j (−1)^j t^{2j+1} / ((2j+1)(2j+2)!) for 0 ≤ t ≤ 1.
fn g_series(t: f64) -> f64 {
    let mut term = 0.5; // t^{2j}/(2j+2)! at j = 0
    let mut sum = 0.0;
    for j in 0..20 {
        sum += term * t / (2 * j + 1) as f64;
        let (a, b) = ((2 * j + 3) as f64, (2 * j + 4) as f64);
        term *= -t * t / (a * b);
    }
    sum
}

/// ∫_T^∞ (1 − cos t)/t² dt = 1/T − Re ∫_T^∞ e^{it}/t² dt, with the latter
/// expanded as i e^{iT} Σ_j (−i)^j (j+1)! T^{−2−j}.
fn g_tail(t: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    let mut mag = 1.0 / (t * t);
    for j in 0..24u32 {
        // (−i)^j cycles through 1, −i, −1, i.
        match j % 4 {
            0 => re += mag,
            1 => im -= mag,
            2 => re -= mag,
            _ => im += mag,
        }
        mag *= (j + 2) as f64 / t;
    }
    // Re(i e^{iT} (re + i im)) = −sin T·re − cos T·im.
    1.0 / t - (-t.sin() * re - t.cos() * im)
}

fn g_cached(t_max: f64, quad_tol: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let key = (t_max.to_bits(), quad_tol.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = g_integral(t_max, quad_tol)?;
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// a_k(ε) = −2∫_{b^kε}^{b^k} (1 − cos t)/t² dt; ε = 0 gives the improper integral.
pub fn a_coeff(b: f64, k: u32, eps: f64, quad_tol: f64) -> Result<f64> {
    check_base(b)?;
    if k == 0 {
        return Err(OscError::invalid("coefficient index starts at 1"));
    }
    if !(eps >= 0.0) || !(quad_tol > 0.0) {
        return Err(OscError::invalid("need eps >= 0 and quad_tol > 0"));
    }
    if eps >= 1.0 {
        return Ok(0.0);
    }
    let top = b.powi(k as i32);
    let upper = g_cached(top, quad_tol)?;
    let lower = if eps == 0.0 { 0.0 } else { g_integral(top * eps, quad_tol)? };
    Ok(-2.0 * (upper - lower))
}

/// Smallest n ≥ 0 with ε bⁿ ≥ 1, decided in exact rational arithmetic.
pub fn n_of_eps(b: f64, eps: f64) -> Result<u32> {
    check_base(b)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(OscError::invalid("epsilon must lie in (0, 1]"));
    }
    let rb = BigRational::from_float(b).unwrap();
    let re = BigRational::from_float(eps).unwrap();
    let reaches = |n: u32| num::pow(rb.clone(), n as usize) * &re >= BigRational::one();
    let mut n = (-eps.ln() / b.ln()).ceil().max(0.0) as u32;
    while n > 0 && reaches(n - 1) {
        n -= 1;
    }
    while !reaches(n) {
        n += 1;
    }
    Ok(n)
}

/// Σ_{k=1}^{N(ε)} a_k(0) cos(b^k x).
pub fn partial_sum(b: f64, x: f64, eps: f64, quad_tol: f64) -> Result<f64> {
    let n = n_of_eps(b, eps)?;
    let mut s = 0.0;
    for k in 1..=n {
        s += a_coeff(b, k, 0.0, quad_tol)? * (b.powi(k as i32) * x).cos();
    }
    Ok(s)
}

/// |Υ_ε f(x) − Σ_{k≤N(ε)} a_k(0) cos(b^k x)|.
pub fn lacunary_gap(b: f64, x: f64, eps: f64) -> Result<f64> {
    Ok((upsilon(b, x, eps)? - partial_sum(b, x, eps, DEFAULT_QUAD_TOL)?).abs())
}

/// √(log(1/ε) · log log log(1/ε)); requires ε < e^{−e}.
pub fn lower_denominator(eps: f64) -> Result<f64> {
    let l = -eps.ln();
    let lll = l.ln().ln();
    if !(lll > 0.0) {
        return Err(OscError::invalid("lower LIL ratio needs eps < e^-e"));
    }
    Ok((l * lll).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessRow {
    pub x_index: usize,
    pub x: f64,
    pub eps: f64,
    /// N(ε).
    pub cutoff: u32,
    pub upsilon: f64,
    pub partial_sum: f64,
    pub gap: f64,
    /// Υ_ε f(x) / √(log(1/ε) log log log(1/ε)), signed.
    pub ratio: f64,
    pub running_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessTable {
    /// x-major, ε in grid order.
    pub rows: Vec<SharpnessRow>,
    pub theta0: f64,
    /// Share of x whose running maximum at the finest ε exceeds `theta0`.
    pub fraction_above: f64,
    /// max_x gap per ε.
    pub max_gap: Vec<f64>,
}

/// Lower-ratio experiment for the lacunary Zygmund function of `cfg.b`.
pub fn lil_lower_experiment(cfg: &SharpnessConfig) -> Result<SharpnessTable> {
    cfg.validate()?;
    lil_lower_experiment_for(&zygmund(cfg.b)?, cfg)
}

/// As [`lil_lower_experiment`] with Υ applied to another function on the line.
pub fn lil_lower_experiment_for(f: &FunctionSpec, cfg: &SharpnessConfig) -> Result<SharpnessTable> {
    cfg.validate()?;
    let sigma = make_named(NamedMeasure::Sym2, 1)?;
    let denominators = cfg.eps.iter().map(|e| lower_denominator(*e)).collect::<Result<Vec<_>>>()?;
    let cutoffs = cfg.eps.iter().map(|e| n_of_eps(cfg.b, *e)).collect::<Result<Vec<_>>>()?;
    let last = cutoffs.iter().copied().max().unwrap_or(0);
    let coeffs = (1..=last).map(|k| a_coeff(cfg.b, k, 0.0, cfg.quad_tol)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<Vec<f64>> = cfg.xs.iter().map(|x| vec![*x]).collect();
    let sweep = theta_sweep(f, &sigma, &xs, &cfg.eps, 0, 1.0, cfg.quad_tol, Route::Auto, DEFAULT_BUDGET as usize)?;
    let ne = cfg.eps.len();
    let mut rows = Vec::with_capacity(sweep.len());
    let mut finals = Vec::with_capacity(xs.len());
    for (i, x) in cfg.xs.iter().enumerate() {
        let mut running = f64::NEG_INFINITY;
        for j in 0..ne {
            let point = &sweep[i * ne + j];
            let n = cutoffs[j];
            let partial: f64 = (1..=n).map(|k| coeffs[k as usize - 1] * (cfg.b.powi(k as i32) * x).cos()).sum();
            let ratio = point.value / denominators[j];
            running = running.max(ratio);
            rows.push(SharpnessRow {
                x_index: i,
                x: *x,
                eps: cfg.eps[j],
                cutoff: n,
                upsilon: point.value,
                partial_sum: partial,
                gap: (point.value - partial).abs(),
                ratio,
                running_max: running,
            });
        }
        finals.push(running);
    }
    let theta0 = cfg.theta0.unwrap_or_else(|| 0.5 * median(&finals));
    let above = finals.iter().filter(|r| **r > theta0).count();
    let max_gap = (0..ne)
        .map(|j| (0..xs.len()).map(|i| rows[i * ne + j].gap).fold(0.0, f64::max))
        .collect();
    Ok(SharpnessTable {
        rows,
        theta0,
        fraction_above: above as f64 / xs.len() as f64,
        max_gap,
    })
}

/// Σ_k a_k(ε) cos(b^k x), summed until the tail bound 4/(ε b^K (b − 1)) drops below `quad_tol`.
pub fn coefficient_sum(b: f64, x: f64, eps: f64, quad_tol: f64) -> Result<f64> {
    check_base(b)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OscError::invalid("epsilon must lie in (0, 1)"));
    }
    let mut s = 0.0;
    let mut k = 1;
    loop {
        s += a_coeff(b, k, eps, quad_tol)? * (b.powi(k as i32) * x).cos();
        if 4.0 / (eps * b.powi(k as i32) * (b - 1.0)) <= quad_tol {
            return Ok(s);
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn g_pieces_agree() {
        let q = |a: f64, b: f64| {
            crate::quadrature::integrate(
                |t: f64| (1.0 - t.cos()) / (t * t),
                a,
                b,
                &[],
                crate::quadrature::QuadOptions::new(1e-14, 1_000_000),
            )
            .value
        };
        // Reference values of Si(T) − (1 − cos T)/T.
        assert_abs_diff_eq!(g_series(1.0), 0.486_385_376_235_322_742, epsilon = 1e-15);
        assert_abs_diff_eq!(g_series(0.3), 0.149_625_674_225_729_755, epsilon = 1e-15);
        assert_abs_diff_eq!(g_integral(2.0, 1e-13).unwrap(), 0.897_339_558_529_123_615, epsilon = 1e-13);
        let below = g_integral(ASYMPTOTIC_FROM * (1.0 - 1e-12), 1e-13).unwrap();
        let above = g_integral(ASYMPTOTIC_FROM, 1e-13).unwrap();
        assert_abs_diff_eq!(below, above, epsilon = 1e-11);
        assert_abs_diff_eq!(g_integral(200.0, 1e-12).unwrap(), g_integral(63.0, 1e-13).unwrap() + q(63.0, 200.0), epsilon = 1e-10);
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(a_coeff(2.0, 3, 1.0, 1e-10).unwrap(), 0.0);
        assert_eq!(a_coeff(2.0, 3, 2.5, 1e-10).unwrap(), 0.0);
        let a = a_coeff(2.0, 1, 0.0, 1e-8).unwrap();
        let b = a_coeff(2.0, 1, 0.0, 5e-9).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        // −2∫₀²(1−cos t)/t² dt = −2(Si(2) − (1 − cos 2)/2).
        assert_abs_diff_eq!(a, -2.0 * (1.605_412_976_802_695 - (1.0 - 2f64.cos()) / 2.0), epsilon = 1e-10);
        for k in 14..40 {
            assert!((a_coeff(2.0, k, 0.0, 1e-10).unwrap() + PI).abs() < 1e-3);
        }
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(n_of_eps(2.0, 1.0).unwrap(), 0);
        assert_eq!(n_of_eps(2.0, 0.1).unwrap(), 4);
        assert_eq!(n_of_eps(2.0, 2f64.powi(-7)).unwrap(), 7);
        assert_eq!(n_of_eps(3.0, 1.0 / 9.0).unwrap(), 3);
        assert_eq!(n_of_eps(1.5, 0.5).unwrap(), 2);
        assert!(n_of_eps(1.05, 0.5).is_err());
    }

    #[test]
    fn upsilon_matches_coefficient_side() {
        let eps = 2f64.powi(-8);
        let u = upsilon(2.0, 0.0, eps).unwrap();
        assert_abs_diff_eq!(u, coefficient_sum(2.0, 0.0, eps, 1e-12).unwrap(), epsilon = 1e-5);
        for x in [0.3, 1.7, 4.0] {
            let u = upsilon(2.0, x, eps).unwrap();
            assert_abs_diff_eq!(u, upsilon(2.0, -x, eps).unwrap(), epsilon = 1e-9);
            assert_abs_diff_eq!(u, coefficient_sum(2.0, x, eps, 1e-12).unwrap(), epsilon = 1e-5);
        }
    }

    #[test]
    fn gap_at_zero_matches_coefficients() {
        let b = 2.0;
        let eps = 2f64.powi(-6);
        let n = n_of_eps(b, eps).unwrap();
        let last = zygmund(b).unwrap().truncation_index();
        let mut oracle = 0.0;
        for k in 1..=last {
            let ak = a_coeff(b, k, eps, 1e-12).unwrap();
            oracle += if k <= n { ak - a_coeff(b, k, 0.0, 1e-12).unwrap() } else { ak };
        }
        assert_abs_diff_eq!(lacunary_gap(b, 0.0, eps).unwrap(), oracle.abs(), epsilon = 1e-5);
    }

    #[test]
    fn experiment_on_linear_function_is_null() {
        let mut cfg = SharpnessConfig::standard(2.0, 8, 8, 1).unwrap();
        cfg.quad_tol = 1e-8;
        let lin = FunctionSpec::new(FunctionKind::Polynomial { coeffs: vec![1.0, 2.0] }).unwrap();
        let t = lil_lower_experiment_for(&lin, &cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.ratio.abs() < 1e-9));
        assert_eq!(t.fraction_above, 0.0);
    }

    #[test]
    fn experiment_is_periodic() {
        let mut cfg = SharpnessConfig::standard(2.0, 10, 6, 3).unwrap();
        let a = lil_lower_experiment(&cfg).unwrap();
        for x in cfg.xs.iter_mut() {
            *x += 2.0 * PI;
        }
        let b = lil_lower_experiment(&cfg).unwrap();
        for (r, s) in a.rows.iter().zip(&b.rows) {
            assert_abs_diff_eq!(r.ratio, s.ratio, epsilon = 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn coefficients_are_monotone(k in 1u32..30, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            // A longer interval [b^k lo, b^k] gives a more negative coefficient.
            let a_long = a_coeff(2.0, k, lo, 1e-10).unwrap();
            let a_short = a_coeff(2.0, k, hi, 1e-10).unwrap();
            prop_assert!(a_long <= a_short + 1e-12);
            prop_assert!(a_short <= 1e-15);
            prop_assert!(a_long.abs() <= a_coeff(2.0, k, 0.0, 1e-10).unwrap().abs() + 1e-12);
            prop_assert!(a_long.abs() <= PI + 1e-3);
        }
    }
}
