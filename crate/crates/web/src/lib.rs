//! WebAssembly bindings behind the static page in `www/`.
//!
//! Each operation has a plain Rust form returning a serializable value and a
//! `#[wasm_bindgen]` wrapper that hands JSON to the page.

use osc_lab::czkernel::{k_zero, kernel_report, KernelGrid};
use osc_lab::funcspace::{median, FunctionDescriptor};
use osc_lab::martingale::{lil_ratio, LilMode, LilSample};
use osc_lab::measure::make_named;
use osc_lab::oscillation::{theta_sweep, DEFAULT_BUDGET};
use osc_lab::{FunctionSpec, MeasureDescriptor, NamedMeasure, Route, SignedMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Looser than the library default to keep the page responsive.
const DEMO_QUAD_TOL: f64 = 1e-7;

fn function_from(json: &str) -> Result<FunctionSpec, String> {
    let d: FunctionDescriptor = serde_json::from_str(json).map_err(|e| format!("function descriptor: {e}"))?;
    FunctionSpec::from_descriptor(&d).map_err(|e| e.to_string())
}

/// `sym1`, `sym2` or a JSON measure descriptor.
fn measure_from(spec: &str) -> Result<SignedMeasure, String> {
    let spec = spec.trim();
    let named = match spec {
        "sym1" => Some(NamedMeasure::Sym1),
        "sym2" => Some(NamedMeasure::Sym2),
        _ => None,
    };
    match named {
        Some(n) => make_named(n, 1).map_err(|e| e.to_string()),
        None => {
            let d: MeasureDescriptor = serde_json::from_str(spec).map_err(|e| format!("measure descriptor: {e}"))?;
            SignedMeasure::from_descriptor(&d).map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaCurve {
    pub n: Vec<u32>,
    pub eps: Vec<f64>,
    pub value: Vec<f64>,
    pub error_estimate: Vec<f64>,
}

/// Θ_ε f(x) for ε = 2^{−1}, …, 2^{−n_max}.
pub fn theta_curve(function: &str, measure: &str, x: f64, n_max: u32, m: u32, alpha: f64) -> Result<ThetaCurve, String> {
    let f = function_from(function)?;
    let s = measure_from(measure)?;
    if !(1..=40).contains(&n_max) {
        return Err("n_max must lie in 1..=40".into());
    }
    let n: Vec<u32> = (1..=n_max).collect();
    let eps: Vec<f64> = n.iter().map(|k| 2f64.powi(-(*k as i32))).collect();
    let rows = theta_sweep(&f, &s, &[vec![x]], &eps, m, alpha, DEMO_QUAD_TOL, Route::Auto, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    Ok(ThetaCurve {
        n,
        eps,
        value: rows.iter().map(|r| r.value).collect(),
        error_estimate: rows.iter().map(|r| r.error_estimate).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelProfile {
    pub t: Vec<f64>,
    /// t·K₀(t), bounded by 2M‖σ‖.
    pub t_k0: Vec<f64>,
    pub radius: f64,
    pub total_variation: f64,
    pub sup_t_k0: f64,
    pub sup_t2_dk0: f64,
    pub cancel_sup: f64,
    pub pass: Option<bool>,
}

/// t·K₀(t) on `samples` points of [−1.1M, 1.1M] \ {0}, plus the kernel constants.
pub fn kernel_profile(measure: &str, samples: usize) -> Result<KernelProfile, String> {
    let s = measure_from(measure)?;
    if !(2..=20_000).contains(&samples) {
        return Err("samples must lie in 2..=20000".into());
    }
    let r = kernel_report(&s, &KernelGrid::standard(&s).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let m = r.support_radius;
    // Even sample counts on a symmetric grid never hit t = 0.
    let count = samples + samples % 2;
    let t: Vec<f64> = (0..count).map(|i| 1.1 * m * (-1.0 + (2 * i + 1) as f64 / count as f64)).collect();
    let t_k0 = t.iter().map(|t| k_zero(&s, *t).map(|k| t * k)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    Ok(KernelProfile {
        t,
        t_k0,
        radius: m,
        total_variation: r.total_variation,
        sup_t_k0: r.sup_t_k0,
        sup_t2_dk0: r.sup_t2_dk0,
        cancel_sup: r.cancel_sup,
        pass: r.pass(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilCurves {
    pub n: Vec<u32>,
    pub x: Vec<f64>,
    /// One row per sample point.
    pub ratio: Vec<Vec<f64>>,
    pub median_running_max: Vec<f64>,
}

/// |Θ_{2^{−n}} f(x)| / √(log 2ⁿ · log log log 2ⁿ) for n = 4..=n_max at seeded points of [0, 1).
pub fn lil_curves(function: &str, measure: &str, n_max: u32, samples: usize, seed: u64, m: u32, alpha: f64) -> Result<LilCurves, String> {
    let f = function_from(function)?;
    let s = measure_from(measure)?;
    if !(5..=24).contains(&n_max) || !(1..=512).contains(&samples) {
        return Err("need 5 <= n_max <= 24 and 1 <= samples <= 512".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..samples).map(|_| rng.gen::<f64>()).collect();
    let n: Vec<u32> = (4..=n_max).collect();
    let eps: Vec<f64> = n.iter().map(|k| 2f64.powi(-(*k as i32))).collect();
    let xs: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
    let rows = theta_sweep(&f, &s, &xs, &eps, m, alpha, DEMO_QUAD_TOL, Route::Auto, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    let lil: Vec<LilSample> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| LilSample { x_index: i / n.len(), n: n[i % n.len()], value: r.value })
        .collect();
    let out = lil_ratio(&lil, LilMode::Theta).map_err(|e| e.to_string())?;
    let per = n.len();
    let ratio: Vec<Vec<f64>> = out.chunks(per).map(|c| c.iter().map(|r| r.ratio).collect()).collect();
    let median_running_max = (0..per)
        .map(|j| median(&out.chunks(per).map(|c| c[j].running_max).collect::<Vec<_>>()))
        .collect();
    Ok(LilCurves { n, x, ratio, median_running_max })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = thetaCurve)]
pub fn theta_curve_js(function: &str, measure: &str, x: f64, n_max: u32, m: u32, alpha: f64) -> Result<String, JsError> {
    to_js(theta_curve(function, measure, x, n_max, m, alpha))
}

#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile_js(measure: &str, samples: usize) -> Result<String, JsError> {
    to_js(kernel_profile(measure, samples))
}

#[wasm_bindgen(js_name = lilCurves)]
pub fn lil_curves_js(function: &str, measure: &str, n_max: u32, samples: usize, seed: u64, m: u32, alpha: f64) -> Result<String, JsError> {
    to_js(lil_curves(function, measure, n_max, samples, seed, m, alpha))
}
