use std::path::PathBuf;

use osc_lab::czkernel::{kernel_report, truncated_transform, KernelGrid};
use osc_lab::funcspace::{median, membership_check};
use osc_lab::martingale::{self, adjacent_increment_sup, comparison_gap, lil_ratio, LilMode, LilSample, MartingaleOptions};
use osc_lab::oscillation::{theta_sweep, theta_tilde, SweepPoint, DEFAULT_BUDGET};
use osc_lab::sharpness::{lil_lower_experiment, SharpnessConfig};
use osc_lab::{FunctionSpec, Route, SamplePlan, SignedMeasure};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{lil_first_generation, load_function, load_measure, Experiment, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::grid::unit_samples;
use crate::output::{fmt_f64, fmt_point, manifest_path, sha256_hex, write_artifact, Artifact, Chart, Series, Table};

/// Share of samples whose running maximum must settle in the LIL experiments.
pub const SETTLE_FRACTION: f64 = 0.9;
/// Allowed relative growth of a running maximum over the last three generations.
pub const SETTLE_GROWTH: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.to_string(), pass, detail }
    }

    pub fn line(&self) -> String {
        format!("{}: {} ({})", self.name, if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    pub manifest: Option<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Primary artifact of an experiment: a CSV table or a JSON report.
enum Primary {
    Table(Table),
    Json(Value),
}

struct Product {
    primary: Primary,
    chart: Option<Chart>,
    checks: Vec<Check>,
    inputs: Value,
}

/// Running total of reported evaluations against the cap.
struct Budget {
    cap: Option<usize>,
    used: usize,
}

impl Budget {
    fn per_call(&self) -> usize {
        self.cap.map_or(DEFAULT_BUDGET, |c| c.saturating_sub(self.used).max(1))
    }

    fn charge(&mut self, evals: usize) -> CliResult<()> {
        self.used += evals;
        match self.cap {
            Some(c) if self.used > c => Err(CliError::Budget(format!("{} evaluations exceed the cap of {c}", self.used))),
            _ => Ok(()),
        }
    }

    fn charge_sweep(&mut self, rows: &[SweepPoint]) -> CliResult<()> {
        self.charge(rows.iter().map(|r| r.evals).sum())
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn thin(points: Vec<(f64, f64)>, i: usize) -> Series {
    Series { points, color: PALETTE[i % PALETTE.len()], width: 0.6 }
}

fn bold(points: Vec<(f64, f64)>) -> Series {
    Series { points, color: "black", width: 2.0 }
}

fn check_dims(f: &FunctionSpec, s: &SignedMeasure) -> CliResult<()> {
    if f.dim() != s.dim() {
        return Err(CliError::config(format!("function has dimension {} but measure has {}", f.dim(), s.dim())));
    }
    Ok(())
}

/// Runs one experiment and writes its artifacts; assertion failures are
/// reported in the outcome, not as errors.
pub fn run(config: &ExperimentConfig) -> CliResult<Outcome> {
    config.validate()?;
    let mut budget = Budget { cap: config.budget, used: 0 };
    let product = match &config.experiment {
        Experiment::Moments { measure, order } => moments(measure, *order)?,
        Experiment::FnCheck { function, m, alpha, ell } => fn_check(function, *m, *alpha, *ell)?,
        Experiment::ThetaSweep { function, measure, x, samples, eps, m, alpha, route } => {
            theta_experiment(config, &mut budget, function, measure, x, *samples, eps, *m, *alpha, *route)?
        }
        Experiment::Martingale { function, measure, nmax, m, alpha, samples } => {
            martingale_experiment(config, &budget, function, measure, *nmax, *m, *alpha, *samples)?
        }
        Experiment::Lil { mode, function, measure, nmax, m, alpha, samples } => {
            lil_experiment(config, &mut budget, *mode, function, measure, *nmax, *m, *alpha, *samples)?
        }
        Experiment::KernelReport { measure } => kernel_report_experiment(measure)?,
        Experiment::KernelCompare { function, measure, x, eps } => kernel_compare(config, function, measure, x, eps)?,
        Experiment::Sharpness { b, nmax, samples } => sharpness(config, *b, *nmax, *samples)?,
    };
    finish(config, product)
}

fn finish(config: &ExperimentConfig, product: Product) -> CliResult<Outcome> {
    let mut artifacts = Vec::new();
    let mut manifest = None;
    let primary_bytes = match &product.primary {
        Primary::Table(t) => t.to_bytes()?,
        Primary::Json(v) => {
            let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
            b.push(b'\n');
            b
        }
    };
    if let Some(out) = &config.out {
        artifacts.push(write_artifact(out, &primary_bytes)?);
    }
    if let (Some(svg), Some(chart)) = (&config.svg, &product.chart) {
        artifacts.push(write_artifact(svg, chart.to_svg().as_bytes())?);
    }
    if let Some(out) = &config.out {
        let identity = json!({ "config": config, "inputs": product.inputs });
        let hash = sha256_hex(&serde_json::to_vec(&identity).map_err(|e| CliError::Io(e.to_string()))?);
        let doc = json!({
            "tool": "osc-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": config.experiment.name(),
            "config_sha256": hash,
            "config": config,
            "inputs": product.inputs,
            "tolerances": {
                "quad_tol": config.quad_tol,
                "budget": config.budget.unwrap_or(DEFAULT_BUDGET),
            },
            "seed": config.seed,
            "checks": product.checks,
            "artifacts": artifacts,
        });
        let path = manifest_path(out);
        let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        write_artifact(&path, &bytes)?;
        manifest = Some(path);
    }
    Ok(Outcome { checks: product.checks, artifacts, manifest })
}

fn moments(source: &str, order: u32) -> CliResult<Product> {
    let (s, d) = load_measure(source)?;
    let r = s.check_vanishing(order)?;
    let detail = match r.first_offender() {
        None => format!("all moments of degree <= {order} vanish, tolerance {:e}", r.tolerance),
        Some((k, v)) => format!("moment {k:?} = {v:e} exceeds tolerance {:e}", r.tolerance),
    };
    let check = Check::new("moments", r.pass, detail);
    Ok(Product {
        primary: Primary::Json(json!({ "measure": d, "report": r })),
        chart: None,
        checks: vec![check],
        inputs: json!({ "measure": d }),
    })
}

fn fn_check(source: &str, m: u32, alpha: f64, ell: u32) -> CliResult<Product> {
    let (f, d) = load_function(source)?;
    let r = membership_check(&f, m, alpha, ell, &SamplePlan::standard())?;
    let check = Check::new(
        "membership",
        r.pass,
        format!("fitted exponent {:.4} vs {:.4}, ratio sup {:.4e}", r.exponent_fit, m as f64 + alpha, r.ratio_sup),
    );
    let chart = Chart {
        title: format!("sup |difference| / h^{}", m as f64 + alpha),
        x_label: "h".into(),
        y_label: "ratio".into(),
        log_x: true,
        log_y: true,
        series: vec![bold(r.hs.iter().copied().zip(r.ratios.iter().copied()).collect())],
    };
    Ok(Product {
        primary: Primary::Json(json!({ "function": d, "report": r })),
        chart: Some(chart),
        checks: vec![check],
        inputs: json!({ "function": d }),
    })
}

#[allow(clippy::too_many_arguments)]
fn theta_experiment(
    config: &ExperimentConfig,
    budget: &mut Budget,
    function: &str,
    measure: &str,
    x: &[Vec<f64>],
    samples: usize,
    eps: &[f64],
    m: u32,
    alpha: f64,
    route: Route,
) -> CliResult<Product> {
    let (f, fd) = load_function(function)?;
    let (s, sd) = load_measure(measure)?;
    check_dims(&f, &s)?;
    let xs = if x.is_empty() { unit_samples(f.dim(), samples, config.seed) } else { x.to_vec() };
    if let Some(p) = xs.iter().find(|p| p.len() != f.dim()) {
        return Err(CliError::config(format!("point {p:?} does not have dimension {}", f.dim())));
    }
    let rows = theta_sweep(&f, &s, &xs, eps, m, alpha, config.quad_tol, route, budget.per_call())?;
    budget.charge_sweep(&rows)?;
    let mut table = Table::new(&["x", "eps", "value", "error_estimate", "evals"]);
    for r in &rows {
        table.push(vec![fmt_point(&r.x), fmt_f64(r.eps), fmt_f64(r.value), fmt_f64(r.error_estimate), r.evals.to_string()]);
    }
    let worst = rows.iter().map(|r| r.error_estimate).fold(0.0, f64::max);
    let check = Check::new(
        "quadrature tolerance",
        worst <= config.quad_tol,
        format!("largest error estimate {worst:.3e} vs {:.1e}", config.quad_tol),
    );
    let series = rows.chunks(eps.len()).enumerate().map(|(i, c)| thin(c.iter().map(|r| (r.eps, r.value)).collect(), i)).collect();
    let chart = Chart {
        title: "Theta_eps f(x)".into(),
        x_label: "eps".into(),
        y_label: "value".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(Product { primary: Primary::Table(table), chart: Some(chart), checks: vec![check], inputs: json!({ "function": fd, "measure": sd }) })
}

#[allow(clippy::too_many_arguments)]
fn martingale_experiment(
    config: &ExperimentConfig,
    budget: &Budget,
    function: &str,
    measure: &str,
    nmax: u32,
    m: u32,
    alpha: f64,
    samples: usize,
) -> CliResult<Product> {
    let (f, fd) = load_function(function)?;
    let (s, sd) = load_measure(measure)?;
    check_dims(&f, &s)?;
    let opts = MartingaleOptions { quad_tol: config.quad_tol, budget: budget.per_call(), route: Route::Auto };
    let mart = martingale::build(&f, &s, nmax, m, alpha, opts)?;
    let dim = f.dim();
    let xs = unit_samples(dim, samples, config.seed);
    let mut table = Table::new(&["n", "cube_index", "S", "increment", "adjacent_max", "comparison_gap"]);
    let mut gaps = Vec::new();
    for n in 0..=nmax {
        let level = mart.level(n).expect("built generation");
        let adjacent = adjacent_increment_sup(&mart, n)?;
        let gap = comparison_gap(&mart, n, &xs)?;
        gaps.push((n, gap));
        for (flat, v) in level.iter().enumerate() {
            let cube = martingale::DyadicCube::from_flat(dim, n, flat);
            let inc = cube.parent().and_then(|p| mart.value(&p)).map_or(0.0, |p| (v - p).abs());
            table.push(vec![n.to_string(), flat.to_string(), fmt_f64(*v), fmt_f64(inc), fmt_f64(adjacent), fmt_f64(gap)]);
        }
    }
    let bound = 2f64.powi(dim as i32 + 1) * config.quad_tol;
    let mut checks = vec![Check::new(
        "martingale property",
        mart.martingale_defect() <= bound,
        format!("largest parent/child-mean defect {:.3e} vs {bound:.1e}", mart.martingale_defect()),
    )];
    let tail: Vec<f64> = gaps.iter().filter(|(n, _)| *n >= 4).map(|(_, g)| *g).collect();
    if !tail.is_empty() {
        let max = tail.iter().copied().fold(0.0, f64::max);
        let med = median(&tail);
        checks.push(Check::new("comparison bound", max <= 2.0 * med, format!("max {max:.4e}, median {med:.4e} over n >= 4")));
    }
    let chart = Chart {
        title: "sup |S_n - Theta_(2^(-n-2)) f|".into(),
        x_label: "n".into(),
        y_label: "gap".into(),
        log_x: false,
        log_y: true,
        series: vec![bold(gaps.iter().map(|(n, g)| (*n as f64, *g)).collect())],
    };
    Ok(Product { primary: Primary::Table(table), chart: Some(chart), checks, inputs: json!({ "function": fd, "measure": sd }) })
}

/// Fraction of samples whose running maximum grows by less than [`SETTLE_GROWTH`] over the last three generations.
fn settle_check(finals: &[(f64, f64)]) -> Check {
    let settled = finals.iter().filter(|(early, late)| *late <= (1.0 + SETTLE_GROWTH) * early).count();
    let frac = settled as f64 / finals.len() as f64;
    Check::new(
        "running max settles",
        frac >= SETTLE_FRACTION,
        format!("{:.1}% of samples grow < {:.0}% over the last three generations", 100.0 * frac, 100.0 * SETTLE_GROWTH),
    )
}

#[allow(clippy::too_many_arguments)]
fn lil_experiment(
    config: &ExperimentConfig,
    budget: &mut Budget,
    mode: LilMode,
    function: &str,
    measure: &str,
    nmax: u32,
    m: u32,
    alpha: f64,
    samples: usize,
) -> CliResult<Product> {
    let (f, fd) = load_function(function)?;
    let (s, sd) = load_measure(measure)?;
    check_dims(&f, &s)?;
    let xs = unit_samples(f.dim(), samples, config.seed);
    let first = lil_first_generation(mode);
    let gens: Vec<u32> = (first..=nmax).collect();
    let mut lil_samples = Vec::with_capacity(xs.len() * gens.len());
    match mode {
        LilMode::Theta => {
            let eps: Vec<f64> = gens.iter().map(|n| 2f64.powi(-(*n as i32))).collect();
            let rows = theta_sweep(&f, &s, &xs, &eps, m, alpha, config.quad_tol, Route::Auto, budget.per_call())?;
            budget.charge_sweep(&rows)?;
            for (i, chunk) in rows.chunks(eps.len()).enumerate() {
                for (n, r) in gens.iter().zip(chunk) {
                    lil_samples.push(LilSample { x_index: i, n: *n, value: r.value });
                }
            }
        }
        LilMode::Martingale => {
            let opts = MartingaleOptions { quad_tol: config.quad_tol, budget: budget.per_call(), route: Route::Auto };
            let mart = martingale::build(&f, &s, nmax, m, alpha, opts)?;
            for (i, x) in xs.iter().enumerate() {
                for n in &gens {
                    lil_samples.push(LilSample { x_index: i, n: *n, value: mart.value_at(x, *n)? });
                }
            }
        }
    }
    let rows = lil_ratio(&lil_samples, mode)?;
    let value_col = match mode {
        LilMode::Theta => "theta",
        LilMode::Martingale => "S",
    };
    let mut table = match mode {
        LilMode::Theta => Table::new(&["x", "n", "eps", value_col, "ratio"]),
        LilMode::Martingale => Table::new(&["x", "n", value_col, "ratio"]),
    };
    for r in &rows {
        let x = fmt_point(&xs[r.x_index]);
        let mut rec = vec![x, r.n.to_string()];
        if mode == LilMode::Theta {
            rec.push(fmt_f64(2f64.powi(-(r.n as i32))));
        }
        rec.push(fmt_f64(r.value));
        rec.push(fmt_f64(r.ratio));
        table.push(rec);
    }
    let per_x = gens.len();
    let finals: Vec<(f64, f64)> = rows.chunks(per_x).map(|c| (c[per_x - 4].running_max, c[per_x - 1].running_max)).collect();
    let check = settle_check(&finals);
    let mut series: Vec<Series> =
        rows.chunks(per_x).enumerate().map(|(i, c)| thin(c.iter().map(|r| (r.n as f64, r.ratio)).collect(), i)).collect();
    let med: Vec<(f64, f64)> = (0..per_x)
        .map(|j| {
            let col: Vec<f64> = rows.chunks(per_x).map(|c| c[j].ratio).collect();
            (gens[j] as f64, median(&col))
        })
        .collect();
    series.push(bold(med));
    let chart = Chart {
        title: format!("LIL ratio ({})", if mode == LilMode::Theta { "theta" } else { "martingale" }),
        x_label: "n".into(),
        y_label: "ratio".into(),
        log_x: false,
        log_y: false,
        series,
    };
    Ok(Product { primary: Primary::Table(table), chart: Some(chart), checks: vec![check], inputs: json!({ "function": fd, "measure": sd }) })
}

fn kernel_report_experiment(measure: &str) -> CliResult<Product> {
    let (s, sd) = load_measure(measure)?;
    let r = kernel_report(&s, &KernelGrid::standard(&s)?)?;
    let (Some(size), Some(smooth), Some(cancel)) = (r.size_ok, r.smoothness_ok, r.cancellation_ok) else {
        return Err(CliError::Precondition("the kernel bounds need a measure whose first moment vanishes".into()));
    };
    let scale = r.support_radius * r.total_variation;
    let checks = vec![
        Check::new("kernel size", size, format!("sup|t K0| = {:.6e} vs 2M|sigma| = {:.6e}", r.sup_t_k0, 2.0 * scale)),
        Check::new("kernel smoothness", smooth, format!("sup|t^2 dK0| = {:.6e} vs 3M|sigma| = {:.6e}", r.sup_t2_dk0, 3.0 * scale)),
        Check::new("kernel cancellation", cancel, format!("cancellation sup = {:.6e} vs 3M|sigma| = {:.6e}", r.cancel_sup, 3.0 * scale)),
    ];
    Ok(Product { primary: Primary::Json(json!({ "measure": sd, "report": r })), chart: None, checks, inputs: json!({ "measure": sd }) })
}

fn kernel_compare(config: &ExperimentConfig, function: &str, measure: &str, x: &[f64], eps: &[f64]) -> CliResult<Product> {
    let (f, fd) = load_function(function)?;
    let (s, sd) = load_measure(measure)?;
    check_dims(&f, &s)?;
    let xs: Vec<f64> = if x.is_empty() { (-8..=8).map(|i| i as f64 / 8.0).collect() } else { x.to_vec() };
    let pairs: Vec<(f64, f64)> = xs.iter().flat_map(|x| eps.iter().map(move |e| (*x, *e))).collect();
    let tol = config.quad_tol;
    let values = pairs
        .par_iter()
        .map(|&(x, e)| Ok((theta_tilde(&f, &s, x, e, tol)?.value, truncated_transform(&f, &s, x, e, tol)?)))
        .collect::<osc_lab::Result<Vec<_>>>()?;
    let mut table = Table::new(&["x", "eps", "theta_tilde", "transform", "gap"]);
    let mut worst: f64 = 0.0;
    for ((x, e), (tt, tr)) in pairs.iter().zip(&values) {
        let gap = (tt - tr).abs();
        worst = worst.max(gap);
        table.push(vec![fmt_f64(*x), fmt_f64(*e), fmt_f64(*tt), fmt_f64(*tr), fmt_f64(gap)]);
    }
    let bound = f.derivative_sup()? * 2.0 * s.support_radius() * s.total_variation() + 4.0 * tol;
    let check = Check::new("cz comparison", worst <= bound, format!("max gap {worst:.6e} vs |f'| 2M|sigma| + 4 tol = {bound:.6e}"));
    let series = pairs
        .chunks(eps.len())
        .zip(values.chunks(eps.len()))
        .enumerate()
        .map(|(i, (p, v))| thin(p.iter().zip(v).map(|((_, e), (tt, tr))| (*e, (tt - tr).abs())).collect(), i))
        .collect();
    let chart = Chart {
        title: "|theta_tilde - truncated transform|".into(),
        x_label: "eps".into(),
        y_label: "gap".into(),
        log_x: true,
        log_y: false,
        series,
    };
    Ok(Product { primary: Primary::Table(table), chart: Some(chart), checks: vec![check], inputs: json!({ "function": fd, "measure": sd }) })
}

fn sharpness(config: &ExperimentConfig, b: f64, nmax: u32, samples: usize) -> CliResult<Product> {
    let mut cfg = SharpnessConfig::standard(b, nmax, samples, config.seed)?;
    cfg.quad_tol = config.quad_tol;
    let t = lil_lower_experiment(&cfg)?;
    let mut table = Table::new(&["x", "n", "eps", "upsilon", "partial_sum", "gap", "ratio"]);
    for r in &t.rows {
        let n = (-r.eps.log2()).round() as i64;
        table.push(vec![
            fmt_f64(r.x),
            n.to_string(),
            fmt_f64(r.eps),
            fmt_f64(r.upsilon),
            fmt_f64(r.partial_sum),
            fmt_f64(r.gap),
            fmt_f64(r.ratio),
        ]);
    }
    let gmax = t.max_gap.iter().copied().fold(0.0, f64::max);
    let gmed = median(&t.max_gap);
    let checks = vec![
        Check::new(
            "lower ratio",
            t.fraction_above >= SETTLE_FRACTION,
            format!("{:.1}% of samples end above theta0 = {:.4}", 100.0 * t.fraction_above, t.theta0),
        ),
        Check::new("lacunary gap bounded", gmax <= 2.0 * gmed, format!("max {gmax:.4e}, median {gmed:.4e} over the epsilon grid")),
    ];
    let ne = cfg.eps.len();
    let series = t
        .rows
        .chunks(ne)
        .enumerate()
        .map(|(i, c)| thin(c.iter().map(|r| ((-r.eps.log2()).round(), r.ratio)).collect(), i))
        .collect();
    let chart = Chart {
        title: format!("lower LIL ratio, b = {b}"),
        x_label: "n".into(),
        y_label: "ratio".into(),
        log_x: false,
        log_y: false,
        series,
    };
    Ok(Product { primary: Primary::Table(table), chart: Some(chart), checks, inputs: json!({ "b": b }) })
}
