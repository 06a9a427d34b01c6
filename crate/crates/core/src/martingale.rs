//! Dyadic martingale S_Q = ∫_0^1 ⨍_Q Δ_σ f(x,h) dx dh/h^{m+α+1} and its
//! diagnostics: martingale defect, increments, comparison with Θ_ε and
//! law-of-the-iterated-logarithm ratios.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OscError, Result};
use crate::funcspace::{fit_slope, FunctionSpec};
use crate::measure::SignedMeasure;
use crate::oscillation::{
    check_admissible, check_alpha, required_order, resolve_route, theta_sweep, Difference, OscillationResult, Route,
    DEFAULT_BUDGET, DEFAULT_QUAD_TOL,
};
use crate::quadrature::{integrate, GaussRule, QuadOptions};
use crate::spectral::{SpectralModel, Tally};

/// Largest supported generation per dimension (index d−1).
pub const MAX_GENERATION: [u32; 3] = [14, 8, 5];
const MAX_TAIL_PANELS: usize = 1000;
/// Random points per cube in [`default_comparison_samples`].
pub const SAMPLES_PER_CUBE: usize = 8;

/// Q = Π [m_i 2^{−n}, (m_i+1) 2^{−n}) inside [0,1)^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub generation: u32,
    pub index: Vec<u32>,
}

impl DyadicCube {
    pub fn unit(dim: usize) -> Self {
        DyadicCube { generation: 0, index: vec![0; dim] }
    }

    pub fn new(generation: u32, index: Vec<u32>) -> Result<Self> {
        if index.is_empty() || generation > 30 {
            return Err(OscError::invalid("cube needs a nonempty index and generation <= 30"));
        }
        if index.iter().any(|&m| m >= 1 << generation) {
            return Err(OscError::invalid("cube index out of range for its generation"));
        }
        Ok(DyadicCube { generation, index })
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        2f64.powi(-(self.generation as i32))
    }

    pub fn origin(&self) -> Vec<f64> {
        let l = self.side();
        self.index.iter().map(|&m| m as f64 * l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        let l = self.side();
        self.index.iter().map(|&m| (m as f64 + 0.5) * l).collect()
    }

    /// Row-major position among the 2^{nd} cubes of its generation.
    pub fn flat_index(&self) -> usize {
        let per_axis = 1usize << self.generation;
        self.index.iter().fold(0, |acc, &m| acc * per_axis + m as usize)
    }

    pub fn from_flat(dim: usize, generation: u32, mut flat: usize) -> Self {
        let per_axis = 1usize << generation;
        let mut index = vec![0; dim];
        for slot in index.iter_mut().rev() {
            *slot = (flat % per_axis) as u32;
            flat /= per_axis;
        }
        DyadicCube { generation, index }
    }

    pub fn parent(&self) -> Option<Self> {
        (self.generation > 0).then(|| DyadicCube {
            generation: self.generation - 1,
            index: self.index.iter().map(|m| m / 2).collect(),
        })
    }

    /// The 2^d children in row-major order.
    pub fn children(&self) -> Vec<Self> {
        let d = self.dim();
        (0..1usize << d)
            .map(|bits| DyadicCube {
                generation: self.generation + 1,
                index: (0..d).map(|i| 2 * self.index[i] + ((bits >> (d - 1 - i)) & 1) as u32).collect(),
            })
            .collect()
    }

    /// The generation-n cube containing x ∈ [0,1)^d.
    pub fn containing(x: &[f64], generation: u32) -> Result<Self> {
        if x.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(OscError::invalid("point must lie in [0,1)^d"));
        }
        let scale = (1u64 << generation) as f64;
        Ok(DyadicCube {
            generation,
            index: x.iter().map(|t| (t * scale).floor() as u32).collect(),
        })
    }
}

fn check_generation(dim: usize, n: u32) -> Result<()> {
    if dim == 0 || dim > 3 {
        return Err(OscError::UnsupportedDimension { dim, context: "dyadic martingales need 1 <= d <= 3" });
    }
    if n > MAX_GENERATION[dim - 1] {
        return Err(OscError::invalid(format!(
            "generation {n} exceeds the limit {} for d = {dim}",
            MAX_GENERATION[dim - 1]
        )));
    }
    Ok(())
}

/// ⨍_Q Δ_σ f(x, h) dx to within `tol`.
fn cube_average(diff: &Difference, origin: &[f64], ell: f64, h: f64, tol: f64) -> f64 {
    static RULES: OnceLock<(GaussRule, GaussRule)> = OnceLock::new();
    let (lo, hi) = RULES.get_or_init(|| (GaussRule::new(8), GaussRule::new(16)));
    if diff.is_polynomial() {
        // The moment expansion is exact and the integrand is a polynomial.
        return origin
            .iter()
            .enumerate()
            .map(|(axis, &q)| hi.integrate(q, q + ell, |t| diff.axis_eval(axis, t, h)) / ell)
            .sum();
    }
    if diff.separable() {
        let kinks = diff.kinks();
        let nodes = diff.nodes();
        let reach = nodes.iter().flat_map(|(p, _)| p.iter()).fold(0.0f64, |m, a| m.max(a.abs()));
        if h * reach <= ell {
            // σ has zero mass, so Σ_j w_j ∫_q^{q+ℓ} g(t + h a_j) dt reduces to
            // strips of width h|a_j| at the two ends of the interval. Each strip
            // is O(h), which keeps roundoff proportional to h instead of ℓ.
            let strip_tol = tol * ell / (2.0 * nodes.len() as f64 * origin.len() as f64);
            let mut total = 0.0;
            for (axis, &q) in origin.iter().enumerate() {
                for (p, w) in nodes {
                    let delta = h * p[axis];
                    if delta == 0.0 || *w == 0.0 {
                        continue;
                    }
                    for (end, sign) in [(q + ell, 1.0), (q, -1.0)] {
                        // Integrate in the offset τ so that the strip width is exact.
                        let (a, b) = if delta > 0.0 { (0.0, delta) } else { (delta, 0.0) };
                        let breaks: Vec<f64> = kinks.iter().map(|c| c - end).collect();
                        let r = integrate(
                            |tau| diff.profile_value(end + tau),
                            a,
                            b,
                            &breaks,
                            QuadOptions::new(strip_tol / w.abs(), 100_000),
                        );
                        total += sign * w * delta.signum() * r.value;
                    }
                }
            }
            return total / ell;
        }
        let mut total = 0.0;
        for (axis, &q) in origin.iter().enumerate() {
            let mut cuts = vec![q, q + ell];
            for (p, _) in nodes {
                for c in &kinks {
                    let t = c - h * p[axis];
                    if t > q && t < q + ell {
                        cuts.push(t);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut coarse = 0.0;
            let mut fine = 0.0;
            for w in cuts.windows(2) {
                coarse += lo.integrate(w[0], w[1], |t| diff.axis_eval(axis, t, h));
                fine += hi.integrate(w[0], w[1], |t| diff.axis_eval(axis, t, h));
            }
            total += if (coarse - fine).abs() <= tol * ell { coarse } else { fine } / ell;
        }
        total
    } else {
        let tensor = |rule: &GaussRule| {
            let d = origin.len();
            let pts: Vec<Vec<(f64, f64)>> = origin.iter().map(|&q| rule.mapped(q, q + ell).collect()).collect();
            let n = rule.order();
            let mut acc = 0.0;
            let mut x = vec![0.0; d];
            for flat in 0..n.pow(d as u32) {
                let mut rest = flat;
                let mut w = 1.0;
                for i in (0..d).rev() {
                    let (t, wi) = pts[i][rest % n];
                    rest /= n;
                    x[i] = t;
                    w *= wi;
                }
                acc += w * diff.eval(&x, h);
            }
            acc / ell.powi(d as i32)
        };
        let coarse = tensor(lo);
        let fine = tensor(hi);
        if (coarse - fine).abs() <= tol {
            coarse
        } else {
            fine
        }
    }
}

/// S_Q by direct quadrature: adaptive on [ℓ/2, 1], geometric panels below
/// with a fitted majorant for the remaining tail.
fn direct_s(diff: &Difference, cube: &DyadicCube, m: u32, alpha: f64, tol: f64, tally: &mut Tally) -> Result<f64> {
    let s = m as f64 + alpha;
    let ell = cube.side();
    let origin = cube.origin();
    // Relative to h^s, the scale at which the average enters the integrand.
    let avg_tol = |h: f64| tol * 1e-2 * h.powf(s);
    let integrand = |u: f64| {
        let h = u.exp();
        cube_average(diff, &origin, ell, h, avg_tol(h)) * (-s * u).exp()
    };
    let split = ell / 2.0;
    let mut total = 0.0;
    if split < 1.0 {
        let ua = split.ln();
        let breaks: Vec<f64> = (1..).map(|j| ua + j as f64 * LN_2).take_while(|u| *u < 0.0).collect();
        let r = integrate(integrand, ua, 0.0, &breaks, QuadOptions::new(tol / 2.0, tally.remaining()));
        total += tally.absorb(r, "S_Q outer integral")?;
    }
    let mut c_fit: f64 = 0.0;
    let mut upper = split.min(1.0);
    for j in 0..MAX_TAIL_PANELS {
        let lower = upper / 2.0;
        let panel_tol = tol / (4.0 * ((j + 2) * (j + 2)) as f64);
        let r = integrate(integrand, lower.ln(), upper.ln(), &[], QuadOptions::new(panel_tol, tally.remaining()));
        let panel = tally.absorb(r, "S_Q tail panel")?;
        total += panel;
        for h in [lower, (lower * upper).sqrt(), upper] {
            let v = cube_average(diff, &origin, ell, h, avg_tol(h)).abs();
            let c = if alpha < 1.0 {
                v / h.powi(m as i32 + 1)
            } else {
                v / (h.powi(m as i32 + 2) * (ell / h).ln())
            };
            c_fit = c_fit.max(c);
        }
        let majorant = if alpha < 1.0 {
            c_fit * lower.powf(1.0 - alpha) / (1.0 - alpha)
        } else {
            c_fit * lower * ((ell / lower).ln() + 1.0)
        };
        if panel.abs() < tol / 4.0 && majorant < tol / 4.0 {
            tally.error += majorant;
            return Ok(total);
        }
        upper = lower;
    }
    Err(OscError::BudgetExhausted {
        budget: tally.budget,
        error: f64::NAN,
        context: format!("S_Q tail did not settle for cube {:?}", cube.index),
    })
}

/// S_Q for a single cube.
pub fn s_value(f: &FunctionSpec, sigma: &SignedMeasure, cube: &DyadicCube, m: u32, alpha: f64, quad_tol: f64) -> Result<OscillationResult> {
    check_alpha(alpha)?;
    check_admissible(sigma, required_order(m, alpha))?;
    if f.dim() != sigma.dim() || cube.dim() != f.dim() {
        return Err(OscError::DimensionMismatch { expected: f.dim(), got: cube.dim() });
    }
    let s = m as f64 + alpha;
    let model = SpectralModel::new(f, sigma, s);
    match resolve_route(Route::Auto, &model)? {
        Route::Spectral => {
            let table = model.unwrap().cube_table(cube.side(), quad_tol, DEFAULT_BUDGET)?;
            let (value, err) = table.eval(&cube.origin(), cube.side());
            Ok(OscillationResult { value, quad_error_estimate: err, evaluations: table.evals, route: Route::Spectral })
        }
        _ => {
            let diff = Difference::new(f, sigma)?;
            let mut tally = Tally::new(DEFAULT_BUDGET);
            let value = direct_s(&diff, cube, m, alpha, quad_tol, &mut tally)?;
            Ok(OscillationResult {
                value,
                quad_error_estimate: tally.error,
                evaluations: tally.evals,
                route: Route::Direct,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleOptions {
    pub quad_tol: f64,
    /// Evaluation budget per cube.
    pub budget: usize,
    pub route: Route,
}

impl Default for MartingaleOptions {
    fn default() -> Self {
        MartingaleOptions {
            quad_tol: DEFAULT_QUAD_TOL,
            budget: DEFAULT_BUDGET,
            route: Route::Auto,
        }
    }
}

/// S_n on every generation n ≤ n_max, stored row-major per generation.
#[derive(Debug, Clone)]
pub struct DyadicMartingale {
    f: FunctionSpec,
    sigma: SignedMeasure,
    m: u32,
    alpha: f64,
    options: MartingaleOptions,
    route: Route,
    levels: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
    defect: f64,
    increments: Vec<f64>,
}

/// Builds S_Q for all dyadic cubes of generation ≤ n_max.
pub fn build(
    f: &FunctionSpec,
    sigma: &SignedMeasure,
    n_max: u32,
    m: u32,
    alpha: f64,
    options: MartingaleOptions,
) -> Result<DyadicMartingale> {
    let dim = f.dim();
    if sigma.dim() != dim {
        return Err(OscError::DimensionMismatch { expected: dim, got: sigma.dim() });
    }
    check_generation(dim, n_max)?;
    check_alpha(alpha)?;
    if !(options.quad_tol > 0.0) {
        return Err(OscError::invalid("quadrature tolerance must be positive"));
    }
    check_admissible(sigma, required_order(m, alpha))?;
    let s = m as f64 + alpha;
    let model = SpectralModel::new(f, sigma, s);
    let route = resolve_route(options.route, &model)?;
    let mut levels = Vec::with_capacity(n_max as usize + 1);
    let mut errors = Vec::with_capacity(n_max as usize + 1);
    match route {
        Route::Spectral => {
            let table = model.unwrap().cube_table(2f64.powi(-(n_max as i32)), options.quad_tol, options.budget)?;
            for n in 0..=n_max {
                let count = 1usize << (n as usize * dim);
                let cubes: Vec<usize> = (0..count).collect();
                let vals = crate::par::map(&cubes, |&c| {
                    let cube = DyadicCube::from_flat(dim, n, c);
                    table.eval(&cube.origin(), cube.side())
                });
                levels.push(vals.iter().map(|v| v.0).collect());
                errors.push(vals.iter().map(|v| v.1).collect());
            }
        }
        _ => {
            let diff = Difference::new(f, sigma)?;
            for n in 0..=n_max {
                let count = 1usize << (n as usize * dim);
                let cubes: Vec<usize> = (0..count).collect();
                let vals = crate::par::map(&cubes, |&c| -> Result<(f64, f64)> {
                    let cube = DyadicCube::from_flat(dim, n, c);
                    let mut tally = Tally::new(options.budget);
                    let v = direct_s(&diff, &cube, m, alpha, options.quad_tol, &mut tally).map_err(|e| match e {
                        OscError::BudgetExhausted { budget, error, context } => OscError::BudgetExhausted {
                            budget,
                            error,
                            context: format!("{context} (cube n={n}, index {:?})", cube.index),
                        },
                        other => other,
                    })?;
                    Ok((v, tally.error))
                });
                let mut lv = Vec::with_capacity(count);
                let mut le = Vec::with_capacity(count);
                for v in vals {
                    let (a, b) = v?;
                    lv.push(a);
                    le.push(b);
                }
                levels.push(lv);
                errors.push(le);
            }
        }
    }
    let mut mart = DyadicMartingale {
        f: f.clone(),
        sigma: sigma.clone(),
        m,
        alpha,
        options,
        route,
        levels,
        errors,
        defect: 0.0,
        increments: Vec::new(),
    };
    mart.diagnose();
    Ok(mart)
}

impl DyadicMartingale {
    fn diagnose(&mut self) {
        let dim = self.dim();
        let mut defect: f64 = 0.0;
        let mut increments = vec![0.0];
        for n in 1..self.levels.len() {
            let parents = &self.levels[n - 1];
            let mut inc: f64 = 0.0;
            for (p, pv) in parents.iter().enumerate() {
                let parent = DyadicCube::from_flat(dim, n as u32 - 1, p);
                let kids = parent.children();
                let mut mean = 0.0;
                for c in &kids {
                    let v = self.levels[n][c.flat_index()];
                    mean += v;
                    inc = inc.max((v - pv).abs());
                }
                mean /= kids.len() as f64;
                defect = defect.max((mean - pv).abs());
            }
            increments.push(inc);
        }
        self.defect = defect;
        self.increments = increments;
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn n_max(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn options(&self) -> MartingaleOptions {
        self.options
    }

    pub fn function(&self) -> &FunctionSpec {
        &self.f
    }

    pub fn measure(&self) -> &SignedMeasure {
        &self.sigma
    }

    /// S-values of generation n, row-major.
    pub fn level(&self, n: u32) -> Option<&[f64]> {
        self.levels.get(n as usize).map(|v| v.as_slice())
    }

    pub fn level_errors(&self, n: u32) -> Option<&[f64]> {
        self.errors.get(n as usize).map(|v| v.as_slice())
    }

    pub fn value(&self, cube: &DyadicCube) -> Option<f64> {
        self.levels.get(cube.generation as usize)?.get(cube.flat_index()).copied()
    }

    /// S_n(x).
    pub fn value_at(&self, x: &[f64], n: u32) -> Result<f64> {
        let cube = DyadicCube::containing(x, n)?;
        self.value(&cube).ok_or_else(|| OscError::invalid(format!("generation {n} was not built")))
    }

    /// max over parents of |mean of children − parent|.
    pub fn martingale_defect(&self) -> f64 {
        self.defect
    }

    /// ‖S_n − S_{n−1}‖_∞ per generation (0 at n = 0).
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// sup_n ‖S_n − S_{n−1}‖_∞ over the built generations.
    pub fn sb_norm(&self) -> f64 {
        self.increments.iter().copied().fold(0.0, f64::max)
    }
}

/// max |S_Q − S_{Q′}| over same-generation cubes sharing a face.
pub fn adjacent_increment_sup(mart: &DyadicMartingale, n: u32) -> Result<f64> {
    let level = mart.level(n).ok_or_else(|| OscError::invalid(format!("generation {n} was not built")))?;
    let dim = mart.dim();
    let per_axis = 1u32 << n;
    let mut best: f64 = 0.0;
    for (flat, v) in level.iter().enumerate() {
        let cube = DyadicCube::from_flat(dim, n, flat);
        for axis in 0..dim {
            if cube.index[axis] + 1 < per_axis {
                let mut next = cube.clone();
                next.index[axis] += 1;
                best = best.max((v - level[next.flat_index()]).abs());
            }
        }
    }
    Ok(best)
}

/// Cube centres plus [`SAMPLES_PER_CUBE`] seeded uniform points per generation-n cube.
pub fn default_comparison_samples(dim: usize, n: u32, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_generation(dim, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 1usize << (n as usize * dim);
    let mut out = Vec::with_capacity(count * (SAMPLES_PER_CUBE + 1));
    for flat in 0..count {
        let cube = DyadicCube::from_flat(dim, n, flat);
        out.push(cube.center());
        let origin = cube.origin();
        let l = cube.side();
        for _ in 0..SAMPLES_PER_CUBE {
            out.push(origin.iter().map(|q| q + l * rng.gen::<f64>()).collect());
        }
    }
    Ok(out)
}

/// |S_n(x) − Θ_ε f(x)| per sample, with ε = 2^{−n−2}.
pub fn comparison_gaps(mart: &DyadicMartingale, n: u32, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(OscError::EmptyPlan);
    }
    let eps = 2f64.powi(-(n as i32) - 2);
    let opts = mart.options();
    let rows = theta_sweep(
        &mart.f,
        &mart.sigma,
        xs,
        &[eps],
        mart.m,
        mart.alpha,
        opts.quad_tol,
        opts.route,
        opts.budget,
    )?;
    rows.iter().map(|r| Ok((mart.value_at(&r.x, n)? - r.value).abs())).collect()
}

/// max over samples of |S_n(x) − Θ_{2^{−n−2}} f(x)|.
pub fn comparison_gap(mart: &DyadicMartingale, n: u32, xs: &[Vec<f64>]) -> Result<f64> {
    Ok(comparison_gaps(mart, n, xs)?.into_iter().fold(0.0, f64::max))
}

/// ∫_Q Δ_σ f(x, h) dx.
pub fn cube_difference_integral(f: &FunctionSpec, sigma: &SignedMeasure, cube: &DyadicCube, h: f64, tol: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(OscError::invalid("h must be positive"));
    }
    if f.dim() != sigma.dim() || cube.dim() != f.dim() {
        return Err(OscError::DimensionMismatch { expected: f.dim(), got: cube.dim() });
    }
    let ell = cube.side();
    if let Some(model) = SpectralModel::new(f, sigma, 1.0) {
        return Ok(model.cube_difference(&cube.origin(), ell, h, tol));
    }
    let diff = Difference::new(f, sigma)?;
    let volume = ell.powi(cube.dim() as i32);
    Ok(volume * cube_average(&diff, &cube.origin(), ell, h, tol / volume))
}

/// Log-log slope of |∫_Q Δ_σ f| against h over the given h < ℓ(Q)/2.
pub fn scaling_slope(f: &FunctionSpec, sigma: &SignedMeasure, cube: &DyadicCube, hs: &[f64]) -> Result<f64> {
    if hs.len() < 2 {
        return Err(OscError::EmptyPlan);
    }
    if hs.iter().any(|h| !(*h > 0.0 && *h < cube.side() / 2.0)) {
        return Err(OscError::invalid("scaling probes need 0 < h < l(Q)/2"));
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &h in hs {
        let v = cube_difference_integral(f, sigma, cube, h, 1e-3 * h.powi(3))?.abs();
        if v > 0.0 {
            lx.push(h.ln());
            ly.push(v.ln());
        }
    }
    if lx.len() < 2 {
        return Ok(f64::INFINITY);
    }
    Ok(fit_slope(&lx, &ly))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LilMode {
    /// |S_n| / √(n log log n).
    Martingale,
    /// |Θ_ε| / √(log(1/ε) log log log(1/ε)) with ε = 2^{−n}.
    Theta,
}

pub fn lil_denominator(mode: LilMode, n: u32) -> Result<f64> {
    match mode {
        LilMode::Martingale => {
            if n < 3 {
                return Err(OscError::invalid("martingale LIL ratios need n >= 3"));
            }
            let n = n as f64;
            Ok((n * n.ln().ln()).sqrt())
        }
        LilMode::Theta => {
            if n < 4 {
                return Err(OscError::invalid("theta LIL ratios need eps = 2^-n < e^-e, i.e. n >= 4"));
            }
            let l = n as f64 * LN_2;
            Ok((l * l.ln().ln()).sqrt())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LilSample {
    pub x_index: usize,
    pub n: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LilRow {
    pub x_index: usize,
    pub n: u32,
    pub value: f64,
    pub ratio: f64,
    /// max of `ratio` over this x and all generations ≤ n.
    pub running_max: f64,
}

/// LIL ratios with per-x running maxima, sorted by (x_index, n).
pub fn lil_ratio(samples: &[LilSample], mode: LilMode) -> Result<Vec<LilRow>> {
    let mut sorted = samples.to_vec();
    sorted.sort_by_key(|s| (s.x_index, s.n));
    let mut out = Vec::with_capacity(sorted.len());
    let mut current: Option<usize> = None;
    let mut running: f64 = 0.0;
    for s in sorted {
        if current != Some(s.x_index) {
            current = Some(s.x_index);
            running = 0.0;
        }
        let ratio = s.value.abs() / lil_denominator(mode, s.n)?;
        running = running.max(ratio);
        out.push(LilRow { x_index: s.x_index, n: s.n, value: s.value, ratio, running_max: running });
    }
    Ok(out)
}
