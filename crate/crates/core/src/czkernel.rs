//! The kernels K_ε(t) = (1/t)∫_{−t/ε}^{−t} σ[s,∞) ds and
//! K₀(t) = (1/t)∫_{−sign(t)M}^{−t} σ[s,∞) ds of a measure on the line, their
//! size/smoothness/cancellation constants and the truncated transform
//! ∫_{|t|>εM} K₀(t) f′(x−t) dt.
//!
//! t ↦ σ[s,∞) is a step function, so every s-integral above is piecewise
//! linear in its limits and is evaluated exactly.

use serde::Serialize;

use crate::error::{OscError, Result};
use crate::funcspace::FunctionSpec;
use crate::measure::SignedMeasure;
use crate::oscillation::{check_admissible, theta_tilde};
use crate::quadrature::{integrate, QuadOptions};

/// Relative enlargement of M when an atom sits exactly on |s| = M.
const SUPPORT_INFLATION: f64 = 1e-9;
/// Relative shift of grid points that coincide with a breakpoint.
const GRID_PERTURBATION: f64 = 1e-12;

/// Atoms of a measure on the line in a form suited to step integration.
#[derive(Debug, Clone)]
struct LineMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
    /// Declared support radius.
    radius: f64,
    /// Radius used as integration limit (strictly beyond every atom).
    limit: f64,
    tv: f64,
    /// Leftmost atom when σ has zero mass; σ[s,∞) vanishes below it.
    floor: Option<f64>,
}

impl LineMeasure {
    fn new(sigma: &SignedMeasure) -> Result<Self> {
        sigma.require_line("kernels are defined on the line")?;
        let points: Vec<f64> = sigma.atoms().iter().map(|a| a.point[0]).collect();
        let weights: Vec<f64> = sigma.atoms().iter().map(|a| a.weight).collect();
        let radius = sigma.support_radius();
        let touches = points.iter().any(|p| p.abs() >= radius);
        let limit = if touches { radius * (1.0 + SUPPORT_INFLATION) } else { radius };
        let floor = if sigma.check_vanishing(0)?.pass {
            points.iter().copied().reduce(f64::min)
        } else {
            None
        };
        Ok(LineMeasure {
            floor,
            points,
            weights,
            radius,
            limit,
            tv: sigma.total_variation(),
        })
    }

    /// ∫_c^d σ[s,∞) ds (orientation-signed).
    fn step(&self, c: f64, d: f64) -> f64 {
        // Clamping makes K_ε and K₀ agree bit for bit on |t| ≥ εM.
        let (c, d) = match self.floor {
            Some(lo) => (c.max(lo), d.max(lo)),
            None => (c, d),
        };
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * (d.min(*a) - c.min(*a)))
            .sum()
    }

    fn tail(&self, s: f64) -> f64 {
        self.points.iter().zip(&self.weights).filter(|(a, _)| **a >= s).map(|(_, w)| w).sum()
    }

    /// t·K₀(t).
    fn numer(&self, t: f64) -> f64 {
        if t.abs() >= self.limit {
            0.0
        } else {
            self.step(-t.signum() * self.limit, -t)
        }
    }

    fn k0(&self, t: f64) -> f64 {
        self.numer(t) / t
    }

    fn dk0(&self, t: f64) -> f64 {
        if t.abs() >= self.limit {
            0.0
        } else {
            -self.numer(t) / (t * t) - self.tail(-t) / t
        }
    }

    /// Sorted positive abscissae where t·K₀(±t) changes slope.
    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.points.iter().map(|p| p.abs()).filter(|p| *p > 0.0).collect();
        b.push(self.limit);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// ∫_a^b g(t)/t dt (or ∫|g|/t) for g continuous and linear between `breaks`.
    fn integrate_over_t(&self, g: impl Fn(f64) -> f64, a: f64, b: f64, absolute: bool) -> f64 {
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints().into_iter().filter(|p| *p > a && *p < b));
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (t1, t2) = (w[0], w[1]);
            let (g1, g2) = (g(t1), g(t2));
            let piece = |t1: f64, t2: f64, g1: f64, g2: f64| {
                let q = (g2 - g1) / (t2 - t1);
                let p = g1 - q * t1;
                p * (t2 / t1).ln() + q * (t2 - t1)
            };
            if absolute {
                if g1 * g2 < 0.0 {
                    let t0 = t1 + g1 * (t2 - t1) / (g1 - g2);
                    total += piece(t1, t0, g1, 0.0).abs() + piece(t0, t2, 0.0, g2).abs();
                } else {
                    total += piece(t1, t2, g1, g2).abs();
                }
            } else {
                total += piece(t1, t2, g1, g2);
            }
        }
        total
    }

    /// ∫_{a<|t|<b} K₀(t) dt.
    fn cancellation(&self, a: f64, b: f64) -> f64 {
        self.integrate_over_t(|t| self.numer(t) - self.numer(-t), a, b, false)
    }
}

fn nonzero(t: f64) -> Result<()> {
    if t == 0.0 || !t.is_finite() {
        Err(OscError::invalid("kernel argument must be finite and nonzero"))
    } else {
        Ok(())
    }
}

/// K_ε(t).
pub fn k_eps(sigma: &SignedMeasure, eps: f64, t: f64) -> Result<f64> {
    nonzero(t)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OscError::invalid("epsilon must lie in (0, 1)"));
    }
    let line = LineMeasure::new(sigma)?;
    if t.abs() >= eps * line.radius {
        // −t/ε is outside the support, where it cannot affect the integral;
        // rounding in t/ε could otherwise pull it back inside by an ulp.
        return Ok(line.k0(t));
    }
    Ok(line.step(-t / eps, -t) / t)
}

/// K₀(t); zero for |t| ≥ M.
pub fn k_zero(sigma: &SignedMeasure, t: f64) -> Result<f64> {
    nonzero(t)?;
    Ok(LineMeasure::new(sigma)?.k0(t))
}

/// ∂_t K₀(t) = −(1/t²)∫_{−sign(t)M}^{−t} σ[s,∞) ds − σ[−t,∞)/t, away from breakpoints.
pub fn dk_zero(sigma: &SignedMeasure, t: f64) -> Result<f64> {
    nonzero(t)?;
    Ok(LineMeasure::new(sigma)?.dk0(t))
}

/// Sample points for [`kernel_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelGrid {
    /// Positive t values; each is used with both signs.
    pub t: Vec<f64>,
    /// Positive endpoints; the cancellation supremum runs over all pairs.
    pub ab: Vec<f64>,
    pub r: Vec<f64>,
    /// Positive y values; each is used with both signs.
    pub y: Vec<f64>,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl KernelGrid {
    /// Log-uniform grids on [10⁻⁶M, M] with the breakpoints ±|a_j| added.
    pub fn standard(sigma: &SignedMeasure) -> Result<Self> {
        let line = LineMeasure::new(sigma)?;
        let m = line.radius;
        if !(m > 0.0) {
            return Err(OscError::invalid("measure has empty support"));
        }
        let breaks = line.breakpoints();
        let mut t = log_grid(1e-6 * m, m, 2000);
        for b in &breaks {
            t.push(b * (1.0 - GRID_PERTURBATION));
            t.push(b * (1.0 + GRID_PERTURBATION));
        }
        let mut ab = log_grid(1e-6 * m, m, 200);
        ab.extend(breaks.iter().copied());
        let r = log_grid(1e-6 * m, m, 200);
        let y = log_grid(1e-6 * m, m, 40);
        let perturb = |v: &mut Vec<f64>| {
            for x in v.iter_mut() {
                if line.points.iter().any(|p| p.abs() == *x) {
                    *x += GRID_PERTURBATION * m;
                }
            }
            v.sort_by(f64::total_cmp);
            v.dedup();
        };
        perturb(&mut t);
        ab.sort_by(f64::total_cmp);
        ab.dedup();
        perturb(&mut ab);
        Ok(KernelGrid { t, ab, r, y })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelPropertyReport {
    pub support_radius: f64,
    pub total_variation: f64,
    /// sup |t K₀(t)|, compared with 2M‖σ‖.
    pub sup_t_k0: f64,
    /// sup |t² ∂_t K₀(t)|, compared with 3M‖σ‖.
    pub sup_t2_dk0: f64,
    /// sup_{a<b} |∫_{a<|t|<b} K₀|, compared with 3M‖σ‖.
    pub cancel_sup: f64,
    /// sup_R ∫_{R<|t|<2R} |K₀|.
    pub a1: f64,
    /// sup_y ∫_{|t|>2|y|} |K₀(t−y) − K₀(t)| dt.
    pub a2: f64,
    /// sup_{R₁<R₂} |∫_{R₁<|t|<R₂} K₀|.
    pub a3: f64,
    /// Largest of |∂_t K₀ − central difference|·t²/(M‖σ‖), i.e. the mismatch on the smoothness scale.
    pub derivative_check: f64,
    /// Pass flags; present only when the first moment of σ vanishes.
    pub size_ok: Option<bool>,
    pub smoothness_ok: Option<bool>,
    pub cancellation_ok: Option<bool>,
}

impl KernelPropertyReport {
    pub fn pass(&self) -> Option<bool> {
        Some(self.size_ok? && self.smoothness_ok? && self.cancellation_ok?)
    }
}

/// Size, smoothness and cancellation constants of K₀ over `grid`.
pub fn kernel_report(sigma: &SignedMeasure, grid: &KernelGrid) -> Result<KernelPropertyReport> {
    let line = LineMeasure::new(sigma)?;
    if grid.t.is_empty() || grid.ab.is_empty() || grid.r.is_empty() || grid.y.is_empty() {
        return Err(OscError::EmptyPlan);
    }
    let m = line.radius;
    let tv = line.tv;
    let mut sup_t_k0: f64 = 0.0;
    let mut sup_t2_dk0: f64 = 0.0;
    let mut derivative_check: f64 = 0.0;
    let breaks = line.breakpoints();
    for &t0 in &grid.t {
        for t in [t0, -t0] {
            sup_t_k0 = sup_t_k0.max(line.numer(t).abs());
            let d = line.dk0(t);
            sup_t2_dk0 = sup_t2_dk0.max((t * t * d).abs());
            let h = 1e-5 * t0;
            if breaks.iter().all(|b| (b - t0).abs() > 10.0 * h) && t0 < line.limit {
                let fd = (line.k0(t + h) - line.k0(t - h)) / (2.0 * h);
                derivative_check = derivative_check.max((fd - d).abs() * t0 * t0 / (m * tv));
            }
        }
    }
    // sup over pairs of |Φ(b) − Φ(a)| with Φ the running integral.
    let mut phi = 0.0;
    let (mut lo, mut hi): (f64, f64) = (0.0, 0.0);
    for w in grid.ab.windows(2) {
        phi += line.cancellation(w[0], w[1]);
        lo = lo.min(phi);
        hi = hi.max(phi);
    }
    let cancel_sup = hi - lo;
    let a1 = grid
        .r
        .iter()
        .map(|&r| {
            line.integrate_over_t(|t| line.numer(t), r, 2.0 * r, true)
                + line.integrate_over_t(|t| line.numer(-t), r, 2.0 * r, true)
        })
        .fold(0.0, f64::max);
    let mut a2: f64 = 0.0;
    for &y0 in &grid.y {
        for y in [y0, -y0] {
            a2 = a2.max(smoothness_integral(&line, y)?);
        }
    }
    let admissible = sigma.check_vanishing(1)?.pass;
    let flag = |ok: bool| admissible.then_some(ok);
    Ok(KernelPropertyReport {
        support_radius: m,
        total_variation: tv,
        sup_t_k0,
        sup_t2_dk0,
        cancel_sup,
        a1,
        a2,
        a3: cancel_sup,
        derivative_check,
        size_ok: flag(sup_t_k0 <= 2.0 * m * tv),
        smoothness_ok: flag(sup_t2_dk0 <= 3.0 * m * tv),
        cancellation_ok: flag(cancel_sup <= 3.0 * m * tv),
    })
}

/// ∫_{|t|≥2|y|} |K₀(t−y) − K₀(t)| dt.
fn smoothness_integral(line: &LineMeasure, y: f64) -> Result<f64> {
    let lo = 2.0 * y.abs();
    let hi = line.limit + y.abs();
    if lo >= hi {
        return Ok(0.0);
    }
    let mut breaks = Vec::new();
    for b in line.breakpoints() {
        for c in [b, -b] {
            breaks.push(c);
            breaks.push(c + y);
        }
    }
    let g = |t: f64| (line.k0(t - y) - line.k0(t)).abs();
    let tol = 1e-10 * line.tv;
    let mut total = 0.0;
    for (a, b) in [(lo, hi), (-hi, -lo)] {
        let r = integrate(g, a, b, &breaks, QuadOptions::new(tol, 1_000_000));
        if !r.converged {
            return Err(OscError::BudgetExhausted {
                budget: 1_000_000,
                error: r.error,
                context: "kernel smoothness integral".into(),
            });
        }
        total += r.value;
    }
    Ok(total)
}

fn kernel_quadrature(
    f: &FunctionSpec,
    x: f64,
    lo: f64,
    hi: f64,
    kernel: impl Fn(f64) -> f64,
    breaks: &[f64],
    tol: f64,
    context: &str,
) -> Result<f64> {
    let mut br = breaks.to_vec();
    br.extend(f.kinks().iter().map(|c| x - c));
    if let Some((a, b)) = f.compact_support() {
        br.push(x - a);
        br.push(x - b);
    }
    let r = integrate(
        |t: f64| kernel(t) * f.eval_derivative(x - t, 1).unwrap_or(f64::NAN),
        lo,
        hi,
        &br,
        QuadOptions::new(tol, 2_000_000),
    );
    if !r.converged || !r.value.is_finite() {
        return Err(OscError::BudgetExhausted {
            budget: 2_000_000,
            error: r.error,
            context: context.into(),
        });
    }
    Ok(r.value)
}

fn check_transform_inputs(f: &FunctionSpec, sigma: &SignedMeasure, eps: f64) -> Result<LineMeasure> {
    if f.dim() != 1 {
        return Err(OscError::UnsupportedDimension { dim: f.dim(), context: "kernel transforms are one-dimensional" });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OscError::invalid("epsilon must lie in (0, 1)"));
    }
    check_admissible(sigma, 1)?;
    f.eval_derivative(0.5, 1)?;
    LineMeasure::new(sigma)
}

/// ∫_{εM<|t|<M} K₀(t) f′(x−t) dt.
pub fn truncated_transform(f: &FunctionSpec, sigma: &SignedMeasure, x: f64, eps: f64, quad_tol: f64) -> Result<f64> {
    let line = check_transform_inputs(f, sigma, eps)?;
    let lo = eps * line.radius;
    let hi = line.limit;
    if lo >= hi {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = line.points.iter().map(|p| -p).collect();
    let k = |t: f64| line.k0(t);
    Ok(kernel_quadrature(f, x, lo, hi, k, &breaks, quad_tol / 2.0, "truncated transform")?
        + kernel_quadrature(f, x, -hi, -lo, k, &breaks, quad_tol / 2.0, "truncated transform")?)
}

/// (K_ε * f′)(x), the oracle side of the convolution identity.
pub fn kernel_convolution(f: &FunctionSpec, sigma: &SignedMeasure, x: f64, eps: f64, quad_tol: f64) -> Result<f64> {
    let line = check_transform_inputs(f, sigma, eps)?;
    let hi = line.limit;
    let mut breaks: Vec<f64> = line.points.iter().flat_map(|p| [-p, -eps * p]).collect();
    breaks.push(0.0);
    let k = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            line.step(-t / eps, -t) / t
        }
    };
    kernel_quadrature(f, x, -hi, hi, k, &breaks, quad_tol, "kernel convolution")
}

/// |Θ̃_ε f(x) − ∫_{|t|>εM} K₀(t) f′(x−t) dt|.
pub fn cz_comparison(f: &FunctionSpec, sigma: &SignedMeasure, x: f64, eps: f64, quad_tol: f64) -> Result<f64> {
    let tt = theta_tilde(f, sigma, x, eps, quad_tol)?.value;
    let tr = truncated_transform(f, sigma, x, eps, quad_tol)?;
    Ok((tt - tr).abs())
}
