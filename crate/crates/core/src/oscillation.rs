//! Generalized differences Δ_σ f(x,h) and the oscillation integrals
//! Θ_ε f(x) = ∫_ε^1 Δ_σ f(x,h) h^{−(m+α)} dh/h.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{OscError, Result};
use crate::funcspace::{FunctionKind, FunctionSpec};
use crate::measure::{make_named, NamedMeasure, SignedMeasure};
use crate::quadrature::{gauss_legendre, integrate, QuadOptions};
use crate::spectral::{SpectralModel, Tally};

pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
/// Default cap on integrand evaluations per request.
pub const DEFAULT_BUDGET: usize = 1_000_000;
const MAX_CIRCLE_NODES: usize = 16384;

/// How the h-integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Spectral for lacunary series against atomic measures, direct otherwise.
    #[default]
    Auto,
    /// Adaptive quadrature of Δ_σ f in u = log h.
    Direct,
    /// Term-wise integration of the cosine series.
    Spectral,
}

/// Highest moment degree that must vanish for the exponent m+α.
pub fn required_order(m: u32, alpha: f64) -> u32 {
    if alpha >= 1.0 {
        m + 1
    } else {
        (m as f64 + alpha).floor() as u32
    }
}

pub(crate) fn check_admissible(sigma: &SignedMeasure, order: u32) -> Result<()> {
    let report = sigma.check_vanishing(order)?;
    match report.first_offender() {
        None => Ok(()),
        Some((k, v)) => Err(OscError::MomentCondition {
            order,
            multiindex: k.clone(),
            value: *v,
        }),
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(OscError::invalid(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(OscError::invalid(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(OscError::invalid("quadrature tolerance must be positive"))
    }
}

/// Evaluates Δ_σ f(x,h) for a fixed pair (f, σ).
///
/// Sphere components are replaced by a fixed quadrature rule. For polynomials
/// the difference is expanded in the moments of σ, which removes the
/// cancellation error of the direct sum at small h.
#[derive(Debug, Clone)]
pub(crate) struct Difference<'a> {
    f: &'a FunctionSpec,
    nodes: Vec<(Vec<f64>, f64)>,
    radius: f64,
    /// Per axis, μ_n/n! of the projected rule (vanishing moments zeroed).
    poly: Option<(Vec<f64>, Vec<Vec<f64>>)>,
}

impl<'a> Difference<'a> {
    pub fn new(f: &'a FunctionSpec, sigma: &SignedMeasure) -> Result<Self> {
        if f.dim() != sigma.dim() {
            return Err(OscError::DimensionMismatch {
                expected: f.dim(),
                got: sigma.dim(),
            });
        }
        let mut nodes: Vec<(Vec<f64>, f64)> = sigma.atoms().iter().map(|a| (a.point.clone(), a.weight)).collect();
        if let Some(sph) = sigma.sphere() {
            nodes.extend(sphere_rule(sigma.dim(), sph.radius, sph.weight, characteristic_frequency(f)));
        }
        let poly = match f.kind() {
            FunctionKind::Polynomial { coeffs } => {
                let deg = coeffs.len();
                let vanishing = sigma.declared_moment_order();
                let moments = (0..f.dim())
                    .map(|i| {
                        let mut fact = 1.0;
                        (0..deg)
                            .map(|n| {
                                if n > 0 {
                                    fact *= n as f64;
                                }
                                if (n as i32) <= vanishing {
                                    0.0
                                } else {
                                    nodes.iter().map(|(p, w)| w * p[i].powi(n as i32)).sum::<f64>() / fact
                                }
                            })
                            .collect()
                    })
                    .collect();
                Some((coeffs.clone(), moments))
            }
            _ => None,
        };
        Ok(Difference {
            f,
            nodes,
            radius: sigma.support_radius(),
            poly,
        })
    }

    pub fn is_polynomial(&self) -> bool {
        self.poly.is_some()
    }

    pub fn profile_value(&self, t: f64) -> f64 {
        self.f.profile_value(t)
    }

    pub fn separable(&self) -> bool {
        self.f.is_separable()
    }

    pub fn kinks(&self) -> Vec<f64> {
        self.f.kinks()
    }

    pub fn nodes(&self) -> &[(Vec<f64>, f64)] {
        &self.nodes
    }

    /// Σ_j w_j g(t + h·a_{j,i}) for separable f.
    pub fn axis_eval(&self, axis: usize, t: f64, h: f64) -> f64 {
        if let Some((coeffs, moments)) = &self.poly {
            let mut acc = 0.0;
            let mut hn = 1.0;
            for (n, m) in moments[axis].iter().enumerate() {
                if n > 0 {
                    hn *= h;
                }
                if *m != 0.0 {
                    acc += m * hn * poly_derivative(coeffs, t, n);
                }
            }
            return acc;
        }
        self.nodes.iter().map(|(p, w)| w * self.f.profile_value(t + h * p[axis])).sum()
    }

    pub fn eval(&self, x: &[f64], h: f64) -> f64 {
        if self.poly.is_some() || (x.len() == 1 && self.separable()) {
            return x.iter().enumerate().map(|(i, t)| self.axis_eval(i, *t, h)).sum();
        }
        let mut buf = vec![0.0; x.len()];
        let mut acc = 0.0;
        for (p, w) in &self.nodes {
            for ((b, xi), pi) in buf.iter_mut().zip(x).zip(p) {
                *b = xi + h * pi;
            }
            acc += w * self.f.value(&buf);
        }
        acc
    }

    /// Values of h in (lo, hi) at which some x + h·a hits a kink of f.
    pub fn kinks_in_h(&self, x: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        let kinks = self.f.kinks();
        let mut out = Vec::new();
        if kinks.is_empty() {
            return out;
        }
        for (p, _) in &self.nodes {
            for (xi, ai) in x.iter().zip(p) {
                if *ai == 0.0 {
                    continue;
                }
                for c in &kinks {
                    let h = (c - xi) / ai;
                    if h > lo && h < hi {
                        out.push(h);
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Fails when some evaluation point x + h·a, h ≤ `h_max`, leaves a sampled grid.
    pub fn check_domain(&self, x: &[f64], h_max: f64) -> Result<()> {
        if let Some((lo, hi)) = self.f.domain() {
            for xi in x {
                for t in [xi - h_max * self.radius, xi + h_max * self.radius] {
                    if t < lo || t > hi {
                        return Err(OscError::OutsideGrid { x: t, lo, hi });
                    }
                }
            }
        }
        Ok(())
    }
}

fn poly_derivative(coeffs: &[f64], t: f64, order: usize) -> f64 {
    if order >= coeffs.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate().skip(order).rev() {
        let falling: f64 = (0..order).map(|j| (i - j) as f64).product();
        acc = acc * t + c * falling;
    }
    acc
}

fn characteristic_frequency(f: &FunctionSpec) -> f64 {
    match *f.kind() {
        FunctionKind::Bump { width, .. } => 4.0 / width,
        FunctionKind::Hat { half_width, .. } => 4.0 / half_width,
        _ => f.top_frequency().unwrap_or(0.0),
    }
}

/// Nodes and weights of weight × (normalized surface measure on the sphere of radius r).
fn sphere_rule(dim: usize, radius: f64, weight: f64, freq: f64) -> Vec<(Vec<f64>, f64)> {
    let n = ((8.0 * freq * radius).ceil() as usize).clamp(64, MAX_CIRCLE_NODES);
    match dim {
        2 => (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                (vec![radius * t.cos(), radius * t.sin()], weight / n as f64)
            })
            .collect(),
        _ => {
            let nz = (n / 4).clamp(16, 256);
            let nphi = 2 * nz;
            let (zs, wz) = gauss_legendre(nz);
            let mut out = Vec::with_capacity(nz * nphi);
            for (z, w) in zs.iter().zip(&wz) {
                let rho = (1.0 - z * z).sqrt();
                for j in 0..nphi {
                    let t = 2.0 * PI * j as f64 / nphi as f64;
                    out.push((
                        vec![radius * rho * t.cos(), radius * rho * t.sin(), radius * z],
                        weight * w / 2.0 / nphi as f64,
                    ));
                }
            }
            out
        }
    }
}

/// Parameters of one Θ_ε evaluation.
#[derive(Debug, Clone)]
pub struct OscillationRequest<'a> {
    pub f: &'a FunctionSpec,
    pub sigma: &'a SignedMeasure,
    pub x: Vec<f64>,
    pub eps: f64,
    pub m: u32,
    pub alpha: f64,
    pub quad_tol: f64,
    pub budget: usize,
    pub route: Route,
}

impl<'a> OscillationRequest<'a> {
    pub fn new(f: &'a FunctionSpec, sigma: &'a SignedMeasure, x: &[f64], eps: f64, m: u32, alpha: f64) -> Self {
        OscillationRequest {
            f,
            sigma,
            x: x.to_vec(),
            eps,
            m,
            alpha,
            quad_tol: DEFAULT_QUAD_TOL,
            budget: DEFAULT_BUDGET,
            route: Route::Auto,
        }
    }

    pub fn quad_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    pub fn exponent(&self) -> f64 {
        self.m as f64 + self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationResult {
    pub value: f64,
    pub quad_error_estimate: f64,
    pub evaluations: usize,
    /// Route actually taken (never `Auto`).
    pub route: Route,
}

/// Δ_σ f(x, h).
pub fn delta_sigma(f: &FunctionSpec, sigma: &SignedMeasure, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(OscError::invalid("h must be positive"));
    }
    if x.len() != f.dim() {
        return Err(OscError::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        });
    }
    let d = Difference::new(f, sigma)?;
    d.check_domain(x, h)?;
    Ok(d.eval(x, h))
}

pub(crate) fn resolve_route(route: Route, model: &Option<SpectralModel>) -> Result<Route> {
    match (route, model) {
        (Route::Spectral, None) => Err(OscError::invalid(
            "spectral route needs a lacunary series and a purely atomic measure",
        )),
        (Route::Auto, Some(_)) | (Route::Spectral, Some(_)) => Ok(Route::Spectral),
        _ => Ok(Route::Direct),
    }
}

/// ∫_lo^hi Δ_σ f(x,h) h^{−s−1} dh by adaptive quadrature in u = log h.
pub(crate) fn direct_panel(diff: &Difference, x: &[f64], s: f64, lo: f64, hi: f64, tol: f64, tally: &mut Tally) -> Result<f64> {
    let (ua, ub) = (lo.ln(), hi.ln());
    let mut breaks: Vec<f64> = diff.kinks_in_h(x, lo, hi).into_iter().map(f64::ln).collect();
    let mut u = 0.0;
    while u > ua {
        if u < ub {
            breaks.push(u);
        }
        u -= LN_2;
    }
    let r = integrate(
        |u: f64| diff.eval(x, u.exp()) * (-s * u).exp(),
        ua,
        ub,
        &breaks,
        QuadOptions::new(tol, tally.remaining()),
    );
    tally.absorb(r, "theta h-integral")
}

/// Θ_ε^σ f(x).
pub fn theta(req: &OscillationRequest) -> Result<OscillationResult> {
    let OscillationRequest { f, sigma, .. } = *req;
    if req.x.len() != f.dim() || sigma.dim() != f.dim() {
        return Err(OscError::DimensionMismatch {
            expected: f.dim(),
            got: if req.x.len() != f.dim() { req.x.len() } else { sigma.dim() },
        });
    }
    check_eps(req.eps)?;
    check_alpha(req.alpha)?;
    check_tol(req.quad_tol)?;
    check_admissible(sigma, required_order(req.m, req.alpha))?;
    let s = req.exponent();
    let model = SpectralModel::new(f, sigma, s);
    match resolve_route(req.route, &model)? {
        Route::Spectral => {
            let table = model.unwrap().theta_table(&[req.eps], req.quad_tol, req.budget)?;
            Ok(OscillationResult {
                value: table.eval(&req.x, 0),
                quad_error_estimate: table.errors[0],
                evaluations: table.evals,
                route: Route::Spectral,
            })
        }
        _ => {
            let diff = Difference::new(f, sigma)?;
            diff.check_domain(&req.x, 1.0)?;
            let mut tally = Tally::new(req.budget);
            let value = direct_panel(&diff, &req.x, s, req.eps, 1.0, req.quad_tol, &mut tally)?;
            Ok(OscillationResult {
                value,
                quad_error_estimate: tally.error,
                evaluations: tally.evals,
                route: Route::Direct,
            })
        }
    }
}

/// One row of a Θ sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: Vec<f64>,
    pub eps: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub evals: usize,
}

/// Θ_ε f(x) on a grid of points and ε values, x-major in input order.
///
/// Integrals over nested ε-intervals are shared, so the cost is that of the
/// smallest ε alone.
#[allow(clippy::too_many_arguments)]
pub fn theta_sweep(
    f: &FunctionSpec,
    sigma: &SignedMeasure,
    xs: &[Vec<f64>],
    eps: &[f64],
    m: u32,
    alpha: f64,
    quad_tol: f64,
    route: Route,
    budget: usize,
) -> Result<Vec<SweepPoint>> {
    if xs.is_empty() || eps.is_empty() {
        return Err(OscError::EmptyPlan);
    }
    for e in eps {
        check_eps(*e)?;
    }
    check_alpha(alpha)?;
    check_tol(quad_tol)?;
    if sigma.dim() != f.dim() {
        return Err(OscError::DimensionMismatch { expected: f.dim(), got: sigma.dim() });
    }
    if let Some(bad) = xs.iter().find(|x| x.len() != f.dim()) {
        return Err(OscError::DimensionMismatch { expected: f.dim(), got: bad.len() });
    }
    check_admissible(sigma, required_order(m, alpha))?;
    let s = m as f64 + alpha;
    let mut grid: Vec<f64> = eps.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    let slot = |e: f64| grid.iter().position(|g| *g == e).unwrap();
    let model = SpectralModel::new(f, sigma, s);
    match resolve_route(route, &model)? {
        Route::Spectral => {
            let table = model.unwrap().theta_table(&grid, quad_tol, budget)?;
            let rows = crate::par::map(xs, |x| {
                eps.iter()
                    .map(|&e| {
                        let i = slot(e);
                        SweepPoint {
                            x: x.clone(),
                            eps: e,
                            value: table.eval(x, i),
                            error_estimate: table.errors[i],
                            evals: table.evals,
                        }
                    })
                    .collect::<Vec<_>>()
            });
            Ok(rows.into_iter().flatten().collect())
        }
        _ => {
            let diff = Difference::new(f, sigma)?;
            let tol = quad_tol / grid.len() as f64;
            let rows = crate::par::map(xs, |x| -> Result<Vec<SweepPoint>> {
                diff.check_domain(x, 1.0)?;
                let mut tally = Tally::new(budget);
                let mut cum = Vec::with_capacity(grid.len());
                let mut acc = 0.0;
                let mut upper = 1.0;
                for &lo in &grid {
                    acc += direct_panel(&diff, x, s, lo, upper, tol, &mut tally)?;
                    upper = lo;
                    cum.push((acc, tally.error, tally.evals));
                }
                Ok(eps
                    .iter()
                    .map(|&e| {
                        let (value, err, evals) = cum[slot(e)];
                        SweepPoint {
                            x: x.clone(),
                            eps: e,
                            value,
                            error_estimate: err,
                            evals,
                        }
                    })
                    .collect())
            });
            let mut out = Vec::with_capacity(xs.len() * eps.len());
            for r in rows {
                out.extend(r?);
            }
            Ok(out)
        }
    }
}

fn is_lipschitz(f: &FunctionSpec) -> bool {
    match *f.kind() {
        FunctionKind::Polynomial { .. }
        | FunctionKind::Bump { .. }
        | FunctionKind::Hat { .. }
        | FunctionKind::Sampled { .. } => true,
        FunctionKind::SmoothedWeierstrass { m, .. } => m >= 1,
        FunctionKind::Cusp { alpha } => alpha == 1.0,
        _ => false,
    }
}

/// Θ̃_ε f(x) = ∫_ε^1 Δ_σ f(x,h) dh/h² for Lipschitz f on the line.
pub fn theta_tilde(f: &FunctionSpec, sigma: &SignedMeasure, x: f64, eps: f64, quad_tol: f64) -> Result<OscillationResult> {
    if f.dim() != 1 || sigma.dim() != 1 {
        return Err(OscError::UnsupportedDimension {
            dim: f.dim().max(sigma.dim()),
            context: "theta_tilde is defined on the line",
        });
    }
    if !is_lipschitz(f) {
        return Err(OscError::invalid(format!("{} is not Lipschitz", f.kind().name())));
    }
    check_admissible(sigma, 1)?;
    theta(&OscillationRequest::new(f, sigma, &[x], eps, 0, 1.0).quad_tol(quad_tol))
}

/// The special forms Γ_ε, Ω_ε and the spherical-mean version of Θ_ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CorollaryForm {
    /// ∫_ε^1 Σ μ_i f(x + a_i h) / h^α dh/h with Σ μ_i = 0.
    Gamma { points: Vec<Vec<f64>>, weights: Vec<f64>, alpha: f64 },
    /// As `Gamma` with exponent 1 and additionally Σ μ_i a_i = 0.
    Omega { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Spherical mean minus the centre value, exponent α.
    Sphere { alpha: f64 },
}

/// Measure and exponent behind a corollary form.
pub fn corollary_measure(form: &CorollaryForm, dim: usize) -> Result<(SignedMeasure, f64)> {
    match form {
        CorollaryForm::Gamma { points, weights, alpha } => {
            check_alpha(*alpha)?;
            let sigma = make_named(NamedMeasure::General { points: points.clone(), weights: weights.clone() }, dim)?;
            Ok((sigma, *alpha))
        }
        CorollaryForm::Omega { points, weights } => {
            let sigma = make_named(NamedMeasure::General { points: points.clone(), weights: weights.clone() }, dim)?;
            check_admissible(&sigma, 1)?;
            Ok((sigma, 1.0))
        }
        CorollaryForm::Sphere { alpha } => {
            check_alpha(*alpha)?;
            Ok((make_named(NamedMeasure::SphereMinusDelta, dim)?, *alpha))
        }
    }
}

pub fn corollary_form(form: &CorollaryForm, f: &FunctionSpec, x: &[f64], eps: f64, quad_tol: f64) -> Result<OscillationResult> {
    let (sigma, alpha) = corollary_measure(form, f.dim())?;
    theta(&OscillationRequest::new(f, &sigma, x, eps, 0, alpha).quad_tol(quad_tol))
}
