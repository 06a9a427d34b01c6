//! Test functions with a declared smoothness class: Weierstrass-type lacunary
//! series, cusps, polynomials, bumps, hats and sampled data, together with
//! empirical seminorm and membership diagnostics.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{OscError, Result};
use crate::measure::make_classical;

pub const DEFAULT_EVAL_TOL: f64 = 1e-10;
/// Slack on the fitted exponent in [`membership_check`].
pub const SLOPE_SLACK: f64 = 0.1;
/// Allowed excess of the fine-scale ratios over the median ratio.
pub const RATIO_SLACK: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionKind {
    /// Σ_{k≥0} b^{−αk} cos(b^k x).
    Weierstrass { b: f64, alpha: f64 },
    /// Σ_{k≥1} b^{−k} cos(b^k x).
    ZygmundWeierstrass { b: f64 },
    /// m-fold term-wise antiderivative of the Weierstrass series.
    SmoothedWeierstrass { b: f64, alpha: f64, m: u32 },
    /// |x|^α sign(x).
    Cusp { alpha: f64 },
    /// Σ cᵢ xⁱ, coefficients in ascending order.
    Polynomial { coeffs: Vec<f64> },
    /// exp(1 − 1/(1 − r²)) for r = |x − c|/width < 1, zero outside.
    Bump { center: f64, width: f64 },
    /// max(0, 1 − |x − c|/half_width).
    Hat { center: f64, half_width: f64 },
    /// Natural cubic spline through (grid, values).
    Sampled { grid: Vec<f64>, values: Vec<f64> },
}

impl FunctionKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionKind::Weierstrass { .. } => "weierstrass",
            FunctionKind::ZygmundWeierstrass { .. } => "zygmund_weierstrass",
            FunctionKind::SmoothedWeierstrass { .. } => "smoothed_weierstrass",
            FunctionKind::Cusp { .. } => "cusp",
            FunctionKind::Polynomial { .. } => "polynomial",
            FunctionKind::Bump { .. } => "bump",
            FunctionKind::Hat { .. } => "hat",
            FunctionKind::Sampled { .. } => "sampled",
        }
    }

    fn default_class(&self) -> SmoothnessClass {
        match *self {
            FunctionKind::Weierstrass { alpha, .. } => SmoothnessClass { m: 0, alpha },
            FunctionKind::SmoothedWeierstrass { alpha, m, .. } => SmoothnessClass { m, alpha },
            FunctionKind::Cusp { alpha } => SmoothnessClass { m: 0, alpha },
            _ => SmoothnessClass { m: 0, alpha: 1.0 },
        }
    }
}

/// C^{m,α}: m derivatives, the m-th in Λ_α (Zygmund class for α = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass {
    pub m: u32,
    pub alpha: f64,
}

impl SmoothnessClass {
    pub fn exponent(&self) -> f64 {
        self.m as f64 + self.alpha
    }
}

/// JSON form of a [`FunctionSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDescriptor {
    #[serde(flatten)]
    pub kind: FunctionKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub class: Option<SmoothnessClass>,
    #[serde(default = "default_eval_tol")]
    pub eval_tol: f64,
}

fn default_dim() -> usize {
    1
}

fn default_eval_tol() -> f64 {
    DEFAULT_EVAL_TOL
}

/// Σ_{k ≥ start} b^{−decay·k} cos(b^k t + phase).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LacunarySeries {
    pub b: f64,
    pub decay: f64,
    pub start: u32,
    pub phase: f64,
}

impl LacunarySeries {
    pub fn amplitude(&self, k: u32) -> f64 {
        self.b.powf(-self.decay * k as f64)
    }

    pub fn frequency(&self, k: u32) -> f64 {
        self.b.powi(k as i32)
    }

    /// Smallest K with Σ_{k>K} b^{−rate·k} ≤ tol, where rate = decay − order.
    pub fn truncation_index(&self, tol: f64, order: u32) -> Result<u32> {
        let rate = self.decay - order as f64;
        if rate <= 0.0 {
            return Err(OscError::DerivativeOrder {
                order,
                kind: "lacunary series (term-wise derivative diverges)",
            });
        }
        let q = self.b.powf(-rate);
        let need = (1.0 / (tol * (1.0 - q))).ln() / (rate * self.b.ln());
        let k = (need.ceil() - 1.0).max(self.start as f64);
        Ok(k as u32)
    }

    /// Σ_{k>K} b^{−rate·k}.
    pub fn tail(&self, last: u32, order: u32) -> f64 {
        let rate = self.decay - order as f64;
        let q = self.b.powf(-rate);
        q.powf((last + 1) as f64) / (1.0 - q)
    }

    /// order-th derivative of the partial sum through k = `last`.
    pub fn sum(&self, t: f64, last: u32, order: u32) -> f64 {
        let shift = self.phase + order as f64 * FRAC_PI_2;
        let mut acc = 0.0;
        for k in self.start..=last {
            let lam = self.frequency(k);
            acc += self.amplitude(k) * lam.powi(order as i32) * (lam * t + shift).cos();
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m2: Vec<f64>,
}

impl CubicSpline {
    fn natural(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(OscError::invalid("sampled function needs >= 2 matching grid points"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(OscError::invalid("sample grid must be strictly increasing"));
        }
        // Tridiagonal solve for second derivatives with natural end conditions.
        let mut m2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
            let p = sig * m2[i - 1] + 2.0;
            m2[i] = (sig - 1.0) / p;
            let d = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            u[i] = (6.0 * d / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
        }
        m2[n - 1] = 0.0;
        for i in (0..n - 1).rev() {
            m2[i] = m2[i] * m2[i + 1] + u[i];
        }
        Ok(CubicSpline { x: x.to_vec(), y: y.to_vec(), m2 })
    }

    fn locate(&self, t: f64) -> usize {
        let i = self.x.partition_point(|&g| g <= t);
        i.clamp(1, self.x.len() - 1) - 1
    }

    fn eval(&self, t: f64, order: u32) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m2[i], self.m2[i + 1]);
        match order {
            0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            _ => (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1,
        }
    }
}

/// An evaluable function on R^d with a declared smoothness class.
///
/// One-dimensional profiles g are lifted to R^d as f(x) = Σᵢ g(xᵢ); the bump
/// is radial instead.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    dim: usize,
    kind: FunctionKind,
    class: SmoothnessClass,
    eval_tol: f64,
    series: Option<LacunarySeries>,
    truncation: u32,
    spline: Option<CubicSpline>,
}

impl FunctionSpec {
    pub fn new(kind: FunctionKind) -> Result<Self> {
        FunctionSpec::with_options(kind, 1, None, DEFAULT_EVAL_TOL)
    }

    pub fn with_options(kind: FunctionKind, dim: usize, class: Option<SmoothnessClass>, eval_tol: f64) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(OscError::UnsupportedDimension {
                dim,
                context: "functions are defined for 1 <= d <= 3",
            });
        }
        if !(eval_tol > 0.0) {
            return Err(OscError::invalid("eval_tol must be positive"));
        }
        let check_alpha = |a: f64| {
            if a > 0.0 && a <= 1.0 {
                Ok(())
            } else {
                Err(OscError::invalid(format!("alpha must lie in (0, 1], got {a}")))
            }
        };
        let check_b = |b: f64| {
            if b > 1.0 && b.is_finite() {
                Ok(())
            } else {
                Err(OscError::invalid(format!("lacunary base must exceed 1, got {b}")))
            }
        };
        let series = match kind {
            FunctionKind::Weierstrass { b, alpha } => {
                check_b(b)?;
                check_alpha(alpha)?;
                Some(LacunarySeries { b, decay: alpha, start: 0, phase: 0.0 })
            }
            FunctionKind::ZygmundWeierstrass { b } => {
                check_b(b)?;
                Some(LacunarySeries { b, decay: 1.0, start: 1, phase: 0.0 })
            }
            FunctionKind::SmoothedWeierstrass { b, alpha, m } => {
                check_b(b)?;
                check_alpha(alpha)?;
                Some(LacunarySeries {
                    b,
                    decay: m as f64 + alpha,
                    start: 0,
                    phase: -(m as f64) * FRAC_PI_2,
                })
            }
            _ => None,
        };
        let spline = match &kind {
            FunctionKind::Cusp { alpha } => {
                check_alpha(*alpha)?;
                None
            }
            FunctionKind::Polynomial { coeffs } if coeffs.is_empty() => {
                return Err(OscError::invalid("polynomial needs at least one coefficient"));
            }
            FunctionKind::Bump { width, .. } | FunctionKind::Hat { half_width: width, .. } if !(*width > 0.0) => {
                return Err(OscError::invalid("width must be positive"));
            }
            FunctionKind::Sampled { grid, values } => {
                if dim != 1 {
                    return Err(OscError::UnsupportedDimension {
                        dim,
                        context: "sampled functions are one-dimensional",
                    });
                }
                Some(CubicSpline::natural(grid, values)?)
            }
            _ => None,
        };
        let class = class.unwrap_or_else(|| kind.default_class());
        check_alpha(class.alpha)?;
        let truncation = match &series {
            Some(s) => s.truncation_index(eval_tol, 0)?,
            None => 0,
        };
        Ok(FunctionSpec {
            dim,
            kind,
            class,
            eval_tol,
            series,
            truncation,
            spline,
        })
    }

    pub fn from_descriptor(d: &FunctionDescriptor) -> Result<Self> {
        FunctionSpec::with_options(d.kind.clone(), d.dim, d.class, d.eval_tol)
    }

    pub fn descriptor(&self) -> FunctionDescriptor {
        FunctionDescriptor {
            kind: self.kind.clone(),
            dim: self.dim,
            class: Some(self.class),
            eval_tol: self.eval_tol,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn class(&self) -> SmoothnessClass {
        self.class
    }

    pub fn eval_tol(&self) -> f64 {
        self.eval_tol
    }

    pub fn lacunary(&self) -> Option<&LacunarySeries> {
        self.series.as_ref()
    }

    /// Last series index used by [`eval`](Self::eval).
    pub fn truncation_index(&self) -> u32 {
        self.truncation
    }

    /// Highest frequency resolved by the truncated series.
    pub fn top_frequency(&self) -> Option<f64> {
        self.series.map(|s| s.frequency(self.truncation))
    }

    /// Interval outside of which the function cannot be evaluated.
    pub fn domain(&self) -> Option<(f64, f64)> {
        self.spline.as_ref().map(|s| (s.x[0], *s.x.last().unwrap()))
    }

    /// Abscissae (per coordinate) where the profile is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self.kind {
            FunctionKind::Cusp { .. } => vec![0.0],
            FunctionKind::Hat { center, half_width } => vec![center - half_width, center, center + half_width],
            // Interior knots, where the spline's third derivative jumps.
            FunctionKind::Sampled { ref grid, .. } => grid[1..grid.len() - 1].to_vec(),
            _ => Vec::new(),
        }
    }

    /// Whether the function vanishes outside a bounded set.
    pub fn compact_support(&self) -> Option<(f64, f64)> {
        match self.kind {
            FunctionKind::Bump { center, width } => Some((center - width, center + width)),
            FunctionKind::Hat { center, half_width } => Some((center - half_width, center + half_width)),
            _ => None,
        }
    }

    fn profile(&self, t: f64, order: u32) -> f64 {
        match &self.kind {
            FunctionKind::Weierstrass { .. }
            | FunctionKind::ZygmundWeierstrass { .. }
            | FunctionKind::SmoothedWeierstrass { .. } => {
                let s = self.series.as_ref().unwrap();
                let last = if order == 0 {
                    self.truncation
                } else {
                    s.truncation_index(self.eval_tol, order).unwrap_or(self.truncation)
                };
                s.sum(t, last, order)
            }
            FunctionKind::Cusp { alpha } => t.abs().powf(*alpha) * t.signum() * (t != 0.0) as u8 as f64,
            FunctionKind::Polynomial { coeffs } => poly_derivative(coeffs, t, order),
            FunctionKind::Bump { center, width } => bump_derivative((t - center) / width, order) / width.powi(order as i32),
            FunctionKind::Hat { center, half_width } => {
                let u = t - center;
                match order {
                    0 => (1.0 - u.abs() / half_width).max(0.0),
                    _ => {
                        if u >= -half_width && u < 0.0 {
                            1.0 / half_width
                        } else if u >= 0.0 && u < *half_width {
                            -1.0 / half_width
                        } else {
                            0.0
                        }
                    }
                }
            }
            FunctionKind::Sampled { .. } => {
                let s = self.spline.as_ref().unwrap();
                if t < s.x[0] || t > *s.x.last().unwrap() {
                    f64::NAN
                } else {
                    s.eval(t, order)
                }
            }
        }
    }

    /// Whether f(x) = Σᵢ g(xᵢ) for the one-dimensional profile g.
    pub(crate) fn is_separable(&self) -> bool {
        !matches!(self.kind, FunctionKind::Bump { .. }) || self.dim == 1
    }

    /// The one-dimensional profile g (unchecked).
    pub(crate) fn profile_value(&self, t: f64) -> f64 {
        if let FunctionKind::Bump { center, width } = self.kind {
            let r = (t - center) / width;
            return bump_value(r * r);
        }
        self.profile(t, 0)
    }

    /// Unchecked evaluation (NaN outside a sampled grid).
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        if let FunctionKind::Bump { center, width } = self.kind {
            let r2: f64 = x.iter().map(|c| (c - center) * (c - center)).sum::<f64>() / (width * width);
            return bump_value(r2);
        }
        x.iter().map(|&t| self.profile(t, 0)).sum()
    }

    /// f(x), within `eval_tol` of the exact value.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(OscError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if let Some((lo, hi)) = self.domain() {
            if let Some(&bad) = x.iter().find(|&&t| t < lo || t > hi) {
                return Err(OscError::OutsideGrid { x: bad, lo, hi });
            }
        }
        Ok(self.value(x))
    }

    /// Derivative of the given order of a one-dimensional function.
    pub fn eval_derivative(&self, x: f64, order: u32) -> Result<f64> {
        if self.dim != 1 {
            return Err(OscError::UnsupportedDimension {
                dim: self.dim,
                context: "derivatives are provided in one dimension",
            });
        }
        if order == 0 {
            return self.eval(&[x]);
        }
        let allowed = match self.kind {
            FunctionKind::Polynomial { .. } | FunctionKind::Bump { .. } => true,
            FunctionKind::Hat { .. } | FunctionKind::Sampled { .. } => order == 1,
            FunctionKind::SmoothedWeierstrass { m, .. } => order <= m.min(self.class.m),
            FunctionKind::Cusp { .. } => false,
            _ => order <= self.class.m,
        };
        if !allowed {
            return Err(OscError::DerivativeOrder { order, kind: self.kind.name() });
        }
        if let Some(s) = &self.series {
            s.truncation_index(self.eval_tol, order)?;
        }
        if let Some((lo, hi)) = self.domain() {
            if x < lo || x > hi {
                return Err(OscError::OutsideGrid { x, lo, hi });
            }
        }
        Ok(self.profile(x, order))
    }

    /// sup |f′| for kinds where it is available in closed form or by sampling the support.
    pub fn derivative_sup(&self) -> Result<f64> {
        match self.kind {
            FunctionKind::Hat { half_width, .. } => Ok(1.0 / half_width),
            FunctionKind::Bump { center, width } => {
                let n = 4001;
                let mut best: f64 = 0.0;
                for i in 0..n {
                    let t = center - width + 2.0 * width * i as f64 / (n - 1) as f64;
                    best = best.max(self.eval_derivative(t, 1)?.abs());
                }
                Ok(best)
            }
            _ => Err(OscError::invalid(format!(
                "sup |f'| is only provided for compactly supported kinds, not {}",
                self.kind.name()
            ))),
        }
    }
}

fn poly_derivative(coeffs: &[f64], t: f64, order: u32) -> f64 {
    let order = order as usize;
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

fn bump_value(r2: f64) -> f64 {
    if r2 >= 1.0 {
        return 0.0;
    }
    let e = 1.0 - 1.0 / (1.0 - r2);
    if e < -700.0 {
        0.0
    } else {
        e.exp()
    }
}

/// n-th derivative of exp(g(r)), g(r) = 1 − 1/(1 − r²), by the recursion
/// F^{(n)} = Σ_k C(n−1, k) g^{(k+1)} F^{(n−1−k)}.
fn bump_derivative(r: f64, n: u32) -> f64 {
    let f0 = bump_value(r * r);
    if f0 == 0.0 {
        return 0.0;
    }
    let n = n as usize;
    let mut g = vec![0.0; n + 1];
    let mut fact = 1.0;
    for (k, gk) in g.iter_mut().enumerate().skip(1) {
        fact *= k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *gk = -0.5 * fact * ((1.0 - r).powi(-(k as i32) - 1) + sign * (1.0 + r).powi(-(k as i32) - 1));
    }
    let mut f = vec![f0; n + 1];
    for m in 1..=n {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for k in 0..m {
            acc += binom * g[k + 1] * f[m - 1 - k];
            binom = binom * (m - 1 - k) as f64 / (k + 1) as f64;
        }
        f[m] = acc;
    }
    f[n]
}

/// x- and h-grids used by the seminorm and membership diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub xs: Vec<f64>,
    pub hs: Vec<f64>,
}

impl SamplePlan {
    /// 256 points uniform in [0, 1] and h ∈ {2^{−j} : j = 2..16}.
    pub fn standard() -> Self {
        SamplePlan {
            xs: (0..256).map(|i| i as f64 / 255.0).collect(),
            hs: (2..=16).map(|j| 2f64.powi(-j)).collect(),
        }
    }
}

/// Largest difference quotient over the plan: a lower bound for ‖f‖_α,
/// ‖f‖₁ (Zygmund, α = 1) or ‖f‖_Lip (`lipschitz`).
pub fn estimate_seminorm(f: &FunctionSpec, m: u32, alpha: f64, plan: &SamplePlan, lipschitz: bool) -> Result<f64> {
    if plan.xs.is_empty() || plan.hs.is_empty() {
        return Err(OscError::EmptyPlan);
    }
    if m != 0 {
        return Err(OscError::invalid("direct seminorms are defined for m = 0"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(OscError::invalid("alpha must lie in (0, 1]"));
    }
    if f.dim() != 1 {
        return Err(OscError::UnsupportedDimension { dim: f.dim(), context: "seminorm probes are one-dimensional" });
    }
    let zygmund = alpha == 1.0 && !lipschitz;
    let mut best: f64 = 0.0;
    for &x in &plan.xs {
        let fx = f.eval(&[x])?;
        for &h0 in &plan.hs {
            for h in [h0.abs(), -h0.abs()] {
                let q = if zygmund {
                    (f.eval(&[x + h])? + f.eval(&[x - h])? - 2.0 * fx).abs() / h.abs()
                } else if lipschitz {
                    (f.eval(&[x + h])? - fx).abs() / h.abs()
                } else {
                    (f.eval(&[x + h])? - fx).abs() / h.abs().powf(alpha)
                };
                best = best.max(q);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub hs: Vec<f64>,
    /// sup_x |Δ_ℓ f(x, h)| per h.
    pub sups: Vec<f64>,
    /// sups[i] / h^{m+α}.
    pub ratios: Vec<f64>,
    pub ratio_sup: f64,
    pub exponent_fit: f64,
    pub pass: bool,
}

/// Least-squares slope of y on x.
pub(crate) fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Empirical C^{m,α} membership through the ℓ-th forward difference.
///
/// Passes when the log-log slope of sup_x |Δ_ℓ f(x,h)| against h is at least
/// m+α−[`SLOPE_SLACK`] and the ratios on the finer half of the h-grid stay
/// within [`RATIO_SLACK`] times the median ratio.
pub fn membership_check(f: &FunctionSpec, m: u32, alpha: f64, ell: u32, probe: &SamplePlan) -> Result<MembershipReport> {
    if probe.xs.is_empty() || probe.hs.is_empty() {
        return Err(OscError::EmptyPlan);
    }
    if f.dim() != 1 {
        return Err(OscError::UnsupportedDimension { dim: f.dim(), context: "membership probes are one-dimensional" });
    }
    let s = m as f64 + alpha;
    if (ell as f64) <= s.floor() {
        return Err(OscError::invalid(format!("difference order {ell} must exceed [m+alpha] = {}", s.floor())));
    }
    let sigma = make_classical(ell)?;
    let tv = sigma.total_variation();
    let mut scale: f64 = 0.0;
    let mut hs: Vec<f64> = probe.hs.iter().map(|h| h.abs()).collect();
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut sups = Vec::with_capacity(hs.len());
    for &h in &hs {
        let mut sup: f64 = 0.0;
        for &x in &probe.xs {
            let mut acc = 0.0;
            for a in sigma.atoms() {
                let v = f.eval(&[x + h * a.point[0]])?;
                scale = scale.max(v.abs());
                acc += a.weight * v;
            }
            sup = sup.max(acc.abs());
        }
        sups.push(sup);
    }
    let ratios: Vec<f64> = sups.iter().zip(&hs).map(|(v, h)| v / h.powf(s)).collect();
    let floor = 1e-12 * (1.0 + scale) * tv;
    let (lx, ly): (Vec<f64>, Vec<f64>) = hs
        .iter()
        .zip(&sups)
        .filter(|(_, v)| **v > floor)
        .map(|(h, v)| (h.ln(), v.ln()))
        .unzip();
    let exponent_fit = if lx.len() < 2 { f64::INFINITY } else { fit_slope(&lx, &ly) };
    // Differences at roundoff level count as exact zeros.
    let resolved: Vec<f64> = ratios
        .iter()
        .zip(&sups)
        .map(|(r, v)| if *v > floor { *r } else { 0.0 })
        .collect();
    let med = median(&resolved);
    let fine_max = resolved[resolved.len() / 2..].iter().copied().fold(0.0, f64::max);
    let ratio_sup = ratios.iter().copied().fold(0.0, f64::max);
    let bounded = fine_max <= RATIO_SLACK * med || fine_max == 0.0;
    let pass = exponent_fit >= s - SLOPE_SLACK && bounded;
    Ok(MembershipReport {
        hs,
        sups,
        ratios,
        ratio_sup,
        exponent_fit,
        pass,
    })
}
