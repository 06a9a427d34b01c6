//! Term-wise evaluation of oscillation integrals for lacunary cosine series.
//!
//! For f(x) = Σ_i Σ_k c_k cos(λ_k x_i + φ) the h-integrals factor through the
//! Fourier transform of the (projected) measure, so every term needs the
//! x-independent quantity ∫ σ̂(λh) h^{−s−1} dh only once.

use num::complex::Complex64;

use crate::error::{OscError, Result};
use crate::funcspace::{FunctionSpec, LacunarySeries};
use crate::measure::SignedMeasure;
use crate::quadrature::{integrate, Integral, QuadOptions};

/// Above |ω|h = this value the power integral is evaluated along a rotated contour.
const ROTATION_THRESHOLD: f64 = 40.0;
const CONTOUR_LENGTH: f64 = 50.0;
/// Radius (in units of λ·M·h) of the Taylor expansion of σ̂ near h = 0.
const TAYLOR_RADIUS: f64 = 1.0;
const TAYLOR_TERMS: usize = 48;
const MAX_TERMS: u32 = 400;

/// Running evaluation count and error total shared by the integrals of one request.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tally {
    pub evals: usize,
    pub error: f64,
    pub budget: usize,
}

impl Tally {
    pub fn new(budget: usize) -> Self {
        Tally { evals: 0, error: 0.0, budget }
    }

    pub fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.evals)
    }

    pub fn absorb<T>(&mut self, r: Integral<T>, context: &str) -> Result<T> {
        self.evals += r.evals;
        self.error += r.error;
        if !r.converged {
            return Err(OscError::BudgetExhausted {
                budget: self.budget,
                error: r.error,
                context: context.to_string(),
            });
        }
        Ok(r.value)
    }
}

fn closed_power(s: f64, a: f64, b: f64) -> f64 {
    if s == 0.0 {
        (b / a).ln()
    } else {
        (a.powf(-s) - b.powf(-s)) / s
    }
}

/// ∫_a^b e^{iωh} h^{−s−1} dh for 0 < a ≤ b.
pub(crate) fn power_integral(omega: f64, s: f64, a: f64, b: f64, tol: f64, tally: &mut Tally) -> Result<Complex64> {
    if a >= b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if omega == 0.0 {
        return Ok(Complex64::new(closed_power(s, a, b), 0.0));
    }
    let cut = ROTATION_THRESHOLD / omega.abs();
    let mut total = Complex64::new(0.0, 0.0);
    if a < cut {
        let hi = b.min(cut);
        let (ua, ub) = (a.ln(), hi.ln());
        let step = std::f64::consts::LN_2;
        let breaks: Vec<f64> = (1..)
            .map(|j| ua + j as f64 * step)
            .take_while(|u| *u < ub)
            .collect();
        let r = integrate(
            |u: f64| {
                let h = u.exp();
                Complex64::from_polar(h.powf(-s), omega * h)
            },
            ua,
            ub,
            &breaks,
            QuadOptions::new(tol / 2.0, tally.remaining()),
        );
        total += tally.absorb(r, "power integral")?;
    }
    if b > cut {
        let lo = a.max(cut);
        total += contour_tail(omega, s, lo, tol / 4.0, tally)? - contour_tail(omega, s, b, tol / 4.0, tally)?;
    }
    Ok(total)
}

/// ∫_c^∞ e^{iωh} h^{−s−1} dh via h = c + iτ/ω.
fn contour_tail(omega: f64, s: f64, c: f64, tol: f64, tally: &mut Tally) -> Result<Complex64> {
    let scale = c.powf(-s - 1.0) / omega.abs();
    let rho = 1.0 / (omega * c);
    let mut r = integrate(
        |tau: f64| Complex64::new(1.0, tau * rho).powf(-s - 1.0) * (-tau).exp(),
        0.0,
        CONTOUR_LENGTH,
        &[2.0, 8.0, 20.0],
        QuadOptions::new(tol / scale.max(f64::MIN_POSITIVE), tally.remaining()),
    );
    // The prefactor has modulus `scale`; record the error in output units.
    r.error *= scale;
    let inner = tally.absorb(r, "contour integral")?;
    let prefactor = Complex64::new(0.0, 1.0 / omega) * Complex64::from_polar(c.powf(-s - 1.0), omega * c);
    Ok(prefactor * inner)
}

/// One coordinate projection of an atomic measure.
#[derive(Debug, Clone)]
pub(crate) struct Projection {
    points: Vec<f64>,
    weights: Vec<f64>,
    radius: f64,
    tv: f64,
    /// μ_n / radius^n, with the moments known to vanish set to zero.
    moments: Vec<f64>,
}

impl Projection {
    fn new(sigma: &SignedMeasure, axis: usize) -> Self {
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for a in sigma.atoms() {
            let p = a.point[axis];
            match merged.iter_mut().find(|(q, _)| *q == p) {
                Some(entry) => entry.1 += a.weight,
                None => merged.push((p, a.weight)),
            }
        }
        merged.retain(|(_, w)| *w != 0.0);
        let radius = merged.iter().map(|(p, _)| p.abs()).fold(0.0, f64::max);
        let tv = merged.iter().map(|(_, w)| w.abs()).sum();
        let vanishing = sigma.declared_moment_order();
        let moments = (0..TAYLOR_TERMS)
            .map(|n| {
                if radius == 0.0 || (n as i32) <= vanishing {
                    0.0
                } else {
                    merged.iter().map(|(p, w)| w * (p / radius).powi(n as i32)).sum()
                }
            })
            .collect();
        Projection {
            points: merged.iter().map(|e| e.0).collect(),
            weights: merged.iter().map(|e| e.1).collect(),
            radius,
            tv,
            moments,
        }
    }

    /// σ̂(ω) = Σ w_j e^{iωa_j}.
    fn transform(&self, omega: f64) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| Complex64::from_polar(*w, omega * p))
            .sum()
    }

    /// ∫_lo^hi σ̂(λh) h^{−s−1} dh from the power series of σ̂ (λ·radius·hi ≤ 1).
    fn taylor(&self, lambda: f64, s: f64, lo: f64, hi: f64) -> Complex64 {
        let z = lambda * self.radius * hi;
        let r = lo / hi;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut zn = 1.0;
        for (n, mu) in self.moments.iter().enumerate() {
            if n > 0 {
                zn *= z / n as f64;
            }
            if *mu == 0.0 {
                continue;
            }
            let p = n as f64 - s;
            let g = if lo == 0.0 {
                if p <= 0.0 {
                    continue;
                }
                1.0 / p
            } else if p == 0.0 {
                -r.ln()
            } else {
                (1.0 - r.powf(p)) / p
            };
            let i_n = match n % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
            acc += i_n * (zn * mu * g);
        }
        acc * hi.powf(-s)
    }

    /// ∫_lo^hi σ̂(λh) h^{−s−1} dh.
    fn h_integral(&self, lambda: f64, s: f64, lo: f64, hi: f64, tol: f64, tally: &mut Tally) -> Result<Complex64> {
        if self.radius == 0.0 || lo >= hi {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let h0 = (TAYLOR_RADIUS / (lambda * self.radius)).min(hi);
        let mut acc = Complex64::new(0.0, 0.0);
        if lo < h0 {
            acc += self.taylor(lambda, s, lo, h0);
        }
        let start = lo.max(h0);
        if start < hi {
            for (p, w) in self.points.iter().zip(&self.weights) {
                let before = tally.error;
                acc += *w * power_integral(lambda * p, s, start, hi, tol / self.tv, tally)?;
                tally.error = before + w.abs() * (tally.error - before);
            }
        }
        Ok(acc)
    }

    /// Upper bound for |∫_eps^1 σ̂(λh) h^{−s−1} dh| that is nonincreasing in λ.
    fn bound_from(&self, lambda: f64, s: f64, eps: f64) -> f64 {
        let flat = closed_power(s, eps, 1.0);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let om = (lambda * p).abs();
                let b = if om == 0.0 { flat } else { flat.min(2.0 * eps.powf(-s - 1.0) / om) };
                w.abs() * b
            })
            .sum()
    }

    /// Upper bound for |∫_0^1 σ̂(λh) h^{−s−1} dh| of the form C·λ^s.
    fn bound_full(&self, lambda: f64, s: f64) -> f64 {
        if self.radius == 0.0 {
            return 0.0;
        }
        let h0 = (TAYLOR_RADIUS / (lambda * self.radius)).min(1.0);
        let mut taylor = 0.0;
        let mut zn = 1.0;
        for (n, mu) in self.moments.iter().enumerate() {
            if n > 0 {
                zn *= TAYLOR_RADIUS / n as f64;
            }
            let p = n as f64 - s;
            if p > 0.0 {
                taylor += zn * mu.abs() / p;
            }
        }
        h0.powf(-s) * (taylor + self.tv * if s > 0.0 { 1.0 / s } else { (1.0 / h0).ln() + 1.0 })
    }
}

/// ⨍_{[q, q+ℓ]} e^{iλt} dt.
pub(crate) fn interval_average(lambda: f64, q: f64, ell: f64) -> Complex64 {
    let theta = lambda * ell;
    let core = if theta.abs() < 1e-4 {
        Complex64::new(1.0 - theta * theta / 6.0, theta / 2.0 - theta.powi(3) / 24.0)
    } else {
        let half = (0.5 * theta).sin();
        Complex64::new(theta.sin() / theta, 2.0 * half * half / theta)
    };
    Complex64::from_polar(1.0, lambda * q) * core
}

/// Spectral description of (f, σ, s) when f is a lacunary series and σ atomic.
#[derive(Debug, Clone)]
pub(crate) struct SpectralModel {
    series: LacunarySeries,
    s: f64,
    axes: Vec<Projection>,
}

/// Θ coefficients Σ_j w_j ∫_ε^1 e^{iλa_jh} h^{−s−1} dh for a decreasing ε grid.
#[derive(Debug, Clone)]
pub(crate) struct ThetaTable {
    series: LacunarySeries,
    last: u32,
    dim: usize,
    /// [eps index][term][axis]
    coeffs: Vec<Complex64>,
    pub errors: Vec<f64>,
    pub evals: usize,
}

impl ThetaTable {
    fn terms(&self) -> usize {
        (self.last - self.series.start + 1) as usize
    }

    pub fn eval(&self, x: &[f64], eps_index: usize) -> f64 {
        self.eval_through(x, eps_index, self.last)
    }

    /// Contribution of the terms with index at most `last`.
    pub fn eval_through(&self, x: &[f64], eps_index: usize, last: u32) -> f64 {
        let nt = self.terms().min((last.saturating_sub(self.series.start) + 1) as usize);
        let base = eps_index * self.terms() * self.dim;
        let mut acc = 0.0;
        for t in 0..nt {
            let k = self.series.start + t as u32;
            let lam = self.series.frequency(k);
            let amp = self.series.amplitude(k);
            for (i, xi) in x.iter().enumerate() {
                let c = self.coeffs[base + t * self.dim + i];
                acc += amp * (Complex64::from_polar(1.0, lam * xi + self.series.phase) * c).re;
            }
        }
        acc
    }
}

/// ∫_0^1 σ̂_i(λ_k h) h^{−s−1} dh per term and axis.
#[derive(Debug, Clone)]
pub(crate) struct CubeTable {
    series: LacunarySeries,
    last: u32,
    dim: usize,
    coeffs: Vec<Complex64>,
    errors: Vec<f64>,
    tail: f64,
    pub evals: usize,
}

impl CubeTable {
    /// (S_Q, error estimate) for the cube with lower corner `origin` and side `ell`.
    pub fn eval(&self, origin: &[f64], ell: f64) -> (f64, f64) {
        self.eval_with(origin, ell, self.last)
    }

    /// Contribution of the terms with index at most `last`.
    #[cfg(test)]
    pub fn eval_through(&self, origin: &[f64], ell: f64, last: u32) -> f64 {
        self.eval_with(origin, ell, last.min(self.last)).0
    }

    fn eval_with(&self, origin: &[f64], ell: f64, last: u32) -> (f64, f64) {
        let mut acc = 0.0;
        let mut err = 0.0;
        for (t, k) in (self.series.start..=last).enumerate() {
            let lam = self.series.frequency(k);
            let amp = self.series.amplitude(k);
            let rot = Complex64::from_polar(amp, self.series.phase);
            for (i, q) in origin.iter().enumerate() {
                let c = self.coeffs[t * self.dim + i];
                acc += (rot * interval_average(lam, *q, ell) * c).re;
            }
            err += amp * self.errors[t];
        }
        (acc, err + self.tail)
    }
}

impl SpectralModel {
    /// `None` unless f is a lacunary series and σ is purely atomic.
    pub fn new(f: &FunctionSpec, sigma: &SignedMeasure, s: f64) -> Option<Self> {
        let series = *f.lacunary()?;
        if sigma.sphere().is_some() || f.dim() != sigma.dim() {
            return None;
        }
        let axes = (0..sigma.dim()).map(|i| Projection::new(sigma, i)).collect();
        Some(SpectralModel { series, s, axes })
    }

    fn term_bound_from(&self, k: u32, eps: f64) -> f64 {
        let lam = self.series.frequency(k);
        self.series.amplitude(k) * self.axes.iter().map(|p| p.bound_from(lam, self.s, eps)).sum::<f64>()
    }

    /// Last term index such that the omitted Θ terms sum to at most `tol`.
    fn theta_truncation(&self, eps: f64, tol: f64) -> Result<u32> {
        let q = self.series.b.powf(-self.series.decay);
        let mut k = self.series.start;
        while self.term_bound_from(k + 1, eps) / (1.0 - q) > tol {
            k += 1;
            if k > MAX_TERMS {
                return Err(OscError::invalid("lacunary series decays too slowly for the requested tolerance"));
            }
        }
        Ok(k)
    }

    /// Θ_ε coefficients at every ε of a strictly decreasing grid in (0, 1].
    pub fn theta_table(&self, eps: &[f64], quad_tol: f64, budget: usize) -> Result<ThetaTable> {
        if eps.is_empty() {
            return Err(OscError::EmptyPlan);
        }
        if eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(OscError::invalid("epsilon grid must be strictly decreasing"));
        }
        let eps_min = *eps.last().unwrap();
        let last = self.theta_truncation(eps_min, quad_tol / 4.0)?;
        let tail = {
            let q = self.series.b.powf(-self.series.decay);
            self.term_bound_from(last + 1, eps_min) / (1.0 - q)
        };
        let nt = (last - self.series.start + 1) as usize;
        let dim = self.axes.len();
        let npanels = eps.len();
        let mut tally = Tally::new(budget);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); npanels * nt * dim];
        let mut errors = vec![0.0; npanels];
        let share = (2 * nt * npanels * dim) as f64;
        for t in 0..nt {
            let k = self.series.start + t as u32;
            let lam = self.series.frequency(k);
            let amp = self.series.amplitude(k);
            let tol = quad_tol / (share * amp);
            for (i, proj) in self.axes.iter().enumerate() {
                let mut cum = Complex64::new(0.0, 0.0);
                let mut cum_err = 0.0;
                let mut upper = 1.0;
                for (e, &lo) in eps.iter().enumerate() {
                    if lo < upper {
                        let before = tally.error;
                        cum += proj.h_integral(lam, self.s, lo, upper, tol, &mut tally)?;
                        cum_err += (tally.error - before) * amp;
                        upper = lo;
                    }
                    coeffs[(e * nt + t) * dim + i] = cum;
                    errors[e] += cum_err;
                }
            }
        }
        for e in errors.iter_mut() {
            *e += tail;
        }
        Ok(ThetaTable {
            series: self.series,
            last,
            dim,
            coeffs,
            errors,
            evals: tally.evals,
        })
    }

    /// S_Q coefficients good for every cube of side at least `ell_min`.
    pub fn cube_table(&self, ell_min: f64, quad_tol: f64, budget: usize) -> Result<CubeTable> {
        let decay = self.series.decay;
        let ratio = self.series.b.powf(self.s - decay - 1.0);
        if ratio >= 1.0 {
            return Err(OscError::invalid("series decays too slowly for S_Q at this exponent"));
        }
        let bound = |k: u32| {
            let lam = self.series.frequency(k);
            let avg = (2.0 / (lam * ell_min)).min(1.0);
            self.series.amplitude(k) * avg * self.axes.iter().map(|p| p.bound_full(lam, self.s)).sum::<f64>()
        };
        let mut last = self.series.start;
        while bound(last + 1) / (1.0 - ratio) > quad_tol / 4.0 {
            last += 1;
            if last > MAX_TERMS {
                return Err(OscError::invalid("lacunary series decays too slowly for the requested tolerance"));
            }
        }
        let tail = bound(last + 1) / (1.0 - ratio);
        let nt = (last - self.series.start + 1) as usize;
        let dim = self.axes.len();
        let mut tally = Tally::new(budget);
        let mut coeffs = Vec::with_capacity(nt * dim);
        let mut errors = Vec::with_capacity(nt);
        for k in self.series.start..=last {
            let lam = self.series.frequency(k);
            let amp = self.series.amplitude(k);
            let tol = quad_tol / (4.0 * (nt * dim) as f64 * amp);
            let before = tally.error;
            for proj in &self.axes {
                coeffs.push(proj.h_integral(lam, self.s, 0.0, 1.0, tol, &mut tally)?);
            }
            errors.push(tally.error - before);
        }
        Ok(CubeTable {
            series: self.series,
            last,
            dim,
            coeffs,
            errors,
            tail,
            evals: tally.evals,
        })
    }

    /// ∫_Q Δ_σ f(x, h) dx for the cube with lower corner `origin` and side `ell`.
    pub fn cube_difference(&self, origin: &[f64], ell: f64, h: f64, tol: f64) -> f64 {
        self.cube_difference_with(origin, ell, h, tol, MAX_TERMS)
    }

    /// As [`cube_difference`](Self::cube_difference) but never past term `last`.
    pub fn cube_difference_with(&self, origin: &[f64], ell: f64, h: f64, tol: f64, last: u32) -> f64 {
        let tv: f64 = self.axes.iter().map(|p| p.tv).sum();
        let q = self.series.b.powf(-self.series.decay);
        let volume = ell.powi(origin.len() as i32);
        let mut acc = 0.0;
        let mut k = self.series.start;
        loop {
            let lam = self.series.frequency(k);
            let amp = self.series.amplitude(k);
            let rot = Complex64::from_polar(amp, self.series.phase);
            for (i, q) in origin.iter().enumerate() {
                acc += (rot * interval_average(lam, *q, ell) * self.axes[i].transform(lam * h)).re;
            }
            k += 1;
            let next = self.series.frequency(k);
            let tail = self.series.amplitude(k) * (2.0 / (next * ell)).min(1.0) * tv / (1.0 - q);
            if tail * volume <= tol || k > last {
                break;
            }
        }
        acc * volume
    }
}
