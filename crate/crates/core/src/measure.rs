//! Compactly supported signed measures: finitely many atoms plus an optional
//! multiple of the normalized surface measure on a centered sphere.
//!
//! Measures produced by the builders carry an exact rational copy of their
//! atoms so that vanishing moments can be checked with zero tolerance.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{OscError, Result};

/// Moment tolerance for measures with floating-point data.
pub const TOL_MOMENT: f64 = 1e-12;

/// Largest order probed when inferring the vanishing order of a user measure.
const MAX_INFERRED_ORDER: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// `weight` times the normalized surface measure on the sphere of `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereComponent {
    pub radius: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct ExactParts {
    atoms: Vec<(Vec<BigRational>, BigRational)>,
    sphere: Option<(BigRational, BigRational)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    dim: usize,
    atoms: Vec<Atom>,
    sphere: Option<SphereComponent>,
    support_radius: f64,
    declared_moment_order: i32,
    exact: Option<ExactParts>,
}

/// Outcome of [`SignedMeasure::check_vanishing`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub order: u32,
    pub moments: Vec<(Vec<u32>, f64)>,
    pub exact: bool,
    pub tolerance: f64,
    pub pass: bool,
}

impl MomentReport {
    pub fn first_offender(&self) -> Option<&(Vec<u32>, f64)> {
        self.moments.iter().find(|(_, v)| v.abs() > self.tolerance)
    }
}

/// JSON form of a [`SignedMeasure`]: atoms as `[point, weight]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDescriptor {
    pub dim: usize,
    pub atoms: Vec<(Vec<f64>, f64)>,
    #[serde(default)]
    pub sphere: Option<SphereComponent>,
}

/// Names accepted by [`make_named`].
#[derive(Debug, Clone, PartialEq)]
pub enum NamedMeasure {
    /// δ_{e₁} − δ_{−e₁}.
    Sym1,
    /// δ_{e₁} + δ_{−e₁} − 2δ₀.
    Sym2,
    /// Σ μᵢ δ_{aᵢ} with user-supplied points and weights.
    General { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// ω − δ₀ with ω the normalized measure on the unit sphere.
    SphereMinusDelta,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// All multi-indices in `dim` variables with total degree exactly `degree`.
pub fn multiindices(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(dim, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    rec(dim, degree, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// ∫ ξ^k dω(ξ) over the normalized unit sphere in R^dim, as an exact rational.
fn sphere_moment_exact(dim: usize, k: &[u32]) -> BigRational {
    if k.iter().any(|ki| ki % 2 == 1) {
        return BigRational::zero();
    }
    let mut num = BigInt::one();
    for &ki in k {
        // (ki - 1)!!
        let mut j = ki as i64 - 1;
        while j > 1 {
            num *= BigInt::from(j);
            j -= 2;
        }
    }
    let total: u32 = k.iter().sum();
    let mut den = BigInt::one();
    for j in 0..(total / 2) {
        den *= BigInt::from(dim as i64 + 2 * j as i64);
    }
    BigRational::new(num, den)
}

impl SignedMeasure {
    fn from_exact(dim: usize, exact: ExactParts, declared: i32) -> Result<Self> {
        let atoms: Vec<Atom> = exact
            .atoms
            .iter()
            .map(|(p, w)| Atom {
                point: p.iter().map(rat_to_f64).collect(),
                weight: rat_to_f64(w),
            })
            .collect();
        let sphere = exact.sphere.as_ref().map(|(r, w)| SphereComponent {
            radius: rat_to_f64(r),
            weight: rat_to_f64(w),
        });
        let mut m = SignedMeasure::assemble(dim, atoms, sphere)?;
        m.exact = Some(exact);
        m.declared_moment_order = declared;
        m.verify_declared()?;
        Ok(m)
    }

    fn assemble(dim: usize, atoms: Vec<Atom>, sphere: Option<SphereComponent>) -> Result<Self> {
        if dim == 0 {
            return Err(OscError::invalid("dimension must be positive"));
        }
        for a in &atoms {
            if a.point.len() != dim {
                return Err(OscError::DimensionMismatch {
                    expected: dim,
                    got: a.point.len(),
                });
            }
            if !a.weight.is_finite() || a.point.iter().any(|c| !c.is_finite()) {
                return Err(OscError::invalid("atom data must be finite"));
            }
        }
        if let Some(s) = sphere {
            if dim > 3 {
                return Err(OscError::UnsupportedDimension {
                    dim,
                    context: "sphere components need d <= 3",
                });
            }
            if !(s.radius > 0.0) || !s.weight.is_finite() {
                return Err(OscError::invalid("sphere radius must be positive"));
            }
        }
        let atom_r = atoms.iter().map(|a| norm(&a.point)).fold(0.0, f64::max);
        let support_radius = atom_r.max(sphere.map_or(0.0, |s| s.radius));
        Ok(SignedMeasure {
            dim,
            atoms,
            sphere,
            support_radius,
            declared_moment_order: -1,
            exact: None,
        })
    }

    /// Measure from floating-point data. The total mass must vanish; the
    /// declared moment order is inferred.
    pub fn from_parts(dim: usize, atoms: Vec<Atom>, sphere: Option<SphereComponent>) -> Result<Self> {
        // In d = 1 the unit "sphere" is the pair {±r}.
        let (atoms, sphere) = match (dim, sphere) {
            (1, Some(s)) => {
                let mut atoms = atoms;
                atoms.push(Atom { point: vec![s.radius], weight: 0.5 * s.weight });
                atoms.push(Atom { point: vec![-s.radius], weight: 0.5 * s.weight });
                (atoms, None)
            }
            (_, sphere) => (atoms, sphere),
        };
        let mut m = SignedMeasure::assemble(dim, atoms, sphere)?;
        let mass = m.atoms.iter().map(|a| a.weight).sum::<f64>() + m.sphere.map_or(0.0, |s| s.weight);
        if mass.abs() > TOL_MOMENT {
            return Err(OscError::NonzeroMass { mass });
        }
        m.declared_moment_order = m.infer_order()?;
        Ok(m)
    }

    pub fn from_descriptor(d: &MeasureDescriptor) -> Result<Self> {
        let atoms = d.atoms.iter().map(|(p, w)| Atom { point: p.clone(), weight: *w }).collect();
        SignedMeasure::from_parts(d.dim, atoms, d.sphere)
    }

    pub fn descriptor(&self) -> MeasureDescriptor {
        MeasureDescriptor {
            dim: self.dim,
            atoms: self.atoms.iter().map(|a| (a.point.clone(), a.weight)).collect(),
            sphere: self.sphere,
        }
    }

    fn infer_order(&self) -> Result<i32> {
        let mut order = -1;
        for k in 0..=MAX_INFERRED_ORDER {
            if self.check_vanishing(k)?.pass {
                order = k as i32;
            } else {
                break;
            }
        }
        Ok(order)
    }

    fn verify_declared(&self) -> Result<()> {
        if self.declared_moment_order >= 0 {
            let report = self.check_vanishing(self.declared_moment_order as u32)?;
            if let Some((k, v)) = report.first_offender() {
                return Err(OscError::MomentCondition {
                    order: report.order,
                    multiindex: k.clone(),
                    value: *v,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn sphere(&self) -> Option<SphereComponent> {
        self.sphere
    }

    /// Radius M of a centered ball containing the support.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Largest k such that all moments of degree <= k vanish (-1 if none).
    pub fn declared_moment_order(&self) -> i32 {
        self.declared_moment_order
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// ‖σ‖ = Σ|wᵢ| + |sphere weight|.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum::<f64>() + self.sphere.map_or(0.0, |s| s.weight.abs())
    }

    /// Exact total variation for rational measures.
    pub fn total_variation_exact(&self) -> Option<BigRational> {
        let e = self.exact.as_ref()?;
        let mut tv: BigRational = e.atoms.iter().map(|(_, w)| w.abs()).sum();
        if let Some((_, w)) = &e.sphere {
            tv += w.abs();
        }
        Some(tv)
    }

    fn check_multiindex(&self, k: &[u32]) -> Result<()> {
        if k.len() != self.dim {
            return Err(OscError::DimensionMismatch {
                expected: self.dim,
                got: k.len(),
            });
        }
        Ok(())
    }

    /// ∫ x^k dσ, exactly in rational arithmetic when available.
    pub fn moment_exact(&self, k: &[u32]) -> Result<Option<BigRational>> {
        self.check_multiindex(k)?;
        let Some(e) = &self.exact else { return Ok(None) };
        let mut acc = BigRational::zero();
        for (p, w) in &e.atoms {
            let mut term = w.clone();
            for (c, &ki) in p.iter().zip(k) {
                term *= num::pow(c.clone(), ki as usize);
            }
            acc += term;
        }
        if let Some((r, w)) = &e.sphere {
            let total: u32 = k.iter().sum();
            acc += w * num::pow(r.clone(), total as usize) * sphere_moment_exact(self.dim, k);
        }
        Ok(Some(acc))
    }

    /// ∫ x^k dσ.
    pub fn moment(&self, k: &[u32]) -> Result<f64> {
        if let Some(v) = self.moment_exact(k)? {
            return Ok(rat_to_f64(&v));
        }
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.weight * a.point.iter().zip(k).map(|(c, &ki)| c.powi(ki as i32)).product::<f64>();
        }
        if let Some(s) = self.sphere {
            let total: u32 = k.iter().sum();
            acc += s.weight * s.radius.powi(total as i32) * rat_to_f64(&sphere_moment_exact(self.dim, k));
        }
        Ok(acc)
    }

    /// Moments of every multi-index of degree <= `order`.
    pub fn check_vanishing(&self, order: u32) -> Result<MomentReport> {
        let exact = self.exact.is_some();
        let tolerance = if exact { 0.0 } else { TOL_MOMENT };
        let mut moments = Vec::new();
        let mut pass = true;
        for deg in 0..=order {
            for k in multiindices(self.dim, deg) {
                let (value, vanishes) = match self.moment_exact(&k)? {
                    Some(v) => (rat_to_f64(&v), v.is_zero()),
                    None => {
                        let v = self.moment(&k)?;
                        (v, v.abs() <= tolerance)
                    }
                };
                pass &= vanishes;
                moments.push((k, value));
            }
        }
        Ok(MomentReport {
            order,
            moments,
            exact,
            tolerance,
            pass,
        })
    }

    /// σ[s, ∞) for a one-dimensional atomic measure; atoms at `s` are included.
    pub fn cumulative(&self, s: f64) -> Result<f64> {
        self.require_line("cumulative")?;
        Ok(self.atoms.iter().filter(|a| a.point[0] >= s).map(|a| a.weight).sum())
    }

    pub(crate) fn require_line(&self, context: &'static str) -> Result<()> {
        if self.dim != 1 || self.sphere.is_some() {
            return Err(OscError::UnsupportedDimension { dim: self.dim, context });
        }
        Ok(())
    }

    /// c·σ. Exactness is kept only for integer `c`.
    pub fn scaled(&self, c: f64) -> SignedMeasure {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.weight *= c;
        }
        if let Some(s) = &mut out.sphere {
            s.weight *= c;
        }
        out.exact = match (&self.exact, c.fract() == 0.0 && c.abs() < 1e15) {
            (Some(e), true) => {
                let cr = rat(c as i64);
                Some(ExactParts {
                    atoms: e.atoms.iter().map(|(p, w)| (p.clone(), w * &cr)).collect(),
                    sphere: e.sphere.as_ref().map(|(r, w)| (r.clone(), w * &cr)),
                })
            }
            _ => None,
        };
        if c == 0.0 {
            out.declared_moment_order = MAX_INFERRED_ORDER as i32;
        }
        out
    }

    /// a·σ₁ + b·σ₂ as floating-point data.
    pub fn linear_combination(a: f64, s1: &SignedMeasure, b: f64, s2: &SignedMeasure) -> Result<SignedMeasure> {
        if s1.dim != s2.dim {
            return Err(OscError::DimensionMismatch {
                expected: s1.dim,
                got: s2.dim,
            });
        }
        let sphere = match (s1.sphere, s2.sphere) {
            (None, None) => None,
            (Some(x), None) => Some(SphereComponent { radius: x.radius, weight: a * x.weight }),
            (None, Some(y)) => Some(SphereComponent { radius: y.radius, weight: b * y.weight }),
            (Some(x), Some(y)) if x.radius == y.radius => Some(SphereComponent {
                radius: x.radius,
                weight: a * x.weight + b * y.weight,
            }),
            _ => return Err(OscError::invalid("sphere components with different radii")),
        };
        let atoms = s1
            .atoms
            .iter()
            .map(|at| Atom { point: at.point.clone(), weight: a * at.weight })
            .chain(s2.atoms.iter().map(|at| Atom { point: at.point.clone(), weight: b * at.weight }))
            .collect();
        let mut m = SignedMeasure::assemble(s1.dim, atoms, sphere)?;
        m.declared_moment_order = m.infer_order()?;
        Ok(m)
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn binomial(n: u32, k: u32) -> i64 {
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

/// σ(ℓ) = Σ_{j=0}^{ℓ} (−1)^{ℓ+j} C(ℓ, j) δ_j, the measure of the ℓ-th forward difference.
pub fn make_classical(ell: u32) -> Result<SignedMeasure> {
    if ell == 0 {
        return Err(OscError::invalid("classical difference order must be >= 1"));
    }
    let atoms = (0..=ell)
        .map(|j| {
            let sign = if (ell + j) % 2 == 0 { 1 } else { -1 };
            (vec![rat(j as i64)], rat(sign * binomial(ell, j)))
        })
        .collect();
    SignedMeasure::from_exact(1, ExactParts { atoms, sphere: None }, ell as i32 - 1)
}

fn unit(dim: usize, sign: i64) -> Vec<BigRational> {
    let mut p = vec![BigRational::zero(); dim];
    p[0] = rat(sign);
    p
}

/// Builders for the measures used by the oscillation functionals.
pub fn make_named(name: NamedMeasure, dim: usize) -> Result<SignedMeasure> {
    if dim == 0 {
        return Err(OscError::invalid("dimension must be positive"));
    }
    match name {
        NamedMeasure::Sym1 => SignedMeasure::from_exact(
            dim,
            ExactParts {
                atoms: vec![(unit(dim, 1), rat(1)), (unit(dim, -1), rat(-1))],
                sphere: None,
            },
            0,
        ),
        NamedMeasure::Sym2 => SignedMeasure::from_exact(
            dim,
            ExactParts {
                atoms: vec![
                    (unit(dim, 1), rat(1)),
                    (unit(dim, -1), rat(1)),
                    (vec![BigRational::zero(); dim], rat(-2)),
                ],
                sphere: None,
            },
            1,
        ),
        NamedMeasure::SphereMinusDelta => {
            if dim > 3 {
                return Err(OscError::UnsupportedDimension {
                    dim,
                    context: "sphere components need d <= 3",
                });
            }
            let origin = (vec![BigRational::zero(); dim], rat(-1));
            let parts = if dim == 1 {
                let half = BigRational::new(BigInt::from(1), BigInt::from(2));
                ExactParts {
                    atoms: vec![(vec![rat(1)], half.clone()), (vec![rat(-1)], half), origin],
                    sphere: None,
                }
            } else {
                ExactParts {
                    atoms: vec![origin],
                    sphere: Some((rat(1), rat(1))),
                }
            };
            SignedMeasure::from_exact(dim, parts, 1)
        }
        NamedMeasure::General { points, weights } => {
            if points.len() != weights.len() {
                return Err(OscError::invalid("points and weights differ in length"));
            }
            if points.is_empty() {
                return Err(OscError::invalid("general measure needs at least one atom"));
            }
            let atoms = points
                .into_iter()
                .zip(weights)
                .map(|(point, weight)| Atom { point, weight })
                .collect();
            SignedMeasure::from_parts(dim, atoms, None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym2() -> SignedMeasure {
        make_named(NamedMeasure::Sym2, 1).unwrap()
    }

    #[test]
    fn moment_examples() {
        assert_eq!(sym2().moment(&[0]).unwrap(), 0.0);
        assert_eq!(sym2().moment(&[2]).unwrap(), 2.0);
        let s3 = make_classical(3).unwrap();
        assert_eq!(s3.moment_exact(&[2]).unwrap().unwrap(), BigRational::zero());
    }

    #[test]
    fn check_vanishing_examples() {
        let sym1 = make_named(NamedMeasure::Sym1, 1).unwrap();
        assert!(sym1.check_vanishing(0).unwrap().pass);
        assert!(sym2().check_vanishing(1).unwrap().pass);
        let r = sym2().check_vanishing(2).unwrap();
        assert!(!r.pass);
        assert_eq!(r.first_offender().unwrap().1, 2.0);
    }

    #[test]
    fn cumulative_examples() {
        assert_eq!(sym2().cumulative(0.5).unwrap(), 1.0);
        assert_eq!(sym2().cumulative(-0.5).unwrap(), -1.0);
        assert_eq!(sym2().cumulative(1.0).unwrap(), 1.0);
        assert_eq!(sym2().cumulative(1.5).unwrap(), 0.0);
    }

    #[test]
    fn classical_builders() {
        let s1 = make_classical(1).unwrap();
        let pts: Vec<_> = s1.atoms().iter().map(|a| (a.point[0], a.weight)).collect();
        assert_eq!(pts, vec![(0.0, -1.0), (1.0, 1.0)]);
        let s2 = make_classical(2).unwrap();
        let pts: Vec<_> = s2.atoms().iter().map(|a| (a.point[0], a.weight)).collect();
        assert_eq!(pts, vec![(0.0, 1.0), (1.0, -2.0), (2.0, 1.0)]);
        assert_eq!(s2.support_radius(), 2.0);
        assert_eq!(s2.declared_moment_order(), 1);
        assert!(make_classical(3).unwrap().check_vanishing(2).unwrap().pass);
    }

    #[test]
    fn classical_moments_and_total_variation() {
        for ell in 1..=8u32 {
            let s = make_classical(ell).unwrap();
            let r = s.check_vanishing(ell - 1).unwrap();
            assert!(r.pass && r.exact && r.tolerance == 0.0);
            assert!(!s.moment_exact(&[ell]).unwrap().unwrap().is_zero());
            assert_eq!(s.total_variation_exact().unwrap(), rat(1 << ell));
        }
    }

    #[test]
    fn named_builders() {
        let sym1 = make_named(NamedMeasure::Sym1, 1).unwrap();
        let pts: Vec<_> = sym1.atoms().iter().map(|a| (a.point[0], a.weight)).collect();
        assert_eq!(pts, vec![(1.0, 1.0), (-1.0, -1.0)]);

        let smd = make_named(NamedMeasure::SphereMinusDelta, 1).unwrap();
        let pts: Vec<_> = smd.atoms().iter().map(|a| (a.point[0], a.weight)).collect();
        assert_eq!(pts, vec![(1.0, 0.5), (-1.0, 0.5), (0.0, -1.0)]);
        assert!(smd.sphere().is_none());

        let general = make_named(
            NamedMeasure::General {
                points: vec![vec![1.0], vec![-1.0], vec![0.0]],
                weights: vec![1.0, 1.0, -2.0],
            },
            1,
        )
        .unwrap();
        assert_eq!(general.declared_moment_order(), 1);
        assert_eq!(general.atoms(), sym2().atoms());
    }

    #[test]
    fn general_with_mass_is_rejected() {
        let err = make_named(
            NamedMeasure::General {
                points: vec![vec![1.0], vec![0.0]],
                weights: vec![1.0, 1.0],
            },
            1,
        )
        .unwrap_err();
        assert!(matches!(err, OscError::NonzeroMass { .. }));
    }

    #[test]
    fn sphere_moments_in_two_and_three_dimensions() {
        for d in [2, 3] {
            let s = make_named(NamedMeasure::SphereMinusDelta, d).unwrap();
            assert_eq!(s.declared_moment_order(), 1);
            let mut k = vec![0; d];
            k[0] = 2;
            assert_eq!(s.moment(&k).unwrap(), 1.0 / d as f64);
            k[0] = 4;
            // E[ξ₁⁴] = 3 / (d (d + 2))
            assert!((s.moment(&k).unwrap() - 3.0 / (d * (d + 2)) as f64).abs() < 1e-15);
        }
        let err = SignedMeasure::from_parts(4, vec![], Some(SphereComponent { radius: 1.0, weight: 0.0 }));
        assert!(matches!(err, Err(OscError::UnsupportedDimension { .. })));
    }

    #[test]
    fn multiindex_counts() {
        assert_eq!(multiindices(1, 3), vec![vec![3]]);
        assert_eq!(multiindices(2, 2).len(), 3);
        assert_eq!(multiindices(3, 2).len(), 6);
    }

    #[test]
    fn cumulative_vanishes_outside_support() {
        for ell in 1..=6 {
            let s = make_classical(ell).unwrap();
            let m = s.support_radius();
            assert_eq!(s.cumulative(m + 1e-9).unwrap(), 0.0);
            assert_eq!(s.cumulative(-m).unwrap(), 0.0);
        }
        assert_eq!(sym2().cumulative(-1.0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn moment_is_linear(
            pts in prop::collection::vec(-2.0f64..2.0, 2..6),
            ws in prop::collection::vec(-3.0f64..3.0, 2..6),
            a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0u32..5,
        ) {
            let n = pts.len().min(ws.len());
            let mut weights = ws[..n].to_vec();
            let mass: f64 = weights.iter().sum();
            weights[n - 1] -= mass;
            let s1 = make_named(NamedMeasure::General {
                points: pts[..n].iter().map(|p| vec![*p]).collect(),
                weights,
            }, 1).unwrap();
            let s2 = sym2();
            let combo = SignedMeasure::linear_combination(a, &s1, b, &s2).unwrap();
            let lhs = combo.moment(&[k]).unwrap();
            let rhs = a * s1.moment(&[k]).unwrap() + b * s2.moment(&[k]).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
        }
    }
}
