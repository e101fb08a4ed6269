//! Matérn correlation kernels, their derivatives in the correlation lengths,
//! and the design / length containers they act on.

use crate::error::{domain, Error, Result};
use crate::special::{ln_bessel_k_scaled_unchecked, ln_gamma};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// A set of points in `r` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSet {
    dim: usize,
    coords: Vec<f64>,
}

impl DesignSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("design dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates cannot be split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(domain("design coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "points must all have dimension {dim}"
            )));
        }
        Self::new(dim, points.concat())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, a: usize) -> &[f64] {
        &self.coords[a * self.dim..(a + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Fails with the first pair of coinciding points.
    pub fn check_distinct(&self) -> Result<()> {
        for a in 0..self.len() {
            for b in 0..a {
                if self.point(a) == self.point(b) {
                    return Err(Error::DuplicatePoint(b, a));
                }
            }
        }
        Ok(())
    }

    /// True when no two points share a coordinate value in any dimension.
    pub fn coordinate_distinct(&self) -> bool {
        (0..self.len()).all(|a| {
            (0..a).all(|b| {
                self.point(a)
                    .iter()
                    .zip(self.point(b))
                    .all(|(x, y)| x != y)
            })
        })
    }

    /// Per-dimension `(min, max)` of the points.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|j| {
                self.points().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[j]), hi.max(p[j]))
                })
            })
            .collect()
    }

    /// The points of `self` followed by those of `other`.
    pub fn concat(&self, other: &DesignSet) -> Result<DesignSet> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot join designs of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(DesignSet { dim: self.dim, coords })
    }

    /// A design holding the selected rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> DesignSet {
        let coords = rows.iter().flat_map(|&a| self.point(a).iter().copied()).collect();
        DesignSet { dim: self.dim, coords }
    }
}

/// Correlation lengths `θ`. The inverse lengths `μ_i = 1 / θ_i` are available
/// through [`LengthVector::mu`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LengthVector(Vec<f64>);

impl LengthVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidLength);
        }
        Ok(Self(theta))
    }

    pub fn from_mu(mu: &[f64]) -> Result<Self> {
        Self::new(mu.iter().map(|m| 1.0 / m).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.0
    }

    pub fn mu(&self) -> Vec<f64> {
        self.0.iter().map(|t| 1.0 / t).collect()
    }

    /// Copy with coordinate `i` replaced.
    pub fn with(&self, i: usize, theta_i: f64) -> Result<Self> {
        if i >= self.0.len() {
            return Err(Error::IndexOutOfRange { index: i, dim: self.0.len() });
        }
        if !(theta_i.is_finite() && theta_i > 0.0) {
            return Err(Error::InvalidLength);
        }
        let mut v = self.0.clone();
        v[i] = theta_i;
        Ok(Self(v))
    }
}

impl TryFrom<Vec<f64>> for LengthVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LengthVector> for Vec<f64> {
    fn from(v: LengthVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// Matérn applied to the norm of the coordinate-scaled lag.
    AnisotropicGeometric,
    /// Product of one-dimensional Matérn factors.
    Tensorized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub nu: f64,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, nu: f64, dim: usize) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(domain("smoothness nu must be finite and positive"));
        }
        if dim == 0 {
            return Err(domain("kernel dimension must be at least 1"));
        }
        Ok(Self { family, nu, dim })
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(*self)
    }
}

#[derive(Debug, Clone, Copy)]
enum Form {
    // ν = k + 1/2 with k = 0..=3
    HalfInteger(u8),
    General { ln_norm: f64 },
}

/// One-dimensional Matérn correlation `K_{1,ν}` with precomputed constants.
#[derive(Debug, Clone, Copy)]
pub struct Matern1d {
    nu: f64,
    scale: f64,
    form: Form,
}

impl Matern1d {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(domain("smoothness nu must be finite and positive"));
        }
        let form = match nu {
            0.5 => Form::HalfInteger(0),
            1.5 => Form::HalfInteger(1),
            2.5 => Form::HalfInteger(2),
            3.5 => Form::HalfInteger(3),
            _ => Form::General { ln_norm: -ln_gamma(nu) - (nu - 1.0) * LN_2 },
        };
        Ok(Self { nu, scale: 2.0 * nu.sqrt(), form })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Correlation at lag `t` (the sign of `t` is ignored).
    pub fn value(&self, t: f64) -> f64 {
        let a = self.scale * t.abs();
        if a == 0.0 {
            return 1.0;
        }
        match self.form {
            Form::HalfInteger(k) => {
                let e = (-a).exp();
                match k {
                    0 => e,
                    1 => (1.0 + a) * e,
                    2 => (1.0 + a + a * a / 3.0) * e,
                    _ => (1.0 + a + 0.4 * a * a + a * a * a / 15.0) * e,
                }
            }
            Form::General { ln_norm } => {
                (self.nu * a.ln() + ln_bessel_k_scaled_unchecked(self.nu, a) - a + ln_norm).exp()
            }
        }
    }

    /// Derivative of [`Matern1d::value`] with respect to `t > 0`.
    ///
    /// Uses `d/dz [z^ν K_ν(z)] = -z^ν K_{ν-1}(z)`, valid for every `ν > 0`.
    pub fn slope(&self, t: f64) -> f64 {
        let a = self.scale * t;
        if a == 0.0 {
            return match self.form {
                Form::HalfInteger(0) => -self.scale,
                _ if self.nu > 0.5 => 0.0,
                _ => f64::NEG_INFINITY,
            };
        }
        let da = match self.form {
            Form::HalfInteger(k) => {
                let e = (-a).exp();
                match k {
                    0 => -e,
                    1 => -a * e,
                    2 => -(a / 3.0) * (1.0 + a) * e,
                    _ => -(a / 15.0) * (3.0 + 3.0 * a + a * a) * e,
                }
            }
            Form::General { ln_norm } => {
                let order = (self.nu - 1.0).abs();
                -(self.nu * a.ln() + ln_bessel_k_scaled_unchecked(order, a) - a + ln_norm).exp()
            }
        };
        da * self.scale
    }
}

/// `K_{1,ν}(t)`, the one-dimensional Matérn correlation.
pub fn matern_1d(t: f64, nu: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain("matern_1d requires a finite lag t >= 0"));
    }
    Ok(Matern1d::new(nu)?.value(t))
}

/// `K'_{1,ν}(t) = -(2νt/(ν-1)) K_{1,ν-1}(√(ν/(ν-1)) t)`, defined for `ν > 1`.
///
/// [`Matern1d::slope`] covers every `ν > 0`.
pub fn matern_1d_deriv(t: f64, nu: f64) -> Result<f64> {
    if !(nu > 1.0 && nu.is_finite()) {
        return Err(domain("the analytic Matérn derivative needs nu > 1"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain("matern_1d_deriv requires a finite lag t > 0"));
    }
    let inner = Matern1d::new(nu - 1.0)?.value((nu / (nu - 1.0)).sqrt() * t);
    Ok(-(2.0 * nu * t / (nu - 1.0)) * inner)
}

/// A kernel ready for evaluation: the spec plus the precomputed 1-D Matérn.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    spec: KernelSpec,
    m: Matern1d,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        let spec = KernelSpec::new(spec.family, spec.nu, spec.dim)?;
        Ok(Self { spec, m: Matern1d::new(spec.nu)? })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn check(&self, design: &DesignSet, theta: &LengthVector) -> Result<()> {
        if design.dim() != self.spec.dim || theta.dim() != self.spec.dim {
            return Err(Error::DimensionMismatch(format!(
                "kernel dimension {}, design dimension {}, {} correlation lengths",
                self.spec.dim,
                design.dim(),
                theta.dim()
            )));
        }
        Ok(())
    }

    /// Correlation between two points.
    pub fn correlation(&self, a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
        match self.spec.family {
            KernelFamily::AnisotropicGeometric => {
                let s2: f64 = a
                    .iter()
                    .zip(b)
                    .zip(theta)
                    .map(|((x, y), t)| {
                        let u = (x - y) / t;
                        u * u
                    })
                    .sum();
                self.m.value(s2.sqrt())
            }
            KernelFamily::Tensorized => a
                .iter()
                .zip(b)
                .zip(theta)
                .map(|((x, y), t)| self.m.value((x - y) / t))
                .product(),
        }
    }

    // Correlation and its gradient in θ at one pair of points; `grad` has length r.
    fn correlation_grad(&self, a: &[f64], b: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
        match self.spec.family {
            KernelFamily::AnisotropicGeometric => {
                let mut s2 = 0.0;
                for ((x, y), t) in a.iter().zip(b).zip(theta) {
                    let u = (x - y) / t;
                    s2 += u * u;
                }
                let s = s2.sqrt();
                if s == 0.0 {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    return 1.0;
                }
                let k = self.m.value(s);
                let ks = self.m.slope(s);
                for (j, g) in grad.iter_mut().enumerate() {
                    let d = a[j] - b[j];
                    let t = theta[j];
                    *g = -ks * d * d / (t * t * t * s);
                }
                k
            }
            KernelFamily::Tensorized => {
                let r = a.len();
                let mut vals = [0.0f64; 16];
                let mut heap;
                let vals: &mut [f64] = if r <= 16 {
                    &mut vals[..r]
                } else {
                    heap = alloc::vec![0.0; r];
                    &mut heap
                };
                for j in 0..r {
                    vals[j] = self.m.value((a[j] - b[j]) / theta[j]);
                }
                for (j, g) in grad.iter_mut().enumerate() {
                    let d = (a[j] - b[j]).abs();
                    if d == 0.0 {
                        *g = 0.0;
                        continue;
                    }
                    let t = theta[j];
                    let others: f64 = (0..r).filter(|&l| l != j).map(|l| vals[l]).product();
                    *g = self.m.slope(d / t) * (-d / (t * t)) * others;
                }
                vals.iter().product()
            }
        }
    }

    // Correlation and its derivative in θ_i only.
    fn correlation_partial(&self, a: &[f64], b: &[f64], theta: &[f64], i: usize) -> (f64, f64) {
        match self.spec.family {
            KernelFamily::AnisotropicGeometric => {
                let mut s2 = 0.0;
                for ((x, y), t) in a.iter().zip(b).zip(theta) {
                    let u = (x - y) / t;
                    s2 += u * u;
                }
                let s = s2.sqrt();
                if s == 0.0 {
                    return (1.0, 0.0);
                }
                let d = a[i] - b[i];
                let t = theta[i];
                (self.m.value(s), -self.m.slope(s) * d * d / (t * t * t * s))
            }
            KernelFamily::Tensorized => {
                let mut others = 1.0;
                for j in 0..a.len() {
                    if j != i {
                        others *= self.m.value((a[j] - b[j]) / theta[j]);
                    }
                }
                let d = (a[i] - b[i]).abs();
                let t = theta[i];
                let ki = self.m.value(d / t);
                let dk = if d == 0.0 { 0.0 } else { self.m.slope(d / t) * (-d / (t * t)) * others };
                (ki * others, dk)
            }
        }
    }

    /// Σ_θ without any validation of the design (callers check once).
    pub fn sigma_unchecked(&self, design: &DesignSet, theta: &LengthVector) -> DMatrix<f64> {
        let n = design.len();
        let th = theta.theta();
        let mut s = DMatrix::identity(n, n);
        for a in 0..n {
            for b in 0..a {
                let v = self.correlation(design.point(a), design.point(b), th);
                s[(a, b)] = v;
                s[(b, a)] = v;
            }
        }
        s
    }

    /// Σ_θ and ∂Σ_θ/∂θ_i, without validation.
    pub fn sigma_partial_unchecked(
        &self,
        design: &DesignSet,
        theta: &LengthVector,
        i: usize,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = design.len();
        let th = theta.theta();
        let mut s = DMatrix::identity(n, n);
        let mut d = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..a {
                let (v, dv) = self.correlation_partial(design.point(a), design.point(b), th, i);
                s[(a, b)] = v;
                s[(b, a)] = v;
                d[(a, b)] = dv;
                d[(b, a)] = dv;
            }
        }
        (s, d)
    }

    /// Σ_θ and all r derivative matrices, without validation.
    pub fn sigma_grad_unchecked(
        &self,
        design: &DesignSet,
        theta: &LengthVector,
    ) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = design.len();
        let r = self.spec.dim;
        let th = theta.theta();
        let mut s = DMatrix::identity(n, n);
        let mut ds = alloc::vec![DMatrix::zeros(n, n); r];
        let mut g = alloc::vec![0.0; r];
        for a in 0..n {
            for b in 0..a {
                let v = self.correlation_grad(design.point(a), design.point(b), th, &mut g);
                s[(a, b)] = v;
                s[(b, a)] = v;
                for (dm, gj) in ds.iter_mut().zip(&g) {
                    dm[(a, b)] = *gj;
                    dm[(b, a)] = *gj;
                }
            }
        }
        (s, ds)
    }

    /// Correlations between each target (rows) and each design point (columns).
    pub fn cross_unchecked(
        &self,
        design: &DesignSet,
        targets: &DesignSet,
        theta: &LengthVector,
    ) -> DMatrix<f64> {
        let th = theta.theta();
        DMatrix::from_fn(targets.len(), design.len(), |a, b| {
            self.correlation(targets.point(a), design.point(b), th)
        })
    }
}

/// The correlation matrix Σ_θ of a design.
pub fn corr_matrix(design: &DesignSet, theta: &LengthVector, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let k = Kernel::new(*spec)?;
    k.check(design, theta)?;
    design.check_distinct()?;
    Ok(k.sigma_unchecked(design, theta))
}

/// Entrywise derivative `∂Σ_θ/∂θ_i` (zero-based `i`).
pub fn corr_matrix_deriv(
    design: &DesignSet,
    theta: &LengthVector,
    i: usize,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    let k = Kernel::new(*spec)?;
    k.check(design, theta)?;
    if i >= spec.dim {
        return Err(Error::IndexOutOfRange { index: i, dim: spec.dim });
    }
    design.check_distinct()?;
    Ok(k.sigma_partial_unchecked(design, theta, i).1)
}

/// The `n₀ × n` correlation matrix between targets and design points.
pub fn cross_corr_matrix(
    design: &DesignSet,
    targets: &DesignSet,
    theta: &LengthVector,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    let k = Kernel::new(*spec)?;
    k.check(design, theta)?;
    k.check(targets, theta)?;
    Ok(k.cross_unchecked(design, targets, theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_case() {
        let v = matern_1d(1.0, 0.5).unwrap();
        assert!((v - (-(2.0f64).sqrt()).exp()).abs() < 1e-15);
    }

    #[test]
    fn general_order_matches_closed_forms() {
        // Nudging ν off the half-integers forces the Bessel route.
        for &nu in &[0.5, 1.5, 2.5, 3.5] {
            let closed = Matern1d::new(nu).unwrap();
            let general = Matern1d { nu, scale: 2.0 * nu.sqrt(), form: Form::General {
                ln_norm: -ln_gamma(nu) - (nu - 1.0) * LN_2,
            } };
            for &t in &[1e-4, 0.01, 0.3, 1.0, 4.0, 20.0] {
                let (a, b) = (closed.value(t), general.value(t));
                assert!((a / b - 1.0).abs() < 1e-11, "nu={nu} t={t}: {a} {b}");
                let (a, b) = (closed.slope(t), general.slope(t));
                assert!((a / b - 1.0).abs() < 1e-10, "slope nu={nu} t={t}: {a} {b}");
            }
        }
    }

    #[test]
    fn length_vector_rejects_bad_values() {
        assert!(LengthVector::new(alloc::vec![1.0, 0.0]).is_err());
        assert!(LengthVector::new(alloc::vec![f64::NAN]).is_err());
        assert!(LengthVector::new(alloc::vec![]).is_err());
    }
}
