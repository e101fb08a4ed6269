//! Predictive distributions at unobserved points.
//!
//! Three knowledge states are covered: `(β, σ², θ)` known (conditional
//! Gaussian), `(σ², θ)` known with β integrated out (Gaussian), and only `θ`
//! known (multivariate Student with `n − p` degrees of freedom). A sample of
//! correlation lengths gives an equally weighted mixture of Students.
//!
//! All β-free formulas are evaluated in the rotated coordinates `[P W]` with
//! `G = H₀₀ (PᵀH)⁻¹`:
//!
//! ```text
//! S₀W   = G PᵀΣW − Σ₀·W
//! mean  = G Pᵀy − S₀W (WᵀΣW)⁻¹ Wᵀy
//! S₀₀   = Σ₀₀ + G PᵀΣP Gᵀ − G PᵀΣ·₀ − Σ₀·P Gᵀ
//! cov/σ² = S₀₀ − S₀W (WᵀΣW)⁻¹ S₀Wᵀ
//! ```

use crate::error::{domain, Error, Result};
use crate::gibbs::ChainOutput;
use crate::kernels::{DesignSet, LengthVector};
use crate::linalg::{symmetrize, Chol};
use crate::linear_model::{KrigingModel, ProjectedData};
use crate::special::{normal_cdf, normal_pdf, normal_quantile, student_t_cdf, student_t_ln_pdf, student_t_quantile};
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// One multivariate Student component.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentComponent {
    pub location: DVector<f64>,
    pub scale: DMatrix<f64>,
    pub dof: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveDistribution {
    /// `(β, σ², θ)` known.
    KnownAll { mean: DVector<f64>, cov: DMatrix<f64> },
    /// `(σ², θ)` known, β integrated out.
    BetaMarginalized { mean: DVector<f64>, cov: DMatrix<f64> },
    /// Only θ known.
    Student(StudentComponent),
    /// Equally weighted Students, one per sampled θ.
    Mixture(Vec<StudentComponent>),
}

impl PredictiveDistribution {
    pub fn n_targets(&self) -> usize {
        match self {
            Self::KnownAll { mean, .. } | Self::BetaMarginalized { mean, .. } => mean.len(),
            Self::Student(c) => c.location.len(),
            Self::Mixture(cs) => cs.first().map_or(0, |c| c.location.len()),
        }
    }

    /// The one-dimensional marginal at target `j`.
    pub fn marginal(&self, j: usize) -> Result<Marginal> {
        let n0 = self.n_targets();
        if j >= n0 {
            return Err(Error::IndexOutOfRange { index: j, dim: n0 });
        }
        let student = |c: &StudentComponent| StudentMarginal {
            location: c.location[j],
            scale: c.scale[(j, j)].max(0.0).sqrt(),
            dof: c.dof as f64,
        };
        let m = match self {
            Self::KnownAll { mean, cov } | Self::BetaMarginalized { mean, cov } => {
                Marginal::Normal { mean: mean[j], sd: cov[(j, j)].max(0.0).sqrt() }
            }
            Self::Student(c) => Marginal::Student(student(c)),
            Self::Mixture(cs) => Marginal::Mixture(cs.iter().map(student).collect()),
        };
        m.check()?;
        Ok(m)
    }

    /// Point prediction (mean or location) at every target.
    pub fn point(&self) -> Result<DVector<f64>> {
        match self {
            Self::KnownAll { mean, .. } | Self::BetaMarginalized { mean, .. } => Ok(mean.clone()),
            Self::Student(c) => Ok(c.location.clone()),
            Self::Mixture(cs) => {
                let first = cs.first().ok_or(Error::EmptyChain)?;
                let mut acc = DVector::zeros(first.location.len());
                for c in cs {
                    acc += &c.location;
                }
                Ok(acc / cs.len() as f64)
            }
        }
    }
}

/// A Student marginal `location + scale · T_dof`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentMarginal {
    pub location: f64,
    pub scale: f64,
    pub dof: f64,
}

impl StudentMarginal {
    pub fn cdf(&self, x: f64) -> f64 {
        step_cdf(x, self.location, self.scale, |z| student_t_cdf(z, self.dof))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if self.scale == 0.0 {
            return if x == self.location { f64::INFINITY } else { 0.0 };
        }
        student_t_ln_pdf((x - self.location) / self.scale, self.dof).exp() / self.scale
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.location + self.scale * student_t_quantile(p, self.dof)
    }
}

// CDF of `location + scale · Z`, treating a zero scale as a point mass.
fn step_cdf(x: f64, location: f64, scale: f64, std_cdf: impl Fn(f64) -> f64) -> f64 {
    if scale == 0.0 {
        return if x >= location { 1.0 } else { 0.0 };
    }
    std_cdf((x - location) / scale)
}

/// A one-dimensional predictive marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    Student(StudentMarginal),
    /// Equal weights.
    Mixture(Vec<StudentMarginal>),
}

impl Marginal {
    fn check(&self) -> Result<()> {
        let ok = match self {
            Self::Normal { mean, sd } => mean.is_finite() && sd.is_finite(),
            Self::Student(s) => s.location.is_finite() && s.scale.is_finite() && s.dof > 0.0,
            Self::Mixture(cs) => {
                !cs.is_empty() && cs.iter().all(|s| s.location.is_finite() && s.scale.is_finite() && s.dof > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(domain("predictive marginal has a non-finite location or scale"))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal { mean, sd } => step_cdf(x, *mean, *sd, normal_cdf),
            Self::Student(s) => s.cdf(x),
            Self::Mixture(cs) => cs.iter().map(|s| s.cdf(x)).sum::<f64>() / cs.len() as f64,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal { mean, sd } => {
                if *sd == 0.0 {
                    if x == *mean { f64::INFINITY } else { 0.0 }
                } else {
                    normal_pdf((x - mean) / sd) / sd
                }
            }
            Self::Student(s) => s.pdf(x),
            Self::Mixture(cs) => cs.iter().map(|s| s.pdf(x)).sum::<f64>() / cs.len() as f64,
        }
    }

    /// Mean of the marginal (for Students with more than one degree of freedom).
    pub fn mean(&self) -> f64 {
        match self {
            Self::Normal { mean, .. } => *mean,
            Self::Student(s) => s.location,
            Self::Mixture(cs) => cs.iter().map(|s| s.location).sum::<f64>() / cs.len() as f64,
        }
    }

    /// `F⁻¹(p)`; for mixtures, solved to `1e-10` in probability.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain("quantile level must lie in (0, 1)"));
        }
        Ok(match self {
            Self::Normal { mean, sd } => mean + sd * normal_quantile(p),
            Self::Student(s) => s.quantile(p),
            Self::Mixture(cs) => mixture_quantile(cs, p),
        })
    }

    /// Equal-tailed interval of the given level.
    pub fn interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(domain("interval level must lie in (0, 1)"));
        }
        Ok((self.quantile(0.5 * (1.0 - level))?, self.quantile(0.5 * (1.0 + level))?))
    }
}

fn mixture_quantile(cs: &[StudentMarginal], p: f64) -> f64 {
    let k = cs.len() as f64;
    let cdf = |x: f64| cs.iter().map(|s| s.cdf(x)).sum::<f64>() / k;
    let pdf = |x: f64| cs.iter().map(|s| s.pdf(x)).sum::<f64>() / k;
    // The mixture quantile lies between the extreme component quantiles.
    let (mut lo, mut hi) = cs.iter().map(|s| s.quantile(p)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| {
        (a.min(q), b.max(q))
    });
    if lo == hi {
        return lo;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f.abs() <= 1e-10 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return x;
        }
        // Newton step, falling back to bisection when it leaves the bracket.
        let d = pdf(x);
        let nx = x - f / d;
        x = if d > 0.0 && nx > lo && nx < hi { nx } else { 0.5 * (lo + hi) };
    }
    x
}

/// Marginal `(location, scale²)` pairs at all targets for one θ.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMoments {
    pub location: Vec<f64>,
    /// Diagonal of the covariance (Gaussian) or of the scale matrix (Student).
    pub scale2: Vec<f64>,
}

/// θ-independent pieces of a prediction problem.
#[derive(Debug, Clone)]
pub struct PredictionContext<'a> {
    model: &'a KrigingModel,
    targets: DesignSet,
    data: ProjectedData,
    h00: DMatrix<f64>,
    g: DMatrix<f64>,
    // For each target, a design point it coincides with.
    pinned: Vec<Option<usize>>,
}

// The θ-dependent pieces shared by the β-free predictors.
struct Rotated {
    mean: DVector<f64>,
    // L⁻¹ S₀Wᵀ for the Cholesky factor L of WᵀΣW.
    white: DMatrix<f64>,
    // Σ₀·P and PᵀΣP, for S₀₀.
    s0p: DMatrix<f64>,
    pp: DMatrix<f64>,
    q: f64,
}

impl<'a> PredictionContext<'a> {
    pub fn new(model: &'a KrigingModel, y: &[f64], targets: &DesignSet) -> Result<Self> {
        if targets.dim() != model.r() {
            return Err(Error::DimensionMismatch(String::from("targets and design dimensions differ")));
        }
        if targets.is_empty() {
            return Err(domain("no prediction targets"));
        }
        let data = model.project(y)?;
        let h00 = model.basis_at(targets);
        let p = model.p();
        let g = if p == 0 {
            DMatrix::zeros(targets.len(), 0)
        } else {
            // G = H₀₀ (PᵀH)⁻¹, via (PᵀH)ᵀ Gᵀ = H₀₀ᵀ.
            let gt = model
                .matrices()
                .ph()
                .transpose()
                .lu()
                .solve(&h00.transpose())
                .ok_or_else(|| Error::Factorization(String::from("PᵀH is singular")))?;
            gt.transpose()
        };
        let pinned = targets
            .points()
            .map(|t| model.design().points().position(|x| x == t))
            .collect();
        Ok(Self { model, targets: targets.clone(), data, h00, g, pinned })
    }

    // A target on a design point is predicted exactly: rounding would
    // otherwise leave a spurious O(√ε) spread.
    fn pin(&self, mean: &mut DVector<f64>, cov: Option<&mut DMatrix<f64>>, diag: Option<&mut Vec<f64>>) {
        let mut cov = cov;
        let mut diag = diag;
        for (j, k) in self.pinned.iter().enumerate() {
            if let Some(k) = *k {
                mean[j] = self.data.y()[k];
                if let Some(c) = cov.as_deref_mut() {
                    c.row_mut(j).fill(0.0);
                    c.column_mut(j).fill(0.0);
                }
                if let Some(d) = diag.as_deref_mut() {
                    d[j] = 0.0;
                }
            }
        }
    }

    pub fn targets(&self) -> &DesignSet {
        &self.targets
    }

    pub fn data(&self) -> &ProjectedData {
        &self.data
    }

    fn cross(&self, theta: &LengthVector) -> Result<DMatrix<f64>> {
        self.model.check_theta(theta)?;
        Ok(self.model.kernel().cross_unchecked(self.model.design(), &self.targets, theta))
    }

    fn target_corr(&self, theta: &LengthVector) -> DMatrix<f64> {
        self.model.kernel().sigma_unchecked(&self.targets, theta)
    }

    fn rotated(&self, theta: &LengthVector) -> Result<Rotated> {
        let mm = self.model.matrices();
        let sigma = self.model.sigma(theta)?;
        let blocks = mm.split_sym(&sigma);
        let chol = Chol::new(blocks.ww.clone(), "WᵀΣW")?;
        let (s0p, s0w) = mm.split_cols(&self.cross(theta)?);
        let s0w = &self.g * &blocks.pw - s0w;
        let mut white = s0w.transpose();
        chol.lower_solve_mut(&mut white);
        let wy_white = chol.lower_solve_vec(self.data.wy());
        let mean = &self.g * self.data.py() - white.tr_mul(&wy_white);
        let q = wy_white.norm_squared();
        if !(q > 1e-300) {
            return Err(Error::DegenerateObservation(q));
        }
        Ok(Rotated { mean, white, s0p, pp: blocks.pp, q })
    }

    // S₀₀ − S₀W (WᵀΣW)⁻¹ S₀Wᵀ in full.
    fn beta_free_cov(&self, theta: &LengthVector, rot: &Rotated) -> DMatrix<f64> {
        let gs = &self.g * rot.s0p.transpose();
        let mut s00 = self.target_corr(theta) + &self.g * &rot.pp * self.g.transpose() - &gs - gs.transpose();
        s00 -= rot.white.tr_mul(&rot.white);
        symmetrize(&mut s00);
        s00
    }

    // Diagonal of the same matrix.
    fn beta_free_diag(&self, rot: &Rotated) -> Vec<f64> {
        let gpp = &self.g * &rot.pp;
        (0..self.targets.len())
            .map(|j| {
                let gj = self.g.row(j);
                let s00 = 1.0 + gpp.row(j).dot(&gj) - 2.0 * gj.dot(&rot.s0p.row(j));
                s00 - rot.white.column(j).norm_squared()
            })
            .collect()
    }

    /// The conditional Gaussian with `(β, σ², θ)` known.
    pub fn known_all(&self, beta: &[f64], sigma2: f64, theta: &LengthVector) -> Result<PredictiveDistribution> {
        let (mut mean, cov) = self.known_all_parts(beta, sigma2, theta, true)?;
        let mut cov = cov.expect("full covariance requested");
        symmetrize(&mut cov);
        self.pin(&mut mean, Some(&mut cov), None);
        Ok(PredictiveDistribution::KnownAll { mean, cov })
    }

    /// Means and variances of [`Self::known_all`] without the full covariance.
    pub fn known_all_moments(&self, beta: &[f64], sigma2: f64, theta: &LengthVector) -> Result<MarginalMoments> {
        let (mut mean, _) = self.known_all_parts(beta, sigma2, theta, false)?;
        let chol = Chol::new(self.model.sigma(theta)?, "Σ")?;
        let mut x = self.cross(theta)?.transpose();
        chol.lower_solve_mut(&mut x);
        let mut scale2 = x.column_iter().map(|c| sigma2 * (1.0 - c.norm_squared())).collect();
        self.pin(&mut mean, None, Some(&mut scale2));
        Ok(MarginalMoments { location: mean.iter().copied().collect(), scale2 })
    }

    fn known_all_parts(
        &self,
        beta: &[f64],
        sigma2: f64,
        theta: &LengthVector,
        full: bool,
    ) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(domain("sigma2 must be finite and positive"));
        }
        if beta.len() != self.model.p() {
            return Err(Error::DimensionMismatch(String::from("beta must have p entries")));
        }
        let beta = DVector::from_column_slice(beta);
        let chol = Chol::new(self.model.sigma(theta)?, "Σ")?;
        let cross = self.cross(theta)?;
        let resid = self.data.y() - self.model.matrices().h() * &beta;
        let mean = &self.h00 * &beta + &cross * chol.solve(&resid);
        let cov = full.then(|| {
            let mut x = cross.transpose();
            chol.lower_solve_mut(&mut x);
            (self.target_corr(theta) - x.tr_mul(&x)) * sigma2
        });
        Ok((mean, cov))
    }

    /// The Gaussian with `(σ², θ)` known and β integrated out.
    pub fn beta_marginal(&self, sigma2: f64, theta: &LengthVector) -> Result<PredictiveDistribution> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(domain("sigma2 must be finite and positive"));
        }
        let rot = self.rotated(theta)?;
        let mut cov = self.beta_free_cov(theta, &rot) * sigma2;
        let mut mean = rot.mean;
        self.pin(&mut mean, Some(&mut cov), None);
        Ok(PredictiveDistribution::BetaMarginalized { mean, cov })
    }

    fn student_component(&self, theta: &LengthVector) -> Result<StudentComponent> {
        let rot = self.rotated(theta)?;
        let dof = self.model.dof();
        let mut scale = self.beta_free_cov(theta, &rot) * (rot.q / dof as f64);
        let mut location = rot.mean;
        self.pin(&mut location, Some(&mut scale), None);
        Ok(StudentComponent { location, scale, dof })
    }

    /// The Student with only θ known.
    pub fn student(&self, theta: &LengthVector) -> Result<PredictiveDistribution> {
        Ok(PredictiveDistribution::Student(self.student_component(theta)?))
    }

    /// Location and diagonal scale of [`Self::student`], skipping `n₀ × n₀` work.
    pub fn student_moments(&self, theta: &LengthVector) -> Result<MarginalMoments> {
        let rot = self.rotated(theta)?;
        let f = rot.q / self.model.dof() as f64;
        let mut scale2 = self.beta_free_diag(&rot).into_iter().map(|v| v * f).collect();
        let mut location = rot.mean;
        self.pin(&mut location, None, Some(&mut scale2));
        Ok(MarginalMoments { location: location.iter().copied().collect(), scale2 })
    }

    /// The equally weighted Student mixture over a sample of θ.
    pub fn full_bayes(&self, samples: &[LengthVector]) -> Result<PredictiveDistribution> {
        if samples.is_empty() {
            return Err(Error::EmptyChain);
        }
        let cs = samples.iter().map(|t| self.student_component(t)).collect::<Result<Vec<_>>>()?;
        Ok(PredictiveDistribution::Mixture(cs))
    }

    /// Per-target mixture marginals over a sample of θ, without full matrices.
    pub fn full_bayes_marginals(&self, samples: &[LengthVector]) -> Result<Vec<Marginal>> {
        if samples.is_empty() {
            return Err(Error::EmptyChain);
        }
        let dof = self.model.dof() as f64;
        let mut per_target: Vec<Vec<StudentMarginal>> =
            (0..self.targets.len()).map(|_| Vec::with_capacity(samples.len())).collect();
        for t in samples {
            let mo = self.student_moments(t)?;
            for (j, comps) in per_target.iter_mut().enumerate() {
                comps.push(StudentMarginal { location: mo.location[j], scale: mo.scale2[j].max(0.0).sqrt(), dof });
            }
        }
        let out: Vec<Marginal> = per_target.into_iter().map(Marginal::Mixture).collect();
        for m in &out {
            m.check()?;
        }
        Ok(out)
    }
}

pub fn predict_known_all(
    targets: &DesignSet,
    y: &[f64],
    beta: &[f64],
    sigma2: f64,
    theta: &LengthVector,
    model: &KrigingModel,
) -> Result<PredictiveDistribution> {
    PredictionContext::new(model, y, targets)?.known_all(beta, sigma2, theta)
}

pub fn predict_beta_marginal(
    targets: &DesignSet,
    y: &[f64],
    sigma2: f64,
    theta: &LengthVector,
    model: &KrigingModel,
) -> Result<PredictiveDistribution> {
    PredictionContext::new(model, y, targets)?.beta_marginal(sigma2, theta)
}

pub fn predict_student(
    targets: &DesignSet,
    y: &[f64],
    theta: &LengthVector,
    model: &KrigingModel,
) -> Result<PredictiveDistribution> {
    PredictionContext::new(model, y, targets)?.student(theta)
}

pub fn predict_full_bayes(
    targets: &DesignSet,
    y: &[f64],
    chain: &ChainOutput,
    model: &KrigingModel,
) -> Result<PredictiveDistribution> {
    PredictionContext::new(model, y, targets)?.full_bayes(&chain.samples)
}

/// Equal-tailed interval of the marginal at target `j`.
pub fn prediction_interval(dist: &PredictiveDistribution, j: usize, level: f64) -> Result<(f64, f64)> {
    dist.marginal(j)?.interval(level)
}
