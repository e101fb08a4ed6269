//! Trend bases, the orthonormal split of observation space into the trend
//! span (`P`) and its complement (`W`), and the quantities obtained by
//! integrating out the trend coefficients and the variance.

use crate::error::{domain, Error, Result};
use crate::kernels::{DesignSet, Kernel, KernelFamily, KernelSpec, LengthVector};
use crate::linalg::{numerical_rank, symmetrize, Chol, Householder};
use crate::special::ln_gamma;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// A user-supplied trend function on the input space.
pub type BasisFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The `p` functions spanning the trend space.
#[derive(Clone)]
pub enum TrendBasis {
    /// No trend (`p = 0`, Simple Kriging with zero mean).
    None,
    /// Constant trend (`p = 1`, Ordinary Kriging).
    Constant,
    /// `1, x_1, …, x_r` (`p = r + 1`).
    Affine,
    Custom(Vec<BasisFn>),
}

impl fmt::Debug for TrendBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrendBasis::None => f.write_str("None"),
            TrendBasis::Constant => f.write_str("Constant"),
            TrendBasis::Affine => f.write_str("Affine"),
            TrendBasis::Custom(fs) => write!(f, "Custom({} functions)", fs.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    None,
    Constant,
    Affine,
    Custom,
}

impl TrendBasis {
    pub fn kind(&self) -> BasisKind {
        match self {
            TrendBasis::None => BasisKind::None,
            TrendBasis::Constant => BasisKind::Constant,
            TrendBasis::Affine => BasisKind::Affine,
            TrendBasis::Custom(_) => BasisKind::Custom,
        }
    }

    /// Number of basis functions in dimension `r`.
    pub fn len(&self, r: usize) -> usize {
        match self {
            TrendBasis::None => 0,
            TrendBasis::Constant => 1,
            TrendBasis::Affine => r + 1,
            TrendBasis::Custom(fs) => fs.len(),
        }
    }

    /// Appends the basis values at `x` to `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        match self {
            TrendBasis::None => {}
            TrendBasis::Constant => out.push(1.0),
            TrendBasis::Affine => {
                out.push(1.0);
                out.extend_from_slice(x);
            }
            TrendBasis::Custom(fs) => out.extend(fs.iter().map(|f| f(x))),
        }
    }

    /// The `n × p` matrix of basis values, without rank checks.
    pub fn matrix(&self, design: &DesignSet) -> DMatrix<f64> {
        let p = self.len(design.dim());
        let mut row = Vec::with_capacity(p);
        let mut h = DMatrix::zeros(design.len(), p);
        for (a, x) in design.points().enumerate() {
            row.clear();
            self.eval_into(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                h[(a, j)] = *v;
            }
        }
        h
    }
}

/// Evaluates the basis on the design and checks `n > p` and full column rank.
pub fn build_basis_matrix(basis: &TrendBasis, design: &DesignSet) -> Result<DMatrix<f64>> {
    let n = design.len();
    let p = basis.len(design.dim());
    if n <= p {
        return Err(Error::TooFewPoints { n, p });
    }
    let h = basis.matrix(design);
    if h.iter().any(|v| !v.is_finite()) {
        return Err(domain("trend basis produced non-finite values"));
    }
    let rank = numerical_rank(&h);
    if rank < p {
        return Err(Error::RankDeficient { rank, p });
    }
    Ok(h)
}

/// `H` together with orthonormal `P` (spanning `H`) and `W` (its complement).
#[derive(Debug, Clone)]
pub struct ModelMatrices {
    h: DMatrix<f64>,
    p: DMatrix<f64>,
    w: DMatrix<f64>,
    // PᵀH, the p × p change of coordinates between β and Pᵀ-coordinates.
    ph: DMatrix<f64>,
    ln_det_hth: f64,
    qr: Option<Householder>,
}

/// Splits observation space using a Householder QR of `H`.
pub fn orthonormal_split(h: &DMatrix<f64>) -> Result<ModelMatrices> {
    let (n, p) = h.shape();
    if n <= p {
        return Err(Error::TooFewPoints { n, p });
    }
    let rank = numerical_rank(h);
    if rank < p {
        return Err(Error::RankDeficient { rank, p });
    }
    let qr = Householder::new(h)?;
    let q = qr.q_full();
    let ph = qr.r().clone();
    let ln_det_hth = 2.0 * ph.diagonal().iter().map(|d| d.abs().ln()).sum::<f64>();
    Ok(ModelMatrices {
        h: h.clone(),
        p: q.columns(0, p).into_owned(),
        w: q.columns(p, n - p).into_owned(),
        ph,
        ln_det_hth,
        qr: Some(qr),
    })
}

impl ModelMatrices {
    /// Builds the split from explicit `P` and `W`, checking orthonormality,
    /// completeness and `WᵀH = 0` to `1e-10`.
    pub fn from_parts(h: DMatrix<f64>, p: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        let pd = h.ncols();
        if p.shape() != (n, pd) || w.shape() != (n, n - pd) {
            return Err(Error::DimensionMismatch(String::from(
                "P must be n × p and W must be n × (n - p)",
            )));
        }
        let tol = 1e-10;
        let id = &p * p.transpose() + &w * w.transpose();
        let ok = (id - DMatrix::<f64>::identity(n, n)).amax() < tol
            && (w.transpose() * &h).amax() < tol * (1.0 + h.amax());
        if !ok {
            return Err(domain("P and W do not form an orthonormal split adapted to H"));
        }
        let ph = p.transpose() * &h;
        let ln_det_hth = ph.clone().lu().determinant().abs().ln() * 2.0;
        Ok(Self { h, p, w, ph, ln_det_hth, qr: None })
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn trend_dim(&self) -> usize {
        self.h.ncols()
    }

    /// `n - p`, the Student degrees of freedom.
    pub fn dof(&self) -> usize {
        self.n() - self.trend_dim()
    }

    /// `PᵀH`.
    pub fn ph(&self) -> &DMatrix<f64> {
        &self.ph
    }

    /// `ln |HᵀH|` (zero when `p = 0`).
    pub fn ln_det_hth(&self) -> f64 {
        self.ln_det_hth
    }

    /// `(Pᵀx, Wᵀx)`.
    pub fn split_vec(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (self.p.tr_mul(x), self.w.tr_mul(x))
    }

    /// The blocks of `[P W]ᵀ A [P W]` for a symmetric `A`.
    pub fn split_sym(&self, a: &DMatrix<f64>) -> SplitBlocks {
        let pd = self.trend_dim();
        let n = self.n();
        let m = n - pd;
        let full = match &self.qr {
            Some(qr) => {
                let mut s = a.clone();
                qr.sandwich(&mut s);
                s
            }
            None => {
                let mut q = DMatrix::zeros(n, n);
                q.columns_mut(0, pd).copy_from(&self.p);
                q.columns_mut(pd, m).copy_from(&self.w);
                q.transpose() * a * q
            }
        };
        let mut ww = full.view((pd, pd), (m, m)).into_owned();
        symmetrize(&mut ww);
        SplitBlocks {
            pp: full.view((0, 0), (pd, pd)).into_owned(),
            pw: full.view((0, pd), (pd, m)).into_owned(),
            ww,
        }
    }

    /// `C [P W]`, returned as `(C P, C W)`.
    pub fn split_cols(&self, c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (c * &self.p, c * &self.w)
    }

    /// Only the `WᵀAW` block.
    pub fn ww_block(&self, a: DMatrix<f64>) -> DMatrix<f64> {
        let pd = self.trend_dim();
        if pd == 0 {
            return a;
        }
        self.split_sym(&a).ww
    }
}

/// The blocks `PᵀAP`, `PᵀAW` and `WᵀAW` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SplitBlocks {
    pub pp: DMatrix<f64>,
    pub pw: DMatrix<f64>,
    pub ww: DMatrix<f64>,
}

/// Observations with their `P` and `W` coordinates.
#[derive(Debug, Clone)]
pub struct ProjectedData {
    y: DVector<f64>,
    py: DVector<f64>,
    wy: DVector<f64>,
}

impl ProjectedData {
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn py(&self) -> &DVector<f64> {
        &self.py
    }
    pub fn wy(&self) -> &DVector<f64> {
        &self.wy
    }
}

/// Splits `y` and rejects observations lying in the trend span.
pub fn project(y: &[f64], mm: &ModelMatrices) -> Result<ProjectedData> {
    if y.len() != mm.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} observations for {} design points",
            y.len(),
            mm.n()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(domain("observations must be finite"));
    }
    let yv = DVector::from_column_slice(y);
    let (py, wy) = mm.split_vec(&yv);
    let wn = wy.norm_squared();
    if !(wn > 1e-300) || wn.sqrt() <= 1e-12 * yv.norm() {
        return Err(Error::DegenerateObservation(wn));
    }
    Ok(ProjectedData { y: yv, py, wy })
}

/// Σ_θ and everything derived from it that the formulas reuse.
#[derive(Debug, Clone)]
pub struct CorrelationState {
    theta: Option<LengthVector>,
    sigma: DMatrix<f64>,
    blocks: SplitBlocks,
    chol_w: Chol,
    derivs: Vec<DMatrix<f64>>,
}

impl CorrelationState {
    /// Builds a state from an explicit correlation matrix (and optionally its
    /// derivative matrices) for the split `mm`.
    pub fn from_sigma(
        sigma: DMatrix<f64>,
        derivs: Vec<DMatrix<f64>>,
        mm: &ModelMatrices,
    ) -> Result<Self> {
        if sigma.shape() != (mm.n(), mm.n()) {
            return Err(Error::DimensionMismatch(String::from("Σ must be n × n")));
        }
        let blocks = mm.split_sym(&sigma);
        let chol_w = Chol::new(blocks.ww.clone(), "WᵀΣW")?;
        let cond = chol_w.condition_estimate();
        if cond > 1e12 {
            log::warn!("WᵀΣW is ill-conditioned (condition estimate {cond:.3e})");
        }
        Ok(Self { theta: None, sigma, blocks, chol_w, derivs })
    }

    pub fn theta(&self) -> Option<&LengthVector> {
        self.theta.as_ref()
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    pub fn blocks(&self) -> &SplitBlocks {
        &self.blocks
    }
    /// Cholesky factor of `WᵀΣW`.
    pub fn chol_w(&self) -> &Chol {
        &self.chol_w
    }
    /// `∂Σ/∂θ_i` for each coordinate (empty when not requested).
    pub fn derivs(&self) -> &[DMatrix<f64>] {
        &self.derivs
    }
    pub fn ln_det_w(&self) -> f64 {
        self.chol_w.ln_det()
    }
}

/// A Kriging model: design, kernel and trend, with the split precomputed.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    design: DesignSet,
    kernel: Kernel,
    basis: TrendBasis,
    mm: ModelMatrices,
    jitter: f64,
}

impl KrigingModel {
    pub fn new(design: DesignSet, spec: KernelSpec, basis: TrendBasis) -> Result<Self> {
        let kernel = Kernel::new(spec)?;
        if design.dim() != spec.dim {
            return Err(Error::DimensionMismatch(format!(
                "design of dimension {} with a kernel of dimension {}",
                design.dim(),
                spec.dim
            )));
        }
        design.check_distinct()?;
        if spec.family == KernelFamily::Tensorized && spec.dim > 1 && !design.coordinate_distinct() {
            log::warn!("design points share coordinate values; tensorized-kernel prior limits assume they do not");
        }
        let h = build_basis_matrix(&basis, &design)?;
        let mm = orthonormal_split(&h)?;
        Ok(Self { design, kernel, basis, mm, jitter: 0.0 })
    }

    /// Adds `jitter` to the diagonal of every correlation matrix.
    pub fn with_jitter(mut self, jitter: f64) -> Result<Self> {
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(domain("jitter must be finite and nonnegative"));
        }
        self.jitter = jitter;
        Ok(self)
    }

    pub fn design(&self) -> &DesignSet {
        &self.design
    }
    pub fn spec(&self) -> &KernelSpec {
        self.kernel.spec()
    }
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
    pub fn basis(&self) -> &TrendBasis {
        &self.basis
    }
    pub fn matrices(&self) -> &ModelMatrices {
        &self.mm
    }
    pub fn n(&self) -> usize {
        self.design.len()
    }
    pub fn p(&self) -> usize {
        self.mm.trend_dim()
    }
    pub fn r(&self) -> usize {
        self.design.dim()
    }
    pub fn dof(&self) -> usize {
        self.mm.dof()
    }
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub(crate) fn check_theta(&self, theta: &LengthVector) -> Result<()> {
        if theta.dim() != self.r() {
            return Err(Error::DimensionMismatch(format!(
                "{} correlation lengths for dimension {}",
                theta.dim(),
                self.r()
            )));
        }
        Ok(())
    }

    fn add_jitter(&self, s: &mut DMatrix<f64>) {
        if self.jitter > 0.0 {
            for i in 0..s.nrows() {
                s[(i, i)] += self.jitter;
            }
        }
    }

    /// Σ_θ (with jitter, if configured).
    pub fn sigma(&self, theta: &LengthVector) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let mut s = self.kernel.sigma_unchecked(&self.design, theta);
        self.add_jitter(&mut s);
        Ok(s)
    }

    /// Σ_θ and `∂Σ/∂θ_i`.
    pub fn sigma_partial(&self, theta: &LengthVector, i: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_theta(theta)?;
        if i >= self.r() {
            return Err(Error::IndexOutOfRange { index: i, dim: self.r() });
        }
        let (mut s, d) = self.kernel.sigma_partial_unchecked(&self.design, theta, i);
        self.add_jitter(&mut s);
        Ok((s, d))
    }

    /// Full state at θ, including all derivative matrices.
    pub fn state(&self, theta: &LengthVector) -> Result<CorrelationState> {
        self.check_theta(theta)?;
        let (mut s, ds) = self.kernel.sigma_grad_unchecked(&self.design, theta);
        self.add_jitter(&mut s);
        let mut st = CorrelationState::from_sigma(s, ds, &self.mm)?;
        st.theta = Some(theta.clone());
        Ok(st)
    }

    /// State at θ without derivative matrices.
    pub fn state_light(&self, theta: &LengthVector) -> Result<CorrelationState> {
        let s = self.sigma(theta)?;
        let mut st = CorrelationState::from_sigma(s, Vec::new(), &self.mm)?;
        st.theta = Some(theta.clone());
        Ok(st)
    }

    pub fn project(&self, y: &[f64]) -> Result<ProjectedData> {
        project(y, &self.mm)
    }

    /// The trend basis evaluated at arbitrary points.
    pub fn basis_at(&self, points: &DesignSet) -> DMatrix<f64> {
        self.basis.matrix(points)
    }

    /// Cholesky of `WᵀΣW` for a given Σ.
    pub(crate) fn chol_ww(&self, sigma: DMatrix<f64>) -> Result<Chol> {
        Chol::new(self.mm.ww_block(sigma), "WᵀΣW")
    }

    /// `ln L¹(y | θ)` straight from the kernel, skipping the full state.
    pub fn log_l1(&self, data: &ProjectedData, theta: &LengthVector) -> Result<f64> {
        let chol = self.chol_ww(self.sigma(theta)?)?;
        log_l1_from_parts(data.wy(), &chol, self.mm.ln_det_hth())
    }
}

pub(crate) fn log_l1_from_parts(wy: &DVector<f64>, chol_w: &Chol, ln_det_hth: f64) -> Result<f64> {
    let m = wy.len() as f64;
    let q = chol_w.quad_form(wy);
    if !(q > 1e-300) {
        return Err(Error::DegenerateObservation(q));
    }
    Ok(-0.5 * ln_det_hth + ln_gamma(0.5 * m) - 0.5 * m * PI.ln() - 0.5 * chol_w.ln_det()
        - 0.5 * m * q.ln())
}

/// `yᵀW(WᵀΣW)⁻¹Wᵀy`.
pub fn quadratic_form(y: &[f64], state: &CorrelationState, mm: &ModelMatrices) -> Result<f64> {
    let data = project(y, mm)?;
    let q = state.chol_w().quad_form(data.wy());
    if !(q > 1e-300) {
        return Err(Error::DegenerateObservation(q));
    }
    Ok(q)
}

/// `ln L¹(y | θ)`: the likelihood with β integrated under a flat prior and σ²
/// under `1/σ²`. It is a proper density in `y` (on the complement of the trend
/// span) but improper in the integrated parameters.
pub fn integrated_likelihood_l1(y: &[f64], state: &CorrelationState, mm: &ModelMatrices) -> Result<f64> {
    let data = project(y, mm)?;
    log_l1_from_parts(data.wy(), state.chol_w(), mm.ln_det_hth())
}

/// `ln L⁰(y | σ², θ)`: the likelihood with β integrated under a flat prior.
pub fn integrated_likelihood_l0(
    y: &[f64],
    sigma2: f64,
    state: &CorrelationState,
    mm: &ModelMatrices,
) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(domain("sigma2 must be finite and positive"));
    }
    let q = quadratic_form(y, state, mm)?;
    let m = mm.dof() as f64;
    Ok(-0.5 * mm.ln_det_hth() - 0.5 * m * (2.0 * PI * sigma2).ln() - 0.5 * state.ln_det_w()
        - q / (2.0 * sigma2))
}

/// Gaussian posterior of β given σ² and θ.
#[derive(Debug, Clone)]
pub struct BetaPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Inverse-gamma posterior of σ² given θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPosterior {
    pub shape: f64,
    pub rate: f64,
}

impl SigmaPosterior {
    /// Posterior mean, finite only when the shape exceeds one.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.rate / (self.shape - 1.0))
    }

    pub fn ln_pdf(&self, s2: f64) -> f64 {
        if s2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * s2.ln()
            - self.rate / s2
    }
}

pub fn beta_posterior(
    y: &[f64],
    sigma2: f64,
    state: &CorrelationState,
    mm: &ModelMatrices,
) -> Result<BetaPosterior> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(domain("sigma2 must be finite and positive"));
    }
    if y.len() != mm.n() {
        return Err(Error::DimensionMismatch(String::from("y must have n entries")));
    }
    let yv = DVector::from_column_slice(y);
    let (py, wy) = mm.split_vec(&yv);
    let b = state.blocks();
    let chol = state.chol_w();
    // γ = Pᵀ-coordinates of the trend; β = (PᵀH)⁻¹ γ.
    let gamma = py - &b.pw * chol.solve(&wy);
    let schur = &b.pp - &b.pw * chol.solve_mat(&b.pw.transpose());
    let lu = mm.ph().clone().lu();
    let mean = lu
        .solve(&gamma)
        .ok_or_else(|| Error::Factorization(String::from("PᵀH is singular")))?;
    let left = lu
        .solve(&schur)
        .ok_or_else(|| Error::Factorization(String::from("PᵀH is singular")))?;
    let mut covariance = lu
        .solve(&left.transpose())
        .ok_or_else(|| Error::Factorization(String::from("PᵀH is singular")))?
        * sigma2;
    symmetrize(&mut covariance);
    Ok(BetaPosterior { mean, covariance })
}

pub fn sigma2_posterior(y: &[f64], state: &CorrelationState, mm: &ModelMatrices) -> Result<SigmaPosterior> {
    let q = quadratic_form(y, state, mm)?;
    Ok(SigmaPosterior { shape: 0.5 * mm.dof() as f64, rate: 0.5 * q })
}

/// `Q_θ = I - H(HᵀΣ⁻¹H)⁻¹HᵀΣ⁻¹`, computed from a Cholesky factor of Σ.
pub fn projector_q(h: &DMatrix<f64>, state: &CorrelationState) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if state.sigma().shape() != (n, n) {
        return Err(Error::DimensionMismatch(String::from("H and Σ sizes differ")));
    }
    if h.ncols() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let cs = Chol::new(state.sigma().clone(), "Σ")?;
    let x = cs.solve_mat(h);
    let g = Chol::new(h.tr_mul(&x), "HᵀΣ⁻¹H")?;
    Ok(DMatrix::identity(n, n) - h * g.solve_mat(&x.transpose()))
}
