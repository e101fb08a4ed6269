//! Reference priors on correlation lengths: the one-dimensional prior in its
//! `W`-projected and `Q_θ`-projected forms, the conditional priors `f_i` that
//! drive the Gibbs construction, and the sphere-variance identity behind them.
//!
//! Conditional prior values carry an arbitrary constant factor. They are only
//! ever used up to normalization in one coordinate, so comparing raw values
//! across coordinates is meaningless.

use crate::error::{domain, Error, Result};
use crate::kernels::LengthVector;
use crate::linalg::Chol;
use crate::linear_model::{log_l1_from_parts, CorrelationState, KrigingModel, ProjectedData};
use alloc::string::String;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Relative threshold under which a negative radicand is treated as rounding.
pub const RADICAND_CLAMP: f64 = 1e-14;

/// One evaluation of the conditional prior `f_i(θ_i | θ_{-i})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPriorEval {
    pub i: usize,
    /// Unnormalized density in the `θ` parametrization.
    pub value: f64,
    /// `Tr[B]` with `B = (WᵀΣW)⁻¹ Wᵀ ∂Σ/∂θ_i W`.
    pub trace_term: f64,
    /// `Tr[B²]`.
    pub trace_sq_term: f64,
}

impl ConditionalPriorEval {
    /// The same density expressed in `μ_i = 1/θ_i`.
    pub fn mu_value(&self, theta_i: f64) -> f64 {
        self.value * theta_i * theta_i
    }
}

/// `(Tr B, Tr B², Tr[(B − (Tr B/m) I)²])` for `B = L⁻¹ M L⁻ᵀ`, where `L Lᵀ`
/// is the given factor. The last entry is the radicand, summed directly so the
/// difference of the first two never has to be formed.
pub fn trace_terms(chol: &Chol, m: DMatrix<f64>) -> (f64, f64, f64) {
    centered_traces(&whiten(chol, m))
}

// L⁻¹ M L⁻ᵀ for symmetric M.
fn whiten(chol: &Chol, m: DMatrix<f64>) -> DMatrix<f64> {
    let mut x = m;
    chol.lower_solve_mut(&mut x);
    let mut b = x.transpose();
    chol.lower_solve_mut(&mut b);
    b
}

// For a (not necessarily symmetric) square A: Tr A, Tr A², Tr[(A − cI)²], c = Tr A / m.
fn centered_traces(a: &DMatrix<f64>) -> (f64, f64, f64) {
    let m = a.nrows();
    let tr = a.trace();
    let c = tr / m as f64;
    let mut rad = 0.0;
    for j in 0..m {
        for i in 0..m {
            let (aij, aji) = if i == j { (a[(i, i)] - c, a[(i, i)] - c) } else { (a[(i, j)], a[(j, i)]) };
            rad += aij * aji;
        }
    }
    (tr, rad + tr * c, rad)
}

pub(crate) fn prior_from_traces(
    i: usize,
    (tr, tr_sq, rad): (f64, f64, f64),
) -> Result<ConditionalPriorEval> {
    let value = if rad >= 0.0 {
        rad.sqrt()
    } else if -rad <= RADICAND_CLAMP * tr_sq {
        log::debug!("prior radicand {rad:e} clamped to zero (coordinate {i})");
        0.0
    } else {
        return Err(Error::Factorization(String::from(
            "negative prior radicand beyond rounding; correlation matrix too ill-conditioned",
        )));
    };
    if !value.is_finite() {
        return Err(Error::Factorization(String::from("non-finite prior trace terms")));
    }
    Ok(ConditionalPriorEval { i, value, trace_term: tr, trace_sq_term: tr_sq })
}

/// `f_i(θ_i | θ_{-i})` from a state that carries derivative matrices.
pub fn conditional_prior_from_state(
    state: &CorrelationState,
    model: &KrigingModel,
    i: usize,
) -> Result<ConditionalPriorEval> {
    let d = state
        .derivs()
        .get(i)
        .ok_or(Error::IndexOutOfRange { index: i, dim: state.derivs().len() })?;
    let mm = model.matrices();
    prior_from_traces(i, trace_terms(state.chol_w(), mm.ww_block(d.clone())))
}

/// `f_i(θ_i | θ_{-i})`, zero-based coordinate `i`.
pub fn conditional_prior(model: &KrigingModel, i: usize, theta: &LengthVector) -> Result<ConditionalPriorEval> {
    let (s, d) = model.sigma_partial(theta, i)?;
    let mm = model.matrices();
    let chol = Chol::new(mm.ww_block(s), "WᵀΣW")?;
    prior_from_traces(i, trace_terms(&chol, mm.ww_block(d)))
}

/// `f_i` in the inverse-length parametrization, evaluated at `μ`.
pub fn conditional_prior_mu(model: &KrigingModel, i: usize, mu: &[f64]) -> Result<f64> {
    let theta = LengthVector::from_mu(mu)?;
    let ev = conditional_prior(model, i, &theta)?;
    Ok(ev.mu_value(theta.theta()[i]))
}

/// `ln L¹(y | θ)` and `f_i(θ_i | θ_{-i})` sharing one kernel pass and one
/// factorization. This is the sampler's inner evaluation.
pub fn log_l1_and_prior(
    model: &KrigingModel,
    data: &ProjectedData,
    theta: &LengthVector,
    i: usize,
) -> Result<(f64, ConditionalPriorEval)> {
    log_l1_and_prior_conditioned(model, data, theta, i).map(|(l1, ev, _)| (l1, ev))
}

/// As [`log_l1_and_prior`], also returning `1 / min_k L_kk²` for the Cholesky
/// factor `L` of `WᵀΣW`. Σ has a unit diagonal, so this is a lower bound on
/// the amplification of rounding errors in Σ's entries.
pub(crate) fn log_l1_and_prior_conditioned(
    model: &KrigingModel,
    data: &ProjectedData,
    theta: &LengthVector,
    i: usize,
) -> Result<(f64, ConditionalPriorEval, f64)> {
    let (s, d) = model.sigma_partial(theta, i)?;
    let mm = model.matrices();
    let chol = Chol::new(mm.ww_block(s), "WᵀΣW")?;
    let l1 = log_l1_from_parts(data.wy(), &chol, mm.ln_det_hth())?;
    let ev = prior_from_traces(i, trace_terms(&chol, mm.ww_block(d)))?;
    Ok((l1, ev, chol.rounding_gain()))
}

fn require_1d(model: &KrigingModel) -> Result<()> {
    if model.r() != 1 {
        return Err(domain("the one-dimensional prior needs a model with r = 1"));
    }
    Ok(())
}

/// The reference prior of a one-dimensional model, through `W`.
pub fn prior_1d(model: &KrigingModel, theta: f64) -> Result<f64> {
    require_1d(model)?;
    Ok(conditional_prior(model, 0, &LengthVector::new(alloc::vec![theta])?)?.value)
}

/// `√(Tr[(∂Σ Σ⁻¹ Q_θ)²] − Tr[∂Σ Σ⁻¹ Q_θ]²/(n−p))` for coordinate `i`.
///
/// With `Σ = L Lᵀ` and `U = L⁻¹H`, `Σ⁻¹Q_θ = L⁻ᵀ Π L⁻¹` where `Π` is the
/// orthogonal projector onto the complement of `span(U)`. The traces are then
/// those of `M = Π C Π` with `C = L⁻¹ ∂Σ L⁻ᵀ`, which avoids forming `Σ⁻¹`.
pub fn conditional_prior_berger(model: &KrigingModel, i: usize, theta: &LengthVector) -> Result<f64> {
    let (s, d) = model.sigma_partial(theta, i)?;
    let mm = model.matrices();
    let n = s.nrows();
    let cs = Chol::new(s, "Σ")?;
    let mut u = mm.h().clone();
    cs.lower_solve_mut(&mut u);
    let proj = if u.ncols() == 0 {
        DMatrix::identity(n, n)
    } else {
        let qu = u.qr().q();
        DMatrix::identity(n, n) - &qu * qu.transpose()
    };
    let c = &proj * whiten(&cs, d) * &proj;
    let tr = c.trace();
    let k = tr / mm.dof() as f64;
    let centred = &c - &proj * k;
    let rad = centred.norm_squared();
    Ok(prior_from_traces(i, (tr, c.norm_squared(), rad))?.value)
}

/// The reference prior of a one-dimensional model, through `Q_θ`.
pub fn prior_1d_berger(model: &KrigingModel, theta: f64) -> Result<f64> {
    require_1d(model)?;
    conditional_prior_berger(model, 0, &LengthVector::new(alloc::vec![theta])?)
}

/// The bound `(n−p)(2ν+r)` on `μ_i f_i(μ_i | μ_{-i})`.
pub fn prior_bound(model: &KrigingModel) -> f64 {
    model.dof() as f64 * (2.0 * model.spec().nu + model.r() as f64)
}

/// `Tr[M²] − Tr[M]²/n`: for `U` uniform on the unit sphere of `ℝⁿ`,
/// `Var(UᵀMU)` equals this times [`sphere_variance_constant`].
pub fn sphere_quadratic_variance(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(domain("sphere_quadratic_variance needs a non-empty square matrix"));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(domain("matrix is not symmetric"));
    }
    let tr = m.trace();
    Ok((m.norm_squared() - tr * tr / n as f64).max(0.0))
}

/// `2 / (n(n+2))`.
pub fn sphere_variance_constant(n: usize) -> f64 {
    let n = n as f64;
    2.0 / (n * (n + 2.0))
}
