//! Plug-in estimates of the correlation lengths.
//!
//! The MLE maximizes the integrated likelihood `L¹(y|θ)`; the MAP maximizes
//! `L¹(y|θ) · Π_i f_i(θ_i|θ_{-i})`, the product of the conditional reference
//! priors standing in for a joint prior density (exact when r = 1). Both run
//! a multi-start Nelder–Mead search in `ln θ` over a box.

use crate::error::{domain, Error, Result};
use crate::gibbs::RELIABLE_CONDITIONING;
use crate::kernels::LengthVector;
use crate::linear_model::{log_l1_from_parts, KrigingModel, ProjectedData};
use crate::reference_prior::conditional_prior_from_state;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    /// The same bounds `[theta_min, theta_max]` apply to every coordinate.
    pub theta_min: f64,
    pub theta_max: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Evaluation budget per restart.
    pub max_evals: usize,
    /// Convergence tolerance on the spread of objective values in the simplex.
    pub f_tol: f64,
    /// Convergence tolerance on the simplex size in `ln θ`.
    pub x_tol: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { theta_min: 1e-3, theta_max: 1e3, restarts: 10, seed: 0, max_evals: 1500, f_tol: 1e-10, x_tol: 1e-7 }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min > 0.0 && self.theta_min < self.theta_max && self.theta_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "search box [{}, {}] must satisfy 0 < min < max < inf",
                self.theta_min, self.theta_max
            )));
        }
        if self.restarts == 0 || self.max_evals < 10 {
            return Err(Error::InvalidConfig(format!(
                "need at least one restart and 10 evaluations (got {}, {})",
                self.restarts, self.max_evals
            )));
        }
        Ok(())
    }
}

/// One local search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub init: LengthVector,
    pub init_value: f64,
    /// `None` when no finite objective value was found.
    pub theta: Option<LengthVector>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub theta: LengthVector,
    /// Objective at `theta`, on the log scale.
    pub value: f64,
    /// `ln L¹` at `theta`.
    pub log_l1: f64,
    /// Log prior term at `theta` (0 for the MLE).
    pub log_prior: f64,
    pub n_restarts: usize,
    /// The best local search converged and `theta` is off the box boundary.
    pub converged: bool,
    pub on_boundary: bool,
    pub restarts: Vec<RestartTrace>,
}

/// `ln Π_i f_i(θ_i | θ_{-i})`, the MAP's prior surrogate. `-∞` where a
/// conditional prior vanishes.
pub fn log_prior_surrogate(model: &KrigingModel, theta: &LengthVector) -> Result<f64> {
    let st = model.state(theta)?;
    (0..model.r()).try_fold(0.0, |acc, i| {
        Ok(acc + conditional_prior_from_state(&st, model, i)?.value.ln())
    })
}

/// `(ln L¹, ln Π f_i)` from one correlation state.
pub fn log_posterior_terms(
    model: &KrigingModel,
    data: &ProjectedData,
    theta: &LengthVector,
) -> Result<(f64, f64)> {
    let st = model.state(theta)?;
    let l1 = log_l1_from_parts(data.wy(), st.chol_w(), model.matrices().ln_det_hth())?;
    let lp = (0..model.r()).try_fold(0.0, |acc, i| {
        Ok::<_, Error>(acc + conditional_prior_from_state(&st, model, i)?.value.ln())
    })?;
    Ok((l1, lp))
}

/// Maximizes `ln L¹(y|θ)`.
pub fn mle(y: &[f64], model: &KrigingModel, cfg: &OptimConfig) -> Result<OptimResult> {
    map_with_prior(y, model, cfg, |_, _| Ok(0.0))
}

/// Maximizes `ln L¹(y|θ) + Σ_i ln f_i(θ_i|θ_{-i})`.
pub fn map(y: &[f64], model: &KrigingModel, cfg: &OptimConfig) -> Result<OptimResult> {
    map_with_prior(y, model, cfg, log_prior_surrogate)
}

/// Maximizes `ln L¹(y|θ) + log_prior(model, θ)` for an arbitrary prior term.
pub fn map_with_prior<F>(y: &[f64], model: &KrigingModel, cfg: &OptimConfig, log_prior: F) -> Result<OptimResult>
where
    F: Fn(&KrigingModel, &LengthVector) -> Result<f64>,
{
    cfg.validate()?;
    let data = model.project(y)?;
    let eval = |x: &[f64]| -> Result<Option<(f64, f64)>> {
        let theta = LengthVector::new(x.iter().map(|v| v.exp()).collect())?;
        let chol = match model.chol_ww(model.sigma(&theta)?) {
            Ok(c) => c,
            Err(Error::Factorization(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !(chol.rounding_gain() <= RELIABLE_CONDITIONING) {
            return Ok(None);
        }
        let l1 = log_l1_from_parts(data.wy(), &chol, model.matrices().ln_det_hth())?;
        match log_prior(model, &theta) {
            Ok(lp) => Ok(Some((l1, lp))),
            Err(Error::Factorization(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let objective = |x: &[f64]| -> Result<f64> {
        Ok(match eval(x)? {
            Some((l1, lp)) if (l1 + lp).is_finite() => l1 + lp,
            _ => f64::NEG_INFINITY,
        })
    };
    let out = maximize_in_box(objective, model.r(), cfg)?;
    let (l1, lp) = eval(&out.x)?.ok_or_else(|| Error::Optimization(alloc::string::String::from("objective lost at the optimum")))?;
    let theta = LengthVector::new(out.x.iter().map(|v| v.exp()).collect())?;
    Ok(OptimResult {
        theta,
        value: out.value,
        log_l1: l1,
        log_prior: lp,
        n_restarts: out.restarts.len(),
        converged: out.converged && !out.on_boundary,
        on_boundary: out.on_boundary,
        restarts: out.restarts,
    })
}

/// Result of [`maximize_in_box`], in `ln θ` coordinates.
#[derive(Debug, Clone)]
pub struct BoxOptimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub on_boundary: bool,
    pub restarts: Vec<RestartTrace>,
}

/// Multi-start Nelder–Mead maximization of `f` over the box
/// `[ln theta_min, ln theta_max]^dim`, started from a Latin hypercube.
pub fn maximize_in_box<F>(f: F, dim: usize, cfg: &OptimConfig) -> Result<BoxOptimum>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    if dim == 0 {
        return Err(domain("cannot optimize over zero coordinates"));
    }
    let lo = cfg.theta_min.ln();
    let hi = cfg.theta_max.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts = latin_hypercube(&mut rng, cfg.restarts, dim, lo, hi);
    let mut restarts = Vec::with_capacity(cfg.restarts);
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for x0 in starts {
        let init = LengthVector::new(x0.iter().map(|v| v.exp()).collect())?;
        let init_value = f(&x0)?;
        let run = nelder_mead(&f, x0, lo, hi, cfg)?;
        let finite = run.value.is_finite();
        restarts.push(RestartTrace {
            init,
            init_value,
            theta: finite.then(|| LengthVector::new(run.x.iter().map(|v| v.exp()).collect())).transpose()?,
            value: run.value,
            evals: run.evals,
            converged: run.converged,
        });
        if finite && best.as_ref().is_none_or(|b| run.value > b.1) {
            best = Some((run.x, run.value, run.converged));
        }
    }
    let (x, value, converged) =
        best.ok_or_else(|| Error::Optimization(alloc::string::String::from("no restart reached a finite objective")))?;
    let edge = 1e-6 * (hi - lo);
    let on_boundary = x.iter().any(|&v| v - lo <= edge || hi - v <= edge);
    Ok(BoxOptimum { x, value, converged, on_boundary, restarts })
}

fn latin_hypercube<R: Rng>(rng: &mut R, k: usize, dim: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut pts = alloc::vec![alloc::vec![0.0; dim]; k];
    for j in 0..dim {
        let mut strata: Vec<usize> = (0..k).collect();
        strata.shuffle(rng);
        for (pt, s) in pts.iter_mut().zip(strata) {
            let u = (s as f64 + rng.random::<f64>()) / k as f64;
            pt[j] = lo + u * (hi - lo);
        }
    }
    pts
}

struct LocalRun {
    x: Vec<f64>,
    value: f64,
    evals: usize,
    converged: bool,
}

// Nelder–Mead on -f with points projected onto the box; one restart from the
// best vertex once the first run settles.
fn nelder_mead<F>(f: &F, x0: Vec<f64>, lo: f64, hi: f64, cfg: &OptimConfig) -> Result<LocalRun>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut evals = 0;
    let mut x = x0;
    let mut value = f64::NEG_INFINITY;
    let mut converged = false;
    for _ in 0..2 {
        let run = nelder_mead_once(f, &x, lo, hi, cfg, cfg.max_evals.saturating_sub(evals))?;
        evals += run.evals;
        let improved = run.value - value;
        x = run.x;
        value = run.value;
        converged = run.converged;
        if !(improved > cfg.f_tol) || evals >= cfg.max_evals {
            break;
        }
    }
    Ok(LocalRun { x, value, evals, converged })
}

fn nelder_mead_once<F>(f: &F, x0: &[f64], lo: f64, hi: f64, cfg: &OptimConfig, budget: usize) -> Result<LocalRun>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let clamp = |v: &mut Vec<f64>| v.iter_mut().for_each(|c| *c = c.clamp(lo, hi));
    // Costs are -f so the simplex minimizes.
    let evals = core::cell::Cell::new(0usize);
    let cost = |v: &[f64]| -> Result<f64> {
        evals.set(evals.get() + 1);
        Ok(-f(v)?)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut p0 = x0.to_vec();
    clamp(&mut p0);
    let c0 = cost(&p0)?;
    simplex.push((p0.clone(), c0));
    for j in 0..n {
        let mut p = p0.clone();
        let step = 0.5f64.min(0.25 * (hi - lo));
        p[j] += if p[j] + step <= hi { step } else { -step };
        let c = cost(&p)?;
        simplex.push((p, c));
    }
    let mut converged = false;
    while evals.get() < budget {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best.is_finite() && (worst - best).abs() <= cfg.f_tol && size <= cfg.x_tol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut v);
            v
        };
        let xr = along(1.0);
        let cr = cost(&xr)?;
        if cr < simplex[0].1 {
            let xe = along(2.0);
            let ce = cost(&xe)?;
            simplex[n] = if ce < cr { (xe, ce) } else { (xr, cr) };
        } else if cr < simplex[n - 1].1 {
            simplex[n] = (xr, cr);
        } else {
            let (xc, cc) = if cr < simplex[n].1 {
                let xc = along(0.5);
                let cc = cost(&xc)?;
                (xc, cc)
            } else {
                let xc = along(-0.5);
                let cc = cost(&xc)?;
                (xc, cc)
            };
            if cc < simplex[n].1.min(cr) {
                simplex[n] = (xc, cc);
            } else {
                let b = simplex[0].0.clone();
                for k in 1..=n {
                    let p: Vec<f64> = simplex[k].0.iter().zip(&b).map(|(v, bb)| bb + 0.5 * (v - bb)).collect();
                    let c = cost(&p)?;
                    simplex[k] = (p, c);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
    let (x, c) = simplex.swap_remove(0);
    Ok(LocalRun { x, value: -c, evals: evals.get(), converged })
}
