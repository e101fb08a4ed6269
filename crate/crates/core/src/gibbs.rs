//! Random-scan Gibbs sampler for the Gibbs reference posterior.
//!
//! Each step picks a coordinate uniformly at random and redraws it exactly
//! from its one-dimensional conditional `π_i(θ_i | y, θ_{-i}) ∝ L¹(y|θ) f_i`,
//! tabulated on an adaptive grid in `ln θ_i` and inverted in closed form on
//! each cell (the density is taken piecewise linear between nodes).

use crate::error::{Error, Result};
use crate::kernels::LengthVector;
use crate::linear_model::{KrigingModel, ProjectedData};
use crate::reference_prior::log_l1_and_prior_conditioned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `ln(1e12)`: tails are cut where the density is this far below its peak.
pub const TAIL_LOG_DROP: f64 = 27.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// Start from `[1e-2, 1e2]` and widen until both tails have decayed.
    Adaptive,
    Explicit { theta_min: f64, theta_max: f64 },
}

/// How each conditional is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Nodes of the fine grid on which the conditional is inverted.
    pub grid_size: usize,
    /// Nodes of the scouting grid over the initial range.
    pub coarse_size: usize,
    /// Decades added per side at each widening step.
    pub extension_decades: f64,
    /// Spacing of the widening nodes, in scouting steps.
    pub extension_stride: usize,
    pub max_extensions: usize,
    pub truncation: Truncation,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            grid_size: 512,
            coarse_size: 64,
            extension_decades: 2.0,
            extension_stride: 1,
            max_extensions: 6,
            truncation: Truncation::Adaptive,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 8 || self.coarse_size < 8 {
            return Err(Error::InvalidConfig(String::from("grid sizes must be at least 8")));
        }
        if self.extension_stride == 0 {
            return Err(Error::InvalidConfig(String::from("extension_stride must be positive")));
        }
        if !(self.extension_decades > 0.0) {
            return Err(Error::InvalidConfig(String::from("extension_decades must be positive")));
        }
        if let Truncation::Explicit { theta_min, theta_max } = self.truncation {
            if !(theta_min > 0.0 && theta_min < theta_max && theta_max.is_finite()) {
                return Err(Error::InvalidConfig(String::from(
                    "explicit truncation needs 0 < theta_min < theta_max < inf",
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total sweeps; a sweep is `r` single-coordinate updates.
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Starting point; `None` uses half the design range in each coordinate.
    pub init: Option<LengthVector>,
    pub grid: GridSpec,
}

impl ChainConfig {
    pub fn new(seed: u64) -> Self {
        Self { n_iter: 6000, burn_in: 1000, thin: 1, seed, init: None, grid: GridSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.thin == 0 {
            return Err(Error::InvalidConfig(String::from("n_iter and thin must be positive")));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        self.grid.validate()
    }

    /// Number of samples a run will retain.
    pub fn retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// A tabulated one-dimensional conditional in `u = ln θ_i`.
#[derive(Debug, Clone)]
pub struct ConditionalGrid {
    u: Vec<f64>,
    // Density relative to its maximum on the grid.
    dens: Vec<f64>,
    // Unnormalized trapezoid cumulative mass; cum[0] = 0.
    cum: Vec<f64>,
    log_peak: f64,
}

impl ConditionalGrid {
    fn from_log_density(u: Vec<f64>, g: &[f64]) -> Result<Self> {
        let log_peak = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !log_peak.is_finite() {
            return Err(Error::ExistenceViolation(String::from(
                "conditional density vanishes on the whole grid",
            )));
        }
        let dens: Vec<f64> = g.iter().map(|v| (v - log_peak).exp()).collect();
        let mut cum = Vec::with_capacity(u.len());
        cum.push(0.0);
        for k in 1..u.len() {
            let h = u[k] - u[k - 1];
            cum.push(cum[k - 1] + 0.5 * h * (dens[k] + dens[k - 1]));
        }
        Ok(Self { u, dens, cum, log_peak })
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Grid nodes in `ln θ`.
    pub fn log_theta(&self) -> &[f64] {
        &self.u
    }

    /// Log-density at the nodes (up to the same additive constant as the
    /// evaluated `ln L¹ + ln f_i + ln θ_i`).
    pub fn log_density(&self) -> Vec<f64> {
        self.dens.iter().map(|d| d.ln() + self.log_peak).collect()
    }

    /// Normalized CDF at the nodes; ends at exactly 1.
    pub fn cdf_nodes(&self) -> Vec<f64> {
        let t = self.total();
        let mut c: Vec<f64> = self.cum.iter().map(|v| v / t).collect();
        *c.last_mut().unwrap() = 1.0;
        c
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.u[0].exp(), self.u[self.u.len() - 1].exp())
    }

    /// `θ` at which the CDF reaches `p ∈ [0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let target = p.clamp(0.0, 1.0) * self.total();
        let k = match self.cum.partition_point(|&c| c <= target) {
            0 => 0,
            j if j >= self.cum.len() => self.cum.len() - 2,
            j => j - 1,
        };
        let h = self.u[k + 1] - self.u[k];
        let rem = (target - self.cum[k]).max(0.0);
        let b = self.dens[k];
        let a = (self.dens[k + 1] - b) / (2.0 * h);
        // Solve a s² + b s = rem on [0, h] in the cancellation-free form.
        let disc = (b * b + 4.0 * a * rem).max(0.0);
        let denom = b + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * rem / denom } else { 0.0 };
        (self.u[k] + s.clamp(0.0, h)).exp()
    }

    /// Normalized CDF at `θ`.
    pub fn cdf(&self, theta: f64) -> f64 {
        let x = theta.ln();
        if x <= self.u[0] {
            return 0.0;
        }
        if x >= self.u[self.u.len() - 1] {
            return 1.0;
        }
        let k = self.u.partition_point(|&v| v <= x) - 1;
        let h = self.u[k + 1] - self.u[k];
        let s = x - self.u[k];
        let slope = (self.dens[k + 1] - self.dens[k]) / h;
        (self.cum[k] + self.dens[k] * s + 0.5 * slope * s * s) / self.total()
    }

    /// Posterior mean of `θ` under the tabulated density.
    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.u.len() - 1 {
            let h = self.u[k + 1] - self.u[k];
            let eh = h.exp();
            let slope = (self.dens[k + 1] - self.dens[k]) / h;
            acc += self.u[k].exp() * (self.dens[k] * (eh - 1.0) + slope * (eh * (h - 1.0) + 1.0));
        }
        acc / self.total()
    }
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    let step = (b - a) / (k - 1) as f64;
    (0..k).map(|j| if j + 1 == k { b } else { a + step * j as f64 }).collect()
}

/// Beyond this amplification of rounding errors the evaluated log-density is
/// no longer trusted and the tail is extrapolated instead.
pub const RELIABLE_CONDITIONING: f64 = 1e10;

/// Mass left to each side of the finely resolved part of a conditional.
const CENTRAL_TAIL_MASS: f64 = 1e-4;

/// Nodes used to fit the log-log slope of a tail near the numerical wall.
const TAIL_FIT_NODES: usize = 8;

/// Minimal decay rate (in `ln density / ln θ`) accepted for an extrapolated tail.
const MIN_TAIL_SLOPE: f64 = 0.5;

/// A tail that is still flat at the numerical wall is closed there when the
/// wall sits at least this far (in log-density) below the peak.
pub const WALL_LOG_DROP: f64 = 18.4;

struct Target<'a> {
    model: &'a KrigingModel,
    data: &'a ProjectedData,
    theta: LengthVector,
    i: usize,
}

impl Target<'_> {
    // ln L¹ + ln f_i + u at θ_i = e^u, or `None` when the correlation matrix
    // is too close to singular for the value to be trusted.
    fn eval(&self, u: f64) -> Result<Option<f64>> {
        let t = self.theta.with(self.i, u.exp())?;
        match log_l1_and_prior_conditioned(self.model, self.data, &t, self.i) {
            Ok((_, _, kappa)) if !(kappa <= RELIABLE_CONDITIONING) => Ok(None),
            Ok((l1, ev, _)) => {
                let v = if ev.value > 0.0 { l1 + ev.value.ln() + u } else { f64::NEG_INFINITY };
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::NonFiniteDensity { index: self.i, theta: u.exp() });
                }
                Ok(Some(v))
            }
            Err(Error::Factorization(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn eval_required(&self, u: f64) -> Result<f64> {
        self.eval(u)?.ok_or_else(|| {
            Error::Factorization(format!(
                "correlation matrix numerically singular at coordinate {}, theta = {:e}, inside the posterior bulk",
                self.i,
                u.exp()
            ))
        })
    }
}

/// Tabulates `π_i(θ_i | y, θ_{-i})` for zero-based coordinate `i`.
pub fn conditional_posterior_grid(
    i: usize,
    theta: &LengthVector,
    data: &ProjectedData,
    model: &KrigingModel,
    spec: &GridSpec,
) -> Result<ConditionalGrid> {
    if i >= model.r() {
        return Err(Error::IndexOutOfRange { index: i, dim: model.r() });
    }
    let target = Target { model, data, theta: theta.clone(), i };
    match spec.truncation {
        Truncation::Explicit { theta_min, theta_max } => {
            let u = linspace(theta_min.ln(), theta_max.ln(), spec.grid_size);
            let g = u.iter().map(|&x| target.eval_required(x)).collect::<Result<Vec<_>>>()?;
            ConditionalGrid::from_log_density(u, &g)
        }
        Truncation::Adaptive => adaptive_grid(&target, spec),
    }
}

// Straight-line continuation of the log-density past the last reliable node.
// `slope` is `None` when the grid is closed at that node instead.
#[derive(Clone, Copy)]
struct Tail {
    u: f64,
    g: f64,
    slope: Option<f64>,
}

impl Tail {
    fn at(&self, u: f64) -> f64 {
        self.g + self.slope.unwrap_or(f64::NEG_INFINITY) * (u - self.u)
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let mg = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mu) * (p.1 - mg)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mu) * (p.0 - mu)).sum();
    sxy / sxx
}

// Coarse scan: nodes in increasing `u`, each with its log-density when trusted.
struct Scan {
    u: Vec<f64>,
    g: Vec<Option<f64>>,
}

impl Scan {
    fn peak(&self) -> f64 {
        self.g.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    // Node indices walking inward from one edge.
    fn inward(&self, left: bool) -> alloc::boxed::Box<dyn Iterator<Item = usize>> {
        let n = self.u.len();
        if left {
            alloc::boxed::Box::new(0..n)
        } else {
            alloc::boxed::Box::new((0..n).rev())
        }
    }
}

fn adaptive_grid(target: &Target<'_>, spec: &GridSpec) -> Result<ConditionalGrid> {
    let lo0 = 1e-2f64.ln();
    let hi0 = 1e2f64.ln();
    let step = (hi0 - lo0) / (spec.coarse_size - 1) as f64;
    let u = linspace(lo0, hi0, spec.coarse_size);
    let g = u.iter().map(|&x| target.eval(x)).collect::<Result<_>>()?;
    let mut scan = Scan { u, g };
    let wide = step * spec.extension_stride as f64;
    let ext = ((spec.extension_decades * core::f64::consts::LN_10) / wide).ceil() as usize;
    let mut tails: [Option<Tail>; 2] = [None, None];

    for (side, left) in [true, false].into_iter().enumerate() {
        let mut done = 0;
        loop {
            let pk = scan.peak();
            if !pk.is_finite() {
                return Err(Error::ExistenceViolation(String::from(
                    "conditional density vanishes on the whole scouting grid",
                )));
            }
            let outer = scan.inward(left).find(|&k| scan.g[k].is_some()).unwrap();
            if scan.g[outer].unwrap() <= pk - TAIL_LOG_DROP {
                break;
            }
            if scan.g[if left { 0 } else { scan.u.len() - 1 }].is_none() {
                tails[side] = Some(fit_tail(target, &scan, left, pk)?);
                break;
            }
            if done == spec.max_extensions {
                return Err(Error::ExistenceViolation(format!(
                    "conditional for coordinate {} does not decay within [{:e}, {:e}]",
                    target.i,
                    scan.u[0].exp(),
                    scan.u[scan.u.len() - 1].exp()
                )));
            }
            done += 1;
            if left {
                let first = scan.u[0];
                let mut nu: Vec<f64> = (1..=ext).rev().map(|k| first - wide * k as f64).collect();
                let mut ng = nu.iter().map(|&x| target.eval(x)).collect::<Result<Vec<_>>>()?;
                nu.append(&mut scan.u);
                ng.append(&mut scan.g);
                scan = Scan { u: nu, g: ng };
            } else {
                let last = scan.u[scan.u.len() - 1];
                for k in 1..=ext {
                    let x = last + wide * k as f64;
                    scan.g.push(target.eval(x)?);
                    scan.u.push(x);
                }
            }
        }
    }

    let pk = scan.peak();
    let cut = pk - TAIL_LOG_DROP;
    let above: Vec<usize> =
        (0..scan.g.len()).filter(|&k| scan.g[k].is_some_and(|v| v > cut)).collect();
    // One trusted node of margin beyond the cut. An extrapolated tail keeps
    // the exact grid up to its last trusted node and is appended analytically.
    let end = |left: bool, tail: Option<Tail>| -> f64 {
        match tail {
            Some(t) => t.u,
            None if left => {
                let k = (0..above[0]).rev().find(|&k| scan.g[k].is_some()).unwrap_or(above[0]);
                scan.u[k]
            }
            None => {
                let last = above[above.len() - 1];
                let k = (last + 1..scan.u.len()).find(|&k| scan.g[k].is_some()).unwrap_or(last);
                scan.u[k]
            }
        }
    };
    let (lo, hi) = (end(true, tails[0]), end(false, tails[1]));
    // Trusted scouting nodes inside [lo, hi] are kept as they are; the fine
    // nodes go where the scouting interpolant puts all but 2e-6 of the mass.
    let kept: Vec<(f64, f64)> = (0..scan.u.len())
        .filter(|&k| scan.u[k] >= lo && scan.u[k] <= hi)
        .filter_map(|k| scan.g[k].map(|g| (scan.u[k], g)))
        .collect();
    let (a, b) = central_interval(&kept, pk, CENTRAL_TAIL_MASS);
    let (a, b) = ((a - step).max(lo), (b + step).min(hi));
    let fine = linspace(a, b, spec.grid_size);
    let fine_g = fine.iter().map(|&x| target.eval_required(x)).collect::<Result<Vec<_>>>()?;
    let mut u = Vec::with_capacity(kept.len() + fine.len());
    let mut gf = Vec::with_capacity(u.capacity());
    for &(x, g) in kept.iter().filter(|p| p.0 < a) {
        u.push(x);
        gf.push(g);
    }
    u.extend_from_slice(&fine);
    gf.extend_from_slice(&fine_g);
    for &(x, g) in kept.iter().filter(|p| p.0 > b) {
        u.push(x);
        gf.push(g);
    }
    let tail_nodes = |t: &Tail| t.slope.map_or(0, |s| ((t.g - cut) / s.abs() / step).ceil() as usize + 1);
    if let Some(t) = tails[0] {
        let k = tail_nodes(&t);
        let mut tu: Vec<f64> = (1..=k).rev().map(|j| t.u - step * j as f64).collect();
        let mut tg: Vec<f64> = tu.iter().map(|&x| t.at(x)).collect();
        tu.append(&mut u);
        tg.append(&mut gf);
        u = tu;
        gf = tg;
    }
    if let Some(t) = tails[1] {
        for j in 1..=tail_nodes(&t) {
            let x = t.u + step * j as f64;
            u.push(x);
            gf.push(t.at(x));
        }
    }
    ConditionalGrid::from_log_density(u, &gf)
}

/// Interval between the `mass` and `1 - mass` quantiles of the piecewise
/// linear density through `pts` (log-densities relative to `pk`).
fn central_interval(pts: &[(f64, f64)], pk: f64, mass: f64) -> (f64, f64) {
    let n = pts.len();
    if n < 2 {
        let x = pts.first().map_or(0.0, |p| p.0);
        return (x, x);
    }
    let d: Vec<f64> = pts.iter().map(|p| (p.1 - pk).exp()).collect();
    let mut cum = alloc::vec![0.0; n];
    for k in 1..n {
        cum[k] = cum[k - 1] + 0.5 * (pts[k].0 - pts[k - 1].0) * (d[k] + d[k - 1]);
    }
    let total = cum[n - 1];
    let lo = cum.iter().position(|&c| c > mass * total).map_or(0, |k| k.saturating_sub(1));
    let hi = cum.iter().position(|&c| c >= (1.0 - mass) * total).unwrap_or(n - 1);
    (pts[lo].0, pts[hi].0)
}

// The numerical wall was hit on one side before the density decayed. Its tail
// is a power law in θ there, so continue the last trusted stretch linearly in
// `(ln θ, ln density)`.
fn fit_tail(target: &Target<'_>, scan: &Scan, left: bool, pk: f64) -> Result<Tail> {
    let pts: Vec<(f64, f64)> = scan
        .inward(left)
        .skip_while(|&k| scan.g[k].is_none())
        .map_while(|k| scan.g[k].map(|v| (scan.u[k], v)))
        .take(TAIL_FIT_NODES)
        .collect();
    let fail = |why: &str| {
        Error::Factorization(format!(
            "conditional for coordinate {} at theta = {:?} not resolved before the correlation matrix became singular ({why})",
            target.i,
            target.theta.theta()
        ))
    };
    if pts.len() < TAIL_FIT_NODES {
        return Err(fail("too few trusted nodes"));
    }
    let outward = if left { -1.0 } else { 1.0 };
    let slope = fit_slope(&pts);
    let (u, g) = pts[0];
    if g >= pk {
        return Err(fail("density peaks at the wall"));
    }
    if !(slope * outward <= -MIN_TAIL_SLOPE) {
        if g <= pk - WALL_LOG_DROP {
            log::debug!("coordinate {}: closing the grid at the wall, theta = {:e}", target.i, u.exp());
            return Ok(Tail { u, g, slope: None });
        }
        return Err(fail(&format!("tail is not decaying, fitted slope {slope:.3}")));
    }
    log::debug!(
        "coordinate {}: extrapolating the {} tail from theta = {:e} with slope {:.3}",
        target.i,
        if left { "lower" } else { "upper" },
        u.exp(),
        slope
    );
    Ok(Tail { u, g, slope: Some(slope) })
}

/// One random-scan update: returns the new state and the updated coordinate.
pub fn gibbs_step<R: Rng + ?Sized>(
    theta: &LengthVector,
    data: &ProjectedData,
    model: &KrigingModel,
    spec: &GridSpec,
    rng: &mut R,
) -> Result<(LengthVector, usize)> {
    let i = rng.random_range(0..model.r());
    let grid = conditional_posterior_grid(i, theta, data, model, spec)?;
    let u: f64 = rng.random();
    Ok((theta.with(i, grid.quantile(u))?, i))
}

/// `r` consecutive random-scan updates.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    theta: &LengthVector,
    data: &ProjectedData,
    model: &KrigingModel,
    spec: &GridSpec,
    rng: &mut R,
    counts: &mut [usize],
) -> Result<LengthVector> {
    let mut t = theta.clone();
    for _ in 0..model.r() {
        let (next, i) = gibbs_step(&t, data, model, spec, rng)?;
        counts[i] += 1;
        t = next;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub samples: Vec<LengthVector>,
    pub log_l1: Vec<f64>,
    /// Number of updates each coordinate received, burn-in included.
    pub update_counts: Vec<usize>,
    /// Effective sample size of `ln θ_i` per coordinate.
    pub ess: Vec<f64>,
    /// Split-chain potential scale reduction of `ln θ_i` per coordinate.
    pub split_rhat: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ChainOutput {
    /// The retained values of coordinate `i`.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.theta()[i]).collect()
    }
}

/// Half the design range in each coordinate (`0.5` for a degenerate range).
pub fn default_init(model: &KrigingModel) -> LengthVector {
    let th = model
        .design()
        .ranges()
        .into_iter()
        .map(|(lo, hi)| if hi > lo { 0.5 * (hi - lo) } else { 0.5 })
        .collect();
    LengthVector::new(th).expect("design ranges are finite")
}

pub fn run_chain(y: &[f64], model: &KrigingModel, cfg: &ChainConfig) -> Result<ChainOutput> {
    cfg.validate()?;
    let data = model.project(y)?;
    let r = model.r();
    let mut theta = match &cfg.init {
        Some(t) => {
            model.check_theta(t)?;
            t.clone()
        }
        None => default_init(model),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = alloc::vec![0usize; r];
    let mut samples = Vec::with_capacity(cfg.retained());
    let mut log_l1 = Vec::with_capacity(cfg.retained());
    for sweep in 0..cfg.n_iter {
        theta = gibbs_sweep(&theta, &data, model, &cfg.grid, &mut rng, &mut counts)?;
        if sweep >= cfg.burn_in && (sweep + 1 - cfg.burn_in) % cfg.thin == 0 {
            let l = model.log_l1(&data, &theta)?;
            if !l.is_finite() {
                return Err(Error::NonFiniteDensity { index: 0, theta: theta.theta()[0] });
            }
            log_l1.push(l);
            samples.push(theta.clone());
        }
    }
    let mut ess = Vec::with_capacity(r);
    let mut split_rhat = Vec::with_capacity(r);
    let mut warnings = Vec::new();
    for i in 0..r {
        let xs: Vec<f64> = samples.iter().map(|s| s.theta()[i].ln()).collect();
        ess.push(effective_sample_size(&xs));
        let rh = split_rhat_of(&xs);
        if rh > 1.05 {
            let msg = format!("coordinate {i}: split R-hat {rh:.3} exceeds 1.05; the chain may not have converged");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        split_rhat.push(rh);
    }
    Ok(ChainOutput { samples, log_l1, update_counts: counts, ess, split_rhat, warnings })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v)
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let (m, v) = mean_var(xs);
    if !(v > 0.0) {
        return n as f64;
    }
    let rho = |lag: usize| {
        let mut s = 0.0;
        for t in 0..n - lag {
            s += (xs[t] - m) * (xs[t + lag] - m);
        }
        s / (n as f64 * v)
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        prev = pair;
        sum += pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64 * (n as f64).log10())
}

/// Split-chain `R̂` of a single chain (first half against second half).
pub fn split_rhat_of(xs: &[f64]) -> f64 {
    let half = xs.len() / 2;
    if half < 2 {
        return f64::NAN;
    }
    let a = &xs[..half];
    let b = &xs[xs.len() - half..];
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let nf = half as f64;
    // Unbiased within-half variances.
    let w = 0.5 * (va + vb) * nf / (nf - 1.0);
    if !(w > 0.0) {
        return 1.0;
    }
    let mean = 0.5 * (ma + mb);
    let bvar = nf * ((ma - mean).powi(2) + (mb - mean).powi(2));
    let var_plus = (nf - 1.0) / nf * w + bvar / nf;
    (var_plus / w).sqrt()
}
