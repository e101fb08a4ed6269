//! Monte-Carlo coverage study of prediction intervals.
//!
//! Each design replicate draws `n` design points and `n_tests` test points
//! uniformly in `(0, 1)^r`, generates responses at all of them at once, fits
//! every requested method on the design and scores the equal-tailed intervals
//! at the test points. A replicate only ever reads its own random streams,
//! which are derived from the master seed and the replicate index, so the
//! replicates can run in any order or in parallel with identical results.

use crate::error::{Error, Result};
use crate::estimation::{map, mle, OptimConfig};
use crate::existence::{check_existence, Verdict};
use crate::gibbs::{run_chain, ChainConfig, GridSpec};
use crate::kernels::{DesignSet, Kernel, KernelFamily, KernelSpec, LengthVector};
use crate::linear_model::{BasisKind, KrigingModel, TrendBasis};
use crate::prediction::{Marginal, MarginalMoments, PredictionContext};
use crate::special::{normal_quantile, student_t_quantile};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{E, PI};
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Mean function of a simulated process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFunction {
    Zero,
    Constant { value: f64 },
    Affine { intercept: f64, slopes: Vec<f64> },
}

impl MeanFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFunction::Zero => 0.0,
            MeanFunction::Constant { value } => *value,
            MeanFunction::Affine { intercept, slopes } => {
                intercept + slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
        }
    }

    fn check(&self, r: usize) -> Result<()> {
        match self {
            MeanFunction::Affine { slopes, .. } if slopes.len() != r => Err(Error::InvalidConfig(format!(
                "affine mean has {} slopes for dimension {r}",
                slopes.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Correlation kernel used to simulate the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKernel {
    Matern { family: KernelFamily, nu: f64 },
    /// `exp(-Σ (h_i/θ_i)²)`.
    ///
    /// In the `2√ν` scaling the one-dimensional Matérn correlation at lag `t`
    /// equals the usual `√(2ν)` form at lag `d = √2 t`, whose limit as `ν → ∞`
    /// is `exp(-d²/2) = exp(-t²)`. With `t = ‖h/θ‖` this is the formula above,
    /// so the lengths mean the same thing as for the Matérn models.
    SquaredExponential,
}

#[derive(Debug, Clone)]
enum Correlation {
    Matern(Kernel),
    SquaredExponential,
}

impl Correlation {
    fn new(kernel: GeneratorKernel, r: usize) -> Result<Self> {
        Ok(match kernel {
            GeneratorKernel::Matern { family, nu } => Correlation::Matern(Kernel::new(KernelSpec::new(family, nu, r)?)?),
            GeneratorKernel::SquaredExponential => Correlation::SquaredExponential,
        })
    }

    fn eval(&self, a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
        match self {
            Correlation::Matern(k) => k.correlation(a, b, theta),
            Correlation::SquaredExponential => {
                let s: f64 = a.iter().zip(b).zip(theta).map(|((x, y), t)| ((x - y) / t).powi(2)).sum();
                (-s).exp()
            }
        }
    }

    fn matrix(&self, pts: &DesignSet, theta: &[f64]) -> DMatrix<f64> {
        let n = pts.len();
        let mut k = DMatrix::identity(n, n);
        for a in 0..n {
            for b in 0..a {
                let v = self.eval(pts.point(a), pts.point(b), theta);
                k[(a, b)] = v;
                k[(b, a)] = v;
            }
        }
        k
    }
}

/// One joint draw of `mean(x) + σ Z(x)` at every point of `points`.
///
/// A jitter of `1e-10` is added to the diagonal only if the plain Cholesky
/// factorization fails.
pub fn sample_gp(
    points: &DesignSet,
    mean: &MeanFunction,
    sigma2: f64,
    theta: &LengthVector,
    kernel: GeneratorKernel,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(String::from("sigma2 must be finite and nonnegative")));
    }
    if theta.dim() != points.dim() {
        return Err(Error::DimensionMismatch(String::from("theta and points differ in dimension")));
    }
    mean.check(points.dim())?;
    let m: Vec<f64> = points.points().map(|x| mean.eval(x)).collect();
    if sigma2 == 0.0 {
        return Ok(m);
    }
    let corr = Correlation::new(kernel, points.dim())?;
    let k = corr.matrix(points, theta.theta());
    let l = match k.clone().cholesky() {
        Some(c) => c.l(),
        None => {
            let n = k.nrows();
            (k + DMatrix::identity(n, n) * 1e-10)
                .cholesky()
                .ok_or_else(|| Error::Factorization(String::from("process covariance even after jitter")))?
                .l()
        }
    };
    let z = DVector::from_iterator(m.len(), (0..m.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let draw = l * z * sigma2.sqrt();
    Ok(m.iter().zip(draw.iter()).map(|(a, b)| a + b).collect())
}

fn check_dim7(x: &[f64]) -> Result<()> {
    if x.len() != 7 {
        return Err(Error::DimensionMismatch(format!("test functions take 7 coordinates, got {}", x.len())));
    }
    Ok(())
}

/// The seven-dimensional Ackley function.
pub fn ackley(x: &[f64]) -> Result<f64> {
    check_dim7(x)?;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / 7.0;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / 7.0;
    Ok(20.0 + E - 20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp())
}

/// The seven-dimensional Rastrigin function plus `slope · Σ x_i`.
pub fn rastrigin(x: &[f64], linear_slope: f64) -> Result<f64> {
    check_dim7(x)?;
    if !(linear_slope >= 0.0 && linear_slope.is_finite()) {
        return Err(Error::Domain(String::from("linear slope must be finite and nonnegative")));
    }
    let base = 70.0 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>();
    Ok(base + linear_slope * x.iter().sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Ackley,
    Rastrigin,
    RastriginPlusLinear { slope: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            TestFunction::Ackley => ackley(x),
            TestFunction::Rastrigin => rastrigin(x, 0.0),
            TestFunction::RastriginPlusLinear { slope } => rastrigin(x, *slope),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    WellSpecifiedGp { mean: MeanFunction, sigma2: f64, theta: Vec<f64>, kernel: GeneratorKernel },
    Deterministic { function: TestFunction },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Simple Kriging with the generating mean, variance and lengths.
    True,
    Mle,
    Map,
    Fpd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::True => "True",
            Method::Mle => "MLE",
            Method::Map => "MAP",
            Method::Fpd => "FPD",
        }
    }
}

/// The fitted Kriging model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub basis: BasisKind,
    pub family: KernelFamily,
    pub nu: f64,
}

impl ModelSpec {
    fn basis(&self) -> Result<TrendBasis> {
        match self.basis {
            BasisKind::None => Ok(TrendBasis::None),
            BasisKind::Constant => Ok(TrendBasis::Constant),
            BasisKind::Affine => Ok(TrendBasis::Affine),
            BasisKind::Custom => Err(Error::InvalidConfig(String::from("the bench cannot use custom bases"))),
        }
    }
}

/// Sampler settings for the full-posterior method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpdConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    /// Every `predict_thin`-th retained sample enters the predictive mixture.
    pub predict_thin: usize,
    pub grid: GridSpec,
}

impl Default for FpdConfig {
    fn default() -> Self {
        FpdConfig {
            sweeps: 3000,
            burn_in: 500,
            predict_thin: 5,
            grid: GridSpec { grid_size: 48, coarse_size: 32, extension_stride: 3, ..GridSpec::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub r: usize,
    pub n: usize,
    pub n_designs: usize,
    pub n_tests: usize,
    pub levels: Vec<f64>,
    pub generator: Generator,
    pub model: ModelSpec,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub fpd: FpdConfig,
    /// Run even when the existence checklist does not cover the model.
    #[serde(default)]
    pub force: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.r == 0 || self.n == 0 {
            return bad(String::from("r and n must be positive"));
        }
        if self.n_designs == 0 || self.n_tests == 0 {
            return bad(String::from("n_designs and n_tests must be at least 1"));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return bad(String::from("levels must be a nonempty list of values in (0, 1)"));
        }
        if self.methods.is_empty() {
            return bad(String::from("no methods requested"));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return bad(String::from("methods must not repeat"));
        }
        match &self.generator {
            Generator::WellSpecifiedGp { mean, sigma2, theta, kernel } => {
                mean.check(self.r)?;
                if !(*sigma2 > 0.0 && sigma2.is_finite()) {
                    return bad(String::from("generator sigma2 must be positive"));
                }
                if theta.len() != self.r {
                    return bad(format!("generator theta has {} entries for r = {}", theta.len(), self.r));
                }
                LengthVector::new(theta.clone())?;
                Correlation::new(*kernel, self.r)?;
            }
            Generator::Deterministic { function } => {
                if self.r != 7 {
                    return bad(String::from("the test functions are seven-dimensional"));
                }
                if self.methods.contains(&Method::True) {
                    return bad(String::from("the True method needs a simulated process"));
                }
                function.eval(&[0.5; 7])?;
            }
        }
        self.model.basis()?;
        KernelSpec::new(self.model.family, self.model.nu, self.r)?;
        let p = self.model.basis()?.len(self.r);
        if self.n <= p + 1 {
            return bad(format!("n = {} leaves no room for p = {p} trend functions", self.n));
        }
        if self.methods.iter().any(|m| matches!(m, Method::Mle | Method::Map)) {
            self.optim.validate()?;
        }
        if self.methods.contains(&Method::Fpd) {
            let f = &self.fpd;
            if f.predict_thin == 0 || f.burn_in >= f.sweeps {
                return bad(String::from("fpd needs predict_thin >= 1 and burn_in < sweeps"));
            }
            f.grid.validate()?;
        }
        Ok(())
    }
}

/// Counter-based seed for replicate `index` (a SplitMix64 step).
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    splitmix(master ^ splitmix(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scores of one method at one level on one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub design: usize,
    pub method: Method,
    pub level: f64,
    /// Fraction of test points whose value fell inside the interval.
    pub coverage: f64,
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub design: usize,
    pub method: Method,
    pub message: String,
}

/// Everything one design replicate produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub design: usize,
    pub seed: u64,
    pub records: Vec<DesignRecord>,
    pub failures: Vec<ReplicateFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub level: f64,
    pub coverage: f64,
    /// Between-design standard error of the average coverage.
    pub coverage_se: f64,
    pub mean_length: f64,
    pub mean_length_se: f64,
    pub n_designs: usize,
    pub n_failed: usize,
}

impl MethodSummary {
    /// Number of independent Bernoulli trials with the same standard error,
    /// `c(1 - c) / se²`.
    pub fn effective_trials(&self) -> f64 {
        self.coverage * (1.0 - self.coverage) / (self.coverage_se * self.coverage_se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<DesignRecord>,
    pub failures: Vec<ReplicateFailure>,
}

impl BenchResult {
    pub fn summary(&self, method: Method, level: f64) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method && s.level == level)
    }
}

/// Per-target interval bounds for each level.
type Intervals = Vec<Vec<(f64, f64)>>;

fn student_intervals(mo: &MarginalMoments, dof: usize, levels: &[f64]) -> Intervals {
    levels
        .iter()
        .map(|&lv| {
            let t = student_t_quantile(0.5 * (1.0 + lv), dof as f64);
            mo.location
                .iter()
                .zip(&mo.scale2)
                .map(|(m, s2)| {
                    let h = t * s2.max(0.0).sqrt();
                    (m - h, m + h)
                })
                .collect()
        })
        .collect()
}

fn gaussian_intervals(mo: &MarginalMoments, levels: &[f64]) -> Intervals {
    levels
        .iter()
        .map(|&lv| {
            let z = normal_quantile(0.5 * (1.0 + lv));
            mo.location
                .iter()
                .zip(&mo.scale2)
                .map(|(m, s2)| {
                    let h = z * s2.max(0.0).sqrt();
                    (m - h, m + h)
                })
                .collect()
        })
        .collect()
}

fn mixture_intervals(marginals: &[Marginal], levels: &[f64]) -> Result<Intervals> {
    levels
        .iter()
        .map(|&lv| marginals.iter().map(|m| m.interval(lv)).collect::<Result<Vec<_>>>())
        .collect()
}

/// Simple Kriging with every generating parameter known.
fn true_moments(
    design: &DesignSet,
    y: &[f64],
    tests: &DesignSet,
    mean: &MeanFunction,
    sigma2: f64,
    theta: &[f64],
    kernel: GeneratorKernel,
) -> Result<MarginalMoments> {
    let corr = Correlation::new(kernel, design.dim())?;
    let k = corr.matrix(design, theta);
    let chol = k.cholesky().ok_or_else(|| Error::Factorization(String::from("design correlation matrix")))?;
    let resid = DVector::from_iterator(y.len(), design.points().zip(y).map(|(x, v)| v - mean.eval(x)));
    let alpha = chol.solve(&resid);
    let mut location = Vec::with_capacity(tests.len());
    let mut scale2 = Vec::with_capacity(tests.len());
    for t in tests.points() {
        let c = DVector::from_iterator(design.len(), design.points().map(|x| corr.eval(t, x, theta)));
        location.push(mean.eval(t) + c.dot(&alpha));
        let w = chol.l().solve_lower_triangular(&c).unwrap_or_else(|| DVector::zeros(c.len()));
        scale2.push(sigma2 * (1.0 - w.norm_squared()).max(0.0));
    }
    Ok(MarginalMoments { location, scale2 })
}

fn score(design: usize, method: Method, levels: &[f64], iv: &Intervals, truth: &[f64]) -> Vec<DesignRecord> {
    levels
        .iter()
        .zip(iv)
        .map(|(&level, bounds)| {
            let k = truth.len() as f64;
            let hits = bounds.iter().zip(truth).filter(|((lo, hi), v)| lo <= *v && *v <= hi).count();
            let len = bounds.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / k;
            DesignRecord { design, method, level, coverage: hits as f64 / k, mean_length: len }
        })
        .collect()
}

fn uniform_points(rng: &mut impl Rng, count: usize, r: usize) -> Result<DesignSet> {
    DesignSet::new(r, (0..count * r).map(|_| rng.random::<f64>()).collect())
}

/// Runs design replicate `index`. Method failures are recorded, not raised.
pub fn run_replicate(cfg: &ExperimentConfig, index: usize) -> Result<ReplicateOutcome> {
    let seed = replicate_seed(cfg.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = uniform_points(&mut rng, cfg.n, cfg.r)?;
    let tests = uniform_points(&mut rng, cfg.n_tests, cfg.r)?;
    let all = design.concat(&tests)?;
    let values = match &cfg.generator {
        Generator::WellSpecifiedGp { mean, sigma2, theta, kernel } => {
            sample_gp(&all, mean, *sigma2, &LengthVector::new(theta.clone())?, *kernel, &mut rng)?
        }
        Generator::Deterministic { function } => all.points().map(|x| function.eval(x)).collect::<Result<_>>()?,
    };
    let (y, truth) = values.split_at(cfg.n);
    let spec = KernelSpec::new(cfg.model.family, cfg.model.nu, cfg.r)?;
    let model = KrigingModel::new(design.clone(), spec, cfg.model.basis()?)?;
    // Degenerate responses only sink the fitted methods, never the oracle.
    let ctx = PredictionContext::new(&model, y, &tests);
    let dof = model.dof();
    let sub_seed = |k: u64| splitmix(seed ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03));

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &method in &cfg.methods {
        let iv: Result<Intervals> = match method {
            Method::True => match &cfg.generator {
                Generator::WellSpecifiedGp { mean, sigma2, theta, kernel } => {
                    true_moments(&design, y, &tests, mean, *sigma2, theta, *kernel)
                        .map(|mo| gaussian_intervals(&mo, &cfg.levels))
                }
                Generator::Deterministic { .. } => {
                    Err(Error::InvalidConfig(String::from("the True method needs a simulated process")))
                }
            },
            Method::Mle | Method::Map => {
                let ocfg = OptimConfig { seed: sub_seed(method as u64 + 1), ..cfg.optim };
                let fit = ctx.as_ref().map_err(Clone::clone).and_then(|_| {
                    if method == Method::Mle { mle(y, &model, &ocfg) } else { map(y, &model, &ocfg) }
                });
                fit.and_then(|f| ctx.as_ref().map_err(Clone::clone)?.student_moments(&f.theta))
                    .map(|mo| student_intervals(&mo, dof, &cfg.levels))
            }
            Method::Fpd => {
                let chain = ChainConfig {
                    n_iter: cfg.fpd.sweeps,
                    burn_in: cfg.fpd.burn_in,
                    thin: 1,
                    seed: sub_seed(7),
                    init: None,
                    grid: cfg.fpd.grid,
                };
                ctx.as_ref().map_err(Clone::clone).and_then(|ctx| {
                    let out = run_chain(y, &model, &chain)?;
                    let kept: Vec<LengthVector> =
                        out.samples.into_iter().step_by(cfg.fpd.predict_thin).collect();
                    let margs = ctx.full_bayes_marginals(&kept)?;
                    mixture_intervals(&margs, &cfg.levels)
                })
            }
        };
        match iv {
            Ok(iv) => records.extend(score(index, method, &cfg.levels, &iv, truth)),
            Err(e) => {
                log::warn!("design {index}, method {}: {e}", method.name());
                failures.push(ReplicateFailure { design: index, method, message: e.to_string() });
            }
        }
    }
    Ok(ReplicateOutcome { design: index, seed, records, failures })
}

/// Checks the existence gate on a representative design.
pub fn existence_gate(cfg: &ExperimentConfig) -> Result<()> {
    if !cfg.methods.iter().any(|m| matches!(m, Method::Map | Method::Fpd)) || cfg.force {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(cfg.seed, 0));
    let design = uniform_points(&mut rng, cfg.n, cfg.r)?;
    let spec = KernelSpec::new(cfg.model.family, cfg.model.nu, cfg.r)?;
    let model = KrigingModel::new(design, spec, cfg.model.basis()?)?;
    let report = check_existence(&model, None)?;
    if report.verdict == Verdict::NotGuaranteed {
        return Err(Error::ExistenceViolation(format!(
            "no checklist rule covers this model ({}); set force to run anyway",
            report.notes.join("; ")
        )));
    }
    Ok(())
}

/// Combines replicate outcomes; the result does not depend on their order.
pub fn aggregate(cfg: &ExperimentConfig, mut outcomes: Vec<ReplicateOutcome>) -> BenchResult {
    outcomes.sort_by_key(|o| o.design);
    let records: Vec<DesignRecord> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();
    let failures: Vec<ReplicateFailure> = outcomes.iter().flat_map(|o| o.failures.iter().cloned()).collect();
    let mut summaries = Vec::new();
    for &method in &cfg.methods {
        let n_failed = failures.iter().filter(|f| f.method == method).count();
        for &level in &cfg.levels {
            let rs: Vec<&DesignRecord> = records.iter().filter(|r| r.method == method && r.level == level).collect();
            let (c, c_se) = mean_se(rs.iter().map(|r| r.coverage));
            let (l, l_se) = mean_se(rs.iter().map(|r| r.mean_length));
            summaries.push(MethodSummary {
                method,
                level,
                coverage: c,
                coverage_se: c_se,
                mean_length: l,
                mean_length_se: l_se,
                n_designs: rs.len(),
                n_failed,
            });
        }
    }
    BenchResult { summaries, records, failures }
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let k = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

/// Runs every replicate in order on the calling thread.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BenchResult> {
    cfg.validate()?;
    existence_gate(cfg)?;
    let outcomes = (0..cfg.n_designs).map(|i| run_replicate(cfg, i)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, outcomes))
}

/// Plain-text coverage table: one row per statistic, one column per method.
pub fn format_table(result: &BenchResult, level: f64) -> String {
    let rows: Vec<&MethodSummary> = result.summaries.iter().filter(|s| s.level == level).collect();
    let mut out = String::new();
    let header: Vec<&str> = rows.iter().map(|s| s.method.name()).collect();
    out.push_str(&format!("{:<22}", format!("level {level}")));
    for h in &header {
        out.push_str(&format!("{h:>16}"));
    }
    out.push('\n');
    out.push_str(&format!("{:<22}", "average coverage"));
    for s in &rows {
        out.push_str(&format!("{:>16}", format!("{:.3} ({:.3})", s.coverage, s.coverage_se)));
    }
    out.push('\n');
    out.push_str(&format!("{:<22}", "average mean length"));
    for s in &rows {
        out.push_str(&format!("{:>16}", format!("{:.3} ({:.3})", s.mean_length, s.mean_length_se)));
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 50 designs × 200 test points.
    Desk,
    /// 500 designs × 1000 test points.
    Paper,
}

impl Scale {
    pub fn sizes(self) -> (usize, usize) {
        match self {
            Scale::Desk => (50, 200),
            Scale::Paper => (500, 1000),
        }
    }
}

const ALL_METHODS: [Method; 4] = [Method::True, Method::Mle, Method::Map, Method::Fpd];

/// Simulated process with `σ² = 1` and a Matérn 5/2 model in three dimensions.
pub fn gp_preset(theta: [f64; 3], mean: MeanFunction, basis: BasisKind, kernel: GeneratorKernel, scale: Scale) -> ExperimentConfig {
    let (n_designs, n_tests) = scale.sizes();
    ExperimentConfig {
        r: 3,
        n: 30,
        n_designs,
        n_tests,
        levels: vec![0.95],
        generator: Generator::WellSpecifiedGp { mean, sigma2: 1.0, theta: theta.to_vec(), kernel },
        model: ModelSpec { basis, family: KernelFamily::AnisotropicGeometric, nu: 2.5 },
        methods: ALL_METHODS.to_vec(),
        seed: 0,
        optim: OptimConfig::default(),
        fpd: FpdConfig::default(),
        force: false,
    }
}

pub const MATERN_5_2: GeneratorKernel = GeneratorKernel::Matern { family: KernelFamily::AnisotropicGeometric, nu: 2.5 };

/// The mean function `5 + 4x₁ + 3x₂ + 2x₃`.
pub fn affine_mean() -> MeanFunction {
    MeanFunction::Affine { intercept: 5.0, slopes: vec![4.0, 3.0, 2.0] }
}

/// Ordinary Kriging of a process with constant mean 5.
pub fn ordinary_preset(theta: [f64; 3], scale: Scale) -> ExperimentConfig {
    gp_preset(theta, MeanFunction::Constant { value: 5.0 }, BasisKind::Constant, MATERN_5_2, scale)
}

/// Affine Kriging of a process with mean `5 + 4x₁ + 3x₂ + 2x₃`.
pub fn affine_preset(theta: [f64; 3], scale: Scale) -> ExperimentConfig {
    gp_preset(theta, affine_mean(), BasisKind::Affine, MATERN_5_2, scale)
}

/// Simple Kriging of a zero-mean process.
pub fn simple_preset(theta: [f64; 3], scale: Scale) -> ExperimentConfig {
    gp_preset(theta, MeanFunction::Zero, BasisKind::None, MATERN_5_2, scale)
}

/// Generator correlation lengths of the standard benchmark grid.
pub const TABLE_LENGTHS: [[f64; 3]; 5] =
    [[0.4, 0.8, 0.2], [0.5, 0.5, 0.5], [0.7, 1.3, 0.4], [0.8, 0.3, 0.6], [0.8, 1.0, 0.9]];

/// Emulation of a seven-dimensional test function with `n = 100`.
pub fn deterministic_preset(function: TestFunction, basis: BasisKind, scale: Scale) -> ExperimentConfig {
    let (n_designs, n_tests) = scale.sizes();
    ExperimentConfig {
        r: 7,
        n: 100,
        n_designs,
        n_tests,
        levels: vec![0.95],
        generator: Generator::Deterministic { function },
        model: ModelSpec { basis, family: KernelFamily::AnisotropicGeometric, nu: 2.5 },
        methods: vec![Method::Mle, Method::Map, Method::Fpd],
        seed: 0,
        optim: OptimConfig::default(),
        fpd: FpdConfig::default(),
        force: false,
    }
}
