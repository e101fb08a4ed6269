//! The subcommands, run on in-memory inputs so that a manifest can replay them.

use crate::config::{self, ConfigFile, DesignSettings, ModelSettings};
use crate::data::{self, header_comment, write_csv};
use crate::error::{CliError, Result};
use crate::manifest::{CommandSpec, Input, Overrides, RunManifest, ScaleFlag, Stage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use refkrig_core::bench::{aggregate, existence_gate, format_table, run_replicate, BenchResult, Generator, GeneratorKernel, Scale};
use refkrig_core::estimation::{map, mle, OptimResult};
use refkrig_core::existence::{check_existence, ExistenceReport};
use refkrig_core::gibbs::{run_chain, ChainOutput};
use refkrig_core::kernels::{DesignSet, LengthVector};
use refkrig_core::linear_model::{BasisKind, KrigingModel, TrendBasis};
use refkrig_core::prediction::{Marginal, PredictionContext};
use serde::Serialize;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Everything a run reads.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub spec: CommandSpec,
    pub overrides: Overrides,
    pub config: Input,
    pub data: Option<Input>,
    pub targets: Option<Input>,
}

/// One output file: the primary output has an empty suffix, the others are
/// written next to it with the suffix replacing its extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub suffix: &'static str,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: u8,
    /// Human-readable summary for the terminal.
    pub summary: String,
    pub artifacts: Vec<Artifact>,
    pub manifest: RunManifest,
}

/// How `predict` obtains the correlation lengths.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictMethod {
    Mle,
    Map,
    Fpd,
    Fixed(LengthVector),
}

impl PredictMethod {
    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mle" => Ok(Self::Mle),
            "map" => Ok(Self::Map),
            "fpd" => Ok(Self::Fpd),
            _ => {
                let Some(list) = lower.strip_prefix("fixed:") else {
                    return Err(CliError::Usage(format!("unknown method '{s}' (mle, map, fpd, fixed:θ1,θ2,...)")));
                };
                let theta = list
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| CliError::Usage(format!("cannot parse lengths in '{s}'")))?;
                Ok(Self::Fixed(LengthVector::new(theta)?))
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Mle => "mle",
            Self::Map => "map",
            Self::Fpd => "fpd",
            Self::Fixed(_) => "fixed",
        }
    }
}

#[derive(Serialize)]
struct Commented<'a, T: Serialize> {
    comment: String,
    #[serde(flatten)]
    body: &'a T,
}

fn commented_json<T: Serialize>(seed: u64, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Commented { comment: header_comment(seed), body })
        .expect("output serializes");
    s.push('\n');
    s
}

struct Stages {
    last: Instant,
    list: Vec<Stage>,
}

impl Stages {
    fn new() -> Self {
        Self { last: Instant::now(), list: Vec::new() }
    }

    fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.list.push(Stage { name: name.to_string(), seconds: (now - self.last).as_secs_f64() });
        self.last = now;
    }
}

fn trend_basis(kind: BasisKind) -> TrendBasis {
    match kind {
        BasisKind::None => TrendBasis::None,
        BasisKind::Affine => TrendBasis::Affine,
        _ => TrendBasis::Constant,
    }
}

fn build_model(settings: &ModelSettings, design: DesignSet) -> Result<KrigingModel> {
    let spec = settings.spec(design.dim())?;
    let model = KrigingModel::new(design, spec, trend_basis(settings.trend))?;
    Ok(if settings.jitter > 0.0 { model.with_jitter(settings.jitter)? } else { model })
}

fn random_design(d: &DesignSettings, seed: u64) -> Result<DesignSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..d.points * d.dim).map(|_| rng.random::<f64>()).collect();
    Ok(DesignSet::new(d.dim, coords)?)
}

fn observations(inv: &Invocation) -> Result<data::Observations> {
    let input = inv.data.as_ref().ok_or_else(|| CliError::Usage(String::from("this command needs a data file")))?;
    data::read_observations(&input.path, &input.contents)
}

// Runs the existence checklist with the data and refuses to go on when it
// does not cover the model, unless forced.
fn gate(model: &KrigingModel, y: &[f64], force: bool, notes: &mut Vec<String>) -> Result<ExistenceReport> {
    let report = check_existence(model, Some(y))?;
    if !report.verdict.is_guaranteed() {
        if !force {
            return Err(CliError::Existence(format!(
                "{report}rerun with --force to sample anyway"
            )));
        }
        notes.push(String::from("existence checklist not satisfied; run forced"));
    }
    Ok(report)
}

/// Runs one command.
pub fn execute(inv: &Invocation) -> Result<Outcome> {
    let started = Instant::now();
    let started_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let cfg = ConfigFile::parse(&inv.config.path, &inv.config.contents)?;
    let seed = match inv.overrides.seed {
        Some(s) => s,
        None => config::master_seed(&cfg)?,
    };
    let mut stages = Stages::new();
    let mut notes = Vec::new();
    let run = match &inv.spec {
        CommandSpec::Check => check(inv, &cfg, seed, &mut stages)?,
        CommandSpec::Fit { method } => fit(inv, &cfg, seed, method, &mut stages, &mut notes)?,
        CommandSpec::Sample => sample(inv, &cfg, seed, &mut stages, &mut notes)?,
        CommandSpec::Predict { method, level } => {
            predict(inv, &cfg, seed, method.as_deref(), *level, &mut stages, &mut notes)?
        }
        CommandSpec::Bench { scale, threads } => bench(inv, &cfg, seed, *scale, *threads, &mut stages, &mut notes)?,
    };
    let manifest = RunManifest {
        comment: header_comment(seed),
        version: crate::VERSION.to_string(),
        spec: inv.spec.clone(),
        overrides: inv.overrides.clone(),
        config: inv.config.clone(),
        resolved: run.resolved,
        master_seed: seed,
        data: inv.data.clone(),
        targets: inv.targets.clone(),
        outputs: Vec::new(),
        started_at,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        stages: stages.list,
        existence: run.existence,
        notes,
    };
    Ok(Outcome { exit_code: run.exit_code, summary: run.summary, artifacts: run.artifacts, manifest })
}

struct Run {
    exit_code: u8,
    summary: String,
    artifacts: Vec<Artifact>,
    resolved: serde_json::Value,
    existence: Option<ExistenceReport>,
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("settings serialize")
}

fn check(inv: &Invocation, cfg: &ConfigFile, seed: u64, stages: &mut Stages) -> Result<Run> {
    let settings = ModelSettings::from_config(cfg)?;
    let (design, y) = match &inv.data {
        Some(_) => {
            let obs = observations(inv)?;
            (obs.design, Some(obs.y))
        }
        None => {
            let d = DesignSettings::from_config(cfg)?.ok_or_else(|| {
                CliError::Usage(String::from("check needs a data file or a [design] section in the config"))
            })?;
            (random_design(&d, seed)?, None)
        }
    };
    let model = build_model(&settings, design)?;
    let report = check_existence(&model, y.as_deref())?;
    stages.mark("existence");
    Ok(Run {
        exit_code: if report.verdict.is_guaranteed() { 0 } else { 2 },
        summary: report.to_string(),
        artifacts: vec![Artifact { suffix: "", contents: commented_json(seed, &report) }],
        resolved: serde_json::json!({ "model": json(&settings), "design": json(&DesignSettings::from_config(cfg)?) }),
        existence: Some(report),
    })
}

fn fit(
    inv: &Invocation,
    cfg: &ConfigFile,
    seed: u64,
    method: &str,
    stages: &mut Stages,
    notes: &mut Vec<String>,
) -> Result<Run> {
    let settings = ModelSettings::from_config(cfg)?;
    let obs = observations(inv)?;
    let model = build_model(&settings, obs.design)?;
    let optim = config::optim_config(cfg, seed)?;
    let (result, existence): (OptimResult, _) = match method {
        "mle" => (mle(&obs.y, &model, &optim)?, None),
        "map" => {
            let report = gate(&model, &obs.y, inv.overrides.force, notes)?;
            stages.mark("existence");
            (map(&obs.y, &model, &optim)?, Some(report))
        }
        other => return Err(CliError::Usage(format!("unknown fit method '{other}' (mle, map)"))),
    };
    stages.mark("optimization");
    let summary = format!(
        "{method}: theta = {:?}, objective {:.6}, converged {}\n",
        result.theta.theta(),
        result.value,
        result.converged
    );
    Ok(Run {
        exit_code: 0,
        summary,
        artifacts: vec![Artifact { suffix: "", contents: commented_json(seed, &result) }],
        resolved: serde_json::json!({ "model": json(&settings), "optim": json(&optim) }),
        existence,
    })
}

fn chain_for(
    inv: &Invocation,
    cfg: &ConfigFile,
    seed: u64,
    r: usize,
) -> Result<refkrig_core::gibbs::ChainConfig> {
    let mut chain = config::chain_config(cfg, seed, r)?;
    let o = &inv.overrides;
    chain.n_iter = o.iterations.unwrap_or(chain.n_iter);
    chain.burn_in = o.burn_in.unwrap_or(chain.burn_in);
    chain.thin = o.thin.unwrap_or(chain.thin);
    chain.validate()?;
    Ok(chain)
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    retained: usize,
    ess: &'a [f64],
    split_rhat: &'a [f64],
    update_counts: &'a [usize],
    /// 2.5%, 50% and 97.5% posterior quantiles per coordinate.
    quantiles: Vec<[f64; 3]>,
    warnings: &'a [String],
}

fn diagnostics(out: &ChainOutput, r: usize) -> Diagnostics<'_> {
    let quantiles = (0..r)
        .map(|i| {
            let mut xs = out.coordinate(i);
            xs.sort_by(f64::total_cmp);
            let q = |p: f64| xs[((p * xs.len() as f64) as usize).min(xs.len() - 1)];
            [q(0.025), q(0.5), q(0.975)]
        })
        .collect();
    Diagnostics {
        retained: out.samples.len(),
        ess: &out.ess,
        split_rhat: &out.split_rhat,
        update_counts: &out.update_counts,
        quantiles,
        warnings: &out.warnings,
    }
}

fn sample(inv: &Invocation, cfg: &ConfigFile, seed: u64, stages: &mut Stages, notes: &mut Vec<String>) -> Result<Run> {
    let settings = ModelSettings::from_config(cfg)?;
    let obs = observations(inv)?;
    let r = obs.design.dim();
    let model = build_model(&settings, obs.design)?;
    let chain = chain_for(inv, cfg, seed, r)?;
    let report = gate(&model, &obs.y, inv.overrides.force, notes)?;
    stages.mark("existence");
    let out = run_chain(&obs.y, &model, &chain)?;
    stages.mark("sampling");
    let mut header: Vec<String> = obs.columns[..r].iter().map(|c| format!("theta_{c}")).collect();
    header.push(String::from("log_l1"));
    let rows = out.samples.iter().zip(&out.log_l1).map(|(s, l)| {
        let mut row: Vec<String> = s.theta().iter().map(f64::to_string).collect();
        row.push(l.to_string());
        row
    });
    let csv = write_csv(seed, &header, rows);
    let diag = diagnostics(&out, r);
    let mut summary = format!("{} retained samples\n", out.samples.len());
    for (i, q) in diag.quantiles.iter().enumerate() {
        summary.push_str(&format!(
            "  {}: median {:.4}, 95% interval [{:.4}, {:.4}], ESS {:.0}\n",
            header[i], q[1], q[0], q[2], out.ess[i]
        ));
    }
    for w in &out.warnings {
        summary.push_str(&format!("  warning: {w}\n"));
    }
    Ok(Run {
        exit_code: 0,
        summary,
        artifacts: vec![
            Artifact { suffix: "", contents: csv },
            Artifact { suffix: ".diagnostics.json", contents: commented_json(seed, &diag) },
        ],
        resolved: serde_json::json!({ "model": json(&settings), "chain": json(&chain) }),
        existence: Some(report),
    })
}

#[allow(clippy::too_many_arguments)]
fn predict(
    inv: &Invocation,
    cfg: &ConfigFile,
    seed: u64,
    method: Option<&str>,
    level: Option<f64>,
    stages: &mut Stages,
    notes: &mut Vec<String>,
) -> Result<Run> {
    let settings = ModelSettings::from_config(cfg)?;
    let obs = observations(inv)?;
    let r = obs.design.dim();
    let targets_in =
        inv.targets.as_ref().ok_or_else(|| CliError::Usage(String::from("predict needs a targets file")))?;
    let (target_cols, targets) = data::read_targets(&targets_in.path, &targets_in.contents, r)?;
    let level = match level {
        Some(l) => l,
        None => cfg.get_or("predict", "level", 0.95)?,
    };
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage(format!("level must lie in (0, 1), got {level}")));
    }
    let method = match method {
        Some(m) => m.to_string(),
        None => cfg.get_or("predict", "method", String::from("fpd"))?,
    };
    let method = PredictMethod::parse(&method)?;
    let model = build_model(&settings, obs.design)?;
    let ctx = PredictionContext::new(&model, &obs.y, &targets)?;
    let mut existence = None;
    let mut resolved = serde_json::json!({ "model": json(&settings), "level": level, "method": method.tag() });
    let marginals: Vec<Marginal> = match &method {
        PredictMethod::Fixed(theta) => student_marginals(&ctx, theta)?,
        PredictMethod::Mle | PredictMethod::Map => {
            let optim = config::optim_config(cfg, seed)?;
            let fit = if method == PredictMethod::Mle {
                mle(&obs.y, &model, &optim)?
            } else {
                existence = Some(gate(&model, &obs.y, inv.overrides.force, notes)?);
                map(&obs.y, &model, &optim)?
            };
            stages.mark("optimization");
            resolved["optim"] = json(&optim);
            resolved["theta"] = json(&fit.theta);
            student_marginals(&ctx, &fit.theta)?
        }
        PredictMethod::Fpd => {
            existence = Some(gate(&model, &obs.y, inv.overrides.force, notes)?);
            let chain = chain_for(inv, cfg, seed, r)?;
            let thin: usize = cfg.get_or("predict", "thin", 1)?;
            if thin == 0 {
                return Err(cfg.error_at(Some("predict"), "thin", String::from("thin must be positive")));
            }
            let out = run_chain(&obs.y, &model, &chain)?;
            stages.mark("sampling");
            let kept: Vec<LengthVector> = out.samples.into_iter().step_by(thin).collect();
            resolved["chain"] = json(&chain);
            resolved["prediction_thin"] = json(&thin);
            ctx.full_bayes_marginals(&kept)?
        }
    };
    let mut header = target_cols.clone();
    header.extend(["mean", "lo", "hi", "method"].map(String::from));
    let rows = marginals
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let (lo, hi) = m.interval(level)?;
            let mut row: Vec<String> = targets.point(j).iter().map(f64::to_string).collect();
            row.extend([m.mean().to_string(), lo.to_string(), hi.to_string(), method.tag().to_string()]);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    stages.mark("prediction");
    let summary = format!("{} predictions at level {level} with method {}\n", rows.len(), method.tag());
    Ok(Run {
        exit_code: 0,
        summary,
        artifacts: vec![Artifact { suffix: "", contents: write_csv(seed, &header, rows) }],
        resolved,
        existence,
    })
}

fn student_marginals(ctx: &PredictionContext<'_>, theta: &LengthVector) -> Result<Vec<Marginal>> {
    let dist = ctx.student(theta)?;
    (0..dist.n_targets()).map(|j| Ok(dist.marginal(j)?)).collect()
}

fn bench(
    inv: &Invocation,
    cfg: &ConfigFile,
    seed: u64,
    scale: Option<ScaleFlag>,
    threads: usize,
    stages: &mut Stages,
    notes: &mut Vec<String>,
) -> Result<Run> {
    let scale = scale.map(|s| match s {
        ScaleFlag::Desk => Scale::Desk,
        ScaleFlag::Paper => Scale::Paper,
    });
    let mut ex = config::experiment_config(cfg, scale, seed)?;
    let o = &inv.overrides;
    ex.force |= o.force;
    ex.fpd.sweeps = o.iterations.unwrap_or(ex.fpd.sweeps);
    ex.fpd.burn_in = o.burn_in.unwrap_or(ex.fpd.burn_in);
    ex.fpd.predict_thin = o.thin.unwrap_or(ex.fpd.predict_thin);
    ex.validate()?;
    if let Generator::WellSpecifiedGp { kernel: GeneratorKernel::SquaredExponential, .. } = ex.generator {
        notes.push(String::from(
            "squared-exponential lengths follow the large-smoothness limit of the Matérn scaling: \
             exp(-sum (h_i/theta_i)^2); other parametrizations differ by a constant factor",
        ));
    }
    existence_gate(&ex).map_err(|e| match e {
        refkrig_core::Error::ExistenceViolation(msg) => CliError::Existence(msg),
        other => other.into(),
    })?;
    stages.mark("existence");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    let outcomes = pool.install(|| {
        (0..ex.n_designs).into_par_iter().map(|i| run_replicate(&ex, i)).collect::<refkrig_core::Result<Vec<_>>>()
    })?;
    let result = aggregate(&ex, outcomes);
    stages.mark("replicates");
    for f in &result.failures {
        notes.push(format!("design {} {}: {}", f.design, f.method.name(), f.message));
    }
    let mut summary = String::new();
    for &level in &ex.levels {
        summary.push_str(&format_table(&result, level));
        summary.push('\n');
    }
    if !result.failures.is_empty() {
        summary.push_str(&format!("{} method fits failed; see the manifest notes\n", result.failures.len()));
    }
    Ok(Run {
        exit_code: 0,
        summary,
        artifacts: vec![
            Artifact { suffix: "", contents: summary_csv(seed, &result) },
            Artifact { suffix: ".designs.csv", contents: designs_csv(seed, &result) },
        ],
        resolved: json(&ex),
        existence: None,
    })
}

fn summary_csv(seed: u64, result: &BenchResult) -> String {
    let header = ["method", "level", "coverage", "coverage_se", "mean_length", "mean_length_se", "designs", "failed"]
        .map(String::from);
    let rows = result.summaries.iter().map(|s| {
        vec![
            s.method.name().to_string(),
            s.level.to_string(),
            s.coverage.to_string(),
            s.coverage_se.to_string(),
            s.mean_length.to_string(),
            s.mean_length_se.to_string(),
            s.n_designs.to_string(),
            s.n_failed.to_string(),
        ]
    });
    write_csv(seed, &header, rows)
}

fn designs_csv(seed: u64, result: &BenchResult) -> String {
    let header = ["design", "method", "level", "coverage", "mean_length"].map(String::from);
    let rows = result.records.iter().map(|r| {
        vec![
            r.design.to_string(),
            r.method.name().to_string(),
            r.level.to_string(),
            r.coverage.to_string(),
            r.mean_length.to_string(),
        ]
    });
    write_csv(seed, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_methods_parse() {
        assert_eq!(PredictMethod::parse("MLE").unwrap(), PredictMethod::Mle);
        assert_eq!(PredictMethod::parse(" map ").unwrap(), PredictMethod::Map);
        assert_eq!(PredictMethod::parse("fpd").unwrap().tag(), "fpd");
        let fixed = PredictMethod::parse("fixed:0.5, 2").unwrap();
        assert_eq!(fixed, PredictMethod::Fixed(LengthVector::new(vec![0.5, 2.0]).unwrap()));
        assert_eq!(fixed.tag(), "fixed");
        assert!(matches!(PredictMethod::parse("kriging"), Err(CliError::Usage(_))));
        assert!(matches!(PredictMethod::parse("fixed:0.5,x"), Err(CliError::Usage(_))));
        assert!(PredictMethod::parse("fixed:-1").is_err());
    }

    #[test]
    fn json_outputs_lead_with_the_header_comment() {
        let s = commented_json(7, &serde_json::json!({ "a": 1 }));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["comment"], header_comment(7));
        assert_eq!(v["a"], 1);
        assert!(s.starts_with("{\n  \"comment\""));
    }
}
