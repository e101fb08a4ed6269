//! INI configuration files.
//!
//! ```ini
//! [run]
//! seed = 42
//!
//! [model]
//! kernel = matern            ; or matern-tensorized
//! nu = 2.5
//! trend = constant           ; none, constant or affine
//!
//! [sampler]
//! iterations = 3000
//! burn_in = 500
//! ```
//!
//! Every section and key is listed in the README together with its default.
//! Unknown sections and keys are rejected so that typos do not pass silently.

use crate::error::{CliError, Result};
use ini::Ini;
use refkrig_core::bench::{
    affine_mean, affine_preset, deterministic_preset, ordinary_preset, simple_preset, ExperimentConfig, FpdConfig, Generator, GeneratorKernel,
    MeanFunction, Method, ModelSpec, Scale, TestFunction, MATERN_5_2,
};
use refkrig_core::estimation::OptimConfig;
use refkrig_core::gibbs::{ChainConfig, GridSpec, Truncation};
use refkrig_core::kernels::{KernelFamily, KernelSpec, LengthVector};
use refkrig_core::linear_model::BasisKind;
use serde::Serialize;
use std::str::FromStr;

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["seed"]),
    ("model", &["kernel", "nu", "trend", "jitter"]),
    ("design", &["points", "dim"]),
    (
        "sampler",
        &[
            "iterations",
            "burn_in",
            "thin",
            "grid_size",
            "coarse_size",
            "extension_stride",
            "theta_min",
            "theta_max",
            "init",
        ],
    ),
    ("optim", &["restarts", "theta_min", "theta_max", "max_evals"]),
    ("predict", &["method", "level", "thin"]),
    (
        "bench",
        &[
            "preset",
            "scale",
            "dim",
            "points",
            "designs",
            "tests",
            "levels",
            "methods",
            "generator",
            "mean",
            "mean_value",
            "sigma2",
            "theta",
            "generator_kernel",
            "generator_nu",
            "slope",
            "sweeps",
            "burn_in",
            "predict_thin",
            "grid_size",
            "coarse_size",
            "extension_stride",
        ],
    ),
];

/// A parsed config file that remembers where each key came from.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    origin: String,
    text: String,
    ini: Ini,
}

impl ConfigFile {
    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        for (k, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.starts_with('[') && !t.ends_with(']') {
                return Err(CliError::Config {
                    origin: origin.to_string(),
                    line: k + 1,
                    column: line.len() - line.trim_start().len() + 1,
                    message: String::from("section header is missing its closing ']'"),
                });
            }
        }
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config {
            origin: origin.to_string(),
            line: e.line,
            column: e.col,
            message: e.msg.to_string(),
        })?;
        let cfg = Self { origin: origin.to_string(), text: text.to_string(), ini };
        cfg.check_layout()?;
        Ok(cfg)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    fn check_layout(&self) -> Result<()> {
        for (section, props) in self.ini.iter() {
            let Some(name) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(self.error_at(None, key, format!("key '{key}' must belong to a section")));
                }
                continue;
            };
            let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                let line = self.section_line(name).unwrap_or(1);
                return Err(self.error_line(line, 1, format!("unknown section [{name}]")));
            };
            for (key, _) in props.iter() {
                if !allowed.contains(&key) {
                    return Err(self.error_at(Some(name), key, format!("unknown key '{key}' in [{name}]")));
                }
                if props.get_all(key).count() > 1 {
                    return Err(self.error_at(Some(name), key, format!("key '{key}' is given more than once")));
                }
            }
        }
        Ok(())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.ini.section(Some(section)).is_some()
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.get_from(Some(section), key).map(strip_inline_comment)
    }

    /// Parses `[section] key` when present.
    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.error_at(Some(section), key, format!("cannot parse '{v}' for {key}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.get(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    // Reported at the section header, or at the top when the section is absent.
    fn missing(&self, section: &str, key: &str) -> CliError {
        let line = self.section_line(section).unwrap_or(1);
        self.error_line(line, 1, format!("missing required key '{key}' in [{section}]"))
    }

    /// A comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(section, key) else { return Ok(None) };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse().map_err(|_| self.error_at(Some(section), key, format!("cannot parse '{s}' in {key}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// An error pointing at the value of `[section] key`.
    pub fn error_at(&self, section: Option<&str>, key: &str, message: String) -> CliError {
        let (line, column) = self.locate(section, key).unwrap_or((1, 1));
        self.error_line(line, column, message)
    }

    fn error_line(&self, line: usize, column: usize, message: String) -> CliError {
        CliError::Config { origin: self.origin.clone(), line, column, message }
    }

    fn section_line(&self, section: &str) -> Option<usize> {
        self.text.lines().position(|l| header(l) == Some(section)).map(|k| k + 1)
    }

    // Line and column (both 1-based) of the value of `key` in `section`.
    fn locate(&self, section: Option<&str>, key: &str) -> Option<(usize, usize)> {
        let mut current: Option<&str> = None;
        for (k, line) in self.text.lines().enumerate() {
            if let Some(name) = header(line) {
                current = Some(name);
                continue;
            }
            if current != section {
                continue;
            }
            let trimmed = line.trim_start();
            let Some(rest) = trimmed.strip_prefix(key) else { continue };
            let rest_trim = rest.trim_start();
            if rest_trim.starts_with('=') || rest_trim.starts_with(':') {
                let value = rest_trim[1..].trim_start();
                let column = line.len() - value.len() + 1;
                return Some((k + 1, column));
            }
        }
        None
    }
}

// `value ; comment` and `value # comment` keep only `value`.
fn strip_inline_comment(v: &str) -> &str {
    let b = v.as_bytes();
    let cut = (1..b.len()).find(|&k| (b[k] == b';' || b[k] == b'#') && b[k - 1].is_ascii_whitespace());
    cut.map_or(v, |k| &v[..k]).trim()
}

fn header(line: &str) -> Option<&str> {
    let t = line.trim();
    t.strip_prefix('[').and_then(|s| s.strip_suffix(']')).map(str::trim)
}

fn parse_enum<T>(cfg: &ConfigFile, section: &str, key: &str, table: &[(&str, T)]) -> Result<Option<T>>
where
    T: Copy,
{
    let Some(v) = cfg.raw(section, key) else { return Ok(None) };
    let v = v.to_ascii_lowercase();
    table.iter().find(|(name, _)| *name == v).map(|(_, t)| Some(*t)).ok_or_else(|| {
        let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
        cfg.error_at(Some(section), key, format!("'{v}' is not one of {}", names.join(", ")))
    })
}

const KERNELS: &[(&str, KernelFamily)] =
    &[("matern", KernelFamily::AnisotropicGeometric), ("matern-tensorized", KernelFamily::Tensorized)];

const TRENDS: &[(&str, BasisKind)] =
    &[("none", BasisKind::None), ("constant", BasisKind::Constant), ("affine", BasisKind::Affine)];

/// The `[model]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSettings {
    pub family: KernelFamily,
    pub nu: f64,
    pub trend: BasisKind,
    pub jitter: f64,
}

impl ModelSettings {
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let family = parse_enum(cfg, "model", "kernel", KERNELS)?.ok_or_else(|| cfg.missing("model", "kernel"))?;
        let nu: f64 = cfg.require("model", "nu")?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(cfg.error_at(Some("model"), "nu", format!("smoothness must be positive, got {nu}")));
        }
        let trend = parse_enum(cfg, "model", "trend", TRENDS)?.unwrap_or(BasisKind::Constant);
        let jitter: f64 = cfg.get_or("model", "jitter", 0.0)?;
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(cfg.error_at(Some("model"), "jitter", String::from("jitter must be nonnegative")));
        }
        Ok(Self { family, nu, trend, jitter })
    }

    pub fn spec(&self, dim: usize) -> Result<KernelSpec> {
        Ok(KernelSpec::new(self.family, self.nu, dim)?)
    }
}

/// The `[design]` section: a uniform random design on the unit cube, used by
/// `check` when no data file is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignSettings {
    pub points: usize,
    pub dim: usize,
}

impl DesignSettings {
    pub fn from_config(cfg: &ConfigFile) -> Result<Option<Self>> {
        if !cfg.has_section("design") {
            return Ok(None);
        }
        let points: usize = cfg.require("design", "points")?;
        let dim: usize = cfg.require("design", "dim")?;
        if points == 0 || dim == 0 {
            return Err(cfg.error_at(Some("design"), "points", String::from("design needs points and dimensions")));
        }
        Ok(Some(Self { points, dim }))
    }
}

/// Builds the chain configuration from `[sampler]`; `r` sizes the optional `init`.
pub fn chain_config(cfg: &ConfigFile, seed: u64, r: usize) -> Result<ChainConfig> {
    let mut chain = ChainConfig::new(seed);
    chain.n_iter = cfg.get_or("sampler", "iterations", 5000)?;
    chain.burn_in = cfg.get_or("sampler", "burn_in", 500)?;
    chain.thin = cfg.get_or("sampler", "thin", 1)?;
    chain.grid = grid_spec(cfg, "sampler", GridSpec::default())?;
    if let Some(init) = cfg.list::<f64>("sampler", "init")? {
        if init.len() != r {
            return Err(cfg.error_at(
                Some("sampler"),
                "init",
                format!("init has {} lengths but the data have {r} dimensions", init.len()),
            ));
        }
        let init = LengthVector::new(init)
            .map_err(|e| cfg.error_at(Some("sampler"), "init", e.to_string()))?;
        chain.init = Some(init);
    }
    Ok(chain)
}

fn grid_spec(cfg: &ConfigFile, section: &str, base: GridSpec) -> Result<GridSpec> {
    let mut grid = base;
    grid.grid_size = cfg.get_or(section, "grid_size", grid.grid_size)?;
    grid.coarse_size = cfg.get_or(section, "coarse_size", grid.coarse_size)?;
    grid.extension_stride = cfg.get_or(section, "extension_stride", grid.extension_stride)?;
    if section == "sampler" {
        match (cfg.get::<f64>(section, "theta_min")?, cfg.get::<f64>(section, "theta_max")?) {
            (None, None) => {}
            (Some(theta_min), Some(theta_max)) => grid.truncation = Truncation::Explicit { theta_min, theta_max },
            (Some(_), None) | (None, Some(_)) => {
                let key = if cfg.raw(section, "theta_min").is_some() { "theta_min" } else { "theta_max" };
                return Err(cfg.error_at(
                    Some(section),
                    key,
                    String::from("explicit truncation needs both theta_min and theta_max"),
                ));
            }
        }
    }
    grid.validate().map_err(|e| cfg.error_at(Some(section), "grid_size", e.to_string()))?;
    Ok(grid)
}

pub fn optim_config(cfg: &ConfigFile, seed: u64) -> Result<OptimConfig> {
    let d = OptimConfig::default();
    let o = OptimConfig {
        theta_min: cfg.get_or("optim", "theta_min", d.theta_min)?,
        theta_max: cfg.get_or("optim", "theta_max", d.theta_max)?,
        restarts: cfg.get_or("optim", "restarts", d.restarts)?,
        max_evals: cfg.get_or("optim", "max_evals", d.max_evals)?,
        seed,
        ..d
    };
    o.validate().map_err(|e| cfg.error_at(Some("optim"), "restarts", e.to_string()))?;
    Ok(o)
}

pub fn master_seed(cfg: &ConfigFile) -> Result<u64> {
    cfg.get_or("run", "seed", 0)
}

const METHODS: &[(&str, Method)] =
    &[("true", Method::True), ("mle", Method::Mle), ("map", Method::Map), ("fpd", Method::Fpd)];

const SCALES: &[(&str, Scale)] = &[("desk", Scale::Desk), ("paper", Scale::Paper)];

const DEFAULT_THETA: [f64; 3] = [0.4, 0.8, 0.2];

#[derive(Debug, Clone, Copy, PartialEq)]
enum GeneratorKind {
    Gp,
    Function(TestFunction),
}

/// Resolves the `[bench]` section into an experiment. `scale` from the
/// command line wins over the `scale` key.
pub fn experiment_config(cfg: &ConfigFile, scale: Option<Scale>, seed: u64) -> Result<ExperimentConfig> {
    let b = "bench";
    let scale = match scale {
        Some(s) => s,
        None => parse_enum(cfg, b, "scale", SCALES)?.unwrap_or(Scale::Desk),
    };
    let slope: f64 = cfg.get_or(b, "slope", 100.0)?;
    let preset = cfg.raw(b, "preset").map(str::to_ascii_lowercase).unwrap_or_else(|| String::from("ordinary"));
    let mut ex = match preset.as_str() {
        "ordinary" => ordinary_preset(DEFAULT_THETA, scale),
        "affine" => affine_preset(DEFAULT_THETA, scale),
        "simple" => simple_preset(DEFAULT_THETA, scale),
        "ackley" => deterministic_preset(TestFunction::Ackley, BasisKind::Constant, scale),
        "rastrigin" => deterministic_preset(TestFunction::Rastrigin, BasisKind::Constant, scale),
        "rastrigin-linear" => {
            deterministic_preset(TestFunction::RastriginPlusLinear { slope }, BasisKind::Affine, scale)
        }
        other => {
            return Err(cfg.error_at(
                Some(b),
                "preset",
                format!("unknown preset '{other}' (ordinary, affine, simple, ackley, rastrigin, rastrigin-linear)"),
            ))
        }
    };
    ex.seed = seed;
    if cfg.has_section("model") {
        let m = ModelSettings::from_config(cfg)?;
        ex.model = ModelSpec { basis: m.trend, family: m.family, nu: m.nu };
    }
    ex.r = cfg.get_or(b, "dim", ex.r)?;
    ex.n = cfg.get_or(b, "points", ex.n)?;
    ex.n_designs = cfg.get_or(b, "designs", ex.n_designs)?;
    ex.n_tests = cfg.get_or(b, "tests", ex.n_tests)?;
    if let Some(levels) = cfg.list(b, "levels")? {
        ex.levels = levels;
    }
    if let Some(names) = cfg.list::<String>(b, "methods")? {
        ex.methods = names
            .iter()
            .map(|n| {
                let lower = n.to_ascii_lowercase();
                METHODS.iter().find(|(k, _)| *k == lower).map(|(_, m)| *m).ok_or_else(|| {
                    cfg.error_at(Some(b), "methods", format!("unknown method '{n}' (true, mle, map, fpd)"))
                })
            })
            .collect::<Result<_>>()?;
    }

    let current = match &ex.generator {
        Generator::WellSpecifiedGp { .. } => GeneratorKind::Gp,
        Generator::Deterministic { function } => GeneratorKind::Function(*function),
    };
    let kind = match cfg.raw(b, "generator").map(str::to_ascii_lowercase).as_deref() {
        None => current,
        Some("gp") => GeneratorKind::Gp,
        Some("ackley") => GeneratorKind::Function(TestFunction::Ackley),
        Some("rastrigin") => GeneratorKind::Function(TestFunction::Rastrigin),
        Some("rastrigin-linear") => GeneratorKind::Function(TestFunction::RastriginPlusLinear { slope }),
        Some(other) => {
            return Err(cfg.error_at(
                Some(b),
                "generator",
                format!("unknown generator '{other}' (gp, ackley, rastrigin, rastrigin-linear)"),
            ))
        }
    };
    ex.generator = match kind {
        GeneratorKind::Function(function) => Generator::Deterministic { function },
        GeneratorKind::Gp => {
            let (mean0, sigma0, theta0, kernel0) = match &ex.generator {
                Generator::WellSpecifiedGp { mean, sigma2, theta, kernel } => {
                    (mean.clone(), *sigma2, theta.clone(), *kernel)
                }
                Generator::Deterministic { .. } => (MeanFunction::Zero, 1.0, DEFAULT_THETA.to_vec(), MATERN_5_2),
            };
            let mean_value: f64 = cfg.get_or(b, "mean_value", 5.0)?;
            let mean = match cfg.raw(b, "mean").map(str::to_ascii_lowercase).as_deref() {
                None => mean0,
                Some("zero") => MeanFunction::Zero,
                Some("constant") => MeanFunction::Constant { value: mean_value },
                Some("affine") => affine_mean(),
                Some(other) => {
                    return Err(cfg.error_at(
                        Some(b),
                        "mean",
                        format!("unknown mean '{other}' (zero, constant, affine)"),
                    ))
                }
            };
            let theta = cfg.list(b, "theta")?.unwrap_or(theta0);
            let nu: f64 = cfg.get_or(b, "generator_nu", 2.5)?;
            let kernel = match cfg.raw(b, "generator_kernel").map(str::to_ascii_lowercase).as_deref() {
                None => kernel0,
                Some("matern") => GeneratorKernel::Matern { family: KernelFamily::AnisotropicGeometric, nu },
                Some("matern-tensorized") => GeneratorKernel::Matern { family: KernelFamily::Tensorized, nu },
                Some("squared-exponential") => GeneratorKernel::SquaredExponential,
                Some(other) => {
                    return Err(cfg.error_at(
                        Some(b),
                        "generator_kernel",
                        format!("unknown kernel '{other}' (matern, matern-tensorized, squared-exponential)"),
                    ))
                }
            };
            let sigma2 = cfg.get_or(b, "sigma2", sigma0)?;
            Generator::WellSpecifiedGp { mean, sigma2, theta, kernel }
        }
    };

    let fd = FpdConfig::default();
    ex.fpd = FpdConfig {
        sweeps: cfg.get_or(b, "sweeps", fd.sweeps)?,
        burn_in: cfg.get_or(b, "burn_in", fd.burn_in)?,
        predict_thin: cfg.get_or(b, "predict_thin", fd.predict_thin)?,
        grid: grid_spec(cfg, b, fd.grid)?,
    };
    ex.optim = optim_config(cfg, seed)?;
    ex.validate().map_err(|e| match e {
        refkrig_core::Error::InvalidConfig(msg) => {
            let line = cfg.section_line(b).unwrap_or(1);
            cfg.error_line(line, 1, msg)
        }
        other => other.into(),
    })?;
    Ok(ex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile> {
        ConfigFile::parse("test.ini", text)
    }

    fn location(e: CliError) -> (usize, usize, String) {
        match e {
            CliError::Config { line, column, message, .. } => (line, column, message),
            other => panic!("expected a located config error, got {other}"),
        }
    }

    #[test]
    fn inline_comments_are_stripped() {
        assert_eq!(strip_inline_comment("2.5 ; smooth"), "2.5");
        assert_eq!(strip_inline_comment("matern   # geometric"), "matern");
        assert_eq!(strip_inline_comment("a#b"), "a#b");
        assert_eq!(strip_inline_comment("  x  "), "x");
        assert_eq!(strip_inline_comment(""), "");
    }

    #[test]
    fn model_section_with_defaults() {
        let cfg = parse("[model]\nkernel = matern ; geometric\nnu = 2.5\n").unwrap();
        let m = ModelSettings::from_config(&cfg).unwrap();
        assert_eq!(m.family, KernelFamily::AnisotropicGeometric);
        assert_eq!(m.nu, 2.5);
        assert_eq!(m.trend, BasisKind::Constant);
        assert_eq!(m.jitter, 0.0);
        let cfg = parse("[model]\nkernel = Matern-Tensorized\nnu = 1.5\ntrend = affine\n").unwrap();
        let m = ModelSettings::from_config(&cfg).unwrap();
        assert_eq!((m.family, m.trend), (KernelFamily::Tensorized, BasisKind::Affine));
    }

    #[test]
    fn missing_kernel_points_at_the_section() {
        let cfg = parse("[run]\nseed = 1\n\n[model]\nnu = 2.5\n").unwrap();
        let (line, column, msg) = location(ModelSettings::from_config(&cfg).unwrap_err());
        assert_eq!((line, column), (4, 1));
        assert!(msg.contains("kernel"), "{msg}");
    }

    #[test]
    fn bad_values_point_at_the_value() {
        let cfg = parse("[model]\nkernel = gaussian\nnu = 2.5\n").unwrap();
        assert_eq!(location(ModelSettings::from_config(&cfg).unwrap_err()).0, 2);
        let cfg = parse("[model]\nkernel = matern\n  nu = -1\n").unwrap();
        let (line, column, _) = location(ModelSettings::from_config(&cfg).unwrap_err());
        assert_eq!((line, column), (3, 8));
        let cfg = parse("[model]\nkernel = matern\nnu = two\n").unwrap();
        assert_eq!(location(ModelSettings::from_config(&cfg).unwrap_err()).0, 3);
    }

    #[test]
    fn layout_errors_are_located() {
        let (line, _, msg) = location(parse("[model]\nkernel = matern\nnux = 2\n").unwrap_err());
        assert_eq!(line, 3);
        assert!(msg.contains("unknown key 'nux'"), "{msg}");
        let (line, _, msg) = location(parse("[run]\nseed = 1\n[modle]\n").unwrap_err());
        assert_eq!(line, 3);
        assert!(msg.contains("unknown section"), "{msg}");
        let (line, _, _) = location(parse("seed = 1\n[run]\n").unwrap_err());
        assert_eq!(line, 1);
        assert!(location(parse("[run]\nseed = 1\nseed = 2\n").unwrap_err()).2.contains("more than once"));
        assert_eq!(location(parse("[run\nseed = 1\n").unwrap_err()).0, 1);
    }

    #[test]
    fn sampler_settings() {
        let cfg = parse("[sampler]\niterations = 40\nburn_in = 10\ninit = 0.5, 2\n").unwrap();
        let c = chain_config(&cfg, 9, 2).unwrap();
        assert_eq!((c.n_iter, c.burn_in, c.thin, c.seed), (40, 10, 1, 9));
        assert_eq!(c.init.unwrap().theta(), &[0.5, 2.0]);
        assert!(chain_config(&cfg, 9, 3).is_err());
        let cfg = parse("[sampler]\ntheta_min = 0.01\n").unwrap();
        assert!(chain_config(&cfg, 0, 1).is_err());
        let cfg = parse("[sampler]\ntheta_min = 0.01\ntheta_max = 5\n").unwrap();
        assert!(matches!(
            chain_config(&cfg, 0, 1).unwrap().grid.truncation,
            Truncation::Explicit { theta_min, theta_max } if theta_min == 0.01 && theta_max == 5.0
        ));
    }

    #[test]
    fn bench_presets_and_overrides() {
        let cfg = parse("[bench]\npreset = rastrigin\n").unwrap();
        let ex = experiment_config(&cfg, None, 3).unwrap();
        assert!(matches!(ex.generator, Generator::Deterministic { function: TestFunction::Rastrigin }));
        assert_eq!(ex.seed, 3);
        let cfg = parse("[bench]\ndesigns = 4\ntests = 20\nlevels = 0.5, 0.9\nmethods = true, MLE\n").unwrap();
        let ex = experiment_config(&cfg, None, 0).unwrap();
        assert_eq!((ex.n_designs, ex.n_tests), (4, 20));
        assert_eq!(ex.levels, vec![0.5, 0.9]);
        assert_eq!(ex.methods, vec![Method::True, Method::Mle]);
        let cfg = parse("[bench]\nmethods = true, kriging\n").unwrap();
        let (line, _, msg) = location(experiment_config(&cfg, None, 0).unwrap_err());
        assert_eq!(line, 2);
        assert!(msg.contains("kriging"), "{msg}");
        let cfg = parse("[bench]\ndesigns = 0\n").unwrap();
        assert_eq!(location(experiment_config(&cfg, None, 0).unwrap_err()).0, 1);
    }

    #[test]
    fn seed_defaults_to_zero() {
        assert_eq!(master_seed(&parse("").unwrap()).unwrap(), 0);
        assert_eq!(master_seed(&parse("[run]\nseed = 17\n").unwrap()).unwrap(), 17);
    }
}
