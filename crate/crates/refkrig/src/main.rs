use clap::{Args, Parser, Subcommand};
use refkrig::{execute, sibling, CliError, CommandSpec, Input, Invocation, Outcome, Overrides, RunManifest, ScaleFlag};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Universal Kriging with the Gibbs reference posterior on Matérn correlation lengths.
#[derive(Debug, Parser)]
#[command(name = "refkrig", version, about)]
struct Cli {
    /// More log output (repeat for debug messages).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunFlags {
    /// Master seed, overriding `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweeps of the Gibbs sampler (FPD sweeps for `bench`).
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every k-th sweep (prediction thinning for `bench`).
    #[arg(long)]
    thin: Option<usize>,
    /// Run even when the existence checklist does not cover the model.
    #[arg(long)]
    force: bool,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, iterations: self.iters, burn_in: self.burn_in, thin: self.thin, force: self.force }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report whether the posterior is known to be proper for this model.
    Check {
        config: PathBuf,
        /// Observations; without them the `[design]` section is used.
        data: Option<PathBuf>,
        /// Write the report as JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the correlation lengths by MLE or MAP.
    Fit {
        config: PathBuf,
        data: PathBuf,
        #[arg(long, default_value = "mle", value_parser = ["mle", "map"])]
        method: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Draw from the Gibbs reference posterior.
    Sample {
        config: PathBuf,
        data: PathBuf,
        /// Chain CSV; diagnostics and manifest are written next to it.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Prediction intervals at target points.
    Predict {
        config: PathBuf,
        data: PathBuf,
        targets: PathBuf,
        /// mle, map, fpd or fixed:θ1,θ2,... (default: `[predict] method`, else fpd).
        #[arg(long)]
        method: Option<String>,
        /// Interval level (default: `[predict] level`, else 0.95).
        #[arg(long)]
        level: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Monte-Carlo coverage study.
    Bench {
        config: PathBuf,
        /// 50 designs of 200 test points.
        #[arg(long, conflicts_with = "paper_scale")]
        desk_scale: bool,
        /// 500 designs of 1000 test points.
        #[arg(long)]
        paper_scale: bool,
        /// Worker threads; 0 uses every core. Results do not depend on it.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Replay a run from its manifest.
    Rerun {
        manifest: PathBuf,
        /// Primary output path (default: the one recorded in the manifest).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Compare with the recorded outputs instead of writing files.
        #[arg(long)]
        verify: bool,
    },
}

fn read(path: &Path) -> refkrig::Result<Input> {
    let contents = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    Ok(Input { path: path.display().to_string(), contents })
}

fn write(path: &Path, contents: &str) -> refkrig::Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

// Writes the artifacts and, next to the primary output, the manifest.
fn save(outcome: &mut Outcome, primary: &Path) -> refkrig::Result<()> {
    let mut paths = Vec::new();
    for a in &outcome.artifacts {
        let p = sibling(primary, a.suffix);
        write(&p, &a.contents)?;
        paths.push(p.display().to_string());
    }
    outcome.manifest.outputs = paths;
    write(&sibling(primary, ".manifest.json"), &outcome.manifest.to_json())
}

fn invocation(spec: CommandSpec, overrides: Overrides, config: &Path, data: Option<&Path>, targets: Option<&Path>) -> refkrig::Result<Invocation> {
    Ok(Invocation {
        spec,
        overrides,
        config: read(config)?,
        data: data.map(read).transpose()?,
        targets: targets.map(read).transpose()?,
    })
}

fn run(cli: Cli) -> refkrig::Result<u8> {
    let (inv, output) = match cli.command {
        Command::Check { config, data, output, seed } => {
            let overrides = Overrides { seed, ..Overrides::default() };
            (invocation(CommandSpec::Check, overrides, &config, data.as_deref(), None)?, output)
        }
        Command::Fit { config, data, method, output, flags } => {
            (invocation(CommandSpec::Fit { method }, flags.overrides(), &config, Some(&data), None)?, output)
        }
        Command::Sample { config, data, output, flags } => {
            (invocation(CommandSpec::Sample, flags.overrides(), &config, Some(&data), None)?, Some(output))
        }
        Command::Predict { config, data, targets, method, level, output, flags } => {
            let spec = CommandSpec::Predict { method, level };
            (invocation(spec, flags.overrides(), &config, Some(&data), Some(&targets))?, Some(output))
        }
        Command::Bench { config, desk_scale, paper_scale, threads, output, flags } => {
            let scale = if paper_scale {
                Some(ScaleFlag::Paper)
            } else if desk_scale {
                Some(ScaleFlag::Desk)
            } else {
                None
            };
            (invocation(CommandSpec::Bench { scale, threads }, flags.overrides(), &config, None, None)?, Some(output))
        }
        Command::Rerun { manifest, output, verify } => return rerun(&manifest, output, verify),
    };
    let mut outcome = execute(&inv)?;
    print!("{}", outcome.summary);
    if let Some(primary) = output {
        save(&mut outcome, &primary)?;
    }
    Ok(outcome.exit_code)
}

fn rerun(path: &Path, output: Option<PathBuf>, verify: bool) -> refkrig::Result<u8> {
    let text = read(path)?;
    let m = RunManifest::from_json(&text.path, &text.contents)?;
    let inv = Invocation { spec: m.spec, overrides: m.overrides, config: m.config, data: m.data, targets: m.targets };
    let mut outcome = execute(&inv)?;
    let recorded = m.outputs.first().map(PathBuf::from);
    if verify {
        let primary = recorded.ok_or_else(|| CliError::Usage(String::from("the manifest records no outputs")))?;
        let mut differ = Vec::new();
        for a in &outcome.artifacts {
            let p = sibling(&primary, a.suffix);
            let old = std::fs::read_to_string(&p).map_err(|e| CliError::Io { path: p.clone(), source: e })?;
            if old != a.contents {
                differ.push(p.display().to_string());
            }
        }
        if differ.is_empty() {
            println!("reproduced {} output files exactly", outcome.artifacts.len());
            return Ok(0);
        }
        return Err(CliError::Data(format!("outputs differ from the recorded run: {}", differ.join(", "))));
    }
    print!("{}", outcome.summary);
    if let Some(primary) = output.or(recorded) {
        save(&mut outcome, &primary)?;
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
