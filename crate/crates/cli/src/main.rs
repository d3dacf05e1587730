//! `nilwalk`: batch runner for concentration experiments on nilpotent
//! random walks.

mod config;
mod error;
mod manifest;
mod pipeline;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nilwalk_core::lie::AlgebraDoc;
use nilwalk_core::norms::{GaugeMode, GaugeParams};
use nilwalk_core::semidirect::{GroupDoc, StepDistributionDoc};
use serde::de::DeserializeOwned;

use config::{ExperimentConfig, Kind, DEFAULT_CALIBRATION_PAIRS};
use error::CliError;
use manifest::{Manifest, MANIFEST_NAME};

#[derive(Parser)]
#[command(name = "nilwalk", version, about = "Concentration experiments for random walks on nilpotent groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an algebra and its filtrations, build the gauge and sample its constants.
    AlgebraCheck {
        /// Algebra preset (heisenberg, filiform4, engel5, abelianD) or step preset.
        #[arg(long, conflicts_with = "algebra")]
        preset: Option<String>,
        /// Algebra JSON file.
        #[arg(long)]
        algebra: Option<PathBuf>,
        #[command(flatten)]
        gauge: GaugeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Simulate a walk and record running maxima; fits when reps >= 1000.
    Walk(WalkArgs),
    /// Fit concentration exponents to a walk CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Smallest checkpoint used in the fit.
        #[arg(long)]
        fit_min_n: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sample lifts in Sigma_1 and report the smallest relator defect.
    SplitScan {
        /// d4-r2 or s3-r2.
        #[arg(long, conflicts_with = "group")]
        preset: Option<String>,
        /// Group JSON file (`{"matrices": [...]}`).
        #[arg(long)]
        group: Option<PathBuf>,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run an experiment config JSON file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the config stored in a manifest and compare every artifact.
    Replay {
        /// A manifest.json, or the directory holding one.
        manifest: PathBuf,
        /// Where to write the replayed files; without it only the comparison is made.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct WalkArgs {
    /// Step preset.
    #[arg(long, conflicts_with = "mu")]
    preset: Option<String>,
    /// Step distribution JSON file; needs --algebra.
    #[arg(long, requires = "algebra")]
    mu: Option<PathBuf>,
    #[arg(long)]
    algebra: Option<PathBuf>,
    /// Flip probability for r1-flip-eps.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated checkpoint times; default powers of two from 16, and n.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<u64>>,
    /// Exponent a in M_n / n^a.
    #[arg(long)]
    scaling: Option<f64>,
    #[command(flatten)]
    gauge: GaugeArgs,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    fit_min_n: Option<u64>,
    /// Ceiling on n * reps.
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Scaled,
    Hull,
}

#[derive(Args)]
struct GaugeArgs {
    #[arg(long, value_enum)]
    gauge_mode: Option<ModeArg>,
    /// Pairs for gauge calibration.
    #[arg(long)]
    calibration_pairs: Option<usize>,
    /// Comma-separated kappa_2..kappa_s overrides.
    #[arg(long, value_delimiter = ',')]
    kappa: Option<Vec<f64>>,
}

impl GaugeArgs {
    fn params(&self, seed: u64) -> Option<GaugeParams> {
        if self.gauge_mode.is_none() && self.calibration_pairs.is_none() && self.kappa.is_none() {
            return None;
        }
        Some(GaugeParams {
            mode: match self.gauge_mode {
                Some(ModeArg::Hull) => GaugeMode::BracketHull,
                _ => GaugeMode::ScaledEuclidean,
            },
            kappa: self.kappa.clone(),
            calibration_pairs: self.calibration_pairs.unwrap_or(DEFAULT_CALIBRATION_PAIRS),
            seed,
            ..Default::default()
        })
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn walk_config(a: WalkArgs) -> Result<ExperimentConfig, CliError> {
    let mut c = ExperimentConfig::new(Kind::Walk);
    c.preset = a.preset;
    c.mu = a.mu.as_deref().map(read_json::<StepDistributionDoc>).transpose()?;
    c.algebra = a.algebra.as_deref().map(read_json::<AlgebraDoc>).transpose()?;
    c.eps = a.eps;
    c.n = Some(a.n);
    c.reps = Some(a.reps);
    c.seed = a.seed;
    c.checkpoints = a.checkpoints;
    c.scaling = a.scaling;
    c.gauge = a.gauge.params(a.seed);
    c.bootstrap = a.bootstrap;
    c.fit_min_n = a.fit_min_n;
    c.max_steps = a.max_steps;
    Ok(c.with_out_dir(Some(a.out)))
}

fn to_config(cmd: Command) -> Result<ExperimentConfig, CliError> {
    Ok(match cmd {
        Command::AlgebraCheck {
            preset,
            algebra,
            gauge,
            seed,
            out,
        } => {
            let mut c = ExperimentConfig::new(Kind::AlgebraCheck);
            c.preset = preset;
            c.algebra = algebra.as_deref().map(read_json::<AlgebraDoc>).transpose()?;
            c.gauge = gauge.params(seed);
            c.seed = seed;
            c.with_out_dir(Some(out))
        }
        Command::Walk(a) => walk_config(a)?,
        Command::Fit {
            input,
            bootstrap,
            fit_min_n,
            seed,
            out,
        } => {
            let mut c = ExperimentConfig::new(Kind::Fit);
            c.input = Some(input);
            c.bootstrap = bootstrap;
            c.fit_min_n = fit_min_n;
            c.seed = seed;
            c.with_out_dir(Some(out))
        }
        Command::SplitScan {
            preset,
            group,
            reps,
            seed,
            max_steps,
            out,
        } => {
            let mut c = ExperimentConfig::new(Kind::SplitScan);
            c.preset = preset;
            c.group = group.as_deref().map(read_json::<GroupDoc>).transpose()?;
            c.reps = Some(reps);
            c.seed = seed;
            c.max_steps = max_steps;
            c.with_out_dir(Some(out))
        }
        Command::Run { config, out } => {
            let c = ExperimentConfig::load(&config)?;
            match out {
                Some(o) => c.with_out_dir(Some(o)),
                None => c,
            }
        }
        Command::Replay { .. } => unreachable!("handled separately"),
    })
}

/// Sizes the global rayon pool from `NILWALK_THREADS`.
fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NILWALK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Schema(format!("NILWALK_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Schema(e.to_string()))
}

fn execute(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = pipeline::run(cfg)?;
    out.artifacts.write(&cfg.out_dir(), &out.manifest)?;
    match out.failure {
        Some(f) => Err(CliError::Validation(f)),
        None => Ok(()),
    }
}

fn replay(path: &Path, out_dir: Option<PathBuf>) -> Result<(), CliError> {
    let path = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    let (old, old_bytes) = Manifest::load(&path)?;
    let cfg = old.config.clone().with_out_dir(out_dir.clone());
    let new = pipeline::run(&cfg)?;
    if let Some(dir) = &out_dir {
        new.artifacts.write(dir, &new.manifest)?;
    }
    let mut diffs: Vec<String> = Vec::new();
    let fresh = new.manifest.files.iter().map(|f| (&f.name, &f.sha256));
    let before: Vec<(&String, &String)> = old.files.iter().map(|f| (&f.name, &f.sha256)).collect();
    for (name, hash) in fresh {
        if !before.contains(&(name, hash)) {
            diffs.push(name.clone());
        }
    }
    for (name, _) in &before {
        if !new.manifest.files.iter().any(|f| &f.name == *name) {
            diffs.push(format!("{name} (missing)"));
        }
    }
    if new.manifest.to_bytes() != old_bytes {
        diffs.push(MANIFEST_NAME.to_string());
    }
    if diffs.is_empty() {
        println!("replay matches: {} files", old.files.len() + 1);
        Ok(())
    } else {
        Err(CliError::Validation(format!("replay differs in {}", diffs.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Replay { manifest, out } => replay(&manifest, out),
        cmd => to_config(cmd).and_then(|c| execute(&c)),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nilwalk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
