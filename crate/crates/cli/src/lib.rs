//! Command-line pipelines: sample generation, training, reconstruction,
//! shape completion and evaluation, driven by one TOML run configuration.
//!
//! Exit codes: 0 on success, 1 when some shapes failed, 2 for usage and
//! configuration errors.

pub mod commands;
pub mod config;
pub mod presets;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_eval, cmd_reconstruct, cmd_recover, cmd_sample_data, cmd_train, CodeSource, EvalOptions, ReconstructOptions, TrainOptions};
pub use config::{Provenance, RunConfig, ScheduleKind};

/// Marks an error as a usage or configuration problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub anyhow::Error);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub trait UsageExt<T> {
    fn usage(self) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> UsageExt<T> for Result<T, E> {
    fn usage(self) -> anyhow::Result<T> {
        self.map_err(|e| UsageError(e.into()).into())
    }
}

pub fn usage_error(msg: impl fmt::Display) -> anyhow::Error {
    UsageError(anyhow::anyhow!("{msg}")).into()
}

/// Result of a command that ran to completion; `failures` names the shapes
/// that could not be processed.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        u8::from(!self.failures.is_empty())
    }
}

pub fn exit_code(result: &anyhow::Result<Outcome>) -> u8 {
    match result {
        Ok(outcome) => outcome.exit_code(),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => 2,
        Err(_) => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "csdf", version, about = "Curriculum-trained neural signed distance functions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate near-surface SDF samples and a manifest.
    SampleData {
        /// Built-in shape list (desk, thin or desk+thin).
        #[arg(long)]
        preset: Option<String>,
    },
    /// Train the auto-decoder; writes checkpoints and a CSV log.
    Train {
        /// `curriculum`, `baseline` or a schedule TOML file.
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from the last checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop (and checkpoint) before this epoch.
        #[arg(long)]
        until_epoch: Option<usize>,
    },
    /// Fit latent codes and extract meshes.
    Reconstruct {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long)]
        resolution: Option<usize>,
        /// Use the codes learned in training instead of fitting new ones.
        #[arg(long, value_enum, default_value_t = CodeSource::Fit)]
        codes: CodeSource,
    },
    /// Remove local parts of the observations and complete the shapes.
    Recover {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Comma-separated removal ratios, e.g. 0.05,0.1.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Compare predicted meshes against the ground truth.
    Eval {
        /// Directory holding `<shape_id>.obj` predictions.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth manifest; defaults to the configured dataset.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::All)]
        split: SplitArg,
        #[arg(long)]
        emd_points: Option<usize>,
        #[arg(long)]
        cd_points: Option<usize>,
    },
}

/// Loads the configuration and applies flag overrides (flags win).
pub fn resolve_config(global: &GlobalArgs, command: &Command) -> anyhow::Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path).usage()?,
        None => RunConfig::default(),
    };
    if let Some(out) = &global.out {
        cfg.out = out.clone();
    }
    cfg.apply_seed(global.seed.unwrap_or(cfg.seed));
    match command {
        Command::SampleData { preset: Some(p) } => cfg.dataset.preset = Some(p.clone()),
        Command::Train { schedule, epochs, .. } => {
            if let Some(s) = schedule {
                match s.as_str() {
                    "curriculum" => cfg.schedule.kind = ScheduleKind::Curriculum,
                    "baseline" => cfg.schedule.kind = ScheduleKind::Baseline,
                    path => {
                        cfg.schedule.kind = ScheduleKind::File;
                        cfg.schedule.file = Some(PathBuf::from(path));
                    }
                }
            }
            if let Some(e) = epochs {
                cfg.schedule.epochs = *e;
            }
        }
        Command::Reconstruct { resolution: Some(r), .. } | Command::Recover { resolution: Some(r), .. } => {
            cfg.extraction.resolution = *r;
        }
        Command::Eval { emd_points, cd_points, .. } => {
            if let Some(n) = emd_points {
                cfg.metrics.emd_points = *n;
            }
            if let Some(n) = cd_points {
                cfg.metrics.cd_points = *n;
            }
        }
        _ => {}
    }
    if let Command::Recover { ratios: Some(r), .. } = command {
        cfg.recover.ratios = r.clone();
    }
    cfg.validate().usage()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = resolve_config(&cli.global, &cli.command)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs).build()?;
    pool.install(|| match &cli.command {
        Command::SampleData { .. } => cmd_sample_data(&cfg),
        Command::Train { resume, until_epoch, .. } => cmd_train(
            &cfg,
            &TrainOptions {
                resume: *resume,
                until_epoch: *until_epoch,
            },
        ),
        Command::Reconstruct { checkpoint, split, codes, .. } => cmd_reconstruct(
            &cfg,
            &ReconstructOptions {
                checkpoint: checkpoint.clone(),
                split: *split,
                codes: *codes,
            },
        ),
        Command::Recover { checkpoint, split, .. } => cmd_recover(
            &cfg,
            &ReconstructOptions {
                checkpoint: checkpoint.clone(),
                split: *split,
                codes: CodeSource::Fit,
            },
        ),
        Command::Eval { pred, manifest, split, .. } => cmd_eval(
            &cfg,
            &EvalOptions {
                pred_dir: pred.clone(),
                manifest: manifest.clone(),
                split: *split,
            },
        ),
    })
}

/// Runs a parsed command line and reports errors on stderr.
pub fn run(cli: &Cli) -> ExitCode {
    let result = execute(cli);
    match &result {
        Ok(o) if !o.failures.is_empty() => eprintln!("error: failed shapes: {}", o.failures.join(", ")),
        Err(e) => eprintln!("error: {e:#}"),
        Ok(_) => {}
    }
    ExitCode::from(exit_code(&result))
}
