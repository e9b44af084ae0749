//! Command-line driver for the medkit pipelines.
//!
//! Every subcommand reads one JSON run config (or the built-in default),
//! writes its outputs under `--out-dir` and finishes with `report.json`.

pub mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

pub use commands::Ctx;
use config::{load_config, BrainRun, LesionRun, LungRun, PhantomRun, RunConfig};
pub use report::Report;

#[derive(Debug, Parser)]
#[command(name = "medkit", version, about = "Classical medical image analysis pipelines")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON run config; the pipeline default is used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the run seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "medkit-out")]
    pub out_dir: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Landmark files count voxels from 1.
    #[arg(long, global = true)]
    pub one_based: bool,
    /// Print the config that would run and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic brain, lung and lesion data.
    Phantom,
    /// CT artifact removal and enhancement for a lung run.
    Preprocess,
    /// Leave-one-out brain tissue segmentation.
    Segment,
    /// Lung CT registration with TRE.
    Register,
    /// Apply a saved transform to a landmark file.
    TransformPoints {
        #[arg(long)]
        transform: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Voxel spacing as x,y,z.
        #[arg(long, value_parser = parse_spacing, default_value = "1,1,1")]
        spacing: [f64; 3],
        /// Output file, relative to the output directory.
        #[arg(long, default_value = "transformed_landmarks.txt")]
        out: String,
    },
    /// Extract lesion features to features.csv.
    Features,
    /// Cross-validated lesion classification.
    Classify,
    /// Run whichever pipeline the config names.
    Run,
    /// Score existing outputs.
    #[command(subcommand)]
    Evaluate(Evaluate),
}

#[derive(Debug, Subcommand)]
pub enum Evaluate {
    Segmentation {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        absolute_avd: bool,
    },
    Tre {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_parser = parse_spacing, default_value = "1,1,1")]
        spacing: [f64; 3],
    },
    Classification {
        #[arg(long)]
        predictions: PathBuf,
    },
}

fn parse_spacing(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad spacing component {p:?}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, z] if v.iter().all(|&c| c > 0.0 && c.is_finite()) => Ok([x, y, z]),
        [x, y] if v.iter().all(|&c| c > 0.0 && c.is_finite()) => Ok([x, y, 1.0]),
        _ => Err("spacing needs two or three positive numbers".into()),
    }
}

/// The config a pipeline command runs with: the file if given, else the
/// default, with the seed override applied.
pub fn resolve_config(global: &GlobalArgs, default: RunConfig) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => load_config(p)?,
        None => default,
    };
    if let Some(s) = global.seed {
        cfg.set_seed(s);
        cfg.validate()?;
    }
    Ok(cfg)
}

fn expect_pipeline(cfg: &RunConfig, want: &str, path: Option<&Path>) -> Result<()> {
    if cfg.name() != want {
        bail!(
            "config {} describes a {} run, not {want}",
            path.map(|p| p.display().to_string()).unwrap_or_default(),
            cfg.name()
        );
    }
    Ok(())
}

fn dispatch(ctx: &Ctx, cfg: &RunConfig) -> Result<Report> {
    match cfg {
        RunConfig::Phantom(r) => commands::cmd_phantom(ctx, r),
        RunConfig::Brain(r) => commands::cmd_segment(ctx, r),
        RunConfig::Lung(r) => commands::cmd_register(ctx, r),
        RunConfig::Lesion(r) => commands::cmd_classify(ctx, r),
    }
}

/// Runs a parsed command line on the current rayon pool.
pub fn execute(cli: &Cli) -> Result<Report> {
    let g = &cli.global;
    let ctx = Ctx {
        out_dir: g.out_dir.clone(),
        one_based: g.one_based,
    };
    let pipeline = |default: RunConfig| -> Result<Option<RunConfig>> {
        let want = default.name();
        let cfg = resolve_config(g, default)?;
        expect_pipeline(&cfg, want, g.config.as_deref())?;
        if g.dry_run {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            return Ok(None);
        }
        Ok(Some(cfg))
    };
    let dry = || Report::new("dry run", "dry-run", 0, &serde_json::Value::Null);
    match &cli.command {
        Command::Phantom => match pipeline(RunConfig::Phantom(PhantomRun::default()))? {
            Some(c) => dispatch(&ctx, &c),
            None => dry(),
        },
        Command::Segment => match pipeline(RunConfig::Brain(BrainRun::default()))? {
            Some(c) => dispatch(&ctx, &c),
            None => dry(),
        },
        Command::Register => match pipeline(RunConfig::Lung(LungRun::default()))? {
            Some(c) => dispatch(&ctx, &c),
            None => dry(),
        },
        Command::Classify => match pipeline(RunConfig::Lesion(LesionRun::default()))? {
            Some(c) => dispatch(&ctx, &c),
            None => dry(),
        },
        Command::Preprocess => match pipeline(RunConfig::Lung(LungRun::default()))? {
            Some(RunConfig::Lung(r)) => commands::cmd_preprocess(&ctx, &r),
            _ => dry(),
        },
        Command::Features => match pipeline(RunConfig::Lesion(LesionRun::default()))? {
            Some(RunConfig::Lesion(r)) => commands::cmd_features(&ctx, &r),
            _ => dry(),
        },
        Command::Run => {
            let path = g.config.as_ref().context("run needs --config")?;
            let mut cfg = load_config(path)?;
            if let Some(s) = g.seed {
                cfg.set_seed(s);
                cfg.validate()?;
            }
            if g.dry_run {
                println!("{}", serde_json::to_string_pretty(&cfg)?);
                return dry();
            }
            dispatch(&ctx, &cfg)
        }
        Command::TransformPoints {
            transform,
            points,
            spacing,
            out,
        } => commands::cmd_transform_points(&ctx, transform, points, *spacing, out),
        Command::Evaluate(e) => match e {
            Evaluate::Segmentation {
                pred,
                truth,
                absolute_avd,
            } => commands::cmd_evaluate_segmentation(&ctx, pred, truth, *absolute_avd),
            Evaluate::Tre { pred, truth, spacing } => commands::cmd_evaluate_tre(&ctx, pred, truth, *spacing),
            Evaluate::Classification { predictions } => commands::cmd_evaluate_classification(&ctx, predictions),
        },
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads, or the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
    }
}

/// Parses arguments and runs them with the requested thread count.
pub fn run_args<I, T>(args: I) -> Result<Report>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    with_jobs(cli.global.jobs, || execute(&cli))?
}
