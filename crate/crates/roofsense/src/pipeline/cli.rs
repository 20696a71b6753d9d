//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::commands::{self, MapRequest};
use super::config::RunConfig;
use crate::models::Modality;
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "roofsense", version, about = "Roof type and material classification from RGB orthophotos and LiDAR")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.max_epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// roof_type, roof_material or joint.
    #[arg(long, global = true)]
    pub task: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Leave wall-clock times out of logs and manifests.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Do not mirror log lines to stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Height above ground from a DSM and DTM.
    Ndsm {
        #[arg(long)]
        dsm: PathBuf,
        #[arg(long)]
        dtm: PathBuf,
        #[arg(long = "output")]
        output: PathBuf,
        /// Keep negative differences.
        #[arg(long)]
        no_clamp: bool,
    },
    /// Generate a synthetic scene or patch set.
    Synth {
        /// scene or patches.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Crop paired patches for every footprint and package them.
    Extract,
    /// Assign the stratified train/test split.
    Split,
    /// Train one backbone on one modality.
    Train {
        #[arg(long)]
        modality: Modality,
        /// Continue from the existing checkpoint.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Fuse, fit the downstream classifier and evaluate on the test split.
    FuseEval {
        #[arg(long)]
        strategy: Option<String>,
        /// lr, rf or svm.
        #[arg(long)]
        family: Option<String>,
    },
    /// Classify footprints over new imagery and write a GeoJSON map.
    PredictMap {
        /// Checkpoint directory; give one RGB and/or one LiDAR model.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        rgb: Vec<PathBuf>,
        #[arg(long)]
        ndsm: Option<PathBuf>,
        #[arg(long)]
        dsm: Option<PathBuf>,
        #[arg(long)]
        dtm: Option<PathBuf>,
        #[arg(long)]
        footprints: PathBuf,
        #[arg(long = "output")]
        output: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        scale: f64,
        /// Resample rasters to this cell size (meters) first.
        #[arg(long)]
        cell_size: Option<f64>,
    },
    /// Print the results table for fuse-eval outputs.
    Report {
        /// Run directories or metrics.json files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let c = &self.common;
        let mut o = c.overrides.clone();
        let q = |s: &str| format!("{s:?}");
        if let Some(s) = c.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(t) = &c.task {
            o.push(format!("task={}", q(t)));
        }
        if let Some(p) = &c.out {
            o.push(format!("output_dir={}", q(&p.to_string_lossy())));
        }
        if let Some(p) = &c.dataset {
            o.push(format!("dataset_dir={}", q(&p.to_string_lossy())));
        }
        if c.deterministic {
            o.push("deterministic=true".into());
        }
        match &self.command {
            Command::Synth { mode, n } => {
                o.extend(mode.iter().map(|m| format!("data.synthetic.mode={}", q(m))));
                o.extend(n.iter().map(|n| format!("data.synthetic.n={n}")));
            }
            Command::Train { epochs: Some(e), .. } => o.push(format!("train.max_epochs={e}")),
            Command::FuseEval { strategy, family } => {
                o.extend(strategy.iter().map(|s| format!("fusion.strategy={}", q(s))));
                o.extend(family.iter().map(|f| format!("fusion.family={}", q(&f.to_ascii_lowercase()))));
            }
            _ => {}
        }
        RunConfig::load(c.config.as_deref(), &o)
    }
}

/// Runs one parsed command, printing its summary to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let quiet = cli.common.quiet;
    match &cli.command {
        Command::Ndsm { dsm, dtm, output, no_clamp } => {
            let r = commands::cmd_ndsm(dsm, dtm, output, !no_clamp)?;
            println!("{}", json!({ "output": output, "width": r.width(), "height": r.height() }));
        }
        Command::Synth { .. } => println!("{}", commands::cmd_synth(&cli.run_config()?, quiet)?),
        Command::Extract => println!("{}", serde_json::to_string_pretty(&commands::cmd_extract(&cli.run_config()?, quiet)?)?),
        Command::Split => println!("{}", commands::cmd_split(&cli.run_config()?, quiet)?),
        Command::Train { modality, resume, .. } => {
            let dir = commands::cmd_train(&cli.run_config()?, *modality, *resume, quiet)?;
            println!("{}", json!({ "checkpoint": dir }));
        }
        Command::FuseEval { .. } => {
            let (summary, run) = commands::cmd_fuse_eval(&cli.run_config()?, quiet)?;
            print!("{}", super::report::render_table(std::slice::from_ref(&summary)));
            println!("{}", json!({ "run": run }));
        }
        Command::PredictMap { checkpoints, rgb, ndsm, dsm, dtm, footprints, output, scale, cell_size } => {
            let n = commands::cmd_predict_map(&MapRequest {
                checkpoints: checkpoints.clone(),
                rgb: rgb.clone(),
                ndsm: ndsm.clone(),
                dsm: dsm.clone(),
                dtm: dtm.clone(),
                footprints: footprints.clone(),
                out: output.clone(),
                scale: *scale,
                cell_size: *cell_size,
            })?;
            println!("{}", json!({ "output": output, "features": n }));
        }
        Command::Report { paths } => print!("{}", commands::cmd_report(paths)?),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| crate::Error::Config(e.to_string()))?;
    run(&cli)
}
