//! `idsbench`: reproducible experiments on NSL-KDD.
//!
//! Verbs: `prep` fits the preprocessing pipeline, `train` fits models on a
//! stratified training partition, `eval` scores a model on the validation or
//! test split, `compare` tabulates several models and `plot` renders SVGs
//! from an evaluation directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::Split;
use config::{ExperimentConfig, ModelSelection};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "idsbench", version, about = "Multiclass intrusion-detection experiments on NSL-KDD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed for the split and every model.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Training file (NSL-KDD text format).
    #[arg(long, global = true)]
    pub train: Option<PathBuf>,

    /// Test file (NSL-KDD text format).
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,

    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the preprocessing pipeline on the training file.
    Prep,
    /// Train models on the training partition.
    Train {
        /// logreg, cart, rf, gbt or all.
        #[arg(long)]
        model: Option<String>,
    },
    /// Evaluate one model.
    Eval {
        /// Model kind or model file path.
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value = "valid")]
        split: Split,
    },
    /// Evaluate and rank two or more models.
    Compare {
        /// Model kinds or paths; repeat the flag or separate with commas.
        #[arg(long, value_delimiter = ',', required = true)]
        model: Vec<String>,
        #[arg(long, value_enum, default_value = "valid")]
        split: Split,
    },
    /// Render SVG plots from an evaluation directory.
    Plot {
        /// Evaluation directory; defaults to the one for --model and --split.
        dir: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum, default_value = "valid")]
        split: Split,
    },
}

impl Cli {
    /// Config file (or defaults) with flags applied on top.
    pub fn resolve_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.paths.out = out.clone();
        }
        if let Some(train) = &self.train {
            cfg.paths.train = train.clone();
        }
        if let Some(test) = &self.test {
            cfg.paths.test = test.clone();
        }
        if let Some(threads) = self.threads {
            cfg.experiment.threads = threads;
        }
        if let Command::Train { model: Some(m) } = &self.command {
            cfg.experiment.model = ModelSelection::parse(m)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.resolve_config()?;
    if cfg.experiment.threads > 0 {
        // A global pool can only be installed once per process; later calls
        // keep the first setting.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.experiment.threads)
            .build_global();
    }
    match &cli.command {
        Command::Prep => commands::cmd_prep(&cfg).map(drop),
        Command::Train { .. } => commands::cmd_train(&cfg).map(drop),
        Command::Eval { model, split } => commands::cmd_eval(&cfg, model, *split).map(drop),
        Command::Compare { model, split } => commands::cmd_compare(&cfg, model, *split).map(drop),
        Command::Plot { dir, model, split } => {
            let dir = match (dir, model) {
                (Some(d), _) => d.clone(),
                (None, Some(m)) => cfg.eval_dir(m, split.name()),
                (None, None) => return Err(CliError::Usage("plot needs a directory or --model".into())),
            };
            for p in commands::cmd_plot(&dir)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
