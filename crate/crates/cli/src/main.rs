//! `fraudkit` command line.
//!
//! Every stage reads the JSON experiment config given by `--config` and the
//! artifacts earlier stages left in the output directory. Logs go to
//! standard error (`FRAUDKIT_LOG` sets the level); data goes to files.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 modeling error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraudkit::classify::TrainedModel;
use fraudkit::error::ErrorClass;
use fraudkit::pipeline::{self, ExperimentConfig, Stage, StageError};
use fraudkit::Error;

#[derive(Parser, Debug)]
#[command(name = "fraudkit", version, about = "Imbalanced fraud detection pipeline")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides the config output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// With `run`, stop after this stage; on its own, run just this stage.
    #[arg(long, global = true, value_name = "NAME")]
    stage: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured pipeline end to end.
    Run,
    /// Cleanse, encode, split and normalize the dataset.
    Prep,
    /// Balance the training partition with every configured method.
    Balance,
    /// Grid-search, refit and score every classifier under every balancer.
    Train,
    /// Write metric tables, t-tests and decision rules from trained results.
    Report,
    /// Fit the one-class detectors and report classification rates.
    Occ,
    /// Shapley attributions for a trained model.
    Explain(ModelArg),
    /// Counterfactual examples for a trained model.
    Cf(ModelArg),
    /// Write a synthetic two-class dataset (`data.csv` and `schema.json`).
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Saved model to use instead of the configured pick.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of rows.
    #[arg(long, default_value_t = 5000)]
    rows: usize,

    /// Share of positive rows.
    #[arg(long, default_value_t = pipeline::DEFAULT_POSITIVE_FRACTION)]
    positive_fraction: f64,

    /// Number of numeric features.
    #[arg(long, default_value_t = 6)]
    features: usize,

    /// Class overlap: 0 gives disjoint clusters, 1 identical ones.
    #[arg(long, default_value_t = 0.6)]
    difficulty: f64,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn code_for(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Model => 4,
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure {
            code: code_for(e.source.class()),
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: code_for(e.class()),
            message: e.to_string(),
        }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| config_error("--config is required for this command".into()))?;
    // an unreadable config is a config problem, not a data one
    let mut cfg = ExperimentConfig::load(path).map_err(|e| config_error(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn parse_stage(name: &str) -> Result<Stage, Failure> {
    Stage::parse(name).map_err(|e| config_error(e.to_string()))
}

fn load_model(arg: &ModelArg) -> Result<Option<TrainedModel>, Failure> {
    arg.model
        .as_ref()
        .map(|p| TrainedModel::load(p).map_err(Failure::from))
        .transpose()
}

fn single(cli: &Cli, stage: Stage, model: Option<&TrainedModel>) -> Result<Vec<String>, Failure> {
    if let Some(s) = &cli.stage {
        if parse_stage(s)? != stage {
            return Err(config_error(format!("--stage {s} conflicts with the {} command", stage.name())));
        }
    }
    let cfg = load_config(cli)?;
    Ok(pipeline::run_stage(&cfg, stage, model)?)
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<Vec<String>, Failure> {
    let dir = cli
        .out
        .clone()
        .ok_or_else(|| config_error("synth needs --out DIR".into()))?;
    let data = pipeline::synth(
        args.rows,
        args.positive_fraction,
        args.features,
        args.difficulty,
        cli.seed.unwrap_or(0),
    )?;
    pipeline::write_dataset(&data, &dir)?;
    let (neg, pos) = data.class_counts()?;
    log::info!("wrote {} rows ({neg} negative, {pos} positive) to {}", data.n_rows(), dir.display());
    Ok(vec!["data.csv".into(), "schema.json".into()])
}

fn dispatch(cli: &Cli) -> Result<Vec<String>, Failure> {
    match &cli.command {
        None => match &cli.stage {
            Some(s) => single(cli, parse_stage(s)?, None),
            None => Err(config_error("give a command or --stage NAME; see --help".into())),
        },
        Some(Command::Run) => {
            let cfg = load_config(cli)?;
            let last = cli.stage.as_deref().map(parse_stage).transpose()?;
            Ok(pipeline::run_until(&cfg, last)?)
        }
        Some(Command::Prep) => single(cli, Stage::Prep, None),
        Some(Command::Balance) => single(cli, Stage::Balance, None),
        Some(Command::Train) => single(cli, Stage::Train, None),
        Some(Command::Report) => single(cli, Stage::Report, None),
        Some(Command::Occ) => single(cli, Stage::Occ, None),
        Some(Command::Explain(m)) => single(cli, Stage::Explain, load_model(m)?.as_ref()),
        Some(Command::Cf(m)) => single(cli, Stage::Cf, load_model(m)?.as_ref()),
        Some(Command::Synth(args)) => synth(cli, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRAUDKIT_LOG", "info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(files) => {
            log::info!("{} files in the output directory", files.len());
            ExitCode::SUCCESS
        }
        Err(f) => {
            log::error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
