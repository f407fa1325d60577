//! `ddlab` command-line driver: configuration, output handling and one
//! module per verb.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use cli::{Cli, Command};
use config::RunConfig;
pub use error::{CliError, CliResult};

/// Settings shared by every verb once flags and file are merged.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub force: bool,
    pub seed_flag: Option<u64>,
    pub seed_config: Option<u64>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = cli.common.threads.or(config.threads);
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot size the thread pool: {e}")))?;
    }
    let name = cli.command.name();
    let ctx = Context {
        out: cli
            .common
            .out
            .or(config.out.clone())
            .unwrap_or_else(|| PathBuf::from(format!("ddlab-{name}"))),
        force: cli.common.force || config.force.unwrap_or(false),
        seed_flag: cli.common.seed,
        seed_config: config.seed,
    };
    match cli.command {
        Command::Generate(args) => {
            args.apply(&mut config.generate);
            commands::generate::run(&config.generate, &ctx)
        }
        Command::Estimate(args) => {
            args.apply(&mut config.estimate);
            commands::estimate::run(&config.estimate, &ctx)
        }
        Command::Analyze(args) => {
            args.apply(&mut config.analyze);
            commands::analyze::run(&config.analyze, &ctx)
        }
        Command::Fit(args) => {
            args.apply(&mut config.fit);
            commands::fit::run(&config.fit, &ctx)
        }
        Command::Simulate(args) => {
            args.apply(&mut config.simulate);
            commands::simulate::run(&config.simulate, &ctx)
        }
        Command::Report(args) => {
            args.apply(&mut config.report);
            commands::report::run(&config.report, &ctx)
        }
    }
}
