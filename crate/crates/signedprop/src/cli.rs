//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{self, CommandConfig, Injection};
use crate::error::Result;
use crate::experiments::Method;

#[derive(Debug, Parser)]
#[command(
    name = "signedprop",
    version,
    about = "Signed-graph propagation experiments"
)]
pub struct Cli {
    /// Overrides the config seed and SIGNEDPROP_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON config with "schema": 1; defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a CSBM graph with features and labels.
    CsbmGen {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run one propagation method and write the final features and energy trace.
    Propagate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Structural imbalance of each method's signed form on CSBM.
    SidTable {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        #[arg(long)]
        seeds: Option<usize>,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        label_ratio: Option<f64>,
    },
    /// Test accuracy and Dirichlet energy against propagation depth.
    DepthSweep {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        #[arg(long)]
        seeds: Option<usize>,
        /// Also write a JSON experiment report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Spectral f(β) and the simulated phase over a β grid.
    BetaSweep {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        /// Signed edge list to analyse.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Compare every baseline with its signed form on random instances.
    VerifyEquivalence {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run the property battery and report per-check timings.
    VerifyTheorems {
        #[command(flatten)]
        config: ConfigArg,
        /// Machine-readable report.
        #[arg(long)]
        json: bool,
        /// Force a wrong expectation to exercise the failure path.
        #[arg(long, value_enum)]
        inject: Option<Injection>,
    },
    /// Label-SBP accuracy and imbalance against the training ratio.
    TrainRatioSweep {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        out: OutArg,
        #[arg(long)]
        seeds: Option<usize>,
    },
}

fn load<C: CommandConfig>(
    arg: &ConfigArg,
    seed: Option<u64>,
    overrides: impl FnOnce(&mut C),
) -> Result<C> {
    let mut cfg: C = config::load(arg.config.as_deref())?;
    overrides(&mut cfg);
    config::finalize(cfg, seed)
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::CsbmGen { config, out_dir } => {
            let cfg: config::CsbmGenConfig = load(&config, seed, |_| {})?;
            commands::csbm_gen(&cfg, &out_dir)
        }
        Command::Propagate {
            config,
            out_dir,
            method,
            steps,
        } => {
            let cfg: config::PropagateConfig =
                load(&config, seed, |c: &mut config::PropagateConfig| {
                    if let Some(m) = method {
                        c.method = m;
                    }
                    if let Some(s) = steps {
                        c.steps = s;
                    }
                })?;
            let status = commands::propagate(&cfg, &out_dir)?;
            eprintln!(
                "status: {}",
                serde_json::to_value(status).expect("status serializes")
            );
            Ok(())
        }
        Command::SidTable {
            config,
            out,
            seeds,
            methods,
            label_ratio,
        } => {
            let cfg: config::SidTableConfig =
                load(&config, seed, |c: &mut config::SidTableConfig| {
                    if let Some(s) = seeds {
                        c.seeds = s;
                    }
                    if let Some(m) = methods {
                        c.methods = m;
                    }
                    if let Some(p) = label_ratio {
                        c.label_ratio = p;
                    }
                })?;
            commands::sid_table_cmd(&cfg, out.out.as_deref())
        }
        Command::DepthSweep {
            config,
            out,
            seeds,
            report,
        } => {
            let cfg: config::DepthSweepConfig =
                load(&config, seed, |c: &mut config::DepthSweepConfig| {
                    if let Some(s) = seeds {
                        c.seeds = s;
                    }
                })?;
            commands::depth_sweep_cmd(&cfg, out.out.as_deref(), report.as_deref())
        }
        Command::BetaSweep { config, out, graph } => {
            let cfg: config::BetaSweepConfig =
                load(&config, seed, |c: &mut config::BetaSweepConfig| {
                    if graph.is_some() {
                        c.graph = graph;
                    }
                })?;
            commands::beta_sweep_cmd(&cfg, out.out.as_deref())
        }
        Command::VerifyEquivalence {
            config,
            out,
            trials,
        } => {
            let cfg: config::EquivalenceConfig =
                load(&config, seed, |c: &mut config::EquivalenceConfig| {
                    if let Some(t) = trials {
                        c.trials = t;
                    }
                })?;
            commands::verify_equivalence_cmd(&cfg, out.out.as_deref())
        }
        Command::VerifyTheorems {
            config,
            json,
            inject,
        } => {
            let cfg: config::TheoremsConfig =
                load(&config, seed, |c: &mut config::TheoremsConfig| {
                    if inject.is_some() {
                        c.inject = inject;
                    }
                })?;
            commands::verify_theorems_cmd(&cfg, json)
        }
        Command::TrainRatioSweep { config, out, seeds } => {
            let cfg: config::TrainRatioConfig =
                load(&config, seed, |c: &mut config::TrainRatioConfig| {
                    if let Some(s) = seeds {
                        c.seeds = s;
                    }
                })?;
            commands::train_ratio_cmd(&cfg, out.out.as_deref())
        }
    }
}

/// Parses `args` and runs the command: 0 on success, 1 on a failed check, 2 on bad input.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
