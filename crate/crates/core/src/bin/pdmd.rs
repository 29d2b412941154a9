use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdmd::experiment::{check_graph, replay, run_experiment, sweep, SweepParam};
use pdmd::{ExperimentConfig, ExperimentError};

/// Distributed online primal-dual mirror descent experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the instance seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a config and compare against a recorded rounds.csv.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one experiment per parameter value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// kappa, c, seed, scale or connect-probability; defaults to the
        /// config's sweep section.
        #[arg(long)]
        param: Option<String>,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Check the generated graph sequence of a config.
    CheckGraph {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.instance.seed = s;
            }
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            cfg.validate()?;
            let result = run_experiment(&cfg)?;
            let last = result.summary.last;
            let t = last.t as f64;
            println!("wrote {}", cfg.output.dir.display());
            println!(
                "T = {}  Reg/T = {:.6}  Viol/T = {:.6}  invariant violations = {}",
                last.t,
                last.dynamic_regret / t,
                last.violation / t,
                result.summary.run.invariant_violations
            );
            Ok(())
        }
        Command::Replay { trace, config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = replay(&trace, &cfg)?;
            match report.mismatch {
                None => {
                    println!("replay passed: {} rows match", report.rows_checked);
                    Ok(())
                }
                Some(m) => Err(ExperimentError::Replay(format!(
                    "round {} agent {}: {}",
                    m.t, m.agent, m.detail
                ))),
            }
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let section = cfg.sweep.clone();
            let param = match (param, &section) {
                (Some(name), _) => SweepParam::parse(&name)?,
                (None, Some(s)) => s.param,
                (None, None) => {
                    return Err(ExperimentError::Config(
                        "no --param given and no [sweep] section".into(),
                    ))
                }
            };
            let values = match (values.is_empty(), section) {
                (false, _) => values,
                (true, Some(s)) if s.param == param => s.values,
                _ => return Err(ExperimentError::Config("no sweep values given".into())),
            };
            let report = sweep(&cfg, param, &values)?;
            print!("{}", report.table_csv());
            println!("wrote {}", report.table.display());
            Ok(())
        }
        Command::CheckGraph { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (graphs, report) = check_graph(&cfg)?;
            match report.violation {
                None => {
                    println!(
                        "{} rounds, {} agents: doubly stochastic, weight floor {}, strongly connected over windows of {}",
                        report.rounds_checked,
                        graphs.agents(),
                        report.weight_floor,
                        report.window
                    );
                    Ok(())
                }
                Some(v) => Err(ExperimentError::Graph(v.to_string())),
            }
        }
    }
}
