use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use fesrl_cli::commands::{
    cmd_check, cmd_compare, cmd_eval, cmd_train, cmd_tune, select_benchmarks, ConfigArgs, EvalSource, TrajectoryChoice,
};

#[derive(Parser)]
#[command(
    name = "fesrl",
    version,
    about = "Train and evaluate FES controllers on simulated plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the recurrent SAC agent.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Independent runs with seeds seed..seed+N, each in out/rep_<k>.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Initialise the networks from this checkpoint.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        /// Episode budget, overriding the config.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a checkpoint or tuned PID gains on benchmark trajectories.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, conflicts_with = "gains", required_unless_present = "gains")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        trajectory: TrajectoryChoice,
        /// Number of random trajectories, seeded from --seed.
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Tune PID gains with CMA-ES.
    TunePid {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint and PID gains side by side.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        gains: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        trajectory: TrajectoryChoice,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the gradient, plant and optimiser oracle suite.
    Check {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            repeats,
            warm_start,
            episodes,
        } => {
            let mut c = config.resolve()?;
            if warm_start.is_some() {
                c.warm_start = warm_start;
            }
            if episodes.is_some() {
                c.episodes = episodes;
            }
            c.validate()?;
            let report = cmd_train(&c, &out, repeats)?;
            for r in &report.runs {
                println!(
                    "seed {}: {} episodes, smoothed error {:.3} (best {:.3})",
                    r.seed, r.episodes, r.final_smoothed_error, r.best_smoothed_error
                );
            }
        }
        Command::Eval {
            config,
            checkpoint,
            gains,
            trajectory,
            repeats,
            out,
        } => {
            let c = config.resolve()?;
            let benchmarks = select_benchmarks(&c, trajectory, config.seed, repeats);
            let source = match (&checkpoint, &gains) {
                (Some(p), None) => EvalSource::Checkpoint(p),
                (None, Some(p)) => EvalSource::Gains(p),
                _ => bail!("give exactly one of --checkpoint and --gains"),
            };
            let report = cmd_eval(&c, source, &benchmarks, &out)?;
            for t in &report.trajectories {
                println!(
                    "{:<18} rmse {:8.3}  mean {:8.3}  overshoots {:2}  stim {:.3}",
                    t.benchmark.label(),
                    t.rmse,
                    t.mean_error,
                    t.overshoots,
                    t.mean_stimulation
                );
            }
        }
        Command::TunePid { config, out } => {
            let g = cmd_tune(&config.resolve()?, &out)?;
            println!(
                "kp {:.6} ki {:.6} kd {:.6} objective {:.4}",
                g.kp, g.ki, g.kd, g.objective
            );
        }
        Command::Compare {
            config,
            checkpoint,
            gains,
            trajectory,
            repeats,
            out,
        } => {
            let c = config.resolve()?;
            let benchmarks = select_benchmarks(&c, trajectory, config.seed, repeats);
            print!("{}", cmd_compare(&c, &checkpoint, &gains, &benchmarks, &out)?);
        }
        Command::Check { out } => {
            let report = cmd_check(out.as_deref())?;
            for o in &report.oracles {
                let verdict = if o.passed { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {:<40} {:.3e} (limit {:.1e}) {}",
                    o.name, o.value, o.limit, o.detail
                );
            }
            if !report.passed {
                bail!("oracle suite failed");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
