//! Subcommand implementations. `main` only parses arguments and dispatches.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fesrl_core::baselines::tune_pid;
use fesrl_core::checkpoint::Checkpoint;
use fesrl_core::oracles::{cma_oracles, gradient_oracles, plant_oracles, OracleReport};
use fesrl_core::staterep::new_gru;
use fesrl_core::{PidGains, SacAgent, SacParams, ScenarioKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{checkpoint_config, export_trace, read_gru, write_json};
use crate::config::RunConfig;
use crate::evaluate::{compare, evaluate, format_table, Benchmark, Controller};
use crate::metrics::smoothed;
use crate::train::run_train;

/// Window of the smoothed episodic error reported after training.
pub const SMOOTHING_WINDOW: usize = 20;

/// Flags shared by every subcommand that builds a run configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scenario, overriding the config.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioKind>,
    /// Reward exactly as printed in the source description (auditing only).
    #[arg(long)]
    pub paper_literal_reward: bool,
    /// Raw `(θ, ω, ω_tar)` cycling observation.
    #[arg(long)]
    pub paper_faithful_obs: bool,
}

fn parse_scenario(s: &str) -> std::result::Result<ScenarioKind, String> {
    s.parse().map_err(|e: fesrl_core::Error| e.to_string())
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(kind) = self.scenario {
            config.scenario = kind;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.env.paper_literal_reward |= self.paper_literal_reward;
        config.env.paper_faithful_obs |= self.paper_faithful_obs;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub episodes: usize,
    pub final_smoothed_error: f64,
    pub best_smoothed_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub scenario: ScenarioKind,
    pub config_hash: String,
    pub smoothing_window: usize,
    pub runs: Vec<RunSummary>,
}

fn summarize_run(seed: u64, out: Option<&Path>, errors: &[f64]) -> RunSummary {
    let sm = smoothed(errors, SMOOTHING_WINDOW);
    RunSummary {
        seed,
        out: out.map(Path::to_path_buf),
        episodes: errors.len(),
        final_smoothed_error: sm.last().copied().unwrap_or(f64::NAN),
        best_smoothed_error: sm.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Trains once, or `repeats` times with seeds `seed..seed+repeats` into
/// `out/rep_<k>`. Repetitions run in parallel; each run is sequential.
pub fn cmd_train(config: &RunConfig, out: &Path, repeats: usize) -> Result<TrainReport> {
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let runs: Vec<(u64, PathBuf)> = if repeats == 1 {
        vec![(config.seed, out.to_path_buf())]
    } else {
        (0..repeats as u64)
            .map(|k| (config.seed + k, out.join(format!("rep_{k}"))))
            .collect()
    };
    let results: Vec<Result<RunSummary>> = runs
        .par_iter()
        .map(|(seed, dir)| {
            let mut c = config.clone();
            c.seed = *seed;
            let summary = run_train(&c, Some(dir), |_| true)?;
            let errors: Vec<f64> = summary.metrics.iter().map(|m| m.mean_error).collect();
            Ok(summarize_run(*seed, Some(dir), &errors))
        })
        .collect();
    let report = TrainReport {
        scenario: config.scenario,
        config_hash: config.hash(),
        smoothing_window: SMOOTHING_WINDOW,
        runs: results.into_iter().collect::<Result<_>>()?,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Networks restored from a training checkpoint.
pub struct LoadedAgent {
    pub config: RunConfig,
    pub gru: fesrl_core::GruParams,
    pub agent: SacAgent,
}

pub fn load_agent(path: &Path) -> Result<LoadedAgent> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let config = checkpoint_config(&ckpt)?;
    let spec = config.plant_spec()?;
    let layout = fesrl_core::env::ObsLayout::for_scenario(spec.kind, &config.env);
    let n = spec.n_channels();
    let hidden = config.representation.hidden_dim;
    let mut rng = fesrl_core::rng::seeded(0);
    let mut gru = new_gru(layout.feature_dim(), n, hidden, &mut rng);
    read_gru(&ckpt, &mut gru)?;
    let mut params = SacParams::new(hidden + 1, n, &config.sac, &mut rng);
    params.read_checkpoint(&ckpt)?;
    Ok(LoadedAgent {
        agent: SacAgent::from_params(params, config.sac.clone()),
        gru,
        config,
    })
}

/// Tuned gains as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsFile {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub objective: f64,
    pub seeds: Vec<u64>,
    pub budget: usize,
}

impl GainsFile {
    pub fn gains(&self) -> Result<PidGains> {
        Ok(PidGains::new(self.kp, self.ki, self.kd)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading gains {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing gains {}", path.display()))
    }
}

/// Tunes the PID and writes `gains.json` plus the full log as `report.json`.
pub fn cmd_tune(config: &RunConfig, out: &Path) -> Result<GainsFile> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let report = tune_pid(&config.plant_spec()?, &config.env, &config.tune)?;
    let gains = GainsFile {
        kp: report.kp,
        ki: report.ki,
        kd: report.kd,
        objective: report.objective,
        seeds: report.seeds.clone(),
        budget: report.budget,
    };
    write_json(&out.join("gains.json"), &gains)?;
    write_json(&out.join("report.json"), &report)?;
    Ok(gains)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajectoryChoice {
    TwoLevel,
    Ramp,
    Random,
    All,
}

/// Benchmarks selected on the command line. `Random` uses `repeats`
/// seeds starting at `seed` when given, the configured seeds otherwise.
pub fn select_benchmarks(
    config: &RunConfig,
    choice: TrajectoryChoice,
    seed: Option<u64>,
    repeats: Option<usize>,
) -> Vec<Benchmark> {
    // Without overrides the configured seeds are used; otherwise consecutive
    // seeds from `seed` (or the first configured seed).
    let random: Vec<Benchmark> = match (seed, repeats) {
        (None, None) => config.eval.random_seeds.iter().map(|&s| Benchmark::Random(s)).collect(),
        _ => {
            let base = seed.or(config.eval.random_seeds.first().copied()).unwrap_or(0);
            (0..repeats.unwrap_or(1) as u64)
                .map(|k| Benchmark::Random(base + k))
                .collect()
        }
    };
    match choice {
        TrajectoryChoice::TwoLevel => vec![Benchmark::TwoLevel],
        TrajectoryChoice::Ramp => vec![Benchmark::RampBenchmark],
        TrajectoryChoice::Random => random,
        TrajectoryChoice::All => {
            let mut all = vec![Benchmark::TwoLevel, Benchmark::RampBenchmark];
            all.extend(random);
            all
        }
    }
}

/// Controller source for `eval`.
pub enum EvalSource<'a> {
    Checkpoint(&'a Path),
    Gains(&'a Path),
}

/// Evaluates a checkpoint or a gains file, writing one trace per benchmark
/// and `report.json`. A checkpoint carries its own config; `config` must
/// agree with it on the scenario.
pub fn cmd_eval(
    config: &RunConfig,
    source: EvalSource<'_>,
    benchmarks: &[Benchmark],
    out: &Path,
) -> Result<crate::evaluate::EvalReport> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let loaded;
    let (run_config, controller) = match source {
        EvalSource::Checkpoint(path) => {
            loaded = load_agent(path)?;
            if loaded.config.scenario != config.scenario {
                bail!(
                    "checkpoint was trained on {} but the config selects {}",
                    loaded.config.scenario.name(),
                    config.scenario.name()
                );
            }
            (
                &loaded.config,
                Controller::Rl {
                    gru: &loaded.gru,
                    agent: &loaded.agent,
                },
            )
        }
        EvalSource::Gains(path) => (config, Controller::Pid(GainsFile::load(path)?.gains()?)),
    };
    let hash = run_config.hash();
    let (report, traces) = evaluate(
        &run_config.plant_spec()?,
        &run_config.env,
        controller,
        benchmarks,
        &config.eval,
        &hash,
    )?;
    for (b, trace) in benchmarks.iter().zip(&traces) {
        let path = out.join(format!("trace_{}_{}.csv", report.controller, b.label()));
        export_trace(trace, &path, &hash, run_config.seed)?;
    }
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// RL and PID on the same benchmarks; writes both traces, `report.json`
/// and returns the table text.
pub fn cmd_compare(
    config: &RunConfig,
    checkpoint: &Path,
    gains: &Path,
    benchmarks: &[Benchmark],
    out: &Path,
) -> Result<String> {
    let rl = cmd_eval(config, EvalSource::Checkpoint(checkpoint), benchmarks, &out.join("rl"))?;
    let pid = cmd_eval(config, EvalSource::Gains(gains), benchmarks, &out.join("pid"))?;
    let report = compare(rl, pid)?;
    write_json(&out.join("report.json"), &report)?;
    Ok(format_table(&report))
}

/// Runs every oracle; the report lists them all and `passed` is their
/// conjunction.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub oracles: Vec<OracleReport>,
}

pub fn cmd_check(out: Option<&Path>) -> Result<CheckReport> {
    let mut oracles = gradient_oracles();
    oracles.extend(plant_oracles());
    oracles.extend(cma_oracles());
    let report = CheckReport {
        passed: oracles.iter().all(|o| o.passed),
        oracles,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}
