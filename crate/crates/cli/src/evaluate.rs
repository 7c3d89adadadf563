//! Deterministic closed-loop evaluation of a trained agent or a PID on the
//! benchmark trajectories, and the side-by-side comparison report.

use anyhow::{bail, Result};
use fesrl_core::baselines::{pid_rollout, PidController};
use fesrl_core::env::episodic_error;
use fesrl_core::rng::{stream, Purpose};
use fesrl_core::sac::ActionMode;
use fesrl_core::staterep::{init_hidden, represented_state, update_hidden};
use fesrl_core::{
    Env, EnvConfig, EpisodeTrace, GruParams, PidGains, PlantSpec, PlantState, SacAgent, ScenarioKind, Trajectory,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;

/// Controller under evaluation.
#[derive(Clone, Copy)]
pub enum Controller<'a> {
    Rl { gru: &'a GruParams, agent: &'a SacAgent },
    Pid(PidGains),
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Rl { .. } => "rl",
            Controller::Pid(_) => "pid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum Benchmark {
    /// Alternating high/low holds, starting at rest on the first level.
    TwoLevel,
    /// Holds, steps and ramps, starting at rest on the first level.
    RampBenchmark,
    /// The random trajectory and random start of this seed.
    Random(u64),
}

impl Benchmark {
    pub fn label(&self) -> String {
        match self {
            Benchmark::TwoLevel => "two_level".into(),
            Benchmark::RampBenchmark => "ramp_benchmark".into(),
            Benchmark::Random(s) => format!("random_{s}"),
        }
    }

    /// The fixed benchmarks followed by one random trajectory per seed.
    pub fn standard_set(eval: &EvalConfig) -> Vec<Benchmark> {
        let mut set = vec![Benchmark::TwoLevel, Benchmark::RampBenchmark];
        set.extend(eval.random_seeds.iter().map(|&s| Benchmark::Random(s)));
        set
    }
}

/// Mean stimulation and fatigue over one constant-target segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldStat {
    pub segment: usize,
    pub target: f64,
    pub mean_stimulation: f64,
    pub fatigue_start: f64,
    pub fatigue_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub benchmark: Benchmark,
    pub steps: usize,
    pub rmse: f64,
    pub mean_error: f64,
    /// Step segments whose response passes the new level by more than the
    /// overshoot threshold.
    pub overshoots: usize,
    pub mean_stimulation: f64,
    /// Channel-mean fatigue sampled once per second.
    pub fatigue: Vec<f64>,
    pub holds: Vec<HoldStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub controller: String,
    pub scenario: ScenarioKind,
    pub config_hash: String,
    pub trajectories: Vec<TrajectoryReport>,
}

impl EvalReport {
    pub fn get(&self, benchmark: Benchmark) -> Option<&TrajectoryReport> {
        self.trajectories.iter().find(|t| t.benchmark == benchmark)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub benchmark: Benchmark,
    pub rl_rmse: f64,
    pub pid_rmse: f64,
    pub rl_mean_stimulation: f64,
    pub pid_mean_stimulation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub scenario: ScenarioKind,
    pub rows: Vec<CompareRow>,
    pub rl: EvalReport,
    pub pid: EvalReport,
}

/// Target trajectory and initial plant state of a fixed benchmark.
fn fixed_start(spec: &PlantSpec, benchmark: Benchmark, eval: &EvalConfig) -> (Trajectory, PlantState) {
    let trajectory = match benchmark {
        Benchmark::TwoLevel => Trajectory::two_level(spec.kind, eval.two_level_duration),
        _ => Trajectory::ramp_benchmark(spec.kind),
    };
    let first = trajectory.target(0.0);
    let state = if spec.kind.is_arm() {
        PlantState::at_rest(spec, first)
    } else {
        let mut s = PlantState::at_rest(spec, 0.0);
        s.omega = first;
        s
    };
    (trajectory, state)
}

fn rl_rollout(env: &mut Env, gru: &GruParams, agent: &SacAgent) -> Result<EpisodeTrace> {
    // The deterministic policy never draws; the stream only satisfies the signature.
    let mut rng = stream(0, Purpose::Evaluation, 0);
    let mut obs = env.observation();
    let mut h = init_hidden(gru, &obs)?;
    while !env.is_done() {
        let a = agent.act(&represented_state(&h, &obs), ActionMode::Deterministic, &mut rng)?;
        let step = env.step(&a)?;
        h = update_hidden(gru, &h, &step.observation, &a)?;
        obs = step.observation;
    }
    Ok(env.take_trace())
}

/// One deterministic rollout on a fresh-muscle plant.
pub fn rollout(
    spec: &PlantSpec,
    env_config: &EnvConfig,
    controller: Controller<'_>,
    benchmark: Benchmark,
    eval: &EvalConfig,
) -> Result<(EpisodeTrace, Trajectory)> {
    let mut env = match benchmark {
        Benchmark::Random(seed) => {
            let mut env = Env::new(spec.clone(), env_config.clone())?;
            env.reset(&mut stream(seed, Purpose::Trajectory, 0));
            env
        }
        _ => {
            let (trajectory, state) = fixed_start(spec, benchmark, eval);
            let mut cfg = env_config.clone();
            cfg.episode_steps = (trajectory.duration() / spec.dt_control).round() as usize;
            let mut env = Env::new(spec.clone(), cfg)?;
            env.reset_to(state, trajectory)?;
            env
        }
    };
    let trajectory = env.trajectory().clone();
    let trace = run_controller(&mut env, controller, spec)?;
    Ok((trace, trajectory))
}

fn run_controller(env: &mut Env, controller: Controller<'_>, spec: &PlantSpec) -> Result<EpisodeTrace> {
    Ok(match controller {
        Controller::Rl { gru, agent } => rl_rollout(env, gru, agent)?,
        Controller::Pid(gains) => pid_rollout(env, &mut PidController::new(gains, spec)?)?,
    })
}

fn channel_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-segment stimulation and fatigue, for constant segments only.
pub fn hold_stats(trace: &EpisodeTrace, trajectory: &Trajectory) -> Vec<HoldStat> {
    let mut rows_by_segment: Vec<Vec<usize>> = vec![Vec::new(); trajectory.segments.len()];
    for i in 0..trace.rows.len() {
        rows_by_segment[trajectory.segment_index(i as f64 * trace.dt)].push(i);
    }
    rows_by_segment
        .iter()
        .enumerate()
        .filter(|(k, rows)| !rows.is_empty() && !trajectory.segments[*k].ramp)
        .map(|(k, rows)| {
            let first = &trace.rows[rows[0]];
            let last = &trace.rows[*rows.last().unwrap()];
            HoldStat {
                segment: k,
                target: trajectory.segments[k].value,
                mean_stimulation: rows
                    .iter()
                    .map(|&i| channel_mean(&trace.rows[i].stimulation))
                    .sum::<f64>()
                    / rows.len() as f64,
                fatigue_start: channel_mean(&first.fatigue),
                fatigue_end: channel_mean(&last.fatigue),
            }
        })
        .collect()
}

/// Counts step segments on which the controlled quantity passes the new
/// level by more than `threshold` (degrees or RPM) in the step direction.
pub fn count_overshoots(trace: &EpisodeTrace, trajectory: &Trajectory, threshold: f64) -> usize {
    let errors = trace.errors();
    let mut worst = vec![f64::NEG_INFINITY; trajectory.segments.len()];
    for (i, e) in errors.iter().enumerate() {
        let seg = trajectory.segment_index(i as f64 * trace.dt);
        if seg == 0 {
            continue;
        }
        let s = &trajectory.segments[seg];
        let prev = trajectory.segments[seg - 1].value;
        if s.ramp || s.value == prev {
            continue;
        }
        let direction = (s.value - prev).signum();
        worst[seg] = worst[seg].max(direction * e);
    }
    worst.iter().filter(|&&w| w > threshold).count()
}

pub fn summarize(
    benchmark: Benchmark,
    trace: &EpisodeTrace,
    trajectory: &Trajectory,
    eval: &EvalConfig,
) -> Result<TrajectoryReport> {
    let err = episodic_error(trace)?;
    let per_second = (1.0 / trace.dt).round().max(1.0) as usize;
    Ok(TrajectoryReport {
        benchmark,
        steps: trace.rows.len(),
        rmse: err.rmse,
        mean_error: err.mean_abs,
        overshoots: count_overshoots(trace, trajectory, eval.overshoot_threshold),
        mean_stimulation: trace.mean_stimulation(),
        fatigue: trace
            .rows
            .iter()
            .skip(per_second - 1)
            .step_by(per_second)
            .map(|r| channel_mean(&r.fatigue))
            .collect(),
        holds: hold_stats(trace, trajectory),
    })
}

/// Evaluates `controller` on every benchmark in parallel. Results keep the
/// order of `benchmarks`.
pub fn evaluate(
    spec: &PlantSpec,
    env_config: &EnvConfig,
    controller: Controller<'_>,
    benchmarks: &[Benchmark],
    eval: &EvalConfig,
    config_hash: &str,
) -> Result<(EvalReport, Vec<EpisodeTrace>)> {
    let results: Vec<Result<(TrajectoryReport, EpisodeTrace)>> = benchmarks
        .par_iter()
        .map(|&b| {
            let (trace, trajectory) = rollout(spec, env_config, controller, b, eval)?;
            Ok((summarize(b, &trace, &trajectory, eval)?, trace))
        })
        .collect();
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        let (report, trace) = r?;
        reports.push(report);
        traces.push(trace);
    }
    Ok((
        EvalReport {
            controller: controller.name().into(),
            scenario: spec.kind,
            config_hash: config_hash.into(),
            trajectories: reports,
        },
        traces,
    ))
}

/// Pairs two reports over the same benchmarks.
pub fn compare(rl: EvalReport, pid: EvalReport) -> Result<CompareReport> {
    if rl.scenario != pid.scenario {
        bail!("comparing reports of different scenarios");
    }
    let mut rows = Vec::new();
    for r in &rl.trajectories {
        let Some(p) = pid.get(r.benchmark) else {
            bail!("benchmark {} missing from the PID report", r.benchmark.label());
        };
        rows.push(CompareRow {
            benchmark: r.benchmark,
            rl_rmse: r.rmse,
            pid_rmse: p.rmse,
            rl_mean_stimulation: r.mean_stimulation,
            pid_mean_stimulation: p.mean_stimulation,
        });
    }
    Ok(CompareReport {
        scenario: rl.scenario,
        rows,
        rl,
        pid,
    })
}

/// Plain-text table of a comparison, one row per benchmark.
pub fn format_table(report: &CompareReport) -> String {
    let unit = if report.scenario.is_arm() { "deg" } else { "rpm" };
    let mut out = format!(
        "{:<18} {:>12} {:>12}\n",
        "trajectory",
        format!("rl rmse {unit}"),
        format!("pid rmse {unit}")
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{:<18} {:>12.3} {:>12.3}\n",
            r.benchmark.label(),
            r.rl_rmse,
            r.pid_rmse
        ));
    }
    out
}
