use serde::{Deserialize, Serialize};

use super::cma::{minimize, CmaState};
use super::pid::{PidController, PidGains};
use crate::env::{episodic_error, Env, EnvConfig, EpisodeTrace};
use crate::neuromech::PlantSpec;
use crate::rng::{stream, Purpose};
use crate::Result;

/// Search box for `ln(kp), ln(ki), ln(kd)`.
pub const LOG_GAIN_BOUNDS: (f64, f64) = (-6.0, 3.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    /// Seeds of the random tuning trajectories (and initial plant states).
    pub seeds: Vec<u64>,
    /// Maximum closed-loop objective evaluations.
    pub budget: usize,
    pub initial_log_gains: [f64; 3],
    pub initial_sigma: f64,
    /// Seed of the optimiser's own sampling stream.
    pub cma_seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            budget: 1500,
            initial_log_gains: [0.0, -1.0, -3.0],
            initial_sigma: 1.5,
            cma_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRecord {
    pub log_gains: Vec<f64>,
    pub objective: f64,
}

/// Tuned gains plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Mean RMSE over the tuning trajectories (degrees or RPM).
    pub objective: f64,
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub evaluations: usize,
    pub history: Vec<TuneRecord>,
}

impl TuneReport {
    pub fn gains(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
        }
    }
}

/// Runs the PID in closed loop until the environment's episode ends. The
/// environment must already be reset.
pub fn pid_rollout(env: &mut Env, controller: &mut PidController) -> Result<EpisodeTrace> {
    controller.reset();
    let mut t = 0;
    while !env.is_done() {
        let u = controller.act(env.state(), env.target_at(t))?;
        env.step(&u)?;
        t += 1;
    }
    Ok(env.take_trace())
}

/// RMSE of one fresh-plant episode on the random trajectory of `seed`.
fn rmse_on_seed(spec: &PlantSpec, env_config: &EnvConfig, gains: PidGains, seed: u64) -> Result<f64> {
    let mut env = Env::new(spec.clone(), env_config.clone())?;
    env.reset(&mut stream(seed, Purpose::Trajectory, 0));
    let mut pid = PidController::new(gains, spec)?;
    let trace = pid_rollout(&mut env, &mut pid)?;
    Ok(episodic_error(&trace)?.rmse)
}

/// Mean RMSE over the random trajectories of `seeds`; infinite if any
/// rollout faults.
pub fn pid_objective(spec: &PlantSpec, env_config: &EnvConfig, gains: PidGains, seeds: &[u64]) -> f64 {
    let mut total = 0.0;
    for &s in seeds {
        match rmse_on_seed(spec, env_config, gains, s) {
            Ok(v) if v.is_finite() => total += v,
            _ => return f64::INFINITY,
        }
    }
    total / seeds.len().max(1) as f64
}

/// Tunes `(kp, ki, kd)` with CMA-ES in log space on fresh muscles.
/// Candidates outside the search box are evaluated at their projection
/// with a quadratic penalty on the distance.
pub fn tune_pid(spec: &PlantSpec, env_config: &EnvConfig, config: &TuneConfig) -> Result<TuneReport> {
    let mut fresh = spec.clone();
    fresh.carry_over_fatigue = false;
    let (lo, hi) = LOG_GAIN_BOUNDS;
    let objective = |x: &[f64]| {
        let clipped: Vec<f64> = x.iter().map(|v| v.clamp(lo, hi)).collect();
        let penalty: f64 = x.iter().zip(&clipped).map(|(a, b)| (a - b) * (a - b)).sum();
        pid_objective(&fresh, env_config, PidGains::from_log(&clipped), &config.seeds) + penalty
    };
    let mut state = CmaState::new(&config.initial_log_gains, config.initial_sigma)?;
    let mut rng = stream(config.cma_seed, Purpose::Cma, 0);
    let outcome = minimize(objective, &mut state, config.budget, f64::NEG_INFINITY, &mut rng)?;
    let best: Vec<f64> = outcome.best.iter().map(|v| v.clamp(lo, hi)).collect();
    let gains = PidGains::from_log(&best);
    Ok(TuneReport {
        kp: gains.kp,
        ki: gains.ki,
        kd: gains.kd,
        objective: outcome.best_fitness,
        seeds: config.seeds.clone(),
        budget: config.budget,
        evaluations: outcome.evaluations,
        history: outcome
            .history
            .into_iter()
            .map(|(log_gains, objective)| TuneRecord { log_gains, objective })
            .collect(),
    })
}
