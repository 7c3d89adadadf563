use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gen_trajectory, EpisodeTrace, ScenarioKind, TraceRow, Trajectory, EPISODE_STEPS};
use crate::neuromech::{plant_reset, plant_step, PlantSpec, PlantState};
use crate::{Error, Result};

/// Angles enter the networks as `θ / π`.
pub const ANGLE_SCALE: f64 = std::f64::consts::PI;
/// Angular velocities enter the networks as `ω / 10`.
pub const VELOCITY_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Weight `w_a` of the stimulation penalty.
    pub action_penalty_weight: f64,
    /// Use the reward exactly as printed, `|e| − penalty`, which grows with
    /// the tracking error. For auditing only.
    pub paper_literal_reward: bool,
    /// Cycling observation as raw `(θ, ω, ω_tar)` instead of
    /// `(sin θ, cos θ, ω, ω_tar)`.
    pub paper_faithful_obs: bool,
    pub episode_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            action_penalty_weight: 0.1,
            paper_literal_reward: false,
            paper_faithful_obs: false,
            episode_steps: EPISODE_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsLayout {
    /// `(θ, ω, θ_tar)`
    Arm,
    /// `(sin θ, cos θ, ω, ω_tar)`
    CyclingSinCos,
    /// `(θ, ω, ω_tar)`
    CyclingRaw,
}

impl ObsLayout {
    pub fn for_scenario(kind: ScenarioKind, config: &EnvConfig) -> Self {
        match kind {
            ScenarioKind::Cycling if config.paper_faithful_obs => ObsLayout::CyclingRaw,
            ScenarioKind::Cycling => ObsLayout::CyclingSinCos,
            _ => ObsLayout::Arm,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ObsLayout::CyclingSinCos => 4,
            _ => 3,
        }
    }

    /// Width of the normalised plant features (everything but the target).
    pub fn feature_dim(self) -> usize {
        self.dim() - 1
    }
}

/// The agent-visible raw state vector `s_t`, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub layout: ObsLayout,
    pub values: Vec<f64>,
}

impl Observation {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn target(&self) -> f64 {
        *self.values.last().expect("observation is never empty")
    }

    /// The tracked quantity: joint angle for the arm, cadence for the crank.
    pub fn controlled(&self) -> f64 {
        match self.layout {
            ObsLayout::Arm => self.values[0],
            ObsLayout::CyclingSinCos => self.values[2],
            ObsLayout::CyclingRaw => self.values[1],
        }
    }

    /// Normalised plant features without the target; the recurrent module's
    /// observation input and prediction target.
    pub fn features(&self) -> Vec<f64> {
        let v = &self.values;
        match self.layout {
            ObsLayout::Arm | ObsLayout::CyclingRaw => {
                vec![v[0] / ANGLE_SCALE, v[1] / VELOCITY_SCALE]
            }
            ObsLayout::CyclingSinCos => vec![v[0], v[1], v[2] / VELOCITY_SCALE],
        }
    }

    /// The target on the network scale.
    pub fn normalized_target(&self) -> f64 {
        normalize_target(self.layout, self.target())
    }
}

/// Scales a target onto the network input range.
pub fn normalize_target(layout: ObsLayout, value: f64) -> f64 {
    match layout {
        ObsLayout::Arm => value / ANGLE_SCALE,
        _ => value / VELOCITY_SCALE,
    }
}

/// Derives the observation from a plant state and the current target.
pub fn observe(layout: ObsLayout, state: &PlantState, target: f64) -> Observation {
    let values = match layout {
        ObsLayout::Arm | ObsLayout::CyclingRaw => vec![state.theta, state.omega, target],
        ObsLayout::CyclingSinCos => vec![state.theta.sin(), state.theta.cos(), state.omega, target],
    };
    Observation { layout, values }
}

/// Effort term of the reward before weighting: `a²` for the single vertical
/// channel, the mean intensity for the multi-channel scenarios.
pub fn action_penalty(kind: ScenarioKind, action: &[f64]) -> f64 {
    match kind {
        ScenarioKind::ArmVertical => action[0] * action[0],
        _ => action.iter().sum::<f64>() / action.len() as f64,
    }
}

/// Immediate reward for reaching `achieved` while tracking `target` with
/// stimulation `action`.
///
/// Default: `−|achieved − target| − w_a · penalty(action)`, error in rad
/// (arm) or rad/s (crank). With `paper_literal_reward` the printed form
/// `|achieved − target| − penalty(action)` is used instead.
pub fn reward(kind: ScenarioKind, config: &EnvConfig, achieved: f64, target: f64, action: &[f64]) -> f64 {
    let error = ((achieved - target) * (achieved - target)).sqrt();
    let penalty = action_penalty(kind, action);
    if config.paper_literal_reward {
        error - penalty
    } else {
        -error - config.action_penalty_weight * penalty
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// One rollout's worth of environment: plant, target trajectory, step
/// counter and the per-step trace.
#[derive(Debug, Clone)]
pub struct Env {
    spec: PlantSpec,
    config: EnvConfig,
    layout: ObsLayout,
    state: PlantState,
    trajectory: Trajectory,
    step: usize,
    done: bool,
    trace: EpisodeTrace,
}

impl Env {
    pub fn new(spec: PlantSpec, config: EnvConfig) -> Result<Self> {
        spec.validate()?;
        if config.episode_steps == 0 {
            return Err(Error::InvalidArgument("episode_steps must be positive".into()));
        }
        let layout = ObsLayout::for_scenario(spec.kind, &config);
        let state = PlantState::at_rest(&spec, spec.arm.theta_min);
        let trace = EpisodeTrace::new(spec.kind, spec.dt_control);
        Ok(Self {
            layout,
            state,
            trajectory: Trajectory::constant(0.0, 1.0),
            step: 0,
            done: true,
            trace,
            spec,
            config,
        })
    }

    pub fn kind(&self) -> ScenarioKind {
        self.spec.kind
    }

    pub fn spec(&self) -> &PlantSpec {
        &self.spec
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> ObsLayout {
        self.layout
    }

    pub fn n_channels(&self) -> usize {
        self.spec.n_channels()
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> EpisodeTrace {
        std::mem::replace(&mut self.trace, EpisodeTrace::new(self.spec.kind, self.spec.dt_control))
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Target in effect at control step `step`.
    pub fn target_at(&self, step: usize) -> f64 {
        self.trajectory.target(step as f64 * self.spec.dt_control)
    }

    /// Random initial plant state and a fresh random trajectory.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        let duration = self.config.episode_steps as f64 * self.spec.dt_control;
        let previous = self.state.clone();
        self.state = plant_reset(&self.spec, rng, Some(&previous));
        let trajectory = gen_trajectory(self.spec.kind, rng, duration);
        self.start(trajectory)
    }

    /// Random initial plant state, caller-provided trajectory.
    pub fn reset_with_trajectory<R: Rng + ?Sized>(&mut self, rng: &mut R, trajectory: Trajectory) -> Observation {
        let previous = self.state.clone();
        self.state = plant_reset(&self.spec, rng, Some(&previous));
        self.start(trajectory)
    }

    /// Explicit initial state and trajectory.
    pub fn reset_to(&mut self, state: PlantState, trajectory: Trajectory) -> Result<Observation> {
        if state.muscles.len() != self.spec.n_channels() {
            return Err(Error::shape(
                "plant muscle states",
                &[self.spec.n_channels()],
                &[state.muscles.len()],
            ));
        }
        self.state = state;
        Ok(self.start(trajectory))
    }

    fn start(&mut self, trajectory: Trajectory) -> Observation {
        self.trajectory = trajectory;
        self.step = 0;
        self.done = false;
        self.state.steps = 0;
        self.state.time = 0.0;
        self.trace = EpisodeTrace::new(self.spec.kind, self.spec.dt_control);
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        observe(self.layout, &self.state, self.target_at(self.step))
    }

    /// Applies `action` for one control step. The reward compares the
    /// post-step controlled quantity with the target the agent was shown.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let target = self.target_at(self.step);
        let next = plant_step(&self.spec, &self.state, action)?;
        let achieved = if self.spec.kind.is_arm() {
            next.theta
        } else {
            next.omega
        };
        let r = reward(self.spec.kind, &self.config, achieved, target, action);
        if !r.is_finite() {
            return Err(Error::SimulationFault {
                time: next.time,
                reason: "non-finite reward".into(),
            });
        }
        self.state = next;
        self.step += 1;
        self.done = self.step >= self.config.episode_steps;
        self.trace.rows.push(TraceRow {
            t: self.state.time,
            theta: self.state.theta,
            omega: self.state.omega,
            target,
            reward: r,
            stimulation: action.to_vec(),
            activation: self.state.activations(),
            fatigue: self.state.fatigue(),
        });
        Ok(StepResult {
            observation: self.observation(),
            reward: r,
            done: self.done,
        })
    }
}
