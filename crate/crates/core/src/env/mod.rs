//! RL-facing environment: observations, target trajectories, rewards and
//! episode traces wrapped around a [`neuromech`](crate::neuromech) plant.

mod environment;
mod trace;
mod trajectory;

pub use crate::neuromech::ScenarioKind;
pub use environment::{
    action_penalty, normalize_target, observe, reward, Env, EnvConfig, ObsLayout, Observation, StepResult, ANGLE_SCALE,
    VELOCITY_SCALE,
};
pub use trace::{episodic_error, EpisodeTrace, TraceRow, TrackingError};
pub use trajectory::{gen_trajectory, target_range, Segment, Trajectory};

/// Default episode length: 90 s at 20 Hz.
pub const EPISODE_STEPS: usize = 1800;

/// rad/s → revolutions per minute.
pub fn rad_per_s_to_rpm(omega: f64) -> f64 {
    omega * 60.0 / std::f64::consts::TAU
}

pub fn rpm_to_rad_per_s(rpm: f64) -> f64 {
    rpm * std::f64::consts::TAU / 60.0
}
