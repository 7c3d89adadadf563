//! Learning functional electrical stimulation (FES) control in fatiguing
//! neuromuscular plants.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small dense network engine (affine layers, GRU cell, explicit
//!   backward passes, Adam, finite-difference checking).
//! - [`neuromech`]: lumped muscle-group plants with activation and fatigue
//!   dynamics driving an arm (vertical or horizontal) or a cycling crank.
//! - [`env`]: target trajectories, observations, rewards and episode traces.
//! - [`staterep`]: the recurrent state-representation module that turns
//!   observation histories into Markovian states, plus hindsight relabelling.
//! - [`sac`]: soft actor-critic with twin critics and sigmoid-squashed actions.
//! - [`baselines`]: PID with anti-windup and a CMA-ES optimiser to tune it.

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod checkpoint;
pub mod env;
mod error;
pub mod neuromech;
pub mod nn;
pub mod oracles;
pub mod rng;
pub mod sac;
pub mod staterep;

pub use error::{Error, Result};

pub use baselines::{CmaState, PidGains, PidState};
pub use env::{Env, EnvConfig, EpisodeTrace, Observation, ScenarioKind, Trajectory};
pub use neuromech::{PlantSpec, PlantState};
pub use nn::{AdamState, GruParams, MlpParams, Parameters, Tensor};
pub use sac::{ReplayBuffer, SacAgent, SacConfig, SacParams};
pub use staterep::{EpisodeSequence, RepresentationConfig, Transition};
