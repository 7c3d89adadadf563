//! Soft actor-critic over `[0, 1]^n` actions.
//!
//! The policy head outputs a mean and a log standard deviation per channel;
//! actions are `sigmoid(μ + σ·ε)`. Twin critics with Polyak-averaged
//! targets and an automatically tuned entropy temperature complete the
//! agent.

mod agent;
mod buffer;
mod losses;
mod policy;

pub use agent::{polyak_update, SacAgent, SacConfig, SacLosses, SacParams};
pub use buffer::{Batch, ReplayBuffer};
pub use losses::{alpha_loss, critic_loss, critic_target, policy_loss, PolicyLoss};
pub use policy::{log_prob_squashed, sample_action, ActionMode, PolicyOutput, LOG_STD_MAX, LOG_STD_MIN};
