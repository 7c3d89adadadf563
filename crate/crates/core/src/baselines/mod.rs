//! Conventional baseline: a discrete PID controller and the CMA-ES
//! optimiser used to tune its gains.

mod cma;
mod pid;
mod tune;

pub use cma::{cma_ask, cma_tell, minimize, CmaOutcome, CmaState};
pub use pid::{pid_step, PidController, PidGains, PidState};
pub use tune::{pid_objective, pid_rollout, tune_pid, TuneConfig, TuneRecord, TuneReport, LOG_GAIN_BOUNDS};
