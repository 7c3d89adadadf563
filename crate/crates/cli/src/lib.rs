//! Orchestration for training, evaluation, PID tuning and comparison runs.

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod evaluate;
pub mod metrics;
pub mod train;
