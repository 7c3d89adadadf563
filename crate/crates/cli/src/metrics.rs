use serde::{Deserialize, Serialize};

/// Per-episode training record. Only deterministic quantities live here so
/// that identical runs give byte-identical files; wall-clock goes to
/// [`TimingRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode: usize,
    /// Mean absolute tracking error (degrees or RPM).
    pub mean_error: f64,
    pub rmse: f64,
    pub mean_stimulation: f64,
    pub final_fatigue: Vec<f64>,
    pub episode_return: f64,
    /// Last-epoch next-step prediction loss of the recurrent module.
    pub representation_loss: f64,
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
    pub replay_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub episode: usize,
    pub interaction_s: f64,
    pub representation_s: f64,
    pub policy_s: f64,
    pub total_s: f64,
}

/// Training phases in execution order, for checking that learning never
/// interleaves with interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum PhaseEvent {
    Interaction {
        episode: usize,
        steps: usize,
        /// SAC update counter before and after the episode's env steps.
        updates_before: u64,
        updates_after: u64,
    },
    RepresentationTraining {
        episode: usize,
        epochs: usize,
    },
    PolicyUpdates {
        episode: usize,
        count: usize,
    },
}

/// Trailing moving average over `window` values (shorter at the start).
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= w {
            sum -= values[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

/// Whether learning phases strictly alternate with interaction and no
/// update happened during an episode's env steps.
pub fn phases_alternate(events: &[PhaseEvent]) -> bool {
    for (expected, chunk) in events.chunks(3).enumerate() {
        match chunk {
            [PhaseEvent::Interaction {
                episode: a,
                updates_before,
                updates_after,
                ..
            }, PhaseEvent::RepresentationTraining { episode: b, .. }, PhaseEvent::PolicyUpdates { episode: c, .. }] => {
                if updates_before != updates_after || *a != expected || *b != expected || *c != expected {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}
