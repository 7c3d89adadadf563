use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::{sigmoid, softplus, MlpCache, MlpParams};
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -8.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// Policy head outputs for a batch, split into mean and clamped log-std.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub batch: usize,
    pub n: usize,
    pub mu: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether each log-std was inside the clamp range (gradient passes).
    pub(crate) log_std_free: Vec<bool>,
    pub(crate) cache: MlpCache,
}

impl PolicyOutput {
    pub(crate) fn forward(policy: &MlpParams, states: &[f64], batch: usize) -> Result<Self> {
        let (raw, cache) = policy.forward_batch(states, batch)?;
        let n = policy.out_dim() / 2;
        let mut mu = Vec::with_capacity(batch * n);
        let mut log_std = Vec::with_capacity(batch * n);
        let mut log_std_free = Vec::with_capacity(batch * n);
        for row in raw.chunks(2 * n) {
            mu.extend_from_slice(&row[..n]);
            for &s in &row[n..] {
                log_std.push(s.clamp(LOG_STD_MIN, LOG_STD_MAX));
                log_std_free.push((LOG_STD_MIN..=LOG_STD_MAX).contains(&s));
            }
        }
        Ok(Self {
            batch,
            n,
            mu,
            log_std,
            log_std_free,
            cache,
        })
    }

    /// Reparameterised samples `z = μ + σ·ε`, actions and per-row log-probs.
    pub(crate) fn squash(&self, noise: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut z = Vec::with_capacity(self.mu.len());
        let mut a = Vec::with_capacity(self.mu.len());
        let mut logp = vec![0.0; self.batch];
        for (i, eps) in noise.iter().enumerate() {
            let zi = self.mu[i] + self.log_std[i].exp() * eps;
            logp[i / self.n] += gaussian_squashed_term(zi, *eps, self.log_std[i]);
            z.push(zi);
            a.push(squash_action(zi));
        }
        (z, a, logp)
    }
}

/// `log N(ε; 0, 1) − s − log(a(1−a))` written in `z` to stay finite for
/// saturated actions.
fn gaussian_squashed_term(z: f64, eps: f64, log_std: f64) -> f64 {
    -0.5 * eps * eps - log_std - HALF_LN_TAU + softplus(z) + softplus(-z)
}

/// Sigmoid kept away from the endpoints so emitted actions lie strictly
/// inside `(0, 1)`.
pub(crate) fn squash_action(z: f64) -> f64 {
    sigmoid(z).clamp(1e-9, 1.0 - 1e-9)
}

/// Draws an action for a single represented state.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &MlpParams,
    state: &[f64],
    mode: ActionMode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let out = PolicyOutput::forward(policy, state, 1)?;
    Ok(match mode {
        ActionMode::Deterministic => out.mu.iter().map(|&m| squash_action(m)).collect(),
        ActionMode::Stochastic => out
            .mu
            .iter()
            .zip(&out.log_std)
            .map(|(&m, &s)| {
                let eps: f64 = rng.sample(StandardNormal);
                squash_action(m + s.exp() * eps)
            })
            .collect(),
    })
}

/// Log-density of an action under the squashed Gaussian, summed over
/// channels.
pub fn log_prob_squashed(mu: &[f64], log_std: &[f64], action: &[f64]) -> Result<f64> {
    if mu.len() != action.len() || log_std.len() != action.len() {
        return Err(Error::shape("log-prob inputs", &[mu.len()], &[action.len()]));
    }
    let mut total = 0.0;
    for ((&m, &s), &a) in mu.iter().zip(log_std).zip(action) {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("action {a} outside (0, 1)")));
        }
        let z = (a / (1.0 - a)).ln();
        let eps = (z - m) / s.exp();
        total += -0.5 * eps * eps - s - HALF_LN_TAU - (a * (1.0 - a)).ln();
    }
    Ok(total)
}
