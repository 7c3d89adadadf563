use super::policy::PolicyOutput;
use super::{Batch, SacParams};
use crate::nn::MlpParams;
use crate::{Error, Result};

fn concat_rows(a: &[f64], da: usize, b: &[f64], db: usize, rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * (da + db));
    for r in 0..rows {
        out.extend_from_slice(&a[r * da..(r + 1) * da]);
        out.extend_from_slice(&b[r * db..(r + 1) * db]);
    }
    out
}

fn check_noise(noise: &[f64], batch: &Batch) -> Result<()> {
    if noise.len() != batch.size * batch.action_dim {
        return Err(Error::shape(
            "policy noise",
            &[batch.size, batch.action_dim],
            &[noise.len()],
        ));
    }
    Ok(())
}

/// Soft Bellman targets with clipped double-Q:
/// `y = r + γ·(1 − d)·(min Q'(x', a') − α·log π(a'|x'))`, `a'` drawn from
/// the current policy with the given standard-normal `noise`. `d` is the
/// done flag when `terminal_on_done`, otherwise zero (time-limit
/// truncation keeps bootstrapping).
pub fn critic_target(params: &SacParams, batch: &Batch, noise: &[f64], terminal_on_done: bool) -> Result<Vec<f64>> {
    check_noise(noise, batch)?;
    let b = batch.size;
    let alpha = params.alpha();
    let out = PolicyOutput::forward(&params.policy, &batch.next_states, b)?;
    let (_, next_actions, logp) = out.squash(noise);
    let input = concat_rows(&batch.next_states, batch.state_dim, &next_actions, batch.action_dim, b);
    let (q1, _) = params.q1_target.forward_batch(&input, b)?;
    let (q2, _) = params.q2_target.forward_batch(&input, b)?;
    Ok((0..b)
        .map(|i| {
            let cont = if terminal_on_done && batch.dones[i] { 0.0 } else { 1.0 };
            batch.rewards[i] + params.gamma * cont * (q1[i].min(q2[i]) - alpha * logp[i])
        })
        .collect())
}

/// Mean squared error of one critic against fixed targets, with gradient.
pub fn critic_loss(q: &MlpParams, batch: &Batch, targets: &[f64]) -> Result<(f64, MlpParams)> {
    let b = batch.size;
    if targets.len() != b {
        return Err(Error::shape("critic targets", &[b], &[targets.len()]));
    }
    let input = concat_rows(&batch.states, batch.state_dim, &batch.actions, batch.action_dim, b);
    let (pred, cache) = q.forward_batch(&input, b)?;
    let mut loss = 0.0;
    let dy: Vec<f64> = pred
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            loss += (p - y) * (p - y);
            2.0 * (p - y) / b as f64
        })
        .collect();
    let (grads, _) = q.backward_batch(&cache, &dy, false)?;
    Ok((loss / b as f64, grads))
}

#[derive(Debug, Clone)]
pub struct PolicyLoss {
    pub loss: f64,
    pub grads: MlpParams,
    /// `log π(a|x)` of the reparameterised samples, one per row.
    pub log_probs: Vec<f64>,
}

/// `mean(α·log π(a|x) − min(Q1, Q2)(x, a))` with `a = sigmoid(μ + σ·ε)`,
/// differentiated through the reparameterisation. Critics and α are held
/// fixed.
pub fn policy_loss(params: &SacParams, batch: &Batch, noise: &[f64]) -> Result<PolicyLoss> {
    check_noise(noise, batch)?;
    let (b, n, ds) = (batch.size, batch.action_dim, batch.state_dim);
    let alpha = params.alpha();
    let out = PolicyOutput::forward(&params.policy, &batch.states, b)?;
    let (_, actions, logp) = out.squash(noise);
    let input = concat_rows(&batch.states, ds, &actions, n, b);
    let (q1, c1) = params.q1.forward_batch(&input, b)?;
    let (q2, c2) = params.q2.forward_batch(&input, b)?;

    let mut loss = 0.0;
    let mut pick1 = vec![0.0; b];
    let mut pick2 = vec![0.0; b];
    for i in 0..b {
        let q = if q1[i] <= q2[i] {
            pick1[i] = 1.0;
            q1[i]
        } else {
            pick2[i] = 1.0;
            q2[i]
        };
        loss += alpha * logp[i] - q;
    }
    loss /= b as f64;
    let (_, dx1) = params.q1.backward_batch(&c1, &pick1, true)?;
    let (_, dx2) = params.q2.backward_batch(&c2, &pick2, true)?;
    let (dx1, dx2) = (dx1.expect("requested"), dx2.expect("requested"));

    let inv_b = 1.0 / b as f64;
    let mut dout = vec![0.0; b * 2 * n];
    for i in 0..b {
        for j in 0..n {
            let k = i * n + j;
            let a = actions[k];
            let dq_da = dx1[i * (ds + n) + ds + j] + dx2[i * (ds + n) + ds + j];
            let dz = inv_b * (alpha * (2.0 * a - 1.0) - dq_da * a * (1.0 - a));
            dout[i * 2 * n + j] = dz;
            if out.log_std_free[k] {
                dout[i * 2 * n + n + j] = -alpha * inv_b + dz * out.log_std[k].exp() * noise[k];
            }
        }
    }
    let (grads, _) = params.policy.backward_batch(&out.cache, &dout, false)?;
    Ok(PolicyLoss {
        loss,
        grads,
        log_probs: logp,
    })
}

/// Temperature loss `−log α · mean(log π + H̄)` and its derivative with
/// respect to `log α`.
pub fn alpha_loss(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let m = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / log_probs.len().max(1) as f64;
    (-log_alpha * m, -m)
}
