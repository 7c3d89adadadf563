//! Recurrent state representation.
//!
//! A GRU consumes `[features(s_t); a_{t−1}]` every control step (zero action
//! at the first step) and its hidden state `h_t` becomes the agent's
//! Markovian surrogate state, with the current target appended. The GRU is
//! trained to predict the next observation's features from `h_t` through a
//! linear readout. After each training round the raw episodes are replayed
//! through the GRU to build a representation-space buffer, which hindsight
//! relabelling then doubles.

mod diagnostics;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{reward, EnvConfig, Observation, ScenarioKind};
use crate::nn::{
    clip_global_norm, gru_backward_sequence, gru_cell_step, gru_forward_sequence, AdamState, Dense, GruParams,
};
use crate::{Error, Result};

pub use diagnostics::{
    behaviour_episode, fatigue_head, fatigue_probe, pearson, prediction_mse, ConstantPredictor, FatigueHeadConfig,
    LabelledEpisode, LinearProbe,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepresentationConfig {
    pub hidden_dim: usize,
    /// Passes over the episode window per learning phase.
    pub epochs: usize,
    /// Number of most recent episodes kept for training and conversion.
    pub window: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        Self {
            hidden_dim: crate::nn::DEFAULT_HIDDEN,
            epochs: 2,
            window: 20,
            learning_rate: 1e-3,
            clip_norm: 5.0,
        }
    }
}

/// The time series of one episode: observations `s_0..s_T`, actions
/// `a_0..a_{T−1}`, rewards and time-limit flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSequence {
    pub observations: Vec<Observation>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl EpisodeSequence {
    pub fn new(initial: Observation) -> Self {
        Self {
            observations: vec![initial],
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
        }
    }

    pub fn push(&mut self, action: Vec<f64>, reward: f64, next: Observation, done: bool) {
        self.actions.push(action);
        self.rewards.push(reward);
        self.observations.push(next);
        self.dones.push(done);
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.actions.first().map_or(0, |a| a.len())
    }

    /// GRU inputs `[features(s_t); a_{t−1}]` for `t = 0..=last`, flattened.
    fn gru_inputs(&self, last: usize, n_channels: usize) -> Vec<f64> {
        let zero = vec![0.0; n_channels];
        let mut out = Vec::new();
        for t in 0..=last {
            out.extend(self.observations[t].features());
            out.extend_from_slice(if t == 0 { &zero } else { &self.actions[t - 1] });
        }
        out
    }
}

/// Representation-space replay tuple `(x_t, a_t, r_t, x_{t+1}, done)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fresh GRU sized for a scenario: input is the plant features plus one
/// value per stimulation channel, readout predicts the plant features.
pub fn new_gru<R: Rng + ?Sized>(feature_dim: usize, n_channels: usize, hidden_dim: usize, rng: &mut R) -> GruParams {
    GruParams::new(feature_dim + n_channels, hidden_dim, feature_dim, rng)
}

fn gru_input(gru: &GruParams, obs: &Observation, action: &[f64]) -> Result<Vec<f64>> {
    let mut x = obs.features();
    x.extend_from_slice(action);
    if x.len() != gru.input_dim {
        return Err(Error::shape("representation input", &[gru.input_dim], &[x.len()]));
    }
    Ok(x)
}

/// Hidden state after feeding the initial observation with a zero action.
pub fn init_hidden(gru: &GruParams, s0: &Observation) -> Result<Vec<f64>> {
    let n_channels = gru.input_dim.saturating_sub(gru.readout_dim());
    update_hidden(gru, &vec![0.0; gru.hidden_dim], s0, &vec![0.0; n_channels])
}

/// One GRU step on `[features(s); a]`.
pub fn update_hidden(gru: &GruParams, h: &[f64], s: &Observation, a: &[f64]) -> Result<Vec<f64>> {
    gru_cell_step(gru, h, &gru_input(gru, s, a)?)
}

/// The agent's input: hidden state followed by the normalised target.
pub fn represented_state(h: &[f64], obs: &Observation) -> Vec<f64> {
    let mut x = h.to_vec();
    x.push(obs.normalized_target());
    x
}

/// Hidden states `h_0..h_T` for a whole episode, flattened `[T+1, hidden]`.
pub fn hidden_trajectory(gru: &GruParams, episode: &EpisodeSequence) -> Result<Vec<f64>> {
    let inputs = episode.gru_inputs(episode.len(), gru.input_dim - gru.readout_dim());
    Ok(gru_forward_sequence(gru, &vec![0.0; gru.hidden_dim], &inputs)?.0)
}

/// Mean squared error of `readout(h_t)` against `features(s_{t+1})` over one
/// episode, with its gradient by full backpropagation through time.
pub fn prediction_loss(gru: &GruParams, episode: &EpisodeSequence) -> Result<(f64, GruParams)> {
    let steps = episode.len();
    if steps == 0 {
        return Err(Error::InvalidArgument("episode without transitions".into()));
    }
    let (n_h, d) = (gru.hidden_dim, gru.readout_dim());
    let inputs = episode.gru_inputs(steps - 1, gru.input_dim - d);
    let (hs, cache) = gru_forward_sequence(gru, &vec![0.0; n_h], &inputs)?;

    let scale = 2.0 / (steps * d) as f64;
    let mut loss = 0.0;
    let mut readout_grad = Dense::zeros(n_h, d);
    let mut dhs = vec![0.0; steps * n_h];
    let mut pred = vec![0.0; d];
    for t in 0..steps {
        let h = &hs[t * n_h..(t + 1) * n_h];
        pred.copy_from_slice(gru.readout.bias.data());
        gru.readout.matvec_acc(h, &mut pred);
        let target = episode.observations[t + 1].features();
        let dpred: Vec<f64> = pred
            .iter()
            .zip(&target)
            .map(|(p, y)| {
                loss += (p - y) * (p - y);
                scale * (p - y)
            })
            .collect();
        Dense::accumulate_grad(&mut readout_grad, h, &dpred);
        gru.readout.matvec_t_acc(&dpred, &mut dhs[t * n_h..(t + 1) * n_h]);
    }
    loss /= (steps * d) as f64;
    let (mut grads, _, _) = gru_backward_sequence(gru, &cache, &dhs)?;
    grads.readout = readout_grad;
    Ok((loss, grads))
}

/// Trains the GRU and readout to predict the next observation, one Adam
/// step per episode with global-norm clipping. Episodes are visited in a
/// fresh random order each epoch. Returns the mean loss of every epoch.
pub fn train_representation<R: Rng + ?Sized>(
    gru: &mut GruParams,
    adam: &mut AdamState,
    episodes: &[&EpisodeSequence],
    epochs: usize,
    clip_norm: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if episodes.is_empty() {
        return Err(Error::InvalidArgument(
            "representation training needs at least one episode".into(),
        ));
    }
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    let mut curve = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, mut grads) = prediction_loss(gru, episodes[i])?;
            clip_global_norm(&mut grads, clip_norm);
            adam.update(gru, &grads)?;
            total += loss;
        }
        curve.push(total / episodes.len() as f64);
    }
    Ok(curve)
}

/// Replays raw episodes through the current GRU and emits one
/// representation-space tuple per transition.
pub fn convert_buffer(gru: &GruParams, episodes: &[&EpisodeSequence]) -> Result<Vec<Transition>> {
    let n_h = gru.hidden_dim;
    let mut out = Vec::with_capacity(episodes.iter().map(|e| e.len()).sum());
    for ep in episodes {
        let hs = hidden_trajectory(gru, ep)?;
        let x = |t: usize| represented_state(&hs[t * n_h..(t + 1) * n_h], &ep.observations[t]);
        let mut current = x(0);
        for t in 0..ep.len() {
            let next = x(t + 1);
            out.push(Transition {
                state: current,
                action: ep.actions[t].clone(),
                reward: ep.rewards[t],
                next_state: next.clone(),
                done: ep.dones[t],
            });
            current = next;
        }
    }
    Ok(out)
}

/// Appends one relabelled replica per real tuple: the target in both states
/// becomes the value actually reached at `t + 1` and the reward is
/// recomputed for that target, which leaves only the effort penalty. The
/// real tuples come first, unchanged.
pub fn hindsight_augment(
    tuples: Vec<Transition>,
    episodes: &[&EpisodeSequence],
    kind: ScenarioKind,
    env_config: &EnvConfig,
) -> Result<Vec<Transition>> {
    let total: usize = episodes.iter().map(|e| e.len()).sum();
    if total != tuples.len() {
        return Err(Error::shape("hindsight source transitions", &[total], &[tuples.len()]));
    }
    let mut out = Vec::with_capacity(2 * tuples.len());
    let mut replicas = Vec::with_capacity(tuples.len());
    let mut k = 0;
    for ep in episodes {
        for t in 0..ep.len() {
            let real = &tuples[k];
            let next_obs = &ep.observations[t + 1];
            let achieved = next_obs.controlled();
            let goal = crate::env::normalize_target(next_obs.layout, achieved);
            let mut replica = real.clone();
            *replica.state.last_mut().expect("state has a target slot") = goal;
            *replica.next_state.last_mut().expect("state has a target slot") = goal;
            replica.reward = reward(kind, env_config, achieved, achieved, &real.action);
            replicas.push(replica);
            k += 1;
        }
    }
    out.extend(tuples);
    out.extend(replicas);
    Ok(out)
}

#[cfg(test)]
mod tests;
