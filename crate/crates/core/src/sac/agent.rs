use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::losses::{alpha_loss, critic_loss, critic_target, policy_loss};
use super::policy::{sample_action, ActionMode};
use super::ReplayBuffer;
use crate::checkpoint::Checkpoint;
use crate::nn::{Activation, AdamState, MlpParams, OutputActivation, Parameters, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    /// Gradient steps in each learning phase.
    pub updates_per_episode: usize,
    /// Defaults to `−n_channels` when unset.
    pub target_entropy: Option<f64>,
    pub initial_alpha: f64,
    /// Treat done flags as terminal. Off by default: episodes end on a time
    /// limit, so the last transition still bootstraps.
    pub terminal_on_done: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            learning_rate: 3e-4,
            hidden: vec![64, 64],
            updates_per_episode: 400,
            target_entropy: None,
            initial_alpha: 1.0,
            terminal_on_done: false,
        }
    }
}

/// Networks and scalars of the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacParams {
    pub policy: MlpParams,
    pub q1: MlpParams,
    pub q2: MlpParams,
    pub q1_target: MlpParams,
    pub q2_target: MlpParams,
    pub log_alpha: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl SacParams {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, n_channels: usize, config: &SacConfig, rng: &mut R) -> Self {
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&config.hidden);
            s.push(output);
            s
        };
        let policy = MlpParams::new(
            &sizes(state_dim, 2 * n_channels),
            Activation::Relu,
            OutputActivation::Identity,
            rng,
        );
        let critic_sizes = sizes(state_dim + n_channels, 1);
        let q1 = MlpParams::new(&critic_sizes, Activation::Relu, OutputActivation::Identity, rng);
        let q2 = MlpParams::new(&critic_sizes, Activation::Relu, OutputActivation::Identity, rng);
        Self {
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            log_alpha: config.initial_alpha.ln(),
            gamma: config.gamma,
            tau: config.tau,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn state_dim(&self) -> usize {
        self.policy.in_dim()
    }

    pub fn n_channels(&self) -> usize {
        self.policy.out_dim() / 2
    }

    pub fn write_checkpoint(&self, ckpt: &mut Checkpoint) {
        ckpt.insert_params("policy", &self.policy);
        ckpt.insert_params("q1", &self.q1);
        ckpt.insert_params("q2", &self.q2);
        ckpt.insert_params("q1t", &self.q1_target);
        ckpt.insert_params("q2t", &self.q2_target);
        ckpt.insert_tensor("log_alpha", &Tensor::scalar(self.log_alpha));
    }

    /// Loads weights into an already-shaped parameter set.
    pub fn read_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        ckpt.load_params("policy", &mut self.policy)?;
        ckpt.load_params("q1", &mut self.q1)?;
        ckpt.load_params("q2", &mut self.q2)?;
        ckpt.load_params("q1t", &mut self.q1_target)?;
        ckpt.load_params("q2t", &mut self.q2_target)?;
        let la = ckpt.tensor("log_alpha")?;
        self.log_alpha = *la
            .data()
            .first()
            .ok_or_else(|| Error::Checkpoint("empty log_alpha".into()))?;
        Ok(())
    }
}

/// `target ← (1 − τ)·target + τ·online`.
pub fn polyak_update<P: Parameters>(target: &mut P, online: &P, tau: f64) -> Result<()> {
    let src = online.tensors();
    let mut dst = target.tensors_mut();
    if src.len() != dst.len() || src.iter().zip(dst.iter()).any(|(a, b)| a.shape() != b.shape()) {
        return Err(Error::InvalidArgument(
            "polyak update between mismatched parameter sets".into(),
        ));
    }
    for (t, o) in dst.iter_mut().zip(src) {
        for (x, y) in t.data_mut().iter_mut().zip(o.data()) {
            *x = (1.0 - tau) * *x + tau * y;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SacLosses {
    pub q1: f64,
    pub q2: f64,
    pub policy: f64,
    pub alpha: f64,
    pub alpha_value: f64,
    /// Sample estimate of the policy entropy, `−mean log π`.
    pub entropy: f64,
}

/// Parameters plus optimiser state.
#[derive(Debug, Clone)]
pub struct SacAgent {
    pub params: SacParams,
    pub config: SacConfig,
    q1_opt: AdamState,
    q2_opt: AdamState,
    policy_opt: AdamState,
    alpha_opt: AdamState,
    updates: u64,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, n_channels: usize, config: SacConfig, rng: &mut R) -> Self {
        Self::from_params(SacParams::new(state_dim, n_channels, &config, rng), config)
    }

    pub fn from_params(params: SacParams, config: SacConfig) -> Self {
        let lr = config.learning_rate;
        Self {
            q1_opt: AdamState::new(&params.q1, lr),
            q2_opt: AdamState::new(&params.q2, lr),
            policy_opt: AdamState::new(&params.policy, lr),
            alpha_opt: AdamState::new(&Tensor::scalar(params.log_alpha), lr),
            params,
            config,
            updates: 0,
        }
    }

    pub fn target_entropy(&self) -> f64 {
        self.config.target_entropy.unwrap_or(-(self.params.n_channels() as f64))
    }

    pub fn update_count(&self) -> u64 {
        self.updates
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], mode: ActionMode, rng: &mut R) -> Result<Vec<f64>> {
        sample_action(&self.params.policy, state, mode, rng)
    }

    /// One gradient step on both critics, the policy and the temperature,
    /// followed by the target-network update.
    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<SacLosses> {
        let batch = buffer.sample(self.config.batch_size, rng)?;
        let n_noise = batch.size * batch.action_dim;
        let next_noise: Vec<f64> = (0..n_noise).map(|_| rng.sample(StandardNormal)).collect();
        let noise: Vec<f64> = (0..n_noise).map(|_| rng.sample(StandardNormal)).collect();

        let p = &mut self.params;
        let targets = critic_target(p, &batch, &next_noise, self.config.terminal_on_done)?;
        let (l1, g1) = critic_loss(&p.q1, &batch, &targets)?;
        let (l2, g2) = critic_loss(&p.q2, &batch, &targets)?;
        self.q1_opt.update(&mut p.q1, &g1)?;
        self.q2_opt.update(&mut p.q2, &g2)?;

        let pl = policy_loss(p, &batch, &noise)?;
        self.policy_opt.update(&mut p.policy, &pl.grads)?;

        let target_entropy = self.config.target_entropy.unwrap_or(-(p.n_channels() as f64));
        let (la, dla) = alpha_loss(p.log_alpha, &pl.log_probs, target_entropy);
        let mut log_alpha = Tensor::scalar(p.log_alpha);
        self.alpha_opt.update(&mut log_alpha, &Tensor::scalar(dla))?;
        p.log_alpha = log_alpha.data()[0];

        polyak_update(&mut p.q1_target, &p.q1, p.tau)?;
        polyak_update(&mut p.q2_target, &p.q2, p.tau)?;
        self.updates += 1;
        let entropy = -pl.log_probs.iter().sum::<f64>() / pl.log_probs.len() as f64;
        Ok(SacLosses {
            q1: l1,
            q2: l2,
            policy: pl.loss,
            alpha: la,
            alpha_value: p.alpha(),
            entropy,
        })
    }
}
