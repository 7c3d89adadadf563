//! Checks on what the hidden state has learned.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{hidden_trajectory, EpisodeSequence};
use crate::env::Env;
use crate::nn::{Activation, AdamState, GruParams, MlpParams, OutputActivation};
use crate::{Error, Result};

/// Ridge-regularised least-squares readout `y ≈ w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearProbe {
    /// Fits on row-major `features` of shape `[targets.len(), dim]`.
    pub fn fit(features: &[f64], dim: usize, targets: &[f64], ridge: f64) -> Result<Self> {
        let n = targets.len();
        if n == 0 || features.len() != n * dim {
            return Err(Error::shape("probe features", &[n, dim], &[features.len()]));
        }
        let x = DMatrix::from_fn(n, dim + 1, |i, j| if j < dim { features[i * dim + j] } else { 1.0 });
        let y = DVector::from_column_slice(targets);
        let mut gram = x.transpose() * &x;
        for j in 0..dim {
            gram[(j, j)] += ridge;
        }
        let rhs = x.transpose() * y;
        let sol = gram
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| gram.lu().solve(&rhs))
            .ok_or_else(|| Error::NonFinite("singular probe system".into()))?;
        Ok(Self {
            weights: sol.as_slice()[..dim].to_vec(),
            bias: sol[dim],
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_all(&self, features: &[f64]) -> Vec<f64> {
        features
            .chunks(self.weights.len())
            .map(|row| self.predict(row))
            .collect()
    }
}

/// Pearson correlation; zero when either side has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Predicts the per-component mean of the next-step features seen in
/// training.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPredictor {
    pub mean: Vec<f64>,
}

impl ConstantPredictor {
    pub fn fit(episodes: &[&EpisodeSequence]) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for ep in episodes {
            for obs in &ep.observations[1..] {
                let f = obs.features();
                if sum.is_empty() {
                    sum = vec![0.0; f.len()];
                }
                sum.iter_mut().zip(&f).for_each(|(s, v)| *s += v);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::InvalidArgument("no transitions to fit".into()));
        }
        Ok(Self {
            mean: sum.into_iter().map(|s| s / count as f64).collect(),
        })
    }

    pub fn mse(&self, episodes: &[&EpisodeSequence]) -> f64 {
        let (mut total, mut count) = (0.0, 0usize);
        for ep in episodes {
            for obs in &ep.observations[1..] {
                for (p, y) in self.mean.iter().zip(obs.features()) {
                    total += (p - y) * (p - y);
                    count += 1;
                }
            }
        }
        total / count.max(1) as f64
    }
}

/// Mean squared next-step prediction error of the GRU readout.
pub fn prediction_mse(gru: &GruParams, episodes: &[&EpisodeSequence]) -> Result<f64> {
    let n_h = gru.hidden_dim;
    let (mut total, mut count) = (0.0, 0usize);
    for ep in episodes {
        let hs = hidden_trajectory(gru, ep)?;
        for t in 0..ep.len() {
            let pred = gru.read(&hs[t * n_h..(t + 1) * n_h])?;
            for (p, y) in pred.iter().zip(ep.observations[t + 1].features()) {
                total += (p - y) * (p - y);
                count += 1;
            }
        }
    }
    Ok(total / count.max(1) as f64)
}

/// An episode together with the channel-mean fatigue behind each of its
/// observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledEpisode {
    pub sequence: EpisodeSequence,
    pub fatigue: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Resets `env` and drives it with piecewise-constant random stimulation:
/// every channel holds a level drawn uniformly from `[0, max_level]` for
/// 0.5 to 3 s at a time.
pub fn behaviour_episode<R: Rng + ?Sized>(env: &mut Env, max_level: f64, rng: &mut R) -> Result<LabelledEpisode> {
    if !(0.0..=1.0).contains(&max_level) {
        return Err(Error::InvalidArgument(format!(
            "stimulation ceiling {max_level} outside [0, 1]"
        )));
    }
    let obs = env.reset(rng);
    let dt = env.spec().dt_control;
    let n = env.n_channels();
    let mut sequence = EpisodeSequence::new(obs);
    let mut fatigue = vec![mean(&env.state().fatigue())];
    let mut action = vec![0.0; n];
    let mut hold = 0usize;
    while !env.is_done() {
        if hold == 0 {
            action.iter_mut().for_each(|a| *a = rng.random_range(0.0..=max_level));
            hold = (rng.random_range(0.5..=3.0) / dt).round().max(1.0) as usize;
        }
        hold -= 1;
        let step = env.step(&action)?;
        fatigue.push(mean(&env.state().fatigue()));
        sequence.push(action.clone(), step.reward, step.observation, step.done);
    }
    Ok(LabelledEpisode { sequence, fatigue })
}

/// Hidden states of every observation in `episodes`, row-major, with the
/// matching fatigue labels.
fn hidden_with_fatigue(gru: &GruParams, episodes: &[&LabelledEpisode]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for ep in episodes {
        features.extend(hidden_trajectory(gru, &ep.sequence)?);
        labels.extend_from_slice(&ep.fatigue);
    }
    Ok((features, labels))
}

/// Fits a linear fatigue head on the hidden states of `train` and returns
/// it with its Pearson correlation on `test`.
pub fn fatigue_probe(
    gru: &GruParams,
    train: &[&LabelledEpisode],
    test: &[&LabelledEpisode],
    ridge: f64,
) -> Result<(LinearProbe, f64)> {
    let (x, y) = hidden_with_fatigue(gru, train)?;
    let probe = LinearProbe::fit(&x, gru.hidden_dim, &y, ridge)?;
    let (x_test, y_test) = hidden_with_fatigue(gru, test)?;
    let r = pearson(&probe.predict_all(&x_test), &y_test);
    Ok((probe, r))
}

/// Settings of the nonlinear fatigue head.
#[derive(Debug, Clone, PartialEq)]
pub struct FatigueHeadConfig {
    pub hidden: Vec<usize>,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for FatigueHeadConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            steps: 20_000,
            batch_size: 256,
            learning_rate: 1e-3,
        }
    }
}

/// Trains a tanh MLP from hidden states to fatigue on `train` (squared
/// error, Adam, uniform minibatches) and returns it with its Pearson
/// correlation on `test`. The GRU itself is not touched.
pub fn fatigue_head<R: Rng + ?Sized>(
    gru: &GruParams,
    train: &[&LabelledEpisode],
    test: &[&LabelledEpisode],
    config: &FatigueHeadConfig,
    rng: &mut R,
) -> Result<(MlpParams, f64)> {
    let dim = gru.hidden_dim;
    let (x, y) = hidden_with_fatigue(gru, train)?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("no training states for the fatigue head".into()));
    }
    let mut sizes = vec![dim];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut head = MlpParams::new(&sizes, Activation::Tanh, OutputActivation::Identity, rng);
    let mut adam = AdamState::new(&head, config.learning_rate);
    let b = config.batch_size;
    let mut xb = vec![0.0; b * dim];
    let mut idx = vec![0usize; b];
    for _ in 0..config.steps {
        for (k, i) in idx.iter_mut().enumerate() {
            *i = rng.random_range(0..y.len());
            xb[k * dim..(k + 1) * dim].copy_from_slice(&x[*i * dim..(*i + 1) * dim]);
        }
        let (pred, cache) = head.forward_batch(&xb, b)?;
        let dy: Vec<f64> = pred
            .iter()
            .zip(&idx)
            .map(|(p, &i)| 2.0 * (p - y[i]) / b as f64)
            .collect();
        let (grads, _) = head.backward_batch(&cache, &dy, false)?;
        adam.update(&mut head, &grads)?;
    }
    let (x_test, y_test) = hidden_with_fatigue(gru, test)?;
    let (pred, _) = head.forward_batch(&x_test, y_test.len())?;
    Ok((head, pearson(&pred, &y_test)))
}
