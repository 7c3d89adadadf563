use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ensure_finite, sigmoid, Dense, Parameters, Tensor};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 20;

const CANDIDATE_BOUND: f64 = 1.0 - 1e-12;

/// Gated recurrent unit with a linear readout from hidden state to the
/// observation space.
///
/// Gate weights act on the concatenation `[x; h]` (input first), so each is
/// shaped `[hidden, input + hidden]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub update: Dense,
    pub reset: Dense,
    pub candidate: Dense,
    pub readout: Dense,
}

impl GruParams {
    /// Glorot gates, zero biases except the update gate at −1.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, readout_dim: usize, rng: &mut R) -> Self {
        let cat = input_dim + hidden_dim;
        let mut update = Dense::glorot(cat, hidden_dim, rng);
        update.bias.fill(-1.0);
        let reset = Dense::glorot(cat, hidden_dim, rng);
        let candidate = Dense::glorot(cat, hidden_dim, rng);
        let readout = Dense::glorot(hidden_dim, readout_dim, rng);
        Self {
            input_dim,
            hidden_dim,
            update,
            reset,
            candidate,
            readout,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, readout_dim: usize) -> Self {
        let cat = input_dim + hidden_dim;
        Self {
            input_dim,
            hidden_dim,
            update: Dense::zeros(cat, hidden_dim),
            reset: Dense::zeros(cat, hidden_dim),
            candidate: Dense::zeros(cat, hidden_dim),
            readout: Dense::zeros(hidden_dim, readout_dim),
        }
    }

    pub fn readout_dim(&self) -> usize {
        self.readout.out_dim()
    }

    /// Maps a hidden state to the predicted observation.
    pub fn read(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.readout.apply(h)
    }

    pub fn validate(&self) -> Result<()> {
        let cat = self.input_dim + self.hidden_dim;
        for (name, gate) in [
            ("update", &self.update),
            ("reset", &self.reset),
            ("candidate", &self.candidate),
        ] {
            if gate.weight.shape() != [self.hidden_dim, cat] || gate.bias.shape() != [self.hidden_dim] {
                return Err(Error::shape(
                    format!("gru {name} gate"),
                    &[self.hidden_dim, cat],
                    gate.weight.shape(),
                ));
            }
        }
        if self.readout.in_dim() != self.hidden_dim {
            return Err(Error::shape(
                "gru readout",
                &[self.hidden_dim],
                &[self.readout.in_dim()],
            ));
        }
        Ok(())
    }

    fn check_dims(&self, h: &[f64], x: &[f64]) -> Result<()> {
        if h.len() != self.hidden_dim {
            return Err(Error::shape("gru hidden state", &[self.hidden_dim], &[h.len()]));
        }
        if x.len() != self.input_dim {
            return Err(Error::shape("gru input", &[self.input_dim], &[x.len()]));
        }
        Ok(())
    }

    /// One cell step writing intermediate values into `step`.
    fn step_into(&self, h: &[f64], x: &[f64], step: &mut StepBuffers<'_>) {
        let n_in = self.input_dim;
        step.xh[..n_in].copy_from_slice(x);
        step.xh[n_in..].copy_from_slice(h);

        step.z.copy_from_slice(self.update.bias.data());
        self.update.matvec_acc(step.xh, step.z);
        step.z.iter_mut().for_each(|v| *v = sigmoid(*v));

        step.r.copy_from_slice(self.reset.bias.data());
        self.reset.matvec_acc(step.xh, step.r);
        step.r.iter_mut().for_each(|v| *v = sigmoid(*v));

        step.xrh[..n_in].copy_from_slice(x);
        for ((o, r), hv) in step.xrh[n_in..].iter_mut().zip(step.r.iter()).zip(h) {
            *o = r * hv;
        }
        step.c.copy_from_slice(self.candidate.bias.data());
        self.candidate.matvec_acc(step.xrh, step.c);
        // Keeps h' strictly inside (−1, 1) even when tanh rounds to ±1.
        step.c
            .iter_mut()
            .for_each(|v| *v = v.tanh().clamp(-CANDIDATE_BOUND, CANDIDATE_BOUND));

        for (i, hn) in step.h_next.iter_mut().enumerate().take(self.hidden_dim) {
            *hn = (1.0 - step.z[i]) * h[i] + step.z[i] * step.c[i];
        }
    }
}

impl Parameters for GruParams {
    fn names(&self) -> Vec<String> {
        ["update", "reset", "candidate", "readout"]
            .iter()
            .flat_map(|g| [format!("{g}.weight"), format!("{g}.bias")])
            .collect()
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.update.tensors();
        v.extend(self.reset.tensors());
        v.extend(self.candidate.tensors());
        v.extend(self.readout.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.update.tensors_mut();
        v.extend(self.reset.tensors_mut());
        v.extend(self.candidate.tensors_mut());
        v.extend(self.readout.tensors_mut());
        v
    }
}

struct StepBuffers<'a> {
    xh: &'a mut [f64],
    xrh: &'a mut [f64],
    z: &'a mut [f64],
    r: &'a mut [f64],
    c: &'a mut [f64],
    h_next: &'a mut [f64],
}

/// Standard GRU update:
/// `z = σ(W_z[x;h] + b_z)`, `r = σ(W_r[x;h] + b_r)`,
/// `h̃ = tanh(W_h[x; r⊙h] + b_h)`, `h' = (1 − z)⊙h + z⊙h̃`.
pub fn gru_cell_step(params: &GruParams, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    params.check_dims(h, x)?;
    ensure_finite(x, "gru input")?;
    ensure_finite(h, "gru hidden state")?;
    let (n_in, n_h) = (params.input_dim, params.hidden_dim);
    let mut xh = vec![0.0; n_in + n_h];
    let mut xrh = vec![0.0; n_in + n_h];
    let (mut z, mut r, mut c, mut h_next) = (vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h]);
    params.step_into(
        h,
        x,
        &mut StepBuffers {
            xh: &mut xh,
            xrh: &mut xrh,
            z: &mut z,
            r: &mut r,
            c: &mut c,
            h_next: &mut h_next,
        },
    );
    Ok(h_next)
}

/// Intermediate values of an unrolled sequence, stored flat per step.
#[derive(Debug, Clone)]
pub struct GruSequenceCache {
    steps: usize,
    input_dim: usize,
    hidden_dim: usize,
    h0: Vec<f64>,
    xh: Vec<f64>,
    xrh: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
    hs: Vec<f64>,
}

impl GruSequenceCache {
    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    /// Hidden state after consuming input `t`.
    pub fn hidden(&self, t: usize) -> &[f64] {
        &self.hs[t * self.hidden_dim..(t + 1) * self.hidden_dim]
    }

    fn prev_hidden(&self, t: usize) -> &[f64] {
        if t == 0 {
            &self.h0
        } else {
            self.hidden(t - 1)
        }
    }
}

/// Unrolls the cell over `inputs` (`[steps, input_dim]`, row-major) from
/// `h0`. Returns the hidden states `[steps, hidden_dim]` and the cache for
/// backpropagation through time.
pub fn gru_forward_sequence(params: &GruParams, h0: &[f64], inputs: &[f64]) -> Result<(Vec<f64>, GruSequenceCache)> {
    let (n_in, n_h) = (params.input_dim, params.hidden_dim);
    if h0.len() != n_h {
        return Err(Error::shape("gru initial state", &[n_h], &[h0.len()]));
    }
    if n_in == 0 || !inputs.len().is_multiple_of(n_in) {
        return Err(Error::shape("gru input sequence", &[n_in], &[inputs.len()]));
    }
    ensure_finite(inputs, "gru input sequence")?;
    let steps = inputs.len() / n_in;
    let cat = n_in + n_h;
    let mut cache = GruSequenceCache {
        steps,
        input_dim: n_in,
        hidden_dim: n_h,
        h0: h0.to_vec(),
        xh: vec![0.0; steps * cat],
        xrh: vec![0.0; steps * cat],
        z: vec![0.0; steps * n_h],
        r: vec![0.0; steps * n_h],
        c: vec![0.0; steps * n_h],
        hs: vec![0.0; steps * n_h],
    };
    let mut h = h0.to_vec();
    for t in 0..steps {
        let hs = t * n_h..(t + 1) * n_h;
        let cs = t * cat..(t + 1) * cat;
        params.step_into(
            &h,
            &inputs[t * n_in..(t + 1) * n_in],
            &mut StepBuffers {
                xh: &mut cache.xh[cs.clone()],
                xrh: &mut cache.xrh[cs],
                z: &mut cache.z[hs.clone()],
                r: &mut cache.r[hs.clone()],
                c: &mut cache.c[hs.clone()],
                h_next: &mut cache.hs[hs.clone()],
            },
        );
        h.copy_from_slice(&cache.hs[hs]);
    }
    ensure_finite(&cache.hs, "gru hidden states")?;
    Ok((cache.hs.clone(), cache))
}

/// Backpropagation through time.
///
/// `dhs[t]` is the gradient of the loss with respect to the hidden state
/// after step `t` coming from outside the recurrence (for example from the
/// readout). Returns gate gradients (the readout slot is left zero),
/// `∂L/∂h0`, and `∂L/∂inputs`.
pub fn gru_backward_sequence(
    params: &GruParams,
    cache: &GruSequenceCache,
    dhs: &[f64],
) -> Result<(GruParams, Vec<f64>, Vec<f64>)> {
    let (n_in, n_h) = (params.input_dim, params.hidden_dim);
    if cache.input_dim != n_in || cache.hidden_dim != n_h {
        return Err(Error::StaleCache(format!(
            "cache dims ({}, {}) vs params ({n_in}, {n_h})",
            cache.input_dim, cache.hidden_dim
        )));
    }
    if dhs.len() != cache.steps * n_h {
        return Err(Error::shape("gru hidden gradients", &[cache.steps * n_h], &[dhs.len()]));
    }
    ensure_finite(dhs, "gru hidden gradients")?;
    let cat = n_in + n_h;
    let mut grads = params.zeros_like();
    let mut dinputs = vec![0.0; cache.steps * n_in];
    let mut dh_next = vec![0.0; n_h];
    let (mut dh, mut daz, mut dar, mut dac) = (vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h], vec![0.0; n_h]);
    let mut dxrh = vec![0.0; cat];
    let mut dxh = vec![0.0; cat];

    for t in (0..cache.steps).rev() {
        let hr = t * n_h..(t + 1) * n_h;
        let cr = t * cat..(t + 1) * cat;
        let (z, r, c) = (&cache.z[hr.clone()], &cache.r[hr.clone()], &cache.c[hr.clone()]);
        let h_prev = cache.prev_hidden(t);

        for i in 0..n_h {
            let g = dh_next[i] + dhs[t * n_h + i];
            dh[i] = g * (1.0 - z[i]);
            let dz = g * (c[i] - h_prev[i]);
            let dc = g * z[i];
            dac[i] = dc * (1.0 - c[i] * c[i]);
            daz[i] = dz * z[i] * (1.0 - z[i]);
        }

        Dense::accumulate_grad(&mut grads.candidate, &cache.xrh[cr.clone()], &dac);
        dxrh.iter_mut().for_each(|v| *v = 0.0);
        params.candidate.matvec_t_acc(&dac, &mut dxrh);
        for i in 0..n_h {
            let drh = dxrh[n_in + i];
            dar[i] = drh * h_prev[i] * r[i] * (1.0 - r[i]);
            dh[i] += drh * r[i];
        }

        Dense::accumulate_grad(&mut grads.update, &cache.xh[cr.clone()], &daz);
        Dense::accumulate_grad(&mut grads.reset, &cache.xh[cr], &dar);
        dxh.iter_mut().for_each(|v| *v = 0.0);
        params.update.matvec_t_acc(&daz, &mut dxh);
        params.reset.matvec_t_acc(&dar, &mut dxh);

        let dx = &mut dinputs[t * n_in..(t + 1) * n_in];
        for k in 0..n_in {
            dx[k] = dxrh[k] + dxh[k];
        }
        for i in 0..n_h {
            dh_next[i] = dh[i] + dxh[n_in + i];
        }
    }
    ensure_finite(&grads.flat(), "gru gradients")?;
    Ok((grads, dh_next, dinputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randomized(input: usize, hidden: usize, out: usize, seed: u64) -> GruParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = GruParams::new(input, hidden, out, &mut rng);
        for t in p.tensors_mut() {
            if t.shape().len() == 1 {
                for b in t.data_mut() {
                    *b = rng.random_range(-0.5..0.5);
                }
            }
        }
        p
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let p = GruParams::zeros(3, 4, 2);
        let h = [0.8, -0.4, 0.1, 0.0];
        let next = gru_cell_step(&p, &h, &[1.0, 2.0, -3.0]).unwrap();
        for (a, b) in next.iter().zip(h) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_everything_stays_zero() {
        let p = GruParams::zeros(3, 4, 2);
        assert_eq!(gru_cell_step(&p, &[0.0; 4], &[0.0; 3]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn dimension_mismatch() {
        let p = GruParams::zeros(3, 4, 2);
        assert!(gru_cell_step(&p, &[0.0; 3], &[0.0; 3]).is_err());
        assert!(gru_cell_step(&p, &[0.0; 4], &[0.0; 2]).is_err());
    }

    #[test]
    fn update_gate_bias_initialised_to_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GruParams::new(3, DEFAULT_HIDDEN, 2, &mut rng);
        assert!(p.update.bias.data().iter().all(|&b| b == -1.0));
        assert!(p.reset.bias.data().iter().all(|&b| b == 0.0));
        assert_eq!(p.hidden_dim, 20);
    }

    #[test]
    fn sequence_matches_repeated_cell_steps() {
        let p = randomized(3, 5, 2, 4);
        let inputs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
        let (hs, _) = gru_forward_sequence(&p, &[0.0; 5], &inputs).unwrap();
        let mut h = vec![0.0; 5];
        for t in 0..10 {
            h = gru_cell_step(&p, &h, &inputs[t * 3..(t + 1) * 3]).unwrap();
            assert_eq!(&hs[t * 5..(t + 1) * 5], h.as_slice());
        }
    }

    /// Loss = Σ_t w_t · h_t over an unrolled sequence, so every step feeds
    /// gradient into the recurrence.
    fn sequence_loss(p: &GruParams, inputs: &[f64], weights: &[f64]) -> (f64, GruParams) {
        let (hs, cache) = gru_forward_sequence(p, &vec![0.1; p.hidden_dim], inputs).unwrap();
        let loss = hs.iter().zip(weights).map(|(h, w)| h * w).sum();
        let (g, _, _) = gru_backward_sequence(p, &cache, weights).unwrap();
        (loss, g)
    }

    #[test]
    fn bptt_50_steps_matches_finite_differences() {
        let p = randomized(4, 6, 3, 8);
        let steps = 50;
        let inputs: Vec<f64> = (0..steps * 4).map(|i| (i as f64 * 0.13).sin()).collect();
        let weights: Vec<f64> = (0..steps * 6).map(|i| ((i * 3) as f64 * 0.11).cos() * 0.1).collect();
        let report = finite_diff_check(|q: &GruParams| sequence_loss(q, &inputs, &weights), &p, 1e-5, 1e-5, 0);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn input_and_initial_state_gradients() {
        let p = randomized(2, 3, 1, 9);
        let inputs = vec![0.3, -0.2, 0.5, 0.1, -0.7, 0.9];
        let weights = vec![0.2, -0.1, 0.4, 0.3, 0.3, -0.5, 1.0, 0.1, 0.2];
        let h0 = vec![0.1, -0.3, 0.2];
        let loss = |x: &[f64], h: &[f64]| -> f64 {
            let (hs, _) = gru_forward_sequence(&p, h, x).unwrap();
            hs.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = gru_forward_sequence(&p, &h0, &inputs).unwrap();
        let (_, dh0, dx) = gru_backward_sequence(&p, &cache, &weights).unwrap();
        let eps = 1e-6;
        for i in 0..inputs.len() {
            let (mut a, mut b) = (inputs.clone(), inputs.clone());
            a[i] += eps;
            b[i] -= eps;
            let fd = (loss(&a, &h0) - loss(&b, &h0)) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-8, "dx[{i}] {fd} vs {}", dx[i]);
        }
        for i in 0..3 {
            let (mut a, mut b) = (h0.clone(), h0.clone());
            a[i] += eps;
            b[i] -= eps;
            let fd = (loss(&inputs, &a) - loss(&inputs, &b)) / (2.0 * eps);
            assert!((fd - dh0[i]).abs() < 1e-8, "dh0[{i}]");
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let p = randomized(2, 3, 1, 1);
        let q = randomized(3, 3, 1, 1);
        let (_, cache) = gru_forward_sequence(&p, &[0.0; 3], &[0.0; 4]).unwrap();
        assert!(matches!(
            gru_backward_sequence(&q, &cache, &[0.0; 6]),
            Err(Error::StaleCache(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hidden_state_stays_in_open_unit_interval(
                seed in 0u64..1000,
                xs in proptest::collection::vec(-50.0f64..50.0, 3 * 40),
            ) {
                let p = randomized(3, 8, 2, seed);
                let (hs, _) = gru_forward_sequence(&p, &[0.0; 8], &xs).unwrap();
                prop_assert!(hs.iter().all(|h| h.abs() < 1.0));
            }
        }
    }
}
