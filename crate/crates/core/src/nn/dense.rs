use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Parameters, Tensor};
use crate::{Error, Result};

/// One affine layer `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            weight: Tensor::matrix(out_dim, in_dim, data).expect("glorot shape"),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::shape("dense bias", &[weight.shape()[0]], bias.shape()));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Single-sample affine map.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::shape("affine input", &[self.in_dim()], &[x.len()]));
        }
        let mut y = self.bias.data().to_vec();
        self.matvec_acc(x, &mut y);
        Ok(y)
    }

    /// `y += W x` without shape checks.
    #[inline]
    pub(crate) fn matvec_acc(&self, x: &[f64], y: &mut [f64]) {
        let n_in = self.in_dim();
        for (row, yi) in self.weight.data().chunks_exact(n_in).zip(y.iter_mut()) {
            *yi += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// `dx += Wᵀ dy` without shape checks.
    #[inline]
    pub(crate) fn matvec_t_acc(&self, dy: &[f64], dx: &mut [f64]) {
        let n_in = self.in_dim();
        for (row, g) in self.weight.data().chunks_exact(n_in).zip(dy) {
            for (d, w) in dx.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }

    /// Accumulates the outer product `dy xᵀ` into the weight gradient and
    /// `dy` into the bias gradient.
    #[inline]
    pub(crate) fn accumulate_grad(grad: &mut Dense, x: &[f64], dy: &[f64]) {
        let n_in = x.len();
        for (row, g) in grad.weight.data_mut().chunks_exact_mut(n_in).zip(dy) {
            for (w, v) in row.iter_mut().zip(x) {
                *w += g * v;
            }
        }
        for (b, g) in grad.bias.data_mut().iter_mut().zip(dy) {
            *b += g;
        }
    }

    /// Batched forward: `x` is `[batch, in]`, returns `[batch, out]`.
    pub(crate) fn forward_batch(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        let mut y = Vec::with_capacity(batch * n_out);
        for _ in 0..batch {
            y.extend_from_slice(self.bias.data());
        }
        // y[b, o] += Σ_i x[b, i] W[o, i]
        unsafe {
            matrixmultiply::dgemm(
                batch,
                n_in,
                n_out,
                1.0,
                x.as_ptr(),
                n_in as isize,
                1,
                self.weight.data().as_ptr(),
                1,
                n_in as isize,
                1.0,
                y.as_mut_ptr(),
                n_out as isize,
                1,
            );
        }
        y
    }

    /// Batched backward. Accumulates parameter gradients into `grad` and, when
    /// requested, returns `dx = dy W` shaped `[batch, in]`.
    pub(crate) fn backward_batch(
        &self,
        x: &[f64],
        dy: &[f64],
        batch: usize,
        grad: &mut Dense,
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        // dW[o, i] += Σ_b dy[b, o] x[b, i]
        unsafe {
            matrixmultiply::dgemm(
                n_out,
                batch,
                n_in,
                1.0,
                dy.as_ptr(),
                1,
                n_out as isize,
                x.as_ptr(),
                n_in as isize,
                1,
                1.0,
                grad.weight.data_mut().as_mut_ptr(),
                n_in as isize,
                1,
            );
        }
        let db = grad.bias.data_mut();
        for row in dy.chunks_exact(n_out) {
            for (b, g) in db.iter_mut().zip(row) {
                *b += g;
            }
        }
        if !want_dx {
            return None;
        }
        let mut dx = vec![0.0; batch * n_in];
        unsafe {
            matrixmultiply::dgemm(
                batch,
                n_out,
                n_in,
                1.0,
                dy.as_ptr(),
                n_out as isize,
                1,
                self.weight.data().as_ptr(),
                n_in as isize,
                1,
                0.0,
                dx.as_mut_ptr(),
                n_in as isize,
                1,
            );
        }
        Some(dx)
    }
}

impl Parameters for Dense {
    fn names(&self) -> Vec<String> {
        vec!["weight".into(), "bias".into()]
    }

    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// `W·x + b` for a single input vector.
pub fn affine_apply(layer: &Dense, x: &Tensor) -> Result<Tensor> {
    if x.shape().len() != 1 {
        return Err(Error::shape("affine input", &[layer.in_dim()], x.shape()));
    }
    layer.apply(x.data()).map(Tensor::vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(w: &[f64], rows: usize, cols: usize, b: &[f64]) -> Dense {
        Dense::from_parts(
            Tensor::matrix(rows, cols, w.to_vec()).unwrap(),
            Tensor::vector(b.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn identity_layer() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[0.0, 0.0]);
        let y = affine_apply(&l, &Tensor::vector(vec![3.0, -1.0])).unwrap();
        assert_eq!(y.data(), &[3.0, -1.0]);
    }

    #[test]
    fn zero_weights_return_bias() {
        let l = layer(&[0.0, 0.0, 0.0], 1, 3, &[0.5]);
        let y = l.apply(&[7.0, -2.0, 1e3]).unwrap();
        assert_eq!(y, vec![0.5]);
    }

    #[test]
    fn direct_evaluation() {
        let l = layer(&[1.0, 2.0, 3.0, 4.0], 2, 2, &[1.0, 1.0]);
        assert_eq!(l.apply(&[1.0, 1.0]).unwrap(), vec![4.0, 8.0]);
    }

    #[test]
    fn dimension_mismatch_names_both_shapes() {
        let l = Dense::zeros(3, 2);
        let err = l.apply(&[1.0, 2.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[3]") && msg.contains("[2]"), "{msg}");
    }

    #[test]
    fn batched_forward_matches_single_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = Dense::glorot(5, 4, &mut rng);
        l.bias = Tensor::vector(vec![0.1, -0.2, 0.3, 0.0]);
        let x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = l.forward_batch(&x, 3);
        for b in 0..3 {
            let single = l.apply(&x[b * 5..(b + 1) * 5]).unwrap();
            for o in 0..4 {
                assert!((single[o] - y[b * 4 + o]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn glorot_range_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = Dense::glorot(10, 20, &mut rng);
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(l.weight.data().iter().all(|w| w.abs() <= limit));
        assert!(l.bias.data().iter().all(|&b| b == 0.0));
    }
}
