use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ensure_finite, sigmoid, Dense, Parameters, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
}

/// Fully connected network: hidden layers share one activation, the last
/// layer has its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
}

/// Post-activation values of every layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    batch: usize,
    vector_input: bool,
    input: Vec<f64>,
    outputs: Vec<Vec<f64>>,
    dims: Vec<(usize, usize)>,
}

impl MlpParams {
    /// Glorot-initialised network with the given layer widths
    /// (`sizes[0]` is the input dimension).
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden_activation: Activation,
        output_activation: OutputActivation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        let layers = sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Self {
            layers,
            hidden_activation,
            output_activation,
        }
    }

    pub fn from_layers(
        layers: Vec<Dense>,
        hidden_activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("MLP without layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    format!("layer {} input", i + 1),
                    &[pair[0].out_dim()],
                    &[pair[1].in_dim()],
                ));
            }
        }
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Forward pass over a `[batch, in]` row-major buffer.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<(Vec<f64>, MlpCache)> {
        if x.len() != batch * self.in_dim() {
            return Err(Error::shape(
                "mlp input",
                &[batch, self.in_dim()],
                &[x.len() / self.in_dim().max(1), x.len() % self.in_dim().max(1)],
            ));
        }
        ensure_finite(x, "mlp input")?;
        let n = self.layers.len();
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { x } else { &outputs[i - 1] };
            let mut y = layer.forward_batch(input, batch);
            if i + 1 < n {
                match self.hidden_activation {
                    Activation::Relu => y.iter_mut().for_each(|v| *v = v.max(0.0)),
                    Activation::Tanh => y.iter_mut().for_each(|v| *v = v.tanh()),
                }
            } else if self.output_activation == OutputActivation::Sigmoid {
                y.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            outputs.push(y);
        }
        let y = outputs.last().unwrap().clone();
        ensure_finite(&y, "mlp output")?;
        let cache = MlpCache {
            batch,
            vector_input: false,
            input: x.to_vec(),
            outputs,
            dims: self.layers.iter().map(|l| (l.in_dim(), l.out_dim())).collect(),
        };
        Ok((y, cache))
    }

    /// Backward pass over a batch. `dy` is `∂L/∂y` shaped `[batch, out]`.
    /// Returns parameter gradients and, if `want_dx`, `∂L/∂x`.
    pub fn backward_batch(&self, cache: &MlpCache, dy: &[f64], want_dx: bool) -> Result<(MlpParams, Option<Vec<f64>>)> {
        self.check_cache(cache)?;
        let batch = cache.batch;
        if dy.len() != batch * self.out_dim() {
            return Err(Error::shape(
                "mlp output gradient",
                &[batch * self.out_dim()],
                &[dy.len()],
            ));
        }
        ensure_finite(dy, "mlp output gradient")?;
        let n = self.layers.len();
        let mut grads = self.zeros_like();
        let mut delta = dy.to_vec();
        for i in (0..n).rev() {
            let y = &cache.outputs[i];
            if i + 1 < n {
                match self.hidden_activation {
                    Activation::Relu => delta.iter_mut().zip(y).for_each(|(d, &v)| {
                        if v <= 0.0 {
                            *d = 0.0
                        }
                    }),
                    Activation::Tanh => delta.iter_mut().zip(y).for_each(|(d, &v)| *d *= 1.0 - v * v),
                }
            } else if self.output_activation == OutputActivation::Sigmoid {
                delta.iter_mut().zip(y).for_each(|(d, &v)| *d *= v * (1.0 - v));
            }
            let input = if i == 0 { &cache.input } else { &cache.outputs[i - 1] };
            let need_dx = i > 0 || want_dx;
            let dx = self.layers[i].backward_batch(input, &delta, batch, &mut grads.layers[i], need_dx);
            if let Some(dx) = dx {
                delta = dx;
            }
        }
        ensure_finite(&grads.flat(), "mlp gradients")?;
        Ok((grads, want_dx.then_some(delta)))
    }

    fn check_cache(&self, cache: &MlpCache) -> Result<()> {
        let dims: Vec<(usize, usize)> = self.layers.iter().map(|l| (l.in_dim(), l.out_dim())).collect();
        if dims != cache.dims || cache.outputs.len() != self.layers.len() {
            return Err(Error::StaleCache(format!(
                "cache built for layers {:?}, network has {:?}",
                cache.dims, dims
            )));
        }
        Ok(())
    }
}

impl Parameters for MlpParams {
    fn names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{i}.weight"), format!("{i}.bias")])
            .collect()
    }

    fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

/// Forward pass for a vector `[in]` or a batch `[batch, in]`.
pub fn mlp_forward(params: &MlpParams, x: &Tensor) -> Result<(Tensor, MlpCache)> {
    let (batch, vector_input) = match x.shape() {
        [n] if *n == params.in_dim() => (1, true),
        [b, n] if *n == params.in_dim() => (*b, false),
        other => return Err(Error::shape("mlp input", &[params.in_dim()], other)),
    };
    let (y, mut cache) = params.forward_batch(x.data(), batch)?;
    cache.vector_input = vector_input;
    let y = if vector_input {
        Tensor::vector(y)
    } else {
        Tensor::matrix(batch, params.out_dim(), y)?
    };
    Ok((y, cache))
}

/// Gradients of a scalar loss with respect to parameters and input, given
/// `dy = ∂L/∂y` for the output produced alongside `cache`.
pub fn mlp_backward(params: &MlpParams, cache: &MlpCache, dy: &Tensor) -> Result<(MlpParams, Tensor)> {
    let expected: Vec<usize> = if cache.vector_input {
        vec![params.out_dim()]
    } else {
        vec![cache.batch, params.out_dim()]
    };
    if dy.shape() != expected.as_slice() {
        return Err(Error::StaleCache(format!(
            "gradient shape {:?} does not match cached forward output {:?}",
            dy.shape(),
            expected
        )));
    }
    let (grads, dx) = params.backward_batch(cache, dy.data(), true)?;
    let dx = dx.expect("dx requested");
    let dx = if cache.vector_input {
        Tensor::vector(dx)
    } else {
        Tensor::matrix(cache.batch, params.in_dim(), dx)?
    };
    Ok((grads, dx))
}
