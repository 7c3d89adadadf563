//! Dense neural-network engine with hand-written backward passes.
//!
//! Everything runs in `f64`. Networks here are tiny (a few thousand weights),
//! so the engine favours exact reproducibility and gradient-check headroom
//! over throughput. Batched affine products go through `matrixmultiply`.

mod adam;
mod dense;
mod gradcheck;
mod gru;
mod mlp;
mod params;
mod tensor;

pub use adam::AdamState;
pub use dense::{affine_apply, Dense};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use gru::{
    gru_backward_sequence, gru_cell_step, gru_forward_sequence, GruParams, GruSequenceCache, DEFAULT_HIDDEN,
};
pub use mlp::{mlp_backward, mlp_forward, Activation, MlpCache, MlpParams, OutputActivation};
pub use params::{clip_global_norm, Parameters};
pub use tensor::Tensor;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn ensure_finite(values: &[f64], context: &str) -> crate::Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::NonFinite(context.to_string()))
    }
}
