//! Bias-corrected Adam.

use crate::error::{Result, TensorError};
use crate::params::ParamSet;
use crate::scalar::Float;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment buffers, one pair per parameter tensor (empty for
/// non-trainable buffers), plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Float> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        let zeros = |t: &crate::Tensor<T>| {
            if t.requires_grad {
                vec![T::zero(); t.numel()]
            } else {
                Vec::new()
            }
        };
        Self {
            m: params.iter().map(|(_, _, t)| zeros(t)).collect(),
            v: params.iter().map(|(_, _, t)| zeros(t)).collect(),
            t: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub state: AdamState<T>,
}

impl<T: Float> Adam<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        Self { config, state: AdamState::new(params) }
    }

    /// One update using the gradients accumulated in `params`; a missing
    /// gradient buffer counts as zero. Gradients are left in place.
    pub fn step(&mut self, params: &mut ParamSet<T>, lr: f64) -> Result<()> {
        let st = &mut self.state;
        if st.m.len() != params.len() {
            return Err(TensorError::invalid(
                "adam",
                format!("state tracks {} tensors, parameter set has {}", st.m.len(), params.len()),
            ));
        }
        st.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(st.t as i32);
        let bc2 = 1.0 - beta2.powi(st.t as i32);
        let (b1, b2) = (T::of(beta1), T::of(beta2));
        let (one_b1, one_b2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
        let step = T::of(lr / bc1);
        let inv_bc2 = T::of(1.0 / bc2);
        let eps = T::of(eps);
        let ids: Vec<_> = params.iter().map(|(id, _, _)| id).collect();
        for id in ids {
            let i = id.index();
            let tensor = params.get_mut(id);
            if !tensor.requires_grad {
                continue;
            }
            let Some(grad) = tensor.grad.take() else {
                // Zero gradient still decays the moments.
                let (m, v) = (&mut st.m[i], &mut st.v[i]);
                for ((p, m), v) in tensor.data_mut().iter_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m *= b1;
                    *v *= b2;
                    *p -= step * *m / ((*v * inv_bc2).sqrt() + eps);
                }
                continue;
            };
            let (m, v) = (&mut st.m[i], &mut st.v[i]);
            if m.len() != grad.len() {
                return Err(TensorError::shapes("adam", &[m.len()], &[grad.len()]));
            }
            for (((p, g), m), v) in tensor.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + one_b1 * *g;
                *v = b2 * *v + one_b2 * *g * *g;
                *p -= step * *m / ((*v * inv_bc2).sqrt() + eps);
            }
            tensor.grad = Some(grad);
        }
        Ok(())
    }
}
