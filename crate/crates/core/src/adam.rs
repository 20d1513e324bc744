//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct AdamParams<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

impl<S: Scalar> AdamParams<S> {
    /// beta = (0.5, 0.999), the GAN-training convention used throughout.
    pub fn with_lr(lr: S) -> Self {
        AdamParams {
            lr,
            beta1: S::c(0.5),
            beta2: S::c(0.999),
            eps: S::c(1e-8),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState<S> {
    m: Tensor<S>,
    v: Tensor<S>,
    step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState {
            m: Tensor::zeros(rows, cols),
            v: Tensor::zeros(rows, cols),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update, applied to `params` in place.
    pub fn step(&mut self, params: &mut Tensor<S>, grads: &Tensor<S>, hp: &AdamParams<S>) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.m) {
            return Err(Error::shape(
                "adam_step",
                format!("{:?}", self.m.shape()),
                format!("params {:?} / grads {:?}", params.shape(), grads.shape()),
            ));
        }
        self.step += 1;
        let t = S::c(self.step as f64);
        let bc1 = S::one() - hp.beta1.powf(t);
        let bc2 = S::one() - hp.beta2.powf(t);
        let one = S::one();
        for ((p, &g), (m, v)) in params
            .data_mut()
            .iter_mut()
            .zip(grads.data())
            .zip(self.m.data_mut().iter_mut().zip(self.v.data_mut().iter_mut()))
        {
            *m = hp.beta1 * *m + (one - hp.beta1) * g;
            *v = hp.beta2 * *v + (one - hp.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
        Ok(())
    }
}
