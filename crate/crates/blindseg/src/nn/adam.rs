//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

/// One Adam step over a named parameter set, in place; gradients are cleared
/// afterwards. If any gradient is non-finite the whole step is aborted before
/// any parameter is touched.
pub fn adam_step<T: Scalar>(
    params: &mut [(String, &mut Parameter<T>)],
    cfg: &AdamConfig,
) -> Result<()> {
    for (name, p) in params.iter() {
        if !p.grad.all_finite() {
            return Err(Error::Numeric(format!(
                "non-finite gradient in parameter '{name}'; step aborted"
            )));
        }
    }

    let lr = T::from_f64(cfg.lr);
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let eps = T::from_f64(cfg.eps);
    let one = T::one();

    for (_, p) in params.iter_mut() {
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let n = p.value.numel();
        for i in 0..n {
            let g = p.grad.data()[i];
            let m = b1 * p.m.data()[i] + (one - b1) * g;
            let v = b2 * p.v.data()[i] + (one - b2) * g * g;
            p.m.data_mut()[i] = m;
            p.v.data_mut()[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            p.value.data_mut()[i] = p.value.data()[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.zero_grad();
    }
    Ok(())
}
