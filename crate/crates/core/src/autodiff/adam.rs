use serde::{Deserialize, Serialize};

use super::{Matrix, ParamSet, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamState {
    /// Zero moments shaped like `params`.
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|(_, p)| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update of every tensor in `params`.
///
/// All gradients are checked before anything is written, so a non-finite
/// gradient leaves both the parameters and the moments untouched.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[Matrix],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<(), TensorError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(TensorError::ParamCount {
            params: params.len(),
            grads: grads.len(),
        });
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                left: p.shape(),
                right: g.shape(),
            });
        }
        if !g.is_finite() {
            return Err(TensorError::NonFiniteGradient {
                param: name.to_string(),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for (i, g) in grads.iter().enumerate() {
        let p = params.get_mut(i);
        let m = state.m[i].as_mut_slice();
        let v = state.v[i].as_mut_slice();
        for (((pv, mv), vv), &gv) in p
            .as_mut_slice()
            .iter_mut()
            .zip(m.iter_mut())
            .zip(v.iter_mut())
            .zip(g.as_slice())
        {
            *mv = config.beta1 * *mv + (1.0 - config.beta1) * gv;
            *vv = config.beta2 * *vv + (1.0 - config.beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}
