//! Adam optimizer.

use crate::error::{Error, Result};
use crate::netcore::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update on flat slices. `t` is the step number
/// after incrementing (t ≥ 1).
pub fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    h: AdamHyper,
) -> Result<()> {
    if grad.len() != theta.len() || m.len() != theta.len() || v.len() != theta.len() {
        return Err(Error::Shape(format!(
            "adam: {} parameters, {} gradients, {}/{} moments",
            theta.len(),
            grad.len(),
            m.len(),
            v.len()
        )));
    }
    let c1 = 1.0 - h.beta1.powi(t as i32);
    let c2 = 1.0 - h.beta2.powi(t as i32);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + h.epsilon);
    }
    Ok(())
}

/// Moments mirror the parameter layout; only trainable arrays are updated.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
    pub lr: f64,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(params: &ModelParams, lr: f64, hyper: AdamHyper) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr,
            hyper,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        self.t += 1;
        let g = grads.arrays();
        let mut p = params.arrays_mut();
        let mut m = self.m.arrays_mut();
        let mut v = self.v.arrays_mut();
        if g.len() != p.len() || m.len() != p.len() || v.len() != p.len() {
            return Err(Error::Shape("adam state does not match parameters".into()));
        }
        for (((p, g), m), v) in p.iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
            if !p.trainable {
                continue;
            }
            if p.shape != g.shape {
                return Err(Error::Shape(format!(
                    "{}: parameter {:?} vs gradient {:?}",
                    p.name, p.shape, g.shape
                )));
            }
            adam_update(p.data, g.data, m.data, v.data, self.t, self.lr, self.hyper)?;
        }
        Ok(())
    }
}
