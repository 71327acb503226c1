//! Dropout, batch normalization and dense layers on (rows, channels) data.
//! Sequence activations are flattened to (B·T, C) before reaching these.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::params::{BatchNormParams, DenseParams};
use super::spec::Activation;
use crate::error::{Error, Result};

/// Inverted dropout. Returns the output and the applied mask (entries 0 or
/// 1/(1-p)); `None` when the layer is an identity.
pub fn dropout_forward<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.to_owned(), None));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mask = Array2::from_shape_simple_fn(x.dim(), || {
        if rng.gen::<f64>() < keep {
            scale
        } else {
            0.0
        }
    });
    Ok((&x * &mask, Some(mask)))
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
}

/// Batch normalization over rows. Training uses batch statistics (biased
/// variance) and returns them for the running-average update; inference
/// uses the running statistics.
pub fn batchnorm_forward(
    x: ArrayView2<'_, f64>,
    p: &BatchNormParams,
    epsilon: f64,
    training: bool,
) -> Result<(Array2<f64>, Option<BatchNormCache>)> {
    let c = x.ncols();
    if p.gamma.len() != c {
        return Err(Error::Shape(format!(
            "batch norm has {} channels, input has {c}",
            p.gamma.len()
        )));
    }
    if !training {
        let inv_std = p.running_var.mapv(|v| 1.0 / (v + epsilon).sqrt());
        let y = (&x - &p.running_mean) * &(inv_std * &p.gamma) + &p.beta;
        return Ok((y, None));
    }
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Numeric(
            "batch normalization in training mode needs at least two samples".into(),
        ));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean;
    let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("n >= 2");
    let inv_std = var.mapv(|v| 1.0 / (v + epsilon).sqrt());
    let xhat = centered * &inv_std;
    let y = &xhat * &p.gamma + &p.beta;
    Ok((
        y,
        Some(BatchNormCache {
            xhat,
            inv_std,
            batch_mean: mean,
            batch_var: var,
        }),
    ))
}

/// Gradients for γ and β are accumulated into `grads`; returns dL/dx.
pub fn batchnorm_backward(
    dy: ArrayView2<'_, f64>,
    cache: &BatchNormCache,
    p: &BatchNormParams,
    grads: &mut BatchNormParams,
) -> Array2<f64> {
    let n = dy.nrows() as f64;
    grads.gamma += &(&dy * &cache.xhat).sum_axis(Axis(0));
    grads.beta += &dy.sum_axis(Axis(0));
    let dxhat = &dy * &p.gamma;
    let sum_dxhat = dxhat.sum_axis(Axis(0));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
    let scale = &cache.inv_std / n;
    (dxhat * n - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat) * &scale
}

/// Exponential running-average update with the given momentum.
pub fn update_running_stats(p: &mut BatchNormParams, cache: &BatchNormCache, momentum: f64) {
    p.running_mean = &p.running_mean * momentum + &cache.batch_mean * (1.0 - momentum);
    p.running_var = &p.running_var * momentum + &cache.batch_var * (1.0 - momentum);
}

/// `y = act(x·Wᵀ + b)`; also returns the pre-activation.
pub fn dense_forward(x: ArrayView2<'_, f64>, p: &DenseParams, act: Activation) -> Result<(Array2<f64>, Array2<f64>)> {
    if x.ncols() != p.w.ncols() {
        return Err(Error::Shape(format!(
            "dense layer expects {} inputs, got {}",
            p.w.ncols(),
            x.ncols()
        )));
    }
    let pre = x.dot(&p.w.t()) + &p.b;
    let y = match act {
        Activation::Linear => pre.clone(),
        Activation::Relu => pre.mapv(|v| v.max(0.0)),
    };
    Ok((y, pre))
}

pub fn dense_backward(
    dy: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    pre: ArrayView2<'_, f64>,
    p: &DenseParams,
    act: Activation,
    grads: &mut DenseParams,
) -> Array2<f64> {
    let dpre = match act {
        Activation::Linear => dy.to_owned(),
        Activation::Relu => {
            let mut d = dy.to_owned();
            d.zip_mut_with(&pre, |g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
            d
        }
    };
    grads.w += &dpre.t().dot(&x);
    grads.b += &dpre.sum_axis(Axis(0));
    dpre.dot(&p.w)
}
