//! Whole-network forward pass, loss and backward pass.

use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView1, ArrayView3, Axis};
use rand::Rng;

use super::layers::{
    batchnorm_backward, batchnorm_forward, dense_backward, dense_forward, dropout_forward,
    update_running_stats, BatchNormCache,
};
use super::lstm::{
    backward_time_major, finite3, run_time_major, to_batch_major, to_time_major, Direction,
    LstmTrace,
};
use super::params::{LayerParams, ModelParams};
use super::spec::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Activation flowing between layers: rows are samples (flat) or
/// sample-major time steps (sequence, row = b·T + t).
#[derive(Debug, Clone)]
struct Act {
    data: Array2<f64>,
    seq: Option<(usize, usize)>,
}

impl Act {
    fn seq3(&self) -> ArrayView3<'_, f64> {
        let (b, t) = self.seq.expect("sequence activation");
        self.data
            .view()
            .into_shape_with_order((b, t, self.data.ncols()))
            .expect("contiguous")
    }

    fn from_seq(a: Array3<f64>) -> Self {
        let (b, t, c) = a.dim();
        let a = if a.is_standard_layout() { a } else { a.as_standard_layout().into_owned() };
        Self {
            data: a.into_shape_with_order((b * t, c)).expect("contiguous"),
            seq: Some((b, t)),
        }
    }
}

#[derive(Debug, Clone)]
enum LayerCache {
    Recurrent {
        fwd: LstmTrace,
        bwd: Option<LstmTrace>,
        seq_out: bool,
    },
    Dropout {
        mask: Option<Array2<f64>>,
    },
    BatchNorm(Option<BatchNormCache>),
    Dense {
        input: Array2<f64>,
        pre: Array2<f64>,
    },
}

/// Intermediate values of a forward pass, sufficient for an exact
/// backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    batch: usize,
    time: usize,
    pub output: Array1<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Folds this pass's batch statistics into the running averages.
    pub fn update_running_stats(&self, spec: &NetworkSpec, params: &mut ModelParams) {
        for ((cache, layer), p) in self
            .layers
            .iter()
            .zip(&spec.layers)
            .zip(params.layers.iter_mut())
        {
            if let (
                LayerCache::BatchNorm(Some(c)),
                LayerSpec::BatchNorm { momentum, .. },
                LayerParams::BatchNorm(bn),
            ) = (cache, layer, p)
            {
                update_running_stats(bn, c, *momentum);
            }
        }
    }
}

fn recurrent_layer(
    input: &Act,
    forward: &super::params::LstmParams,
    backward: Option<&super::params::LstmParams>,
    seq_out: bool,
) -> Result<(Act, LayerCache)> {
    let seq = input.seq3();
    let (b, t, _) = seq.dim();
    let fwd = run_time_major(to_time_major(seq, Direction::Forward), forward)?;
    let bwd = match backward {
        Some(p) => Some(run_time_major(to_time_major(seq, Direction::Backward), p)?),
        None => None,
    };
    let out = if seq_out {
        let mut parts = vec![to_batch_major(fwd.h.view(), Direction::Forward)];
        if let Some(tr) = &bwd {
            parts.push(to_batch_major(tr.h.view(), Direction::Backward));
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        Act::from_seq(concatenate(Axis(2), &views).expect("same shape"))
    } else {
        // Final state of each direction: forward after t = T, backward after t = 1.
        let mut parts = vec![fwd.h.slice(s![t - 1, .., ..])];
        if let Some(tr) = &bwd {
            parts.push(tr.h.slice(s![t - 1, .., ..]));
        }
        Act {
            data: concatenate(Axis(1), &parts).expect("same rows"),
            seq: None,
        }
    };
    debug_assert_eq!(out.data.nrows(), if seq_out { b * t } else { b });
    Ok((out, LayerCache::Recurrent { fwd, bwd, seq_out }))
}

/// Runs the network on `x` (B, T, F). In training mode dropout masks are
/// drawn from `rng` and batch normalization uses batch statistics.
pub fn forward<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    params: &ModelParams,
    x: ArrayView3<'_, f64>,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardCache> {
    let (batch, time, f) = x.dim();
    if f != spec.input_features {
        return Err(Error::Shape(format!(
            "network expects {} features, input has {f}",
            spec.input_features
        )));
    }
    if params.layers.len() != spec.layers.len() {
        return Err(Error::Shape("parameters do not match network layers".into()));
    }
    if batch == 0 || time == 0 {
        return Err(Error::Shape("empty input batch".into()));
    }
    let last_rec = spec.last_recurrent().expect("validated spec");
    let training = mode == Mode::Train;
    let mut act = Act::from_seq(x.as_standard_layout().into_owned());
    let mut caches = Vec::with_capacity(spec.layers.len());
    for (i, (layer, p)) in spec.layers.iter().zip(&params.layers).enumerate() {
        let (next, cache) = match (layer, p) {
            (LayerSpec::Recurrent { .. }, LayerParams::Recurrent { forward, backward }) => {
                if act.seq.is_none() {
                    return Err(Error::Shape(format!("layer {i}: recurrent layer needs a sequence")));
                }
                recurrent_layer(&act, forward, backward.as_ref(), i != last_rec)?
            }
            (LayerSpec::Dropout { rate }, LayerParams::Dropout) => {
                let (y, mask) = dropout_forward(act.data.view(), *rate, training, rng)?;
                (Act { data: y, seq: act.seq }, LayerCache::Dropout { mask })
            }
            (LayerSpec::BatchNorm { epsilon, .. }, LayerParams::BatchNorm(bn)) => {
                if training && batch < 2 {
                    return Err(Error::Numeric(format!(
                        "layer {i}: batch normalization in training mode needs a batch of at least 2"
                    )));
                }
                let (y, c) = batchnorm_forward(act.data.view(), bn, *epsilon, training)?;
                (Act { data: y, seq: act.seq }, LayerCache::BatchNorm(c))
            }
            (LayerSpec::Dense { activation, .. }, LayerParams::Dense(d)) => {
                let (y, pre) = dense_forward(act.data.view(), d, *activation)?;
                let input = std::mem::replace(&mut act.data, Array2::zeros((0, 0)));
                (Act { data: y, seq: None }, LayerCache::Dense { input, pre })
            }
            _ => {
                return Err(Error::Shape(format!(
                    "layer {i}: parameters do not match layer kind"
                )))
            }
        };
        if !next.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!(
                "layer {i} ({}) produced a non-finite value",
                layer.describe()
            )));
        }
        if let LayerCache::Recurrent { fwd, .. } = &cache {
            if !finite3(&fwd.c) {
                return Err(Error::Numeric(format!("layer {i}: non-finite cell state")));
            }
        }
        caches.push(cache);
        act = next;
    }
    Ok(ForwardCache {
        layers: caches,
        batch,
        time,
        output: act.data.column(0).to_owned(),
    })
}

/// Inference-mode predictions, processed in chunks of `chunk` samples.
pub fn predict(spec: &NetworkSpec, params: &ModelParams, x: ArrayView3<'_, f64>, chunk: usize) -> Result<Array1<f64>> {
    let n = x.dim().0;
    let mut out = Vec::with_capacity(n);
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let chunk = chunk.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let c = forward(spec, params, x.slice(s![start..end, .., ..]), Mode::Infer, &mut rng)?;
        out.extend(c.output.iter().copied());
        start = end;
    }
    Ok(Array1::from(out))
}

/// Mean squared error `(1/B)·Σ(ŷ - y)²`.
pub fn mse_loss(pred: ArrayView1<'_, f64>, target: ArrayView1<'_, f64>) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Usage("loss of an empty batch".into()));
    }
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Exact gradients of the batch MSE for the pass recorded in `cache`.
/// Returns (loss, gradients); gradient buffers for running statistics are 0.
pub fn backward(
    spec: &NetworkSpec,
    params: &ModelParams,
    cache: &ForwardCache,
    targets: ArrayView1<'_, f64>,
) -> Result<(f64, ModelParams)> {
    if cache.layers.len() != spec.layers.len() || params.layers.len() != spec.layers.len() {
        return Err(Error::Usage("forward cache does not belong to this network".into()));
    }
    let loss = mse_loss(cache.output.view(), targets)?;
    let b = cache.batch;
    let t_len = cache.time;
    let mut grads = params.zeros_like();
    let mut d = ((&cache.output - &targets) * (2.0 / b as f64)).insert_axis(Axis(1));
    for i in (0..spec.layers.len()).rev() {
        let layer = &spec.layers[i];
        d = match (&cache.layers[i], &params.layers[i], &mut grads.layers[i]) {
            (LayerCache::Dense { input, pre }, LayerParams::Dense(p), LayerParams::Dense(g)) => {
                let LayerSpec::Dense { activation, .. } = layer else { unreachable!() };
                dense_backward(d.view(), input.view(), pre.view(), p, *activation, g)
            }
            (LayerCache::Dropout { mask }, _, _) => match mask {
                Some(m) => d * m,
                None => d,
            },
            (LayerCache::BatchNorm(Some(c)), LayerParams::BatchNorm(p), LayerParams::BatchNorm(g)) => {
                batchnorm_backward(d.view(), c, p, g)
            }
            (LayerCache::BatchNorm(None), _, _) => {
                return Err(Error::Usage("backward needs a training-mode forward pass".into()));
            }
            (
                LayerCache::Recurrent { fwd, bwd, seq_out },
                LayerParams::Recurrent { forward, backward },
                LayerParams::Recurrent { forward: gf, backward: gb },
            ) => {
                let h = forward.hidden();
                let dirs = if bwd.is_some() { 2 } else { 1 };
                // dL/dh per direction, time-major in processing order.
                let mut d_fwd = Array3::zeros((t_len, b, h));
                let mut d_bwd = Array3::zeros((t_len, b, h));
                if *seq_out {
                    let d_std = d.as_standard_layout();
                    let d3 = d_std
                        .view()
                        .into_shape_with_order((b, t_len, dirs * h))
                        .expect("contiguous");
                    d_fwd = to_time_major(d3.slice(s![.., .., ..h]), Direction::Forward);
                    if dirs == 2 {
                        d_bwd = to_time_major(d3.slice(s![.., .., h..]), Direction::Backward);
                    }
                } else {
                    d_fwd.slice_mut(s![t_len - 1, .., ..]).assign(&d.slice(s![.., ..h]));
                    if dirs == 2 {
                        d_bwd.slice_mut(s![t_len - 1, .., ..]).assign(&d.slice(s![.., h..]));
                    }
                }
                let dx_f = backward_time_major(fwd, forward, d_fwd.view(), gf);
                let mut dx = to_batch_major(dx_f.view(), Direction::Forward);
                if let (Some(tr), Some(p), Some(g)) = (bwd, backward.as_ref(), gb.as_mut()) {
                    let dx_b = backward_time_major(tr, p, d_bwd.view(), g);
                    dx += &to_batch_major(dx_b.view(), Direction::Backward);
                }
                let (bb, tt, ff) = dx.dim();
                dx.into_shape_with_order((bb * tt, ff)).expect("contiguous")
            }
            _ => return Err(Error::Usage("forward cache does not match parameters".into())),
        };
    }
    Ok((loss, grads))
}
