//! Trainable parameters and their deterministic flat layout.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

/// LSTM weights with gate blocks stacked as [input, forget, candidate, output].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// (4H, F_in)
    pub w_x: Array2<f64>,
    /// (4H, H)
    pub w_h: Array2<f64>,
    /// (4H)
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * hidden, input)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// (units, F_in)
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Recurrent {
        forward: LstmParams,
        backward: Option<LstmParams>,
    },
    Dropout,
    BatchNorm(BatchNormParams),
    Dense(DenseParams),
}

/// A named parameter array. Buffers (batch-norm running statistics) are
/// serialized but not trained.
pub struct ParamRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
    pub trainable: bool,
}

pub struct ParamMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = glorot_limit(fan_in, fan_out);
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..=limit))
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn init_lstm(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> LstmParams {
    // Each gate block is its own (H x F) map, so the bound uses fan_out = H.
    let mut p = LstmParams {
        w_x: glorot(rng, 4 * hidden, input, input, hidden),
        w_h: glorot(rng, 4 * hidden, hidden, hidden, hidden),
        b: Array1::zeros(4 * hidden),
    };
    p.b.slice_mut(ndarray::s![hidden..2 * hidden]).fill(1.0);
    p
}

impl ModelParams {
    /// Glorot-uniform weights, forget-gate bias 1, other biases 0,
    /// batch-norm γ = 1, β = 0 with running statistics (0, 1).
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flows = spec.flows();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let input = flows[i].width();
            layers.push(match *layer {
                LayerSpec::Recurrent {
                    units,
                    bidirectional,
                } => {
                    let forward = init_lstm(&mut rng, input, units);
                    let backward = bidirectional.then(|| init_lstm(&mut rng, input, units));
                    LayerParams::Recurrent { forward, backward }
                }
                LayerSpec::Dropout { .. } => LayerParams::Dropout,
                LayerSpec::BatchNorm { .. } => LayerParams::BatchNorm(BatchNormParams {
                    gamma: Array1::ones(input),
                    beta: Array1::zeros(input),
                    running_mean: Array1::zeros(input),
                    running_var: Array1::ones(input),
                }),
                LayerSpec::Dense { units, .. } => LayerParams::Dense(DenseParams {
                    w: glorot(&mut rng, units, input, input, units),
                    b: Array1::zeros(units),
                }),
            });
        }
        Ok(Self { layers })
    }

    /// Same layout, every entry zero (including running statistics).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.arrays_mut() {
            p.data.fill(0.0);
        }
        z
    }

    pub fn arrays(&self) -> Vec<ParamRef<'_>> {
        fn push<'a>(out: &mut Vec<ParamRef<'a>>, name: String, shape: &[usize], data: &'a [f64], trainable: bool) {
            out.push(ParamRef {
                name,
                shape: shape.to_vec(),
                data,
                trainable,
            });
        }
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let name = |s: &str| format!("layer{i}.{s}");
            match layer {
                LayerParams::Recurrent { forward, backward } => {
                    for (dir, p) in [("fwd", Some(forward)), ("bwd", backward.as_ref())] {
                        if let Some(p) = p {
                            push(&mut out, name(&format!("{dir}.w_x")), p.w_x.shape(), slice(&p.w_x), true);
                            push(&mut out, name(&format!("{dir}.w_h")), p.w_h.shape(), slice(&p.w_h), true);
                            push(&mut out, name(&format!("{dir}.b")), p.b.shape(), slice1(&p.b), true);
                        }
                    }
                }
                LayerParams::Dropout => {}
                LayerParams::BatchNorm(p) => {
                    push(&mut out, name("gamma"), p.gamma.shape(), slice1(&p.gamma), true);
                    push(&mut out, name("beta"), p.beta.shape(), slice1(&p.beta), true);
                    push(&mut out, name("running_mean"), p.running_mean.shape(), slice1(&p.running_mean), false);
                    push(&mut out, name("running_var"), p.running_var.shape(), slice1(&p.running_var), false);
                }
                LayerParams::Dense(p) => {
                    push(&mut out, name("w"), p.w.shape(), slice(&p.w), true);
                    push(&mut out, name("b"), p.b.shape(), slice1(&p.b), true);
                }
            }
        }
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let name = |s: &str| format!("layer{i}.{s}");
            match layer {
                LayerParams::Recurrent { forward, backward } => {
                    for (dir, p) in [("fwd", Some(forward)), ("bwd", backward.as_mut())] {
                        if let Some(p) = p {
                            let (sx, sh, sb) = (p.w_x.shape().to_vec(), p.w_h.shape().to_vec(), p.b.shape().to_vec());
                            out.push(ParamMut { name: name(&format!("{dir}.w_x")), shape: sx, data: slice_mut(&mut p.w_x), trainable: true });
                            out.push(ParamMut { name: name(&format!("{dir}.w_h")), shape: sh, data: slice_mut(&mut p.w_h), trainable: true });
                            out.push(ParamMut { name: name(&format!("{dir}.b")), shape: sb, data: slice1_mut(&mut p.b), trainable: true });
                        }
                    }
                }
                LayerParams::Dropout => {}
                LayerParams::BatchNorm(p) => {
                    let c = vec![p.gamma.len()];
                    out.push(ParamMut { name: name("gamma"), shape: c.clone(), data: slice1_mut(&mut p.gamma), trainable: true });
                    out.push(ParamMut { name: name("beta"), shape: c.clone(), data: slice1_mut(&mut p.beta), trainable: true });
                    out.push(ParamMut { name: name("running_mean"), shape: c.clone(), data: slice1_mut(&mut p.running_mean), trainable: false });
                    out.push(ParamMut { name: name("running_var"), shape: c, data: slice1_mut(&mut p.running_var), trainable: false });
                }
                LayerParams::Dense(p) => {
                    let (sw, sb) = (p.w.shape().to_vec(), p.b.shape().to_vec());
                    out.push(ParamMut { name: name("w"), shape: sw, data: slice_mut(&mut p.w), trainable: true });
                    out.push(ParamMut { name: name("b"), shape: sb, data: slice1_mut(&mut p.b), trainable: true });
                }
            }
        }
        out
    }

    pub fn trainable_count(&self) -> usize {
        self.arrays()
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.data.len())
            .sum()
    }

    pub fn total_count(&self) -> usize {
        self.arrays().iter().map(|p| p.data.len()).sum()
    }

    /// Checks that every array has the shape `spec` implies.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let expected = ModelParams::init(spec, 0)?;
        let a = self.arrays();
        let b = expected.arrays();
        if a.len() != b.len() {
            return Err(Error::Shape(format!(
                "{} parameter arrays, spec implies {}",
                a.len(),
                b.len()
            )));
        }
        for (x, y) in a.iter().zip(&b) {
            if x.name != y.name || x.shape != y.shape {
                return Err(Error::Shape(format!(
                    "parameter {} {:?} does not match spec ({} {:?})",
                    x.name, x.shape, y.name, y.shape
                )));
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.arrays().iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}

// Owned ndarray arrays built by this module are always in standard layout.
fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}
