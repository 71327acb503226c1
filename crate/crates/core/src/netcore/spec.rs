use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Recurrent { units: usize, bidirectional: bool },
    Dropout { rate: f64 },
    BatchNorm { momentum: f64, epsilon: f64 },
    Dense { units: usize, activation: Activation },
}

impl LayerSpec {
    pub fn lstm(units: usize) -> Self {
        LayerSpec::Recurrent {
            units,
            bidirectional: false,
        }
    }

    pub fn blstm(units: usize) -> Self {
        LayerSpec::Recurrent {
            units,
            bidirectional: true,
        }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec::Dropout { rate }
    }

    /// Batch normalization with momentum 0.9 and ε = 1e-5.
    pub fn batch_norm() -> Self {
        LayerSpec::BatchNorm {
            momentum: 0.9,
            epsilon: 1e-5,
        }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense {
            units,
            activation: Activation::Linear,
        }
    }

    /// Short human-readable description, e.g. `BLSTM(128)`.
    pub fn describe(&self) -> String {
        match self {
            LayerSpec::Recurrent {
                units,
                bidirectional: true,
            } => format!("BLSTM({units})"),
            LayerSpec::Recurrent { units, .. } => format!("LSTM({units})"),
            LayerSpec::Dropout { rate } => format!("Dropout({rate})"),
            LayerSpec::BatchNorm { .. } => "BatchNorm".to_string(),
            LayerSpec::Dense { units, activation } => match activation {
                Activation::Linear => format!("Dense({units})"),
                Activation::Relu => format!("Dense({units}, relu)"),
            },
        }
    }
}

/// Tensor shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    /// (batch, time, width)
    Sequence(usize),
    /// (batch, width)
    Flat(usize),
}

impl Flow {
    pub fn width(self) -> usize {
        match self {
            Flow::Sequence(w) | Flow::Flat(w) => w,
        }
    }
}

/// Ordered layer list for a many-to-one sequence regressor.
///
/// The last recurrent layer emits only its final state; earlier recurrent
/// layers pass full sequences on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_features: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_features: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self {
            input_features,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn last_recurrent(&self) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| matches!(l, LayerSpec::Recurrent { .. }))
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_features == 0 {
            return Err(Error::Config("network needs at least one input feature".into()));
        }
        let last_rec = self
            .last_recurrent()
            .ok_or_else(|| Error::Config("network needs at least one recurrent layer".into()))?;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Recurrent { units, .. } if units == 0 => {
                    return Err(Error::Config(format!("layer {i}: recurrent layer with 0 units")));
                }
                LayerSpec::Dense { units, .. } if units == 0 => {
                    return Err(Error::Config(format!("layer {i}: dense layer with 0 units")));
                }
                LayerSpec::Dense { .. } if i < last_rec => {
                    return Err(Error::Config(format!(
                        "layer {i}: dense layers must follow every recurrent layer"
                    )));
                }
                LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                    return Err(Error::Config(format!(
                        "layer {i}: dropout rate {rate} outside [0, 1)"
                    )));
                }
                LayerSpec::BatchNorm { momentum, epsilon }
                    if !(0.0..=1.0).contains(&momentum) || epsilon <= 0.0 =>
                {
                    return Err(Error::Config(format!(
                        "layer {i}: batch norm needs momentum in [0, 1] and ε > 0"
                    )));
                }
                _ => {}
            }
        }
        match self.layers.last() {
            Some(LayerSpec::Dense {
                units: 1,
                activation: Activation::Linear,
            }) => Ok(()),
            _ => Err(Error::Config(
                "final layer must be a linear dense layer with one unit".into(),
            )),
        }
    }

    /// Input flow of each layer followed by the network's output flow.
    pub fn flows(&self) -> Vec<Flow> {
        let last_rec = self.last_recurrent().unwrap_or(0);
        let mut flow = Flow::Sequence(self.input_features);
        let mut out = vec![flow];
        for (i, layer) in self.layers.iter().enumerate() {
            flow = match *layer {
                LayerSpec::Recurrent {
                    units,
                    bidirectional,
                } => {
                    let w = if bidirectional { 2 * units } else { units };
                    if i == last_rec {
                        Flow::Flat(w)
                    } else {
                        Flow::Sequence(w)
                    }
                }
                LayerSpec::Dense { units, .. } => Flow::Flat(units),
                LayerSpec::Dropout { .. } | LayerSpec::BatchNorm { .. } => flow,
            };
            out.push(flow);
        }
        out
    }

    pub fn describe(&self) -> String {
        self.layers
            .iter()
            .map(LayerSpec::describe)
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}
