//! Model catalogue and training configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{LayerSpec as L, NetworkSpec};
use crate::preprocess::MaskMode;

/// The five benchmark models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lr,
    Lstm128,
    Blstm128,
    BlstmDropout,
    BlstmDropoutBn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Lr,
        ModelKind::Lstm128,
        ModelKind::Blstm128,
        ModelKind::BlstmDropout,
        ModelKind::BlstmDropoutBn,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Lstm128 => "lstm128",
            ModelKind::Blstm128 => "blstm128",
            ModelKind::BlstmDropout => "blstm_dropout",
            ModelKind::BlstmDropoutBn => "blstm_dropout_bn",
        }
    }

    /// Row label used in comparison tables.
    pub fn table_name(self) -> &'static str {
        match self {
            ModelKind::Lr => "Linear Regression",
            ModelKind::Lstm128 => "LSTM",
            ModelKind::Blstm128 => "BLSTM",
            ModelKind::BlstmDropout => "BLSTM + Dropout",
            ModelKind::BlstmDropoutBn => "BLSTM + Dropout + Normalization",
        }
    }

    pub fn is_neural(self) -> bool {
        self != ModelKind::Lr
    }

    pub fn default_window(self) -> usize {
        if self.is_neural() {
            30
        } else {
            1
        }
    }

    /// Layer stack for `features` inputs; `None` for the linear baseline.
    pub fn network_spec(self, features: usize) -> Result<Option<NetworkSpec>> {
        let layers = match self {
            ModelKind::Lr => return Ok(None),
            ModelKind::Lstm128 => vec![L::lstm(128), L::dense(1)],
            ModelKind::Blstm128 => vec![L::blstm(128), L::dense(1)],
            ModelKind::BlstmDropout => vec![
                L::blstm(128),
                L::dropout(0.2),
                L::blstm(128),
                L::dropout(0.2),
                L::dense(1),
            ],
            ModelKind::BlstmDropoutBn => vec![
                L::blstm(512),
                L::dropout(0.4),
                L::batch_norm(),
                L::blstm(256),
                L::dropout(0.4),
                L::batch_norm(),
                L::blstm(128),
                L::dropout(0.4),
                L::dense(11),
                L::dense(1),
            ],
        };
        NetworkSpec::new(features, layers).map(Some)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                let ids: Vec<_> = ModelKind::ALL.iter().map(|k| k.id()).collect();
                Error::Usage(format!("unknown model '{s}'; valid ids: {}", ids.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub mask_mode: MaskMode,
    pub window: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_learning_rate: f64,
    pub early_stop_patience: usize,
    pub min_delta: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            mask_mode: MaskMode::Both,
            window: model.default_window(),
            batch_size: 128,
            max_epochs: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            plateau_factor: 0.5,
            plateau_patience: 5,
            min_learning_rate: 1e-6,
            early_stop_patience: 10,
            min_delta: 1e-7,
            validation_fraction: 0.2,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Usage("window length must be at least 1".into()));
        }
        if !self.model.is_neural() {
            if self.window != 1 {
                return Err(Error::Config(format!(
                    "the linear baseline uses single-row windows, got T = {}",
                    self.window
                )));
            }
            return Ok(());
        }
        if self.max_epochs == 0 {
            return Err(Error::Usage("max epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Usage("batch size must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::Config("patience values must be at least 1".into()));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Config(format!(
                "plateau factor {} outside (0, 1)",
                self.plateau_factor
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.id().parse::<ModelKind>().unwrap(), k);
        }
        let err = "bogus".parse::<ModelKind>().unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(err.to_string().contains("blstm_dropout_bn"));
    }

    #[test]
    fn bn_stack_listing() {
        let spec = ModelKind::BlstmDropoutBn.network_spec(12).unwrap().unwrap();
        let desc: Vec<String> = spec.layers.iter().map(|l| l.describe()).collect();
        assert_eq!(desc.len(), 10);
        assert_eq!(
            spec.layers[0],
            L::Recurrent {
                units: 512,
                bidirectional: true
            }
        );
        assert_eq!(spec.layers[8], L::dense(11));
        assert_eq!(spec.layers[9], L::dense(1));
        assert!(ModelKind::Lr.network_spec(12).unwrap().is_none());
    }

    #[test]
    fn validation_rules() {
        let mut c = TrainConfig::new(ModelKind::Lstm128);
        assert!(c.validate().is_ok());
        c.max_epochs = 0;
        assert!(matches!(c.validate(), Err(Error::Usage(_))));
        let mut c = TrainConfig::new(ModelKind::Lstm128);
        c.validation_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(ModelKind::Lr);
        assert!(c.validate().is_ok());
        c.window = 30;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
