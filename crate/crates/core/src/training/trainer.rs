//! Unit-level data split, the mini-batch training loop and trained models.

use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamHyper, AdamState};
use super::config::TrainConfig;
use super::schedule::{EarlyStopping, PlateauScheduler, StopDecision};
use crate::baseline::{fit_linear, predict_linear, LinearModel};
use crate::dataset::EngineSeriesSet;
use crate::error::{Error, Result};
use crate::netcore::{backward, forward, predict, ModelParams, Mode, NetworkSpec};
use crate::preprocess::{final_windows, make_windows, FeatureTable, PreprocessPipeline, WindowedDataset};

/// Samples per inference chunk.
pub const PREDICT_CHUNK: usize = 512;

// Independent RNG streams derived from one seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSplit {
    pub train: Vec<u32>,
    pub validation: Vec<u32>,
}

/// Shuffles unit ids with `seed` and holds out the last ⌈fraction·n⌉.
pub fn split_by_unit(set: &EngineSeriesSet, fraction: f64, seed: u64) -> Result<UnitSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("validation fraction {fraction} outside (0, 1)")));
    }
    let mut ids: Vec<u32> = set.units().iter().map(|u| u.unit_id).collect();
    let n = ids.len();
    let n_val = (fraction * n as f64 - 1e-9).ceil() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Config(format!(
            "validation fraction {fraction} on {n} units leaves an empty partition"
        )));
    }
    ids.shuffle(&mut stream(seed, STREAM_SPLIT));
    let validation = ids.split_off(n - n_val);
    Ok(UnitSplit { train: ids, validation })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Rate used during each epoch.
    pub lr: Vec<f64>,
    /// 0-based epoch with the lowest validation loss.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.train_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_loss.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,lr\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i, self.train_loss[i], self.val_loss[i], self.lr[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Network { spec: NetworkSpec, params: ModelParams },
    Linear(LinearModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub pipeline: PreprocessPipeline,
    pub predictor: Predictor,
    pub history: TrainingHistory,
    /// Network targets are RUL / target_scale; 1 for the linear baseline.
    pub target_scale: f64,
    pub split: Option<UnitSplit>,
}

impl TrainedModel {
    /// Predictions in cycles for every window of `data`.
    pub fn predict_windows(&self, data: &WindowedDataset) -> Result<Array1<f64>> {
        if data.window_len() != self.config.window {
            return Err(Error::Shape(format!(
                "model uses T = {}, windows have T = {}",
                self.config.window,
                data.window_len()
            )));
        }
        match &self.predictor {
            Predictor::Network { spec, params } => {
                Ok(predict(spec, params, data.x.view(), PREDICT_CHUNK)? * self.target_scale)
            }
            Predictor::Linear(m) => {
                let x = data.x.index_axis(Axis(1), 0);
                predict_linear(m, x)
            }
        }
    }

    /// One prediction per unit, from the window ending at its last row.
    pub fn predict_final(&self, table: &FeatureTable) -> Result<Array1<f64>> {
        self.predict_windows(&final_windows(table, self.config.window)?)
    }
}

/// Everything the loop consumes, built from the labelled training set.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub pipeline: PreprocessPipeline,
    pub train: WindowedDataset,
    pub validation: Option<WindowedDataset>,
    pub split: Option<UnitSplit>,
    pub target_scale: f64,
}

/// Splits by unit (networks only), fits the pipeline on the training
/// partition and builds padded stride-1 windows.
pub fn prepare(config: &TrainConfig, set: &EngineSeriesSet) -> Result<PreparedData> {
    config.validate()?;
    if !set.is_labeled() {
        return Err(Error::Usage("training needs RUL labels".into()));
    }
    let (train_set, val_set, split) = if config.model.is_neural() {
        let split = split_by_unit(set, config.validation_fraction, config.seed)?;
        (
            set.select_units(&split.train),
            Some(set.select_units(&split.validation)),
            Some(split),
        )
    } else {
        (set.clone(), None, None)
    };
    let mut pipeline = PreprocessPipeline::new(config.mask_mode);
    pipeline.fit(&train_set)?;
    let train = make_windows(&pipeline.transform(&train_set)?, config.window, 1, true)?;
    let validation = match &val_set {
        Some(v) => Some(make_windows(&pipeline.transform(v)?, config.window, 1, true)?),
        None => None,
    };
    let target_scale = if config.model.is_neural() {
        train.y.iter().copied().fold(1.0, f64::max)
    } else {
        1.0
    };
    Ok(PreparedData {
        pipeline,
        train,
        validation,
        split,
        target_scale,
    })
}

/// Per-epoch progress passed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

pub fn train(config: &TrainConfig, set: &EngineSeriesSet) -> Result<TrainedModel> {
    train_prepared(config, &prepare(config, set)?, |_| {})
}

/// Validation MSE in squared cycles for the given network weights.
pub fn validation_loss(
    spec: &NetworkSpec,
    params: &ModelParams,
    data: &WindowedDataset,
    target_scale: f64,
) -> Result<f64> {
    let pred = predict(spec, params, data.x.view(), PREDICT_CHUNK)? * target_scale;
    crate::netcore::mse_loss(pred.view(), data.y.view())
}

/// Batches of shuffled indices; a trailing batch of one sample is folded
/// into its predecessor.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("non-empty") = &order[start..];
    }
    out
}

fn with_context(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}, batch {batch}: {msg}")),
        other => other,
    }
}

pub fn train_prepared(
    config: &TrainConfig,
    data: &PreparedData,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainedModel> {
    config.validate()?;
    let features = data.pipeline.n_features()?;
    let Some(spec) = config.model.network_spec(features)? else {
        let x = data.train.x.index_axis(Axis(1), 0);
        let model = fit_linear(x, data.train.y.view())?;
        return Ok(TrainedModel {
            config: config.clone(),
            pipeline: data.pipeline.clone(),
            predictor: Predictor::Linear(model),
            history: TrainingHistory::default(),
            target_scale: 1.0,
            split: None,
        });
    };
    let val = data
        .validation
        .as_ref()
        .ok_or_else(|| Error::Usage("network training needs a validation partition".into()))?;
    if data.train.is_empty() || val.is_empty() {
        return Err(Error::Data("no training or validation windows".into()));
    }
    let scale = data.target_scale;
    let y_scaled = &data.train.y / scale;

    let mut params = ModelParams::init(&spec, config.seed)?;
    let hyper = AdamHyper {
        beta1: config.beta1,
        beta2: config.beta2,
        epsilon: config.adam_epsilon,
    };
    let mut adam = AdamState::new(&params, config.learning_rate, hyper);
    let mut plateau = PlateauScheduler::new(
        config.plateau_factor,
        config.plateau_patience,
        config.min_learning_rate,
        config.min_delta,
    );
    let mut early = EarlyStopping::new(config.early_stop_patience, config.min_delta);
    let mut shuffle_rng = stream(config.seed, STREAM_SHUFFLE);
    let mut dropout_rng = stream(config.seed, STREAM_DROPOUT);
    let mut history = TrainingHistory::default();
    let mut best_params = params.clone();
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut weighted = 0.0;
        for (b, idx) in batches(&order, config.batch_size).into_iter().enumerate() {
            let x = data.train.x.select(Axis(0), idx);
            let y = y_scaled.select(Axis(0), idx);
            let cache = forward(&spec, &params, x.view(), Mode::Train, &mut dropout_rng)
                .map_err(|e| with_context(e, epoch, b))?;
            let (loss, grads) = backward(&spec, &params, &cache, y.view())?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}, batch {b}: non-finite loss at the output layer"
                )));
            }
            adam.step(&mut params, &grads)?;
            cache.update_running_stats(&spec, &mut params);
            if !params.all_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}, batch {b}: parameters became non-finite after the update"
                )));
            }
            weighted += loss * idx.len() as f64;
        }
        let train_loss = weighted / data.train.len() as f64 * scale * scale;
        let val_loss = validation_loss(&spec, &params, val, scale).map_err(|e| with_context(e, epoch, 0))?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("epoch {epoch}: non-finite validation loss")));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: adam.lr,
        };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.lr.push(adam.lr);
        observer(&record);

        let (improved, decision) = early.observe(epoch, val_loss);
        if improved {
            best_params = params.clone();
        }
        if let StopDecision::Stop { .. } = decision {
            history.stopped_early = true;
            break;
        }
        adam.lr = plateau.observe(val_loss, adam.lr);
    }
    history.best_epoch = early.best_epoch();
    Ok(TrainedModel {
        config: config.clone(),
        pipeline: data.pipeline.clone(),
        predictor: Predictor::Network {
            spec,
            params: best_params,
        },
        history,
        target_scale: scale,
        split: data.split.clone(),
    })
}
