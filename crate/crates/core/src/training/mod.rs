//! Optimizer, schedules, the training loop and test-set evaluation.

pub mod adam;
pub mod config;
pub mod evaluate;
pub mod schedule;
pub mod trainer;

pub use adam::{adam_update, AdamHyper, AdamState};
pub use config::{ModelKind, TrainConfig};
pub use evaluate::{evaluate, evaluate_predictions, Evaluation, UnitPrediction};
pub use schedule::{early_stop_check, reduce_lr_on_plateau, EarlyStopping, PlateauScheduler, StopDecision};
pub use trainer::{
    prepare, split_by_unit, train, train_prepared, validation_loss, EpochRecord, PreparedData, Predictor,
    TrainedModel, TrainingHistory, UnitSplit, PREDICT_CHUNK,
};
