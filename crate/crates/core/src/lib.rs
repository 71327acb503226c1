//! Remaining-useful-life prediction for the CMAPSS FD001 turbofan dataset.
//!
//! The crate covers the whole path from NASA text files to error metrics:
//!
//! - [`dataset`]: parsing, RUL labelling, summary statistics
//! - [`preprocess`]: feature pruning, Min-Max scaling, Yeo-Johnson, windows
//! - [`netcore`]: LSTM/BLSTM networks with backpropagation through time
//! - [`training`]: Adam, plateau schedule, early stopping, evaluation
//! - [`baseline`]: linear regression benchmark
//! - [`metrics`]: MSE, RMSE, MAE, R²
//! - [`persistence`]: versioned model files
//! - [`synthetic`]: FD001-shaped generated data

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod netcore;
pub mod persistence;
pub mod preprocess;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
