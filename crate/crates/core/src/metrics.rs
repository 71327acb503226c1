//! Regression error metrics: MSE, RMSE, MAE and R².

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::Shape(format!(
            "{} actual values vs {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Usage("metrics need at least one sample".into()));
    }
    Ok(())
}

fn sse(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, p)| (a - p) * (a - p)).sum()
}

pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    Ok(sse(y, y_hat) / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    mse(y, y_hat).map(f64::sqrt)
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, p)| (a - p).abs()).sum::<f64>() / y.len() as f64)
}

/// Coefficient of determination against the mean of `y`.
///
/// Undefined when `y` has zero variance; no clamping for predictors worse
/// than the mean.
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sst == 0.0 {
        return Err(Error::Undefined(
            "R² is undefined when the actual values have zero variance".into(),
        ));
    }
    Ok(1.0 - sse(y, y_hat) / sst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        let mse = mse(y, y_hat)?;
        Ok(Self {
            mse,
            rmse: mse.sqrt(),
            mae: mae(y, y_hat)?,
            r2: r2(y, y_hat)?,
            n: y.len(),
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:>12}", "metric", "value")?;
        writeln!(f, "{:<6} {:>12.4}", "RMSE", self.rmse)?;
        writeln!(f, "{:<6} {:>12.4}", "MSE", self.mse)?;
        writeln!(f, "{:<6} {:>12.4}", "MAE", self.mae)?;
        writeln!(f, "{:<6} {:>12.4}", "R²", self.r2)?;
        write!(f, "{:<6} {:>12}", "n", self.n)
    }
}
