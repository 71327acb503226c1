//! Test-set evaluation on each unit's final window.

use serde::{Deserialize, Serialize};

use super::trainer::TrainedModel;
use crate::dataset::EngineSeriesSet;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitPrediction {
    pub unit_id: u32,
    pub predicted_rul: f64,
    pub actual_rul: f64,
    /// actual − predicted
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: MetricsReport,
    pub predictions: Vec<UnitPrediction>,
}

impl Evaluation {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("unit_id,predicted_rul,actual_rul,residual\n");
        for p in &self.predictions {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.unit_id, p.predicted_rul, p.actual_rul, p.residual
            ));
        }
        out
    }
}

/// Scores per-unit predictions against the true RUL values. Negative
/// predictions are kept as-is.
pub fn evaluate_predictions(unit_ids: &[u32], predicted: &[f64], true_ruls: &[f64]) -> Result<Evaluation> {
    if unit_ids.len() != true_ruls.len() || predicted.len() != true_ruls.len() {
        return Err(Error::Data(format!(
            "{} test units, {} predictions, {} RUL values",
            unit_ids.len(),
            predicted.len(),
            true_ruls.len()
        )));
    }
    let metrics = MetricsReport::compute(true_ruls, predicted)?;
    let predictions = unit_ids
        .iter()
        .zip(predicted)
        .zip(true_ruls)
        .map(|((&unit_id, &p), &a)| UnitPrediction {
            unit_id,
            predicted_rul: p,
            actual_rul: a,
            residual: a - p,
        })
        .collect();
    Ok(Evaluation { metrics, predictions })
}

/// Runs the model's fitted pipeline on `test`, predicts from each unit's
/// final window and compares with `true_ruls` (one per unit, in unit order).
pub fn evaluate(model: &TrainedModel, test: &EngineSeriesSet, true_ruls: &[u32]) -> Result<Evaluation> {
    if test.n_units() != true_ruls.len() {
        return Err(Error::Data(format!(
            "test set has {} units but the RUL file has {} entries",
            test.n_units(),
            true_ruls.len()
        )));
    }
    let table = model.pipeline.transform(test)?;
    let pred = model.predict_final(&table)?;
    let ids: Vec<u32> = table.units.iter().map(|u| u.unit_id).collect();
    let actual: Vec<f64> = true_ruls.iter().map(|&v| f64::from(v)).collect();
    evaluate_predictions(&ids, pred.as_slice().expect("contiguous"), &actual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let y = [10.0, 50.0, 112.0];
        let e = evaluate_predictions(&[1, 2, 3], &y, &y).unwrap();
        assert_eq!(e.metrics.rmse, 0.0);
        assert_eq!(e.metrics.r2, 1.0);
        assert!(e.predictions.iter().all(|p| p.residual == 0.0));
    }

    #[test]
    fn mean_predictor_and_residual_sign() {
        let y = [10.0, 20.0, 60.0];
        let e = evaluate_predictions(&[1, 2, 3], &[30.0; 3], &y).unwrap();
        assert!(e.metrics.r2.abs() < 1e-15);
        assert_eq!(e.predictions[0].residual, -20.0);
        assert_eq!(e.predictions[2].residual, 30.0);
        assert_eq!(e.to_csv().lines().count(), 4);
    }

    #[test]
    fn count_mismatch_is_data_error() {
        assert!(matches!(
            evaluate_predictions(&[1, 2], &[1.0, 2.0], &[1.0]),
            Err(Error::Data(_))
        ));
    }
}
