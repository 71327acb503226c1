use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature Min-Max scaler, `x' = (x - min) / (max - min)`.
///
/// Values outside the fitted range are not clipped. A feature whose fitted
/// range is empty maps to 0.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: ArrayView2<'_, f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Usage("cannot fit Min-Max scaler on zero rows".into()));
        }
        let mut min = Vec::with_capacity(data.ncols());
        let mut max = Vec::with_capacity(data.ncols());
        for col in data.axis_iter(Axis(1)) {
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Data("non-finite value in Min-Max fit data".into()));
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(Self { min, max })
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    fn check(&self, data: &ArrayView2<'_, f64>) -> Result<()> {
        if data.ncols() != self.n_features() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} features, data has {}",
                self.n_features(),
                data.ncols()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(&data)?;
        let mut out = data.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, range) = (self.min[j], self.max[j] - self.min[j]);
            if range > 0.0 {
                col.mapv_inplace(|v| (v - lo) / range);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }

    /// Inverse map; features with an empty range come back as their min.
    pub fn inverse_transform(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(&data)?;
        let mut out = data.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, range) = (self.min[j], self.max[j] - self.min[j]);
            col.mapv_inplace(|v| v * range + lo);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn endpoints_and_midpoint() {
        let s = MinMaxScaler::fit(array![[2.0], [4.0], [6.0]].view()).unwrap();
        let t = s.transform(array![[2.0], [6.0], [4.0], [8.0]].view()).unwrap();
        assert_eq!(t.column(0).to_vec(), vec![0.0, 1.0, 0.5, 1.5]);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let s = MinMaxScaler::fit(array![[5.0], [5.0]].view()).unwrap();
        let t = s.transform(array![[5.0], [5.0]].view()).unwrap();
        assert_eq!(t.column(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn width_mismatch() {
        let s = MinMaxScaler::fit(array![[1.0, 2.0]].view()).unwrap();
        assert!(matches!(
            s.transform(array![[1.0]].view()),
            Err(Error::Shape(_))
        ));
    }
}
