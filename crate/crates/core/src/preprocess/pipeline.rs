use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::mask::{build_feature_mask, DroppedColumn, FeatureMask, MaskMode};
use super::power::PowerTransform;
use super::scaling::MinMaxScaler;
use super::window::{FeatureTable, UnitFeatures};
use crate::dataset::{summarize, EngineSeriesSet, EngineUnit, COLUMN_NAMES};
use crate::error::{Error, Result};

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    mask: FeatureMask,
    scaler: MinMaxScaler,
    power: PowerTransform,
}

/// Column mask, then Min-Max, then Yeo-Johnson. Fitted once, on training
/// rows only, and reused unchanged for validation and test data.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessPipeline {
    mode: MaskMode,
    fitted: Option<Fitted>,
}

impl PreprocessPipeline {
    pub fn new(mode: MaskMode) -> Self {
        Self { mode, fitted: None }
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    pub fn fit(&mut self, train: &EngineSeriesSet) -> Result<()> {
        if self.fitted.is_some() {
            return Err(Error::Usage("pipeline is already fitted".into()));
        }
        let summary = summarize(train)?;
        let mask = build_feature_mask(&summary, self.mode)?;
        let selected = select_columns(train.units(), &mask);
        let scaler = MinMaxScaler::fit(selected.view())?;
        let scaled = scaler.transform(selected.view())?;
        let power = PowerTransform::fit(scaled.view())?;
        self.fitted = Some(Fitted {
            mask,
            scaler,
            power,
        });
        Ok(())
    }

    fn state(&self) -> Result<&Fitted> {
        self.fitted
            .as_ref()
            .ok_or_else(|| Error::Usage("pipeline used before fit".into()))
    }

    pub fn mask(&self) -> Result<&FeatureMask> {
        Ok(&self.state()?.mask)
    }

    pub fn scaler(&self) -> Result<&MinMaxScaler> {
        Ok(&self.state()?.scaler)
    }

    pub fn power(&self) -> Result<&PowerTransform> {
        Ok(&self.state()?.power)
    }

    pub fn n_features(&self) -> Result<usize> {
        Ok(self.state()?.mask.n_features())
    }

    /// Applies the fitted stages to every unit of `set`. RUL labels, when
    /// present, are carried through as reals.
    pub fn transform(&self, set: &EngineSeriesSet) -> Result<FeatureTable> {
        let st = self.state()?;
        let mut units = Vec::with_capacity(set.n_units());
        for unit in set.units() {
            let raw = select_columns(std::slice::from_ref(unit), &st.mask);
            let scaled = st.scaler.transform(raw.view())?;
            let features = st.power.apply(scaled.view())?;
            units.push(UnitFeatures {
                unit_id: unit.unit_id,
                cycles: unit.records.iter().map(|r| r.cycle).collect(),
                features,
                rul: unit
                    .rul
                    .as_ref()
                    .map(|r| r.iter().map(|&v| f64::from(v)).collect()),
            });
        }
        Ok(FeatureTable {
            names: st.mask.kept_names(),
            units,
        })
    }

    pub fn to_file(&self) -> Result<PipelineFile> {
        let st = self.state()?;
        Ok(PipelineFile {
            format_version: PIPELINE_FORMAT_VERSION,
            mask_mode: self.mode,
            kept: st.mask.kept_names(),
            dropped: st.mask.dropped().to_vec(),
            min: st.scaler.min.clone(),
            max: st.scaler.max.clone(),
            lambda: st.power.lambdas.clone(),
        })
    }

    pub fn from_file(file: &PipelineFile) -> Result<Self> {
        if file.format_version != PIPELINE_FORMAT_VERSION {
            return Err(Error::Version {
                found: file.format_version,
                expected: PIPELINE_FORMAT_VERSION,
            });
        }
        let kept = file
            .kept
            .iter()
            .map(|n| {
                crate::dataset::column_index(n)
                    .ok_or_else(|| Error::Corruption(format!("unknown column {n:?} in pipeline")))
            })
            .collect::<Result<Vec<_>>>()?;
        let f = kept.len();
        if file.min.len() != f || file.max.len() != f || file.lambda.len() != f {
            return Err(Error::Corruption(format!(
                "pipeline has {f} kept features but {}/{}/{} min/max/lambda entries",
                file.min.len(),
                file.max.len(),
                file.lambda.len()
            )));
        }
        if file.min.iter().zip(&file.max).any(|(lo, hi)| hi < lo) {
            return Err(Error::Corruption("pipeline max below min".into()));
        }
        let mask = FeatureMask::from_parts(kept, file.dropped.clone())
            .map_err(|e| Error::Corruption(e.to_string()))?;
        Ok(Self {
            mode: file.mask_mode,
            fitted: Some(Fitted {
                mask,
                scaler: MinMaxScaler {
                    min: file.min.clone(),
                    max: file.max.clone(),
                },
                power: PowerTransform {
                    lambdas: file.lambda.clone(),
                },
            }),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file()?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

/// Versioned on-disk form of a fitted pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFile {
    pub format_version: u32,
    pub mask_mode: MaskMode,
    pub kept: Vec<String>,
    pub dropped: Vec<DroppedColumn>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lambda: Vec<f64>,
}

fn select_columns(units: &[EngineUnit], mask: &FeatureMask) -> Array2<f64> {
    let rows: usize = units.iter().map(EngineUnit::len).sum();
    let kept = mask.kept();
    let mut out = Array2::zeros((rows, kept.len()));
    let mut i = 0;
    for r in units.iter().flat_map(|u| u.records.iter()) {
        for (j, &c) in kept.iter().enumerate() {
            out[[i, j]] = r.column(c);
        }
        i += 1;
    }
    debug_assert!(kept.iter().all(|&c| c < COLUMN_NAMES.len()));
    out
}

/// Kept columns of `set` before scaling, stacked in (unit, cycle) order.
pub fn masked_rows(set: &EngineSeriesSet, mask: &FeatureMask) -> Array2<f64> {
    select_columns(set.units(), mask)
}
