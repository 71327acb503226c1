//! Feature pruning: the canonical CMAPSS drop list and the low-variability
//! criterion `σ ≤ 0.005·|μ| and N_u ≤ 5`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    op_setting_column, sensor_column, DatasetSummary, COLUMN_NAMES, CYCLE_COLUMN, N_COLUMNS,
    UNIT_COLUMN,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    ExplicitList,
    Eq1Criterion,
    TargetOrIndex,
}

impl DropReason {
    pub fn tag(self) -> &'static str {
        match self {
            DropReason::ExplicitList => "explicit-list",
            DropReason::Eq1Criterion => "eq1-criterion",
            DropReason::TargetOrIndex => "target-or-index",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Canonical,
    Eq1,
    Both,
}

impl std::str::FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(MaskMode::Canonical),
            "eq1" => Ok(MaskMode::Eq1),
            "both" => Ok(MaskMode::Both),
            other => Err(Error::Usage(format!(
                "unknown mask mode {other:?} (expected canonical, eq1 or both)"
            ))),
        }
    }
}

/// The twelve columns removed for low variability or redundancy, in list order.
pub const CANONICAL_DROPS: [usize; 12] = [
    UNIT_COLUMN,
    op_setting_column(1),
    op_setting_column(2),
    sensor_column(1),
    sensor_column(5),
    sensor_column(6),
    sensor_column(9),
    sensor_column(10),
    sensor_column(14),
    sensor_column(16),
    sensor_column(18),
    sensor_column(19),
];

/// Low-variability removal rule. Both conditions must hold.
pub fn eq1_prune_decision(mean: f64, std: f64, n_unique: usize) -> bool {
    std <= 0.005 * mean.abs() && n_unique <= 5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub column: usize,
    pub name: String,
    pub reasons: Vec<DropReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    kept: Vec<usize>,
    dropped: Vec<DroppedColumn>,
}

impl FeatureMask {
    /// Rebuilds a mask from kept column indices; everything else is dropped
    /// with the given reasons lookup.
    pub fn from_parts(kept: Vec<usize>, dropped: Vec<DroppedColumn>) -> Result<Self> {
        let mut seen = [false; N_COLUMNS];
        for &c in kept.iter().chain(dropped.iter().map(|d| &d.column)) {
            if c >= N_COLUMNS || seen[c] {
                return Err(Error::Config(format!(
                    "feature mask must partition the {N_COLUMNS} columns (column {c} repeated or out of range)"
                )));
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("feature mask leaves columns unassigned".into()));
        }
        if kept.contains(&UNIT_COLUMN) || kept.contains(&CYCLE_COLUMN) {
            return Err(Error::Config("unit id and cycle cannot be model inputs".into()));
        }
        Ok(Self { kept, dropped })
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn dropped(&self) -> &[DroppedColumn] {
        &self.dropped
    }

    pub fn n_features(&self) -> usize {
        self.kept.len()
    }

    pub fn kept_names(&self) -> Vec<String> {
        self.kept.iter().map(|&c| COLUMN_NAMES[c].to_string()).collect()
    }

    /// Columns carrying a given reason tag, in column order.
    pub fn dropped_with(&self, reason: DropReason) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .dropped
            .iter()
            .filter(|d| d.reasons.contains(&reason))
            .map(|d| d.column)
            .collect();
        cols.sort_unstable();
        cols
    }

    /// Human-readable prune report.
    pub fn report(&self, summary: &DatasetSummary) -> String {
        let mut s = String::new();
        writeln!(s, "kept {} features:", self.kept.len()).unwrap();
        for &c in &self.kept {
            writeln!(s, "  {}", COLUMN_NAMES[c]).unwrap();
        }
        writeln!(s, "dropped {} columns:", self.dropped.len()).unwrap();
        for d in &self.dropped {
            let tags: Vec<&str> = d.reasons.iter().map(|r| r.tag()).collect();
            let stats = &summary.columns[d.column];
            writeln!(
                s,
                "  {:<14} [{}]  mean={:.6} std={:.6} unique={}",
                d.name,
                tags.join(", "),
                stats.mean,
                stats.std,
                stats.n_unique
            )
            .unwrap();
        }
        s
    }
}

/// Chooses model-input columns from training-set statistics.
pub fn build_feature_mask(summary: &DatasetSummary, mode: MaskMode) -> Result<FeatureMask> {
    if summary.columns.len() != N_COLUMNS {
        return Err(Error::Shape(format!(
            "summary has {} columns, expected {N_COLUMNS}",
            summary.columns.len()
        )));
    }
    let use_list = matches!(mode, MaskMode::Canonical | MaskMode::Both);
    let use_eq1 = matches!(mode, MaskMode::Eq1 | MaskMode::Both);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (c, stats) in summary.columns.iter().enumerate() {
        let mut reasons = Vec::new();
        if use_list && CANONICAL_DROPS.contains(&c) {
            reasons.push(DropReason::ExplicitList);
        }
        let is_index = c == UNIT_COLUMN || c == CYCLE_COLUMN;
        if use_eq1 && !is_index && eq1_prune_decision(stats.mean, stats.std, stats.n_unique) {
            reasons.push(DropReason::Eq1Criterion);
        }
        if is_index {
            reasons.push(DropReason::TargetOrIndex);
        }
        if reasons.is_empty() {
            kept.push(c);
        } else {
            dropped.push(DroppedColumn {
                column: c,
                name: COLUMN_NAMES[c].to_string(),
                reasons,
            });
        }
    }
    if !kept.iter().any(|&c| c >= sensor_column(1)) {
        return Err(Error::Config(format!(
            "mask mode {mode:?} drops every sensor column"
        )));
    }
    FeatureMask::from_parts(kept, dropped)
}
