//! CMAPSS text parsing, linear RUL labelling and dataset summaries.
//!
//! A CMAPSS file holds one record per line: unit id, cycle, three operational
//! settings and 21 sensor readings, whitespace separated, no header. The NASA
//! distribution uses double spaces and trailing blanks, both accepted here.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_COLUMNS: usize = 26;
pub const N_OP_SETTINGS: usize = 3;
pub const N_SENSORS: usize = 21;

/// Column identifiers in file order.
pub const COLUMN_NAMES: [&str; N_COLUMNS] = [
    "unit_id",
    "cycle",
    "op_setting_1",
    "op_setting_2",
    "op_setting_3",
    "sensor_1",
    "sensor_2",
    "sensor_3",
    "sensor_4",
    "sensor_5",
    "sensor_6",
    "sensor_7",
    "sensor_8",
    "sensor_9",
    "sensor_10",
    "sensor_11",
    "sensor_12",
    "sensor_13",
    "sensor_14",
    "sensor_15",
    "sensor_16",
    "sensor_17",
    "sensor_18",
    "sensor_19",
    "sensor_20",
    "sensor_21",
];

pub const UNIT_COLUMN: usize = 0;
pub const CYCLE_COLUMN: usize = 1;

/// Index of `op_setting_{n}` (1-based `n`).
pub const fn op_setting_column(n: usize) -> usize {
    1 + n
}

/// Index of `sensor_{n}` (1-based `n`).
pub const fn sensor_column(n: usize) -> usize {
    4 + n
}

/// Looks up a column index by name.
pub fn column_index(name: &str) -> Option<usize> {
    COLUMN_NAMES.iter().position(|c| *c == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub unit_id: u32,
    pub cycle: u32,
    pub op_settings: [f64; N_OP_SETTINGS],
    pub sensors: [f64; N_SENSORS],
}

impl RawRecord {
    /// Value of column `idx` in file order (ids returned as reals).
    pub fn column(&self, idx: usize) -> f64 {
        match idx {
            UNIT_COLUMN => self.unit_id as f64,
            CYCLE_COLUMN => self.cycle as f64,
            2..=4 => self.op_settings[idx - 2],
            5..=25 => self.sensors[idx - 5],
            _ => panic!("column index {idx} out of range"),
        }
    }
}

/// All records of one engine, ordered by cycle 1..=max_cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineUnit {
    pub unit_id: u32,
    pub records: Vec<RawRecord>,
    /// Remaining cycles per record, present once labelled.
    pub rul: Option<Vec<u32>>,
}

impl EngineUnit {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_cycle(&self) -> u32 {
        self.records.last().map_or(0, |r| r.cycle)
    }
}

/// Parsed multi-engine series, grouped by unit id then cycle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineSeriesSet {
    units: Vec<EngineUnit>,
}

impl EngineSeriesSet {
    /// Groups and validates records. Cycles of each unit must form 1..=n.
    pub fn from_records(records: Vec<RawRecord>) -> Result<Self> {
        let mut grouped: BTreeMap<u32, Vec<RawRecord>> = BTreeMap::new();
        for r in records {
            grouped.entry(r.unit_id).or_default().push(r);
        }
        let mut units = Vec::with_capacity(grouped.len());
        for (unit_id, mut recs) in grouped {
            recs.sort_by_key(|r| r.cycle);
            for (i, r) in recs.iter().enumerate() {
                let expected = i as u32 + 1;
                if r.cycle != expected {
                    return Err(Error::Integrity(format!(
                        "unit {unit_id}: expected cycle {expected}, found {} (cycles must run 1, 2, ... without gaps or duplicates)",
                        r.cycle
                    )));
                }
            }
            units.push(EngineUnit {
                unit_id,
                records: recs,
                rul: None,
            });
        }
        Ok(Self { units })
    }

    pub fn units(&self) -> &[EngineUnit] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_rows(&self) -> usize {
        self.units.iter().map(EngineUnit::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        !self.units.is_empty() && self.units.iter().all(|u| u.rul.is_some())
    }

    pub fn records(&self) -> impl Iterator<Item = &RawRecord> {
        self.units.iter().flat_map(|u| u.records.iter())
    }

    /// Subset containing only the given unit ids (order of `self` kept).
    pub fn select_units(&self, ids: &[u32]) -> Self {
        let keep: HashSet<u32> = ids.iter().copied().collect();
        Self {
            units: self
                .units
                .iter()
                .filter(|u| keep.contains(&u.unit_id))
                .cloned()
                .collect(),
        }
    }

    /// Renders the set back into CMAPSS text. Reals use the shortest
    /// representation that parses back to the same double.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            write!(out, "{} {}", r.unit_id, r.cycle).unwrap();
            for v in r.op_settings.iter().chain(r.sensors.iter()) {
                write!(out, " {v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn parse_id(token: &str, line: usize, what: &'static str) -> Result<u32> {
    let err = || Error::Parse {
        line,
        token: token.to_string(),
        expected: what,
    };
    let v: f64 = token.parse().map_err(|_| err())?;
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        return Err(err());
    }
    Ok(v as u32)
}

/// Parses a CMAPSS train or test file.
pub fn parse_series_file(text: &str) -> Result<EngineSeriesSet> {
    let mut records = Vec::new();
    let mut row = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        row += 1;
        if tokens.len() != N_COLUMNS {
            return Err(Error::Format {
                row,
                found: tokens.len(),
            });
        }
        let line = lineno + 1;
        let mut values = [0.0f64; N_COLUMNS];
        for (slot, tok) in values.iter_mut().zip(&tokens).skip(2) {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                token: tok.to_string(),
                expected: "a real number",
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    token: tok.to_string(),
                    expected: "a finite real number",
                });
            }
            *slot = v;
        }
        let mut op_settings = [0.0; N_OP_SETTINGS];
        op_settings.copy_from_slice(&values[2..5]);
        let mut sensors = [0.0; N_SENSORS];
        sensors.copy_from_slice(&values[5..]);
        records.push(RawRecord {
            unit_id: parse_id(tokens[0], line, "a positive unit id")?,
            cycle: parse_id(tokens[1], line, "a positive cycle number")?,
            op_settings,
            sensors,
        });
    }
    EngineSeriesSet::from_records(records)
}

/// Parses a RUL ground-truth file: one non-negative integer per line.
pub fn parse_rul_file(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        let v = tok.parse::<u32>().map_err(|_| Error::Parse {
            line: lineno + 1,
            token: tok.to_string(),
            expected: "a non-negative integer",
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Labels every record with `max_cycle(unit) - cycle`.
pub fn attach_linear_rul(mut set: EngineSeriesSet) -> Result<EngineSeriesSet> {
    if set.units.iter().any(|u| u.rul.is_some()) {
        return Err(Error::Usage("series set is already labelled".into()));
    }
    for unit in &mut set.units {
        let max = unit.max_cycle();
        unit.rul = Some(unit.records.iter().map(|r| max - r.cycle).collect());
    }
    Ok(set)
}

/// Per-column moments over every row of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation (divisor n).
    pub std: f64,
    pub n_unique: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_units: usize,
    pub n_rows: usize,
    pub cycles_min: u32,
    pub cycles_max: u32,
    pub cycles_mean: f64,
    pub columns: Vec<ColumnStats>,
    /// (unit_id, max_cycle) per unit, the data behind the cycle histogram.
    pub unit_cycles: Vec<(u32, u32)>,
}

impl DatasetSummary {
    pub fn column(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "units            {}", self.n_units).unwrap();
        writeln!(s, "rows             {}", self.n_rows).unwrap();
        writeln!(s, "cycles min       {}", self.cycles_min).unwrap();
        writeln!(s, "cycles mean      {:.2}", self.cycles_mean).unwrap();
        writeln!(s, "cycles max       {}", self.cycles_max).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "{:<14} {:>16} {:>14} {:>8}", "column", "mean", "std", "unique").unwrap();
        for c in &self.columns {
            writeln!(
                s,
                "{:<14} {:>16.6} {:>14.6} {:>8}",
                c.name, c.mean, c.std, c.n_unique
            )
            .unwrap();
        }
        s
    }
}

fn unique_count(values: impl Iterator<Item = f64>) -> usize {
    // +0.0 and -0.0 compare equal, so fold them onto one key.
    values
        .map(|v| if v == 0.0 { 0u64 } else { v.to_bits() })
        .collect::<HashSet<_>>()
        .len()
}

/// Exact per-column statistics plus per-unit cycle statistics.
pub fn summarize(set: &EngineSeriesSet) -> Result<DatasetSummary> {
    if set.is_empty() {
        return Err(Error::Usage("cannot summarize an empty series set".into()));
    }
    let n = set.n_rows() as f64;
    let columns = (0..N_COLUMNS)
        .map(|c| {
            let mean = set.records().map(|r| r.column(c)).sum::<f64>() / n;
            let var = set
                .records()
                .map(|r| (r.column(c) - mean).powi(2))
                .sum::<f64>()
                / n;
            ColumnStats {
                name: COLUMN_NAMES[c].to_string(),
                mean,
                std: var.sqrt(),
                n_unique: unique_count(set.records().map(|r| r.column(c))),
            }
        })
        .collect();
    let unit_cycles: Vec<(u32, u32)> = set
        .units()
        .iter()
        .map(|u| (u.unit_id, u.max_cycle()))
        .collect();
    let lengths = unit_cycles.iter().map(|&(_, c)| c);
    Ok(DatasetSummary {
        n_units: set.n_units(),
        n_rows: set.n_rows(),
        cycles_min: lengths.clone().min().unwrap_or(0),
        cycles_max: lengths.clone().max().unwrap_or(0),
        cycles_mean: lengths.map(f64::from).sum::<f64>() / set.n_units() as f64,
        columns,
        unit_cycles,
    })
}
