//! Fixed-length sliding windows over per-unit feature series.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Preprocessed features of one engine unit, rows ordered by cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFeatures {
    pub unit_id: u32,
    pub cycles: Vec<u32>,
    /// (rows, features)
    pub features: Array2<f64>,
    pub rul: Option<Vec<f64>>,
}

impl UnitFeatures {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

/// Model-ready feature series for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub units: Vec<UnitFeatures>,
}

impl FeatureTable {
    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.units.iter().map(UnitFeatures::len).sum()
    }

    /// All rows stacked in (unit, cycle) order.
    pub fn stacked(&self) -> Array2<f64> {
        let views: Vec<_> = self.units.iter().map(|u| u.features.view()).collect();
        if views.is_empty() {
            return Array2::zeros((0, self.n_features()));
        }
        ndarray::concatenate(Axis(0), &views).expect("consistent feature widths")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub unit_id: u32,
    pub last_cycle: u32,
    /// True when the window was left-padded by repeating the unit's first row.
    pub padded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// (n_windows, T, F)
    pub x: Array3<f64>,
    /// RUL at each window's final cycle; NaN for unlabelled data.
    pub y: Array1<f64>,
    pub origin: Vec<WindowOrigin>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.x.dim().1
    }

    pub fn n_features(&self) -> usize {
        self.x.dim().2
    }

    /// Rows `idx` gathered into a new (x, y) batch.
    pub fn gather(&self, idx: &[usize]) -> (Array3<f64>, Array1<f64>) {
        (self.x.select(Axis(0), idx), self.y.select(Axis(0), idx))
    }

    /// Writes `x` as little-endian f64 (C order) plus a JSON sidecar with
    /// the shape. Returns the sidecar path.
    pub fn export(&self, bin_path: &Path) -> Result<std::path::PathBuf> {
        let mut bytes = Vec::with_capacity(self.x.len() * 8);
        for v in self.x.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(bin_path, bytes).map_err(|e| Error::io(bin_path, e))?;
        let (n, t, f) = self.x.dim();
        let sidecar = ExportSidecar {
            n,
            t,
            f,
            dtype: "f64-le".into(),
            payload: bin_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            y: self.y.to_vec(),
            origin: self.origin.clone(),
        };
        let json_path = bin_path.with_extension("json");
        fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)
            .map_err(|e| Error::io(&json_path, e))?;
        Ok(json_path)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ExportSidecar {
    n: usize,
    t: usize,
    f: usize,
    dtype: String,
    payload: String,
    y: Vec<f64>,
    origin: Vec<WindowOrigin>,
}

/// Number of windows a unit of `len` rows yields.
pub fn window_count(len: usize, window: usize, stride: usize, pad: bool) -> usize {
    if len >= window {
        (len - window) / stride + 1
    } else if pad && len > 0 {
        1
    } else {
        0
    }
}

fn fill_window(dst: &mut ndarray::ArrayViewMut2<'_, f64>, unit: &UnitFeatures, end: usize) {
    // `end` is the exclusive row index of the window's last record.
    let t = dst.nrows();
    for k in 0..t {
        let src = (end as isize - t as isize + k as isize).max(0) as usize;
        dst.row_mut(k).assign(&unit.features.row(src));
    }
}

/// Slides windows of length `window` with step `stride` over every unit.
///
/// Windows end at rows T, T+stride, ... of each unit. With `pad`, a unit
/// shorter than T contributes one window ending at its last row, left-filled
/// with copies of its first row.
pub fn make_windows(
    table: &FeatureTable,
    window: usize,
    stride: usize,
    pad: bool,
) -> Result<WindowedDataset> {
    if window == 0 || stride == 0 {
        return Err(Error::Usage("window length and stride must be positive".into()));
    }
    let f = table.n_features();
    let n: usize = table
        .units
        .iter()
        .map(|u| window_count(u.len(), window, stride, pad))
        .sum();
    let mut x = Array3::zeros((n, window, f));
    let mut y = Array1::from_elem(n, f64::NAN);
    let mut origin = Vec::with_capacity(n);
    let mut i = 0;
    for unit in &table.units {
        let ends: Vec<usize> = if unit.len() >= window {
            (window..=unit.len()).step_by(stride).collect()
        } else if pad && !unit.is_empty() {
            vec![unit.len()]
        } else {
            Vec::new()
        };
        for end in ends {
            fill_window(&mut x.slice_mut(s![i, .., ..]), unit, end);
            if let Some(rul) = &unit.rul {
                y[i] = rul[end - 1];
            }
            origin.push(WindowOrigin {
                unit_id: unit.unit_id,
                last_cycle: unit.cycles[end - 1],
                padded: end < window,
            });
            i += 1;
        }
    }
    Ok(WindowedDataset { x, y, origin })
}

/// One window per unit ending at its final row, padded when needed.
pub fn final_windows(table: &FeatureTable, window: usize) -> Result<WindowedDataset> {
    if window == 0 {
        return Err(Error::Usage("window length must be positive".into()));
    }
    let n = table.units.len();
    let mut x = Array3::zeros((n, window, table.n_features()));
    let mut y = Array1::from_elem(n, f64::NAN);
    let mut origin = Vec::with_capacity(n);
    for (i, unit) in table.units.iter().enumerate() {
        if unit.is_empty() {
            return Err(Error::Data(format!("unit {} has no rows", unit.unit_id)));
        }
        let end = unit.len();
        fill_window(&mut x.slice_mut(s![i, .., ..]), unit, end);
        if let Some(rul) = &unit.rul {
            y[i] = rul[end - 1];
        }
        origin.push(WindowOrigin {
            unit_id: unit.unit_id,
            last_cycle: unit.cycles[end - 1],
            padded: end < window,
        });
    }
    Ok(WindowedDataset { x, y, origin })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ramp_unit(unit_id: u32, len: usize, f: usize) -> UnitFeatures {
        let features = Array2::from_shape_fn((len, f), |(r, c)| (r * 10 + c) as f64);
        UnitFeatures {
            unit_id,
            cycles: (1..=len as u32).collect(),
            features,
            rul: Some((0..len).rev().map(|r| r as f64).collect()),
        }
    }

    fn table(units: Vec<UnitFeatures>) -> FeatureTable {
        let f = units[0].features.ncols();
        FeatureTable {
            names: (0..f).map(|i| format!("f{i}")).collect(),
            units,
        }
    }

    #[test]
    fn counts_and_ends() {
        let t = table(vec![ramp_unit(1, 5, 2)]);
        let w = make_windows(&t, 3, 1, false).unwrap();
        assert_eq!(w.len(), 3);
        let ends: Vec<u32> = w.origin.iter().map(|o| o.last_cycle).collect();
        assert_eq!(ends, vec![3, 4, 5]);
        assert_eq!(w.y.to_vec(), vec![2.0, 1.0, 0.0]);
        // Window ending at cycle 4 holds rows for cycles 2..=4.
        assert_eq!(w.x[[1, 0, 0]], 10.0);
        assert_eq!(w.x[[1, 2, 1]], 31.0);
    }

    #[test]
    fn stride_two() {
        let t = table(vec![ramp_unit(1, 8, 1)]);
        let w = make_windows(&t, 3, 2, false).unwrap();
        let ends: Vec<u32> = w.origin.iter().map(|o| o.last_cycle).collect();
        assert_eq!(ends, vec![3, 5, 7]);
        assert_eq!(w.len(), window_count(8, 3, 2, false));
    }

    #[test]
    fn short_unit_padding() {
        let t = table(vec![ramp_unit(4, 2, 1)]);
        assert_eq!(make_windows(&t, 4, 1, false).unwrap().len(), 0);
        let w = make_windows(&t, 4, 1, true).unwrap();
        assert_eq!(w.len(), 1);
        assert!(w.origin[0].padded);
        let col: Vec<f64> = w.x.slice(s![0, .., 0]).to_vec();
        assert_eq!(col, vec![0.0, 0.0, 0.0, 10.0]);
        assert_eq!(w.y[0], 0.0);
    }

    #[test]
    fn final_window_per_unit() {
        let t = table(vec![ramp_unit(1, 6, 1), ramp_unit(2, 2, 1)]);
        let w = final_windows(&t, 3).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.x.slice(s![0, .., 0]).to_vec(), vec![30.0, 40.0, 50.0]);
        assert_eq!(w.x.slice(s![1, .., 0]).to_vec(), vec![0.0, 0.0, 10.0]);
        assert!(!w.origin[0].padded && w.origin[1].padded);
    }

    #[test]
    fn zero_window_is_usage_error() {
        let t = table(vec![ramp_unit(1, 3, 1)]);
        assert!(matches!(make_windows(&t, 0, 1, false), Err(Error::Usage(_))));
        assert!(matches!(make_windows(&t, 2, 0, false), Err(Error::Usage(_))));
    }

    #[test]
    fn export_writes_payload_and_sidecar() {
        let t = table(vec![ramp_unit(1, 4, 2)]);
        let w = make_windows(&t, 2, 1, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("windows.bin");
        let json = w.export(&bin).unwrap();
        let bytes = fs::read(&bin).unwrap();
        assert_eq!(bytes.len(), 3 * 2 * 2 * 8);
        let first = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        assert_eq!(first, w.x[[0, 0, 1]]);
        let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!((side["n"].as_u64(), side["t"].as_u64(), side["f"].as_u64()), (Some(3), Some(2), Some(2)));
    }
}
