use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Pearson correlation between feature columns.
///
/// Constant columns have no defined correlation; their rows and columns
/// hold NaN and are flagged in `undefined`.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Array2<f64>,
    pub undefined: Vec<bool>,
}

pub fn correlation_matrix(data: ArrayView2<'_, f64>, names: &[String]) -> Result<CorrelationMatrix> {
    let (n, f) = data.dim();
    if n < 2 {
        return Err(Error::Usage("correlation needs at least two rows".into()));
    }
    if names.len() != f {
        return Err(Error::Shape(format!("{} names for {f} columns", names.len())));
    }
    let means = data.mean_axis(Axis(0)).expect("non-empty");
    let centered = &data - &means;
    let cov = centered.t().dot(&centered);
    let undefined: Vec<bool> = (0..f).map(|j| cov[[j, j]] == 0.0).collect();
    let mut values = Array2::from_elem((f, f), f64::NAN);
    for i in 0..f {
        if undefined[i] {
            continue;
        }
        values[[i, i]] = 1.0;
        for j in (i + 1)..f {
            if undefined[j] {
                continue;
            }
            let r = (cov[[i, j]] / (cov[[i, i]] * cov[[j, j]]).sqrt()).clamp(-1.0, 1.0);
            values[[i, j]] = r;
            values[[j, i]] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: names.to_vec(),
        values,
        undefined,
    })
}

impl CorrelationMatrix {
    /// CSV with a header row; undefined entries are written as `undefined`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature");
        for n in &self.names {
            write!(s, ",{n}").unwrap();
        }
        s.push('\n');
        for (name, row) in self.names.iter().zip(self.values.axis_iter(Axis(0))) {
            s.push_str(name);
            for v in row {
                if v.is_nan() {
                    s.push_str(",undefined");
                } else {
                    write!(s, ",{v}").unwrap();
                }
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn self_and_negated() {
        let d = array![[1.0, -1.0], [2.0, -2.0], [5.0, -5.0]];
        let c = correlation_matrix(d.view(), &names(2)).unwrap();
        assert_eq!(c.values[[0, 0]], 1.0);
        assert!((c.values[[0, 1]] + 1.0).abs() < 1e-15);
        assert_eq!(c.values[[0, 1]], c.values[[1, 0]]);
    }

    #[test]
    fn hand_pearson() {
        // Oracle: x̄ = 2, z̄ = 7/3; Σdxdz = 3, Σdx² = 2, Σdz² = 14/3.
        let expected = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
        let d = array![[1.0, 1.0], [2.0, 2.0], [3.0, 4.0]];
        let c = correlation_matrix(d.view(), &names(2)).unwrap();
        assert!((c.values[[0, 1]] - expected).abs() < 1e-12);
        assert!((c.values[[0, 1]] - 0.9820).abs() < 1e-4);
    }

    #[test]
    fn constant_column_is_flagged() {
        let d = array![[1.0, 3.0], [2.0, 3.0], [4.0, 3.0]];
        let c = correlation_matrix(d.view(), &names(2)).unwrap();
        assert_eq!(c.undefined, vec![false, true]);
        assert!(c.values[[0, 1]].is_nan() && c.values[[1, 1]].is_nan());
        assert!(c.to_csv().contains("undefined"));
    }

    #[test]
    fn needs_two_rows() {
        let d = array![[1.0, 2.0]];
        assert!(correlation_matrix(d.view(), &names(2)).is_err());
    }
}
