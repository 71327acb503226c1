//! Linear-regression benchmark fitted by the normal equations.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge stabilizer added to the Gram diagonal (weights only).
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub ridge: f64,
}

/// Minimizes `Σ(Xw + b - y)² + λ‖w‖²` with an unpenalized intercept.
pub fn fit_linear(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<LinearModel> {
    fit_linear_ridge(x, y, RIDGE)
}

pub fn fit_linear_ridge(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, ridge: f64) -> Result<LinearModel> {
    let (n, f) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows vs {} targets", y.len())));
    }
    if n <= f {
        return Err(Error::Usage(format!(
            "linear fit needs more rows than features ({n} rows, {f} features)"
        )));
    }
    // Augmented design [X | 1]; accumulate XᵀX and Xᵀy directly.
    let d = f + 1;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut row = vec![0.0; d];
    for (xr, &yv) in x.outer_iter().zip(y.iter()) {
        row[..f].iter_mut().zip(xr.iter()).for_each(|(r, &v)| *r = v);
        row[f] = 1.0;
        for i in 0..d {
            rhs[i] += row[i] * yv;
            for j in i..d {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    for i in 0..f {
        gram[(i, i)] += ridge;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("normal equations are singular".into()))?;
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite linear solution".into()));
    }
    Ok(LinearModel {
        weights: sol.iter().take(f).copied().collect(),
        intercept: sol[f],
        ridge,
    })
}

pub fn predict_linear(model: &LinearModel, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    if x.ncols() != model.weights.len() {
        return Err(Error::Shape(format!(
            "linear model has {} weights, input has {} features",
            model.weights.len(),
            x.ncols()
        )));
    }
    let w = ArrayView1::from(&model.weights[..]);
    Ok(x.dot(&w) + model.intercept)
}
