//! Yeo-Johnson power transform with per-feature exponents chosen by
//! maximum likelihood.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LAMBDA_BOUNDS: (f64, f64) = (-5.0, 5.0);
const LAMBDA_TOL: f64 = 1e-6;

/// Yeo-Johnson transform of a single value.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda == 0.0 {
            x.ln_1p()
        } else {
            (lambda * x.ln_1p()).exp_m1() / lambda
        }
    } else {
        let p = 2.0 - lambda;
        if p == 0.0 {
            -(-x).ln_1p()
        } else {
            -(p * (-x).ln_1p()).exp_m1() / p
        }
    }
}

/// Profile log-likelihood of `lambda` for one feature, assuming the
/// transformed values are Gaussian.
pub fn log_likelihood(column: ArrayView1<'_, f64>, lambda: f64) -> f64 {
    let n = column.len() as f64;
    let transformed: Vec<f64> = column.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    let mean = transformed.iter().sum::<f64>() / n;
    let var = transformed.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    let jacobian: f64 = column.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTransform {
    pub lambdas: Vec<f64>,
}

impl PowerTransform {
    /// Fits one exponent per column. Columns with zero spread get λ = 1.
    pub fn fit(data: ArrayView2<'_, f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in power-transform fit data".into()));
        }
        if data.nrows() < 2 {
            return Err(Error::Usage("power transform needs at least two rows".into()));
        }
        let lambdas = data
            .axis_iter(Axis(1))
            .map(|col| {
                let first = col[0];
                if col.iter().all(|&v| v == first) {
                    1.0
                } else {
                    golden_section_max(
                        |l| log_likelihood(col, l),
                        LAMBDA_BOUNDS.0,
                        LAMBDA_BOUNDS.1,
                        LAMBDA_TOL,
                    )
                }
            })
            .collect();
        Ok(Self { lambdas })
    }

    pub fn apply(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.lambdas.len() {
            return Err(Error::Shape(format!(
                "power transform fitted on {} features, data has {}",
                self.lambdas.len(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value passed to power transform".into()));
        }
        let mut out = data.to_owned();
        for (mut col, &l) in out.axis_iter_mut(Axis(1)).zip(&self.lambdas) {
            col.mapv_inplace(|x| yeo_johnson(x, l));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn skewness(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
        m3 / m2.powf(1.5)
    }

    #[test]
    fn identity_and_log_branches() {
        for x in [0.0, 0.3, 1.0, 7.5] {
            assert!((yeo_johnson(x, 1.0) - x).abs() < 1e-15);
        }
        assert!((yeo_johnson(std::f64::consts::E - 1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((yeo_johnson(-(std::f64::consts::E - 1.0), 2.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduces_right_skew() {
        let xs = [0.0, 0.01, 0.02, 0.05, 0.1, 1.0];
        let data = Array2::from_shape_vec((6, 1), xs.to_vec()).unwrap();
        let pt = PowerTransform::fit(data.view()).unwrap();
        let out = pt.apply(data.view()).unwrap();
        let before = skewness(&xs);
        let after = skewness(&out.column(0).to_vec());
        assert!(after.abs() < before.abs(), "before {before}, after {after}");
        let l = pt.lambdas[0];
        assert!((LAMBDA_BOUNDS.0..=LAMBDA_BOUNDS.1).contains(&l));
        // Unconstrained optimum lies below -5, so the fit sits on the bound.
        assert!((l - LAMBDA_BOUNDS.0).abs() < 1e-5, "lambda {l}");
        let col = data.column(0);
        assert!(log_likelihood(col, l) >= log_likelihood(col, l + 1e-3));
    }

    #[test]
    fn rejects_non_finite() {
        let data = Array2::from_shape_vec((2, 1), vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(PowerTransform::fit(data.view()), Err(Error::Data(_))));
        let pt = PowerTransform { lambdas: vec![1.0] };
        assert!(matches!(pt.apply(data.view()), Err(Error::Data(_))));
    }

    #[test]
    fn interior_optimum_is_a_local_maximum() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 / 49.0).powi(2)).collect();
        let data = Array2::from_shape_vec((50, 1), xs).unwrap();
        let l = PowerTransform::fit(data.view()).unwrap().lambdas[0];
        assert!(l > LAMBDA_BOUNDS.0 + 0.01 && l < LAMBDA_BOUNDS.1 - 0.01, "lambda {l}");
        let col = data.column(0);
        assert!(log_likelihood(col, l) >= log_likelihood(col, l + 1e-3));
        assert!(log_likelihood(col, l) >= log_likelihood(col, l - 1e-3));
    }

    proptest! {
        #[test]
        fn strictly_monotone(lambda in -5.0f64..5.0, a in -3.0f64..3.0, d in 1e-6f64..2.0) {
            prop_assert!(yeo_johnson(a + d, lambda) > yeo_johnson(a, lambda));
        }
    }
}
