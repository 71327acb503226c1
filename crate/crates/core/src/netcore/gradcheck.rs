//! Central finite-difference verification of analytic gradients.

use ndarray::{ArrayView1, ArrayView3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{backward, forward, mse_loss, Mode};
use super::params::ModelParams;
use super::spec::NetworkSpec;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter with the largest error, as `name[index]`.
    pub worst: String,
    pub checked: usize,
}

/// Relative error `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares backpropagated gradients with central differences of the
/// training-mode loss. Dropout masks are drawn from a fresh RNG seeded with
/// `seed` on every evaluation, so all evaluations share one mask.
pub fn grad_check(
    spec: &NetworkSpec,
    params: &ModelParams,
    x: ArrayView3<'_, f64>,
    y: ArrayView1<'_, f64>,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    grad_check_with(spec, params, x, y, eps, seed, |_| {})
}

/// As [`grad_check`], with a hook that may alter the analytic gradients
/// before comparison (used to confirm the check detects broken backward code).
pub fn grad_check_with(
    spec: &NetworkSpec,
    params: &ModelParams,
    x: ArrayView3<'_, f64>,
    y: ArrayView1<'_, f64>,
    eps: f64,
    seed: u64,
    hook: impl FnOnce(&mut ModelParams),
) -> Result<GradCheckReport> {
    let loss_at = |p: &ModelParams| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cache = forward(spec, p, x, Mode::Train, &mut rng)?;
        mse_loss(cache.output.view(), y)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cache = forward(spec, params, x, Mode::Train, &mut rng)?;
    let (_, mut grads) = backward(spec, params, &cache, y)?;
    hook(&mut grads);

    let analytic: Vec<(String, bool, Vec<f64>)> = grads
        .arrays()
        .into_iter()
        .map(|g| (g.name, g.trainable, g.data.to_vec()))
        .collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (k, (name, trainable, ga)) in analytic.iter().enumerate() {
        if !trainable {
            continue;
        }
        for (idx, &a) in ga.iter().enumerate() {
            let original = probe.arrays()[k].data[idx];
            probe.arrays_mut()[k].data[idx] = original + eps;
            let plus = loss_at(&probe)?;
            probe.arrays_mut()[k].data[idx] = original - eps;
            let minus = loss_at(&probe)?;
            probe.arrays_mut()[k].data[idx] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_empty() {
                report.max_rel_error = err.max(report.max_rel_error);
                report.worst = format!("{name}[{idx}]");
            }
        }
    }
    Ok(report)
}

/// A small network and batch used by the built-in gradient checks.
pub struct GradCheckFixture {
    pub name: &'static str,
    pub spec: NetworkSpec,
    pub params: ModelParams,
    pub x: ndarray::Array3<f64>,
    pub y: ndarray::Array1<f64>,
    pub tolerance: f64,
}

/// The model families of the benchmark, scaled to H ≤ 8 with B = 3, T = 5,
/// F = 2. Batch-normalized stacks get the looser 1e-3 tolerance.
pub fn builtin_fixtures() -> Result<Vec<GradCheckFixture>> {
    use super::spec::{Activation, LayerSpec as L};
    use rand::Rng;

    let (b, t, f) = (3, 5, 2);
    let stacks: Vec<(&'static str, Vec<L>, f64)> = vec![
        ("lstm", vec![L::lstm(4), L::dense(1)], 1e-4),
        ("blstm", vec![L::blstm(4), L::dense(1)], 1e-4),
        ("blstm_dropout0", vec![L::blstm(3), L::dropout(0.0), L::dense(1)], 1e-4),
        (
            "blstm_dropout",
            vec![L::blstm(4), L::dropout(0.2), L::blstm(4), L::dropout(0.2), L::dense(1)],
            1e-4,
        ),
        (
            "lstm_relu_head",
            vec![
                L::lstm(4),
                L::Dense {
                    units: 3,
                    activation: Activation::Relu,
                },
                L::dense(1),
            ],
            1e-4,
        ),
        (
            "blstm_dropout_bn",
            vec![
                L::blstm(8),
                L::dropout(0.4),
                L::batch_norm(),
                L::blstm(6),
                L::dropout(0.4),
                L::batch_norm(),
                L::blstm(4),
                L::dropout(0.4),
                L::dense(3),
                L::dense(1),
            ],
            1e-3,
        ),
    ];
    let mut data_rng = ChaCha8Rng::seed_from_u64(2024);
    stacks
        .into_iter()
        .enumerate()
        .map(|(k, (name, layers, tolerance))| {
            let spec = NetworkSpec::new(f, layers)?;
            let params = ModelParams::init(&spec, 100 + k as u64)?;
            let x = ndarray::Array3::from_shape_simple_fn((b, t, f), || data_rng.gen_range(-1.0..1.0));
            let y = ndarray::Array1::from_shape_simple_fn(b, || data_rng.gen_range(-1.0..1.0));
            Ok(GradCheckFixture {
                name,
                spec,
                params,
                x,
                y,
                tolerance,
            })
        })
        .collect()
}

pub const GRAD_CHECK_EPS: f64 = 1e-5;
pub const GRAD_CHECK_SEED: u64 = 7;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_fixtures_pass() {
        for fx in builtin_fixtures().unwrap() {
            let r = grad_check(&fx.spec, &fx.params, fx.x.view(), fx.y.view(), GRAD_CHECK_EPS, GRAD_CHECK_SEED).unwrap();
            assert!(
                r.max_rel_error <= fx.tolerance,
                "{}: {} at {}",
                fx.name,
                r.max_rel_error,
                r.worst
            );
            assert_eq!(r.checked, fx.params.trainable_count());
        }
    }

    #[test]
    fn corrupted_backward_is_detected() {
        let fx = builtin_fixtures().unwrap().remove(0);
        let r = grad_check_with(&fx.spec, &fx.params, fx.x.view(), fx.y.view(), GRAD_CHECK_EPS, GRAD_CHECK_SEED, |g| {
            g.arrays_mut()[0].data[0] *= 1.05;
        })
        .unwrap();
        assert!(r.max_rel_error > fx.tolerance);
        assert_eq!(r.worst, "layer0.fwd.w_x[0]");
    }
}
