//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! FD001 files are read from `$RUL_DATA_DIR` (default `<workspace>/data/CMAPSS`).
//! Criterion 7 trains the full benchmark in-process unless `$RUL_BENCHMARK_DIR`
//! points at the output directory of a finished `rul benchmark` run.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rul_core::dataset::{attach_linear_rul, parse_rul_file, parse_series_file, summarize, EngineSeriesSet};
use rul_core::metrics::{mae, mse, r2, rmse};
use rul_core::netcore::gradcheck::{GRAD_CHECK_EPS, GRAD_CHECK_SEED};
use rul_core::netcore::{builtin_fixtures, grad_check, ModelParams};
use rul_core::persistence::{load_model, save_model};
use rul_core::preprocess::{
    final_windows, make_windows, window_count, yeo_johnson, DropReason, MaskMode, PreprocessPipeline,
};
use rul_core::synthetic::{generate, SyntheticSpec};
use rul_core::training::{
    evaluate, prepare, train, train_prepared, validation_loss, ModelKind, Predictor, TrainConfig, TrainedModel,
    TrainingHistory,
};
use rul_core::Error;

type Outcome = Result<String, String>;

fn data_dir() -> PathBuf {
    std::env::var_os("RUL_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/CMAPSS"))
}

fn read_fd001(name: &str) -> Result<String, String> {
    let p = data_dir().join(name);
    fs::read_to_string(&p).map_err(|e| format!("FD001 file {} unavailable ({e}); set RUL_DATA_DIR", p.display()))
}

fn fd001_train() -> Result<EngineSeriesSet, String> {
    parse_series_file(&read_fd001("train_FD001.txt")?).map_err(|e| e.to_string())
}

fn fd001_test() -> Result<(EngineSeriesSet, Vec<u32>), String> {
    let test = parse_series_file(&read_fd001("test_FD001.txt")?).map_err(|e| e.to_string())?;
    let rul = parse_rul_file(&read_fd001("RUL_FD001.txt")?).map_err(|e| e.to_string())?;
    Ok((test, rul))
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    check(
        elapsed <= budget,
        format!("took {:.2} s, budget {:.0} s", elapsed.as_secs_f64(), budget.as_secs_f64()),
    )
}

fn c1_dataset() -> Outcome {
    let t0 = Instant::now();
    let set = fd001_train()?;
    let s = summarize(&set).map_err(|e| e.to_string())?;
    within_budget(t0.elapsed(), Duration::from_secs(1))?;
    check(s.n_rows == 20631, format!("{} rows, expected 20631", s.n_rows))?;
    check(s.n_units == 100, format!("{} units, expected 100", s.n_units))?;
    check(s.cycles_min == 128, format!("min cycles {}, expected 128", s.cycles_min))?;
    check(s.cycles_max == 362, format!("max cycles {}, expected 362", s.cycles_max))?;
    check(
        (s.cycles_mean - 206.0).abs() <= 0.5,
        format!("mean cycles {}, expected 206 ± 0.5", s.cycles_mean),
    )?;
    Ok(format!(
        "20631 rows, 100 units, cycles {}/{:.2}/{}",
        s.cycles_min, s.cycles_mean, s.cycles_max
    ))
}

const EXPECTED_DROPS: [&str; 12] = [
    "unit_id",
    "op_setting_1",
    "op_setting_2",
    "sensor_1",
    "sensor_5",
    "sensor_6",
    "sensor_9",
    "sensor_10",
    "sensor_14",
    "sensor_16",
    "sensor_18",
    "sensor_19",
];

fn c2_mask() -> Outcome {
    let set = fd001_train()?;
    let t0 = Instant::now();
    let mut p = PreprocessPipeline::new(MaskMode::Both);
    p.fit(&set).map_err(|e| e.to_string())?;
    let mask = p.mask().map_err(|e| e.to_string())?;
    within_budget(t0.elapsed(), Duration::from_secs(1))?;
    check(mask.n_features() == 12, format!("{} features, expected 12", mask.n_features()))?;
    let explicit: Vec<String> = mask
        .dropped_with(DropReason::ExplicitList)
        .iter()
        .map(|&c| rul_core::dataset::COLUMN_NAMES[c].to_string())
        .collect();
    check(
        explicit == EXPECTED_DROPS,
        format!("canonical-tagged drops {explicit:?}"),
    )?;
    Ok(format!("12 features: {}", mask.kept_names().join(", ")))
}

/// Invariants on any training set; returns the number of checks made.
fn preprocessing_invariants(set: &EngineSeriesSet) -> Result<usize, String> {
    let labeled = attach_linear_rul(set.clone()).map_err(|e| e.to_string())?;
    let mut p = PreprocessPipeline::new(MaskMode::Both);
    p.fit(set).map_err(|e| e.to_string())?;
    let mask = p.mask().map_err(|e| e.to_string())?;
    let raw = rul_core::preprocess::masked_rows(set, mask);
    let scaler = p.scaler().map_err(|e| e.to_string())?;
    let scaled = scaler.transform(raw.view()).map_err(|e| e.to_string())?;
    let mut n = 0;
    for v in scaled.iter() {
        check((0.0..=1.0).contains(v), format!("Min-Max value {v} outside [0, 1]"))?;
    }
    n += 1;
    let back = scaler.inverse_transform(scaled.view()).map_err(|e| e.to_string())?;
    for (j, (lo, hi)) in scaler.min.iter().zip(&scaler.max).enumerate() {
        if hi > lo {
            for (a, b) in raw.column(j).iter().zip(back.column(j)) {
                check(
                    (a - b).abs() <= 1e-12 * a.abs().max(1e-300),
                    format!("inverse Min-Max {b} vs {a}"),
                )?;
            }
        }
    }
    n += 1;
    let grid: Vec<f64> = (0..2001).map(|i| -0.5 + 2.0 * i as f64 / 2000.0).collect();
    for &l in &p.power().map_err(|e| e.to_string())?.lambdas {
        for w in grid.windows(2) {
            check(
                yeo_johnson(w[0], l) < yeo_johnson(w[1], l),
                format!("power transform with λ = {l} not strictly increasing at {}", w[0]),
            )?;
        }
    }
    n += 1;
    let table = p.transform(&labeled).map_err(|e| e.to_string())?;
    for t in [1, 5, 30, 400] {
        for stride in [1, 3] {
            for pad in [false, true] {
                let w = make_windows(&table, t, stride, pad).map_err(|e| e.to_string())?;
                let expected: usize = table
                    .units
                    .iter()
                    .map(|u| {
                        let len = u.len();
                        if len >= t {
                            (len - t) / stride + 1
                        } else if pad {
                            1
                        } else {
                            0
                        }
                    })
                    .sum();
                check(
                    w.len() == expected,
                    format!("T={t} stride={stride} pad={pad}: {} windows, formula {expected}", w.len()),
                )?;
                let counted: usize = table.units.iter().map(|u| window_count(u.len(), t, stride, pad)).sum();
                check(counted == expected, "window_count disagrees with the formula")?;
                n += 1;
            }
        }
    }
    Ok(n)
}

fn c3_preprocessing() -> Outcome {
    let synth = generate(&SyntheticSpec::default()).map_err(|e| e.to_string())?;
    let n = preprocessing_invariants(&synth.train)?;
    let set = fd001_train().map_err(|e| format!("synthetic invariants pass ({n} checks); {e}"))?;
    let m = preprocessing_invariants(&set)?;
    let labeled = attach_linear_rul(set.clone()).map_err(|e| e.to_string())?;
    let mut p = PreprocessPipeline::new(MaskMode::Both);
    p.fit(&set).map_err(|e| e.to_string())?;
    let w = make_windows(&p.transform(&labeled).map_err(|e| e.to_string())?, 1, 1, false).map_err(|e| e.to_string())?;
    let shape = (w.len(), w.n_features());
    check(shape == (20631, 12), format!("T = 1 windows {shape:?}, expected (20631, 12)"))?;
    Ok(format!("{} invariant checks; T = 1 gives (20631, 12)", n + m))
}

fn c4_gradients() -> Outcome {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    for fx in builtin_fixtures().map_err(|e| e.to_string())? {
        let r = grad_check(&fx.spec, &fx.params, fx.x.view(), fx.y.view(), GRAD_CHECK_EPS, GRAD_CHECK_SEED)
            .map_err(|e| e.to_string())?;
        check(
            r.max_rel_error <= fx.tolerance,
            format!("{}: {:.3e} > {:.0e} at {}", fx.name, r.max_rel_error, fx.tolerance, r.worst),
        )?;
        parts.push(format!("{} {:.1e}", fx.name, r.max_rel_error));
    }
    within_budget(t0.elapsed(), Duration::from_secs(60))?;
    Ok(parts.join(", "))
}

fn ulp(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1) - x
}

fn c5_metrics() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.gen_range(1..50);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..300.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..300.0)).collect();
        let (m, r, a) = (
            mse(&y, &p).map_err(|e| e.to_string())?,
            rmse(&y, &p).map_err(|e| e.to_string())?,
            mae(&y, &p).map_err(|e| e.to_string())?,
        );
        check((r * r - m).abs() <= ulp(m), format!("rmse² {} vs mse {m}", r * r))?;
        check(a <= r, format!("mae {a} > rmse {r}"))?;
        if n >= 2 && y.iter().any(|v| *v != y[0]) {
            check(r2(&y, &y).map_err(|e| e.to_string())? == 1.0, "r2(y, y) != 1")?;
            let mean = y.iter().sum::<f64>() / n as f64;
            let r0 = r2(&y, &vec![mean; n]).map_err(|e| e.to_string())?;
            check(r0.abs() < 1e-12, format!("r2 of mean predictor {r0}"))?;
        }
    }
    check(
        matches!(r2(&[3.0, 3.0], &[1.0, 2.0]), Err(Error::Undefined(_))),
        "zero-variance y did not raise the undefined error",
    )?;
    within_budget(t0.elapsed(), Duration::from_secs(1))?;
    Ok("1000 random vectors".into())
}

fn c6_linear() -> Outcome {
    let set = attach_linear_rul(fd001_train()?).map_err(|e| e.to_string())?;
    let (test, truth) = fd001_test()?;
    let t0 = Instant::now();
    let model = train(&TrainConfig::new(ModelKind::Lr), &set).map_err(|e| e.to_string())?;
    let e = evaluate(&model, &test, &truth).map_err(|e| e.to_string())?;
    let again = evaluate(
        &train(&TrainConfig::new(ModelKind::Lr), &set).map_err(|e| e.to_string())?,
        &test,
        &truth,
    )
    .map_err(|e| e.to_string())?;
    within_budget(t0.elapsed(), Duration::from_secs(10))?;
    check(e == again, "linear baseline is not deterministic")?;
    let m = e.metrics;
    check(
        (m.rmse - 30.5).abs() <= 3.0,
        format!("RMSE {:.3}, expected 30.5 ± 3.0 (MSE {:.2}, MAE {:.2}, R² {:.3})", m.rmse, m.mse, m.mae, m.r2),
    )?;
    Ok(format!("RMSE {:.3}, MSE {:.2}, MAE {:.2}, R² {:.3}", m.rmse, m.mse, m.mae, m.r2))
}

/// (model id, rmse, r2) per sub-run.
fn benchmark_rows() -> Result<Vec<(String, f64, f64)>, String> {
    if let Some(dir) = std::env::var_os("RUL_BENCHMARK_DIR") {
        let p = PathBuf::from(dir).join("per_seed.csv");
        let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
        return text
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                let num = |i: usize| f.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or(format!("bad row {l}"));
                Ok((f[0].to_string(), num(3)?, num(6)?))
            })
            .collect();
    }
    let set = attach_linear_rul(fd001_train()?).map_err(|e| e.to_string())?;
    let (test, truth) = fd001_test()?;
    let mut rows = Vec::new();
    for (index, kind) in ModelKind::ALL.into_iter().enumerate() {
        for seed in [1u64, 2, 3] {
            let mut c = TrainConfig::new(kind);
            c.seed = seed + index as u64;
            if kind == ModelKind::BlstmDropoutBn {
                c.max_epochs = 10;
            }
            let m = train(&c, &set).map_err(|e| format!("{kind}: {e}"))?;
            let e = evaluate(&m, &test, &truth).map_err(|e| format!("{kind}: {e}"))?;
            println!("    {kind} seed {seed}: RMSE {:.3} R² {:.3}", e.metrics.rmse, e.metrics.r2);
            rows.push((kind.id().to_string(), e.metrics.rmse, e.metrics.r2));
        }
    }
    Ok(rows)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn c7_neural() -> Outcome {
    let rows = benchmark_rows()?;
    let med = |id: &str, col: fn(&(String, f64, f64)) -> f64| -> Result<f64, String> {
        let v: Vec<f64> = rows.iter().filter(|r| r.0 == id).map(col).collect();
        check(!v.is_empty(), format!("no runs for {id}"))?;
        Ok(median(v))
    };
    let lin = med("lr", |r| r.1)?;
    let bd_rmse = med("blstm_dropout", |r| r.1)?;
    let bd_r2 = med("blstm_dropout", |r| r.2)?;
    let mut fails = Vec::new();
    if bd_rmse > 32.0 {
        fails.push(format!("blstm_dropout median RMSE {bd_rmse:.3} > 32"));
    }
    if bd_r2 < 0.45 {
        fails.push(format!("blstm_dropout median R² {bd_r2:.3} < 0.45"));
    }
    let mut summary = vec![format!("lr {lin:.3}")];
    for kind in ModelKind::ALL.into_iter().filter(|k| k.is_neural()) {
        let r = med(kind.id(), |r| r.1)?;
        summary.push(format!("{kind} {r:.3}"));
        if r >= lin {
            fails.push(format!("{kind} median RMSE {r:.3} does not beat linear {lin:.3}"));
        }
    }
    if fails.is_empty() {
        Ok(format!("median RMSE: {}; blstm_dropout R² {bd_r2:.3}", summary.join(", ")))
    } else {
        Err(format!("{} (median RMSE: {})", fails.join("; "), summary.join(", ")))
    }
}

fn toy_set() -> Result<EngineSeriesSet, String> {
    let d = generate(&SyntheticSpec {
        n_units: 5,
        min_life: 40,
        max_life: 60,
        noise: 0.02,
        seed: 8,
    })
    .map_err(|e| e.to_string())?;
    attach_linear_rul(d.train).map_err(|e| e.to_string())
}

fn c8_training() -> Outcome {
    let set = toy_set()?;
    let mut c = TrainConfig::new(ModelKind::Lstm128);
    c.batch_size = 16;
    c.learning_rate = 2e-2;
    c.max_epochs = 40;
    c.plateau_patience = 1;
    c.early_stop_patience = 3;
    c.seed = 4;
    let data = prepare(&c, &set).map_err(|e| e.to_string())?;
    let m = train_prepared(&c, &data, |_| {}).map_err(|e| e.to_string())?;
    let h = &m.history;
    check(h.lr.windows(2).all(|w| w[1] <= w[0]), format!("learning rate increased: {:?}", h.lr))?;
    check(h.lr.windows(2).any(|w| w[1] < w[0]), "plateau reduction never fired")?;
    check(h.stopped_early, "early stopping never fired")?;
    let best = h.best_epoch.ok_or("no best epoch")?;
    let min = h.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
    check(h.val_loss[best] == min, "best epoch is not the argmin of validation loss")?;
    let Predictor::Network { spec, params } = &m.predictor else {
        return Err("expected a network".into());
    };
    let restored = validation_loss(spec, params, data.validation.as_ref().ok_or("no validation")?, m.target_scale)
        .map_err(|e| e.to_string())?;
    check(
        restored == min,
        format!("restored weights score {restored}, best recorded {min}"),
    )?;

    let mut d = TrainConfig::new(ModelKind::BlstmDropout);
    d.batch_size = 16;
    d.max_epochs = 3;
    d.seed = 7;
    let a = train(&d, &set).map_err(|e| e.to_string())?.history.to_csv();
    let b = train(&d, &set).map_err(|e| e.to_string())?.history.to_csv();
    check(a.as_bytes() == b.as_bytes(), "repeated runs produced different history CSVs")?;

    let mut l = TrainConfig::new(ModelKind::Lstm128);
    l.batch_size = 16;
    l.learning_rate = 3e-3;
    l.max_epochs = 20;
    l.early_stop_patience = 50;
    l.seed = 11;
    let hl: TrainingHistory = train(&l, &set).map_err(|e| e.to_string())?.history;
    check(
        hl.len() == 20 && hl.train_loss[19] < hl.train_loss[0],
        format!("lstm128 loss epoch 1 {} vs epoch 20 {:?}", hl.train_loss[0], hl.train_loss.last()),
    )?;
    Ok(format!(
        "stopped at epoch {} with best {best}; lr {:e} → {:e}; histories identical; lstm128 loss {:.1} → {:.1}",
        h.len() - 1,
        h.lr[0],
        h.lr[h.len() - 1],
        hl.train_loss[0],
        hl.train_loss[19]
    ))
}

fn c9_persistence() -> Outcome {
    let d = generate(&SyntheticSpec::default()).map_err(|e| e.to_string())?;
    let mut pipeline = PreprocessPipeline::new(MaskMode::Both);
    pipeline.fit(&d.train).map_err(|e| e.to_string())?;
    let config = TrainConfig::new(ModelKind::BlstmDropout);
    let spec = ModelKind::BlstmDropout
        .network_spec(pipeline.n_features().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?
        .ok_or("no spec")?;
    let params = ModelParams::init(&spec, 3).map_err(|e| e.to_string())?;
    let model = TrainedModel {
        config,
        pipeline,
        predictor: Predictor::Network { spec, params },
        history: TrainingHistory::default(),
        target_scale: 150.0,
        split: None,
    };
    let table = model.pipeline.transform(&d.test).map_err(|e| e.to_string())?;
    let batch = final_windows(&table, model.config.window).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.json");

    let t0 = Instant::now();
    let before = model.predict_windows(&batch).map_err(|e| e.to_string())?;
    save_model(&model, &path).map_err(|e| e.to_string())?;
    let loaded = load_model(&path).map_err(|e| e.to_string())?;
    let after = loaded.predict_windows(&batch).map_err(|e| e.to_string())?;
    within_budget(t0.elapsed(), Duration::from_secs(1))?;
    check(
        before.iter().zip(after.iter()).all(|(a, b)| a.to_bits() == b.to_bits()),
        "predictions differ after reload",
    )?;
    let bin = path.with_extension("bin");
    let mut bytes = fs::read(&bin).map_err(|e| e.to_string())?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    fs::write(&bin, &bytes).map_err(|e| e.to_string())?;
    check(
        matches!(load_model(&path), Err(Error::Checksum { .. })),
        "flipped payload byte was not detected",
    )?;
    Ok(format!("{} predictions bit-identical; tampering detected", before.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("dataset fidelity", c1_dataset),
        ("feature-mask reconciliation", c2_mask),
        ("preprocessing invariants", c3_preprocessing),
        ("gradient correctness", c4_gradients),
        ("metric identities", c5_metrics),
        ("linear baseline vs reference", c6_linear),
        ("neural benchmark vs reference", c7_neural),
        ("training-loop contracts", c8_training),
        ("persistence", c9_persistence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let r = f();
        let secs = t0.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail}) [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({detail}) [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
