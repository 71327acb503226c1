//! All five models × seeds, with a median comparison table.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use rul_core::dataset::{attach_linear_rul, EngineSeriesSet};
use rul_core::metrics::MetricsReport;
use rul_core::persistence::{save_history_csv, save_model};
use rul_core::training::{evaluate, prepare, train_prepared, Evaluation, ModelKind, TrainConfig};

use crate::commands::{read_rul, read_series, resolve, write_file, RUL_FILE, TEST_FILE, TRAIN_FILE};
use crate::manifest::RunManifest;
use crate::{BenchmarkArgs, Cli};

#[derive(Debug, Clone, Serialize)]
struct SubRun {
    kind: ModelKind,
    seed: u64,
    config: TrainConfig,
    dir: PathBuf,
}

#[derive(Debug, Clone)]
struct Outcome {
    metrics: MetricsReport,
    epochs: usize,
    best_epoch: Option<usize>,
}

/// Median of a non-empty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn plan(a: &BenchmarkArgs) -> Result<Vec<SubRun>> {
    let kinds: Vec<ModelKind> = match &a.specs {
        Some(ids) => ids.iter().map(|s| s.parse()).collect::<rul_core::Result<_>>()?,
        None => ModelKind::ALL.to_vec(),
    };
    if a.seeds.is_empty() {
        return Err(crate::commands::UsageError("at least one seed is required".into()).into());
    }
    let mut runs = Vec::new();
    for &kind in &kinds {
        let index = ModelKind::ALL.iter().position(|k| *k == kind).expect("known kind") as u64;
        for &seed in &a.seeds {
            let mut c = TrainConfig::new(kind);
            c.seed = seed + index;
            if kind.is_neural() {
                if let Some(w) = a.window {
                    c.window = w;
                }
                if let Some(b) = a.batch_size {
                    c.batch_size = b;
                }
                if let Some(e) = a.epochs {
                    c.max_epochs = e;
                }
                if kind == ModelKind::BlstmDropoutBn {
                    if let Some(e) = a.bn_epochs {
                        c.max_epochs = e;
                    }
                }
            }
            c.validate()?;
            runs.push(SubRun {
                kind,
                seed,
                dir: a.out_dir.join(format!("{}_seed{seed}", kind.id())),
                config: c,
            });
        }
    }
    Ok(runs)
}

fn execute(run: &SubRun, train: &EngineSeriesSet, test: &EngineSeriesSet, truth: &[u32]) -> Result<(Outcome, Evaluation)> {
    let data = prepare(&run.config, train)?;
    let model = train_prepared(&run.config, &data, |_| {})?;
    std::fs::create_dir_all(&run.dir).with_context(|| format!("creating {}", run.dir.display()))?;
    save_model(&model, &run.dir.join("model.json"))?;
    save_history_csv(&model.history, &run.dir.join("history.csv"))?;
    let e = evaluate(&model, test, truth)?;
    std::fs::write(run.dir.join("predictions.csv"), e.to_csv())
        .with_context(|| format!("writing {}", run.dir.display()))?;
    Ok((
        Outcome {
            metrics: e.metrics,
            epochs: model.history.len(),
            best_epoch: model.history.best_epoch,
        },
        e,
    ))
}

/// Table rows in model order. RMSE is taken as √(median MSE) so that
/// rmse² = mse holds row-wise for any number of seeds.
fn table_rows(runs: &[SubRun], outcomes: &[Outcome]) -> Vec<(ModelKind, [f64; 4])> {
    let mut rows = Vec::new();
    for kind in ModelKind::ALL {
        let sel: Vec<&Outcome> = runs
            .iter()
            .zip(outcomes)
            .filter(|(r, _)| r.kind == kind)
            .map(|(_, o)| o)
            .collect();
        if sel.is_empty() {
            continue;
        }
        let col = |f: fn(&MetricsReport) -> f64| median(&sel.iter().map(|o| f(&o.metrics)).collect::<Vec<_>>());
        let mse = col(|m| m.mse);
        rows.push((kind, [mse.sqrt(), mse, col(|m| m.mae), col(|m| m.r2)]));
    }
    rows
}

fn render_table(rows: &[(ModelKind, [f64; 4])]) -> String {
    let width = rows.iter().map(|(k, _)| k.table_name().len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>9}  {:>7}  {:>6}\n",
        "Model", "RMSE", "MSE", "MAE", "R²"
    );
    for (k, [rmse, mse, mae, r2]) in rows {
        out.push_str(&format!(
            "{:<width$}  {rmse:>8.2}  {mse:>9.2}  {mae:>7.2}  {r2:>6.2}\n",
            k.table_name()
        ));
    }
    out
}

pub fn run(cli: &Cli, a: &BenchmarkArgs) -> Result<u8> {
    let runs = plan(a)?;
    let train_path = resolve(cli, &a.train, TRAIN_FILE);
    let test_path = resolve(cli, &a.test, TEST_FILE);
    let rul_path = resolve(cli, &a.rul, RUL_FILE);
    let mut m = RunManifest::start("benchmark", serde_json::json!({
        "train": train_path,
        "test": test_path,
        "rul": rul_path,
        "seeds": a.seeds,
        "jobs": a.jobs,
        "out_dir": a.out_dir,
        "runs": runs,
    }))?;
    let train = attach_linear_rul(read_series(&mut m, &train_path)?)?;
    let test = read_series(&mut m, &test_path)?;
    let truth = read_rul(&mut m, &rul_path)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Outcome>>>> = Mutex::new((0..runs.len()).map(|_| None).collect());
    let jobs = a.jobs.clamp(1, runs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= runs.len() {
                    break;
                }
                let r = &runs[i];
                let out = execute(r, &train, &test, &truth).map(|(o, _)| o);
                match &out {
                    Ok(o) => eprintln!(
                        "{} seed {}: rmse {:.3} after {} epochs",
                        r.kind, r.seed, o.metrics.rmse, o.epochs
                    ),
                    Err(e) => eprintln!("{} seed {}: failed: {e:#}", r.kind, r.seed),
                }
                let failed = out.is_err();
                results.lock().expect("results lock")[i] = Some(out);
                if failed {
                    // Stop handing out further work.
                    next.store(runs.len(), Ordering::SeqCst);
                }
            });
        }
    });
    let mut outcomes = Vec::with_capacity(runs.len());
    for (r, res) in runs.iter().zip(results.into_inner().expect("results lock")) {
        match res {
            Some(Ok(o)) => outcomes.push(o),
            Some(Err(e)) => return Err(e.context(format!("benchmark run {} (seed {}) failed", r.kind, r.seed))),
            None => return Err(anyhow!("benchmark aborted before {} (seed {}) ran", r.kind, r.seed)),
        }
    }

    let mut per_seed = String::from("model,seed,sub_seed,rmse,mse,mae,r2,epochs,best_epoch\n");
    for (r, o) in runs.iter().zip(&outcomes) {
        per_seed.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.kind,
            r.seed,
            r.config.seed,
            o.metrics.rmse,
            o.metrics.mse,
            o.metrics.mae,
            o.metrics.r2,
            o.epochs,
            o.best_epoch.map(|b| b.to_string()).unwrap_or_default()
        ));
    }
    write_file(&mut m, &a.out_dir.join("per_seed.csv"), per_seed)?;
    let rows = table_rows(&runs, &outcomes);
    let mut csv = String::from("model,rmse,mse,mae,r2\n");
    for (k, [rmse, mse, mae, r2]) in &rows {
        csv.push_str(&format!("{},{rmse},{mse},{mae},{r2}\n", csv_quote(k.table_name())));
    }
    write_file(&mut m, &a.out_dir.join("table.csv"), csv)?;
    let table = render_table(&rows);
    write_file(&mut m, &a.out_dir.join("table.txt"), &table)?;
    for r in &runs {
        m.output(&r.dir);
    }
    print!("{table}");
    m.finish(&manifest_path(cli, &a.out_dir))?;
    Ok(0)
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn manifest_path(cli: &Cli, out_dir: &Path) -> PathBuf {
    cli.manifest.clone().unwrap_or_else(|| out_dir.join("run_manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }
}
