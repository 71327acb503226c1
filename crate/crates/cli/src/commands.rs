use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use rul_core::dataset::{attach_linear_rul, parse_rul_file, parse_series_file, summarize, EngineSeriesSet, COLUMN_NAMES};
use rul_core::netcore::gradcheck::{GRAD_CHECK_EPS, GRAD_CHECK_SEED};
use rul_core::netcore::{builtin_fixtures, grad_check_with};
use rul_core::persistence::{load_model, save_history_csv, save_model};
use rul_core::preprocess::{correlation_matrix, make_windows, masked_rows, MaskMode, PreprocessPipeline};
use rul_core::training::{evaluate, prepare, train_prepared, ModelKind, TrainConfig};
use rul_core::Error;

use crate::manifest::RunManifest;
use crate::{Cli, Command, DescribeArgs, EvaluateArgs, GradcheckArgs, PreprocessArgs, TrainArgs, EXIT_VERIFY};

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const TRAIN_FILE: &str = "train_FD001.txt";
pub const TEST_FILE: &str = "test_FD001.txt";
pub const RUL_FILE: &str = "RUL_FD001.txt";

pub fn resolve(cli: &Cli, given: &Option<PathBuf>, default_name: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| cli.data_dir.join(default_name))
}

fn text_of(bytes: Vec<u8>, path: &Path) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| Error::Data(format!("{} is not UTF-8 text", path.display())).into())
}

pub fn read_series(m: &mut RunManifest, path: &Path) -> Result<EngineSeriesSet> {
    let text = text_of(m.input(path)?, path)?;
    parse_series_file(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_rul(m: &mut RunManifest, path: &Path) -> Result<Vec<u32>> {
    let text = text_of(m.input(path)?, path)?;
    parse_rul_file(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_file(m: &mut RunManifest, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    m.output(path);
    Ok(())
}

fn manifest_path(cli: &Cli, default: PathBuf) -> PathBuf {
    cli.manifest.clone().unwrap_or(default)
}

pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Describe(a) => describe(cli, a),
        Command::Preprocess(a) => preprocess(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Evaluate(a) => evaluate_cmd(cli, a),
        Command::Benchmark(a) => crate::benchmark::run(cli, a),
        Command::Gradcheck(a) => gradcheck(cli, a),
    }
}

fn describe(cli: &Cli, a: &DescribeArgs) -> Result<u8> {
    let path = resolve(cli, &a.train, TRAIN_FILE);
    #[derive(Serialize)]
    struct Cfg<'a> {
        train: &'a Path,
        json: bool,
        out_dir: &'a Option<PathBuf>,
    }
    let mut m = RunManifest::start("describe", Cfg {
        train: &path,
        json: a.json,
        out_dir: &a.out_dir,
    })?;
    let set = read_series(&mut m, &path)?;
    let summary = summarize(&set)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print!("{}", summary.render_text());
    }
    let default_manifest = match &a.out_dir {
        Some(dir) => {
            let mut means = String::from("column,mean,std,n_unique\n");
            for c in &summary.columns {
                means.push_str(&format!("{},{},{},{}\n", c.name, c.mean, c.std, c.n_unique));
            }
            write_file(&mut m, &dir.join("feature_means.csv"), means)?;
            let mut cycles = String::from("unit_id,cycles\n");
            for (u, n) in &summary.unit_cycles {
                cycles.push_str(&format!("{u},{n}\n"));
            }
            write_file(&mut m, &dir.join("unit_cycles.csv"), cycles)?;
            dir.join("run_manifest.json")
        }
        None => PathBuf::from("rul_describe.run.json"),
    };
    m.finish(&manifest_path(cli, default_manifest))?;
    Ok(0)
}

fn preprocess(cli: &Cli, a: &PreprocessArgs) -> Result<u8> {
    let path = resolve(cli, &a.train, TRAIN_FILE);
    let mode: MaskMode = a.mask.parse()?;
    #[derive(Serialize)]
    struct Cfg<'a> {
        train: &'a Path,
        mask: MaskMode,
        out_dir: &'a Path,
        export_windows: Option<usize>,
    }
    let mut m = RunManifest::start("preprocess", Cfg {
        train: &path,
        mask: mode,
        out_dir: &a.out_dir,
        export_windows: a.export_windows,
    })?;
    let set = read_series(&mut m, &path)?;
    let summary = summarize(&set)?;
    let mut pipeline = PreprocessPipeline::new(mode);
    pipeline.fit(&set)?;
    let dir = &a.out_dir;
    write_file(&mut m, &dir.join("pipeline.json"), pipeline.to_json()? + "\n")?;
    let mask = pipeline.mask()?;
    write_file(&mut m, &dir.join("prune_report.txt"), mask.report(&summary))?;

    let table = pipeline.transform(&set)?;
    let corr = correlation_matrix(table.stacked().view(), &table.names)?;
    write_file(&mut m, &dir.join("correlation.csv"), corr.to_csv())?;
    // All measurement columns before pruning.
    let all = all_measurements_mask()?;
    let names: Vec<String> = all.kept_names();
    let corr_all = correlation_matrix(masked_rows(&set, &all).view(), &names)?;
    write_file(&mut m, &dir.join("correlation_all.csv"), corr_all.to_csv())?;

    if let Some(t) = a.export_windows {
        let labeled = attach_linear_rul(set)?;
        let w = make_windows(&pipeline.transform(&labeled)?, t, 1, true)?;
        let bin = dir.join("windows.bin");
        let sidecar = w.export(&bin)?;
        m.output(&bin);
        m.output(&sidecar);
        println!("windows: ({}, {}, {})", w.len(), w.window_len(), w.n_features());
    }
    println!(
        "kept {} features: {}",
        mask.n_features(),
        mask.kept_names().join(", ")
    );
    m.finish(&manifest_path(cli, dir.join("run_manifest.json")))?;
    Ok(0)
}

fn all_measurements_mask() -> Result<rul_core::preprocess::FeatureMask> {
    use rul_core::preprocess::mask::DroppedColumn;
    use rul_core::preprocess::DropReason;
    let dropped = [0usize, 1]
        .into_iter()
        .map(|c| DroppedColumn {
            column: c,
            name: COLUMN_NAMES[c].to_string(),
            reasons: vec![DropReason::TargetOrIndex],
        })
        .collect();
    Ok(rul_core::preprocess::FeatureMask::from_parts(
        (2..COLUMN_NAMES.len()).collect(),
        dropped,
    )?)
}

pub fn build_config(a: &TrainArgs) -> Result<TrainConfig> {
    let kind: ModelKind = a.spec.parse()?;
    let mut c = TrainConfig::new(kind);
    c.mask_mode = a.mask.parse()?;
    c.seed = a.seed;
    if let Some(v) = a.window {
        c.window = v;
    }
    if let Some(v) = a.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = a.epochs {
        c.max_epochs = v;
    }
    if let Some(v) = a.lr {
        c.learning_rate = v;
    }
    if let Some(v) = a.plateau_factor {
        c.plateau_factor = v;
    }
    if let Some(v) = a.plateau_patience {
        c.plateau_patience = v;
    }
    if let Some(v) = a.early_stop_patience {
        c.early_stop_patience = v;
    }
    if let Some(v) = a.val_fraction {
        c.validation_fraction = v;
    }
    c.validate()?;
    Ok(c)
}

/// `model.json` → `model_<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}"))
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<u8> {
    let config = build_config(a)?;
    let path = resolve(cli, &a.train, TRAIN_FILE);
    #[derive(Serialize)]
    struct Cfg<'a> {
        train: &'a Path,
        out: &'a Path,
        config: &'a TrainConfig,
    }
    let mut m = RunManifest::start("train", Cfg {
        train: &path,
        out: &a.out,
        config: &config,
    })?;
    m.seed = Some(config.seed);
    let set = attach_linear_rul(read_series(&mut m, &path)?)?;
    let data = prepare(&config, &set)?;
    let quiet = a.quiet;
    let model = train_prepared(&config, &data, |r| {
        if !quiet {
            eprintln!(
                "epoch {:>3}  train {:>10.3}  val {:>10.3}  lr {:e}",
                r.epoch, r.train_loss, r.val_loss, r.lr
            );
        }
    })?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    save_model(&model, &a.out)?;
    m.output(&a.out);
    m.output(&a.out.with_extension("bin"));
    let hist = sibling(&a.out, "history.csv");
    save_history_csv(&model.history, &hist)?;
    m.output(&hist);
    if let Some(b) = model.history.best_epoch {
        println!(
            "{}: best epoch {b} of {}, val loss {:.3}",
            config.model,
            model.history.len(),
            model.history.val_loss[b]
        );
    } else {
        println!("{}: fitted", config.model);
    }
    println!("model written to {}", a.out.display());
    m.finish(&manifest_path(cli, sibling(&a.out, "run.json")))?;
    Ok(0)
}

fn evaluate_cmd(cli: &Cli, a: &EvaluateArgs) -> Result<u8> {
    let test = resolve(cli, &a.test, TEST_FILE);
    let rul = resolve(cli, &a.rul, RUL_FILE);
    let out = a.out.clone().unwrap_or_else(|| sibling(&a.model, "predictions.csv"));
    #[derive(Serialize)]
    struct Cfg<'a> {
        model: &'a Path,
        test: &'a Path,
        rul: &'a Path,
        out: &'a Path,
    }
    let mut m = RunManifest::start("evaluate", Cfg {
        model: &a.model,
        test: &test,
        rul: &rul,
        out: &out,
    })?;
    m.input(&a.model)?;
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    m.input(&a.model.with_extension("bin"))?;
    let test_set = read_series(&mut m, &test)?;
    let truth = read_rul(&mut m, &rul)?;
    let e = evaluate(&model, &test_set, &truth)?;
    write_file(&mut m, &out, e.to_csv())?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&e.metrics)?);
    } else {
        println!("{}", model.config.model.table_name());
        print!("{}", e.metrics);
    }
    m.finish(&manifest_path(cli, sibling(&out, "run.json")))?;
    Ok(0)
}

fn gradcheck(cli: &Cli, a: &GradcheckArgs) -> Result<u8> {
    let mut m = RunManifest::start("gradcheck", serde_json::json!({
        "eps": GRAD_CHECK_EPS,
        "seed": GRAD_CHECK_SEED,
        "corrupt_backward": a.corrupt_backward,
    }))?;
    m.seed = Some(GRAD_CHECK_SEED);
    let mut all_ok = true;
    for fx in builtin_fixtures()? {
        let corrupt = a.corrupt_backward;
        let r = grad_check_with(
            &fx.spec,
            &fx.params,
            fx.x.view(),
            fx.y.view(),
            GRAD_CHECK_EPS,
            GRAD_CHECK_SEED,
            |g| {
                if corrupt {
                    g.arrays_mut()[0].data[0] *= 1.05;
                }
            },
        )?;
        let ok = r.max_rel_error <= fx.tolerance;
        all_ok &= ok;
        println!(
            "{:<18} {:>5} params  max rel err {:.3e}  (tol {:.0e}, worst {})  {}",
            fx.name,
            r.checked,
            r.max_rel_error,
            fx.tolerance,
            r.worst,
            if ok { "ok" } else { "FAIL" }
        );
    }
    m.finish(&manifest_path(cli, PathBuf::from("rul_gradcheck.run.json")))?;
    if all_ok {
        println!("gradient check passed");
        Ok(0)
    } else {
        println!("gradient check FAILED");
        Ok(EXIT_VERIFY)
    }
}
