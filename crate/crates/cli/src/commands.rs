use std::fs;
use std::path::{Path, PathBuf};

use m2fgb_core::booster::{labels_from_scores, train as fit, Model};
use m2fgb_core::data::{
    generate_synthetic, load_csv, preprocess, stratified_split, write_csv, ColumnSchema, Dataset, Preprocessor,
    SplitSpec, SyntheticGroup, TaskKind,
};
use m2fgb_core::harness::{
    convergence_experiment, lambda_monotonicity_experiment, lambda_rows_to_csv, performance_metric, random_search,
    run_trials, spearman, target_metric, ModelPool, PoolEvaluations, RunManifest, SearchSpace,
};
use m2fgb_core::metrics::{group_metric, overall_metric, GroupMetricReport, MetricName};
use m2fgb_core::simplex::project_scaled_simplex;
use m2fgb_core::{model_file, Error};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::failure::{fail, AtStage, CliResult, Failure, Stage};

/// Stage a core error belongs to; `fallback` covers argument errors.
fn classify(e: Error, fallback: Stage) -> Failure {
    let stage = match &e {
        Error::Io { .. } | Error::Csv(_) | Error::ModelFormat { .. } => Stage::Load,
        Error::Schema(_)
        | Error::Cell { .. }
        | Error::InvalidData(_)
        | Error::NoPositives { .. }
        | Error::EmptyGroup { .. }
        | Error::DimensionMismatch { .. } => Stage::Validate,
        Error::NonFinite { .. } => Stage::Train,
        _ => fallback,
    };
    Failure {
        stage,
        message: e.to_string(),
    }
}

trait CoreResult<T> {
    fn or_stage(self, fallback: Stage) -> CliResult<T>;
}

impl<T> CoreResult<T> for m2fgb_core::Result<T> {
    fn or_stage(self, fallback: Stage) -> CliResult<T> {
        self.map_err(|e| classify(e, fallback))
    }
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.path("out")?.unwrap_or_else(|| PathBuf::from("m2fgb-out"));
    fs::create_dir_all(&dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))
        .at(Stage::Serialize)?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
        .at(Stage::Serialize)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

struct Partitions {
    train: Dataset,
    valid: Dataset,
    test: Dataset,
    preprocessor: Preprocessor,
    raw_train: Dataset,
}

fn load_schema(cfg: &RunConfig) -> CliResult<ColumnSchema> {
    ColumnSchema::from_file(cfg.require_path("schema")?).or_stage(Stage::Load)
}

fn split_spec(cfg: &RunConfig) -> CliResult<SplitSpec> {
    let seed = cfg.get_or("split_seed", cfg.seed()?)?;
    let f = match cfg.list::<f64>("split")? {
        None => [0.6, 0.2, 0.2],
        Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
        Some(_) => return fail(Stage::Config, "split needs three fractions 'train,validation,test'"),
    };
    SplitSpec::new(f[0], f[1], f[2], seed).or_stage(Stage::Config)
}

/// Loads, splits (unless explicit validation and test files are given) and
/// preprocesses with statistics fitted on the training part only.
fn partitions(cfg: &RunConfig) -> CliResult<Partitions> {
    let schema = load_schema(cfg)?;
    let raw = load_csv(cfg.require_path("data")?, &schema).or_stage(Stage::Load)?;
    let (raw_train, raw_valid, raw_test) = match (cfg.path("valid_data")?, cfg.path("test_data")?) {
        (Some(v), Some(t)) => (
            raw,
            load_csv(v, &schema).or_stage(Stage::Load)?,
            load_csv(t, &schema).or_stage(Stage::Load)?,
        ),
        (None, None) => stratified_split(&raw, &split_spec(cfg)?).or_stage(Stage::Validate)?,
        _ => return fail(Stage::Config, "valid_data and test_data must be given together"),
    };
    let (train, preprocessor, warnings) = preprocess(&raw_train).or_stage(Stage::Validate)?;
    for w in &warnings {
        eprintln!("warning: column '{}': {}", w.column, w.message);
    }
    let valid = preprocessor.transform(&raw_valid).or_stage(Stage::Validate)?;
    let test = preprocessor.transform(&raw_test).or_stage(Stage::Validate)?;
    Ok(Partitions {
        train,
        valid,
        test,
        preprocessor,
        raw_train,
    })
}

fn fairness_metric(cfg: &RunConfig, default: MetricName) -> CliResult<MetricName> {
    cfg.get_or("fairness_metric", default)
}

/// Replaces a `#index` group reference with the group's name.
fn name_group(e: Error, ds: &Dataset) -> Error {
    let lookup = |group: String| {
        group
            .strip_prefix('#')
            .and_then(|i| i.parse::<usize>().ok())
            .and_then(|i| ds.group_names.get(i).cloned())
            .unwrap_or(group)
    };
    match e {
        Error::NoPositives { group } => Error::NoPositives { group: lookup(group) },
        Error::EmptyGroup { group } => Error::EmptyGroup { group: lookup(group) },
        other => other,
    }
}

/// Overall performance plus the group report of `metric` on `ds`.
fn evaluation(model: &Model, ds: &Dataset, metric: MetricName, threshold: f64) -> CliResult<Value> {
    let scores = model.predict_scores(&ds.features).or_stage(Stage::Validate)?;
    let predictions = match ds.task {
        TaskKind::BinaryClassification => labels_from_scores(&scores, threshold),
        TaskKind::Regression => scores,
    };
    let perf_metric = performance_metric(ds.task);
    let performance = overall_metric(perf_metric, &ds.labels, &predictions).or_stage(Stage::Validate)?;
    let report = group_metric(metric, &ds.labels, &predictions, &ds.groups, ds.num_groups())
        .map_err(|e| name_group(e, ds))
        .or_stage(Stage::Validate)?;
    Ok(json!({
        "rows": ds.len(),
        "performance_metric": perf_metric.name(),
        "performance": performance,
        "group_names": ds.group_names,
        "fairness": report,
    }))
}

fn print_evaluation(title: &str, v: &Value) {
    let report: GroupMetricReport = serde_json::from_value(v["fairness"].clone()).expect("report shape");
    let names: Vec<String> = serde_json::from_value(v["group_names"].clone()).expect("names");
    println!("{title}");
    println!("  rows              {}", v["rows"]);
    println!(
        "  performance       {} {:?}",
        v["performance_metric"].as_str().unwrap_or_default(),
        v["performance"].as_f64().unwrap_or(f64::NAN)
    );
    println!("  fairness metric   {}", report.metric);
    for (name, value) in names.iter().zip(&report.values) {
        println!("    {name:<16}{value:?}");
    }
    println!(
        "  worst group       {} {:?}",
        names[report.worst_group_index], report.worst_group_value
    );
    println!("  disparity         {:?}", report.disparity);
}

pub fn train(cfg: &RunConfig, json_out: bool) -> CliResult<()> {
    let schema = load_schema(cfg)?;
    let config = cfg.booster(schema.task)?;
    let threshold = cfg.get_or("threshold", 0.5)?;
    let metric = fairness_metric(cfg, target_metric(config.group_kind, schema.task))?;
    let parts = partitions(cfg)?;
    let (model, trace) = fit(&parts.train, &config).or_stage(Stage::Train)?;

    let dir = out_dir(cfg)?;
    model_file::save(&model, dir.join("model.txt")).or_stage(Stage::Serialize)?;
    write(&dir.join("trace.csv"), &trace.to_csv())?;
    write(&dir.join("preprocessor.json"), &parts.preprocessor.to_json())?;
    let report = json!({
        "task": schema.task.name(),
        "config": config,
        "train": evaluation(&model, &parts.train, metric, threshold)?,
        "validation": evaluation(&model, &parts.valid, metric, threshold)?,
        "final_overall_loss": trace.final_overall_loss(),
        "final_group_losses": trace.final_group_losses().values,
    });
    write(&dir.join("report.json"), &pretty(&report))?;
    let mut manifest = RunManifest::new("train", config.seed);
    manifest.dataset("train", &parts.train);
    manifest.dataset("validation", &parts.valid);
    manifest.dataset("test", &parts.test);
    manifest.configs.push(config);
    write(&dir.join("manifest.json"), &(manifest.to_json() + "\n"))?;

    if json_out {
        print!("{}", pretty(&report));
    } else {
        println!(
            "trained {} trees on {} rows ({} groups); outputs in {}",
            model.trees.len(),
            parts.raw_train.len(),
            parts.train.num_groups(),
            dir.display()
        );
        print_evaluation("train", &report["train"]);
        print_evaluation("validation", &report["validation"]);
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, json_out: bool) -> CliResult<()> {
    let model_path = cfg.require_path("model")?;
    let threshold = cfg.get_or("threshold", 0.5)?;
    let model = model_file::load(&model_path).or_stage(Stage::Load)?;
    let metric = fairness_metric(cfg, target_metric(model.config.group_kind, model.task))?;
    let pre_path = match cfg.path("preprocessor")? {
        Some(p) => p,
        None => model_path.with_file_name("preprocessor.json"),
    };
    let pre_text = fs::read_to_string(&pre_path)
        .map_err(|e| format!("cannot read preprocessor {}: {e}", pre_path.display()))
        .at(Stage::Load)?;
    let preprocessor = Preprocessor::from_json(&pre_text).or_stage(Stage::Load)?;
    let schema = load_schema(cfg)?;
    if schema.task != model.task {
        return fail(
            Stage::Validate,
            format!("schema task '{}' does not match model task '{}'", schema.task.name(), model.task.name()),
        );
    }
    let raw = load_csv(cfg.require_path("data")?, &schema).or_stage(Stage::Load)?;
    let ds = preprocessor.transform(&raw).or_stage(Stage::Validate)?;
    if ds.num_features() != model.num_features {
        return fail(
            Stage::Validate,
            format!(
                "data has {} features after preprocessing but the model expects {}",
                ds.num_features(),
                model.num_features
            ),
        );
    }
    let result = evaluation(&model, &ds, metric, threshold)?;
    if json_out {
        print!("{}", pretty(&result));
    } else {
        print_evaluation(&format!("evaluation of {}", model_path.display()), &result);
    }
    Ok(())
}

fn search_space(cfg: &RunConfig, task: TaskKind) -> CliResult<SearchSpace> {
    let base = cfg.booster(task)?;
    let d = SearchSpace::around(base, cfg.seed()?);
    Ok(SearchSpace {
        lambda: cfg.pair("search_lambda", d.lambda)?,
        learning_rate: cfg.pair("search_learning_rate", d.learning_rate)?,
        dual_learning_rate: cfg.pair("search_dual_learning_rate", d.dual_learning_rate)?,
        rounds: cfg.pair("search_rounds", d.rounds)?,
        max_depth: cfg.pair("search_max_depth", d.max_depth)?,
        ..d
    })
}

fn alpha_grid(cfg: &RunConfig) -> CliResult<Vec<f64>> {
    Ok(cfg
        .list("alphas")?
        .unwrap_or_else(|| (0..=10).map(|k| k as f64 / 10.0).collect()))
}

pub fn sweep(cfg: &RunConfig, json_out: bool) -> CliResult<()> {
    let schema = load_schema(cfg)?;
    let space = search_space(cfg, schema.task)?;
    let metric = fairness_metric(cfg, target_metric(space.base.group_kind, schema.task))?;
    let alphas = alpha_grid(cfg)?;
    let pool_size: usize = cfg.get_or("pool_size", 20)?;
    let trials: usize = cfg.get_or("trials", 20)?;
    let trial_sample: usize = cfg.get_or("trial_sample", (pool_size / 2).max(1))?;
    let configs = random_search(&space, pool_size).or_stage(Stage::Config)?;
    let parts = partitions(cfg)?;
    let pool = ModelPool::train(&parts.train, &configs).or_stage(Stage::Train)?;
    let evals = PoolEvaluations::new(&pool, &parts.valid, &parts.test, metric).or_stage(Stage::Validate)?;
    let all: Vec<usize> = (0..pool.len()).collect();
    let result = evals.sweep(&all, &alphas).or_stage(Stage::Validate)?;

    let dir = out_dir(cfg)?;
    write(&dir.join("sweep.csv"), &result.to_csv())?;
    let mut summary = Vec::new();
    if trials > 0 {
        let (per_trial, rows) = run_trials(&evals, &alphas, trial_sample, trials, cfg.seed()?).or_stage(Stage::Config)?;
        let mut csv = String::from("trial,alpha,selected,validation_score,test_performance,test_fairness\n");
        for (t, r) in per_trial.iter().enumerate() {
            for row in &r.rows {
                csv.push_str(&format!(
                    "{t},{:?},{},{:?},{:?},{:?}\n",
                    row.alpha, row.selected, row.validation_score, row.test_performance, row.test_fairness
                ));
            }
        }
        write(&dir.join("trials.csv"), &csv)?;
        summary = rows;
    }
    let mut manifest = RunManifest::new("sweep", space.seed);
    manifest.dataset("train", &parts.train);
    manifest.dataset("validation", &parts.valid);
    manifest.dataset("test", &parts.test);
    manifest.configs = configs;
    manifest.notes.push(format!("pool {pool_size}, trials {trials} x {trial_sample}"));
    write(&dir.join("manifest.json"), &(manifest.to_json() + "\n"))?;

    let out = json!({ "sweep": result, "trial_summary": summary, "trainings": pool.trainings() });
    if json_out {
        print!("{}", pretty(&out));
    } else {
        println!("{} models trained; selection on validation, metrics on test", pool.trainings());
        println!("{:>6} {:>9} {:>14} {:>14}", "alpha", "selected", result.performance_metric.name(), format!("wg_{}", metric));
        for r in &result.rows {
            println!("{:>6.2} {:>9} {:>14.4} {:>14.4}", r.alpha, r.selected, r.test_performance, r.test_fairness);
        }
        println!("outputs in {}", dir.display());
    }
    Ok(())
}

pub fn lambda_sweep(cfg: &RunConfig, json_out: bool) -> CliResult<()> {
    let schema = load_schema(cfg)?;
    let base = cfg.booster(schema.task)?;
    let lambdas = cfg
        .list("lambdas")?
        .unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
    let parts = partitions(cfg)?;
    let rows = lambda_monotonicity_experiment(&parts.train, &lambdas, &base).or_stage(Stage::Train)?;
    let dir = out_dir(cfg)?;
    write(&dir.join("lambda.csv"), &lambda_rows_to_csv(&rows))?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let rho = spearman(&lambdas, &gaps).ok();
    if json_out {
        print!("{}", pretty(&json!({ "rows": rows, "spearman_gap_vs_lambda": rho })));
    } else {
        println!("{:>7} {:>13} {:>13} {:>10}", "lambda", "overall_loss", "worst_group", "gap");
        for r in &rows {
            println!("{:>7.3} {:>13.6} {:>13.6} {:>10.6}", r.lambda, r.overall_loss, r.worst_group_loss, r.gap);
        }
        match rho {
            Some(rho) => println!("spearman(gap, lambda) = {rho:.4}"),
            None => println!("spearman(gap, lambda) undefined for this grid"),
        }
    }
    Ok(())
}

pub fn converge(cfg: &RunConfig, json_out: bool) -> CliResult<()> {
    let schema = load_schema(cfg)?;
    let config = cfg.booster(schema.task)?;
    let parts = partitions(cfg)?;
    let result = convergence_experiment(&parts.train, &config).or_stage(Stage::Train)?;
    let dir = out_dir(cfg)?;
    write(&dir.join("converge.csv"), &result.to_csv())?;
    let summary = |run: &m2fgb_core::harness::ConvergenceRun| {
        json!({
            "lambda": run.trace.lambda,
            "final_overall_loss": run.trace.final_overall_loss(),
            "final_worst_group_loss": run.trace.final_group_losses().max().1,
            "final_worst_group_metric": run.worst_group_metric.last(),
        })
    };
    let out = json!({
        "metric": result.metric,
        "baseline": summary(&result.baseline),
        "fair": summary(&result.fair),
    });
    if json_out {
        print!("{}", pretty(&out));
    } else {
        for name in ["baseline", "fair"] {
            let s = &out[name];
            println!(
                "{name:<9} lambda {:<5} L {:.6}  worst group loss {:.6}  wg {} {:.4}",
                s["lambda"], s["final_overall_loss"].as_f64().unwrap_or(f64::NAN),
                s["final_worst_group_loss"].as_f64().unwrap_or(f64::NAN),
                result.metric,
                s["final_worst_group_metric"].as_f64().unwrap_or(f64::NAN)
            );
        }
        println!("per-round CSV in {}", dir.join("converge.csv").display());
    }
    Ok(())
}

fn synth_groups(cfg: &RunConfig) -> CliResult<Vec<SyntheticGroup>> {
    let Some(raw) = cfg.raw("synth_groups") else {
        return Ok(vec![
            SyntheticGroup::new("a", 0.55, 0.5, 0.0),
            SyntheticGroup::new("b", 0.25, 0.4, 0.3),
            SyntheticGroup::new("c", 0.13, 0.45, -0.4),
            SyntheticGroup::new("d", 0.07, 0.35, -0.8),
        ]);
    };
    raw.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|spec| {
            let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| format!("bad number '{s}' in synth_groups: {e}"))
                    .at(Stage::Config)
            };
            match parts.as_slice() {
                [name, f, p, s] => Ok(SyntheticGroup::new(*name, num(f)?, num(p)?, num(s)?)),
                _ => fail(Stage::Config, format!("synth_groups entry '{spec}' is not name:fraction:rate:shift")),
            }
        })
        .collect()
}

pub fn synth(cfg: &RunConfig, json_out: bool) -> CliResult<()> {
    let rows: usize = cfg.get_or("synth_rows", 2000)?;
    let features: usize = cfg.get_or("synth_features", 5)?;
    let noise: f64 = cfg.get_or("synth_noise", 1.0)?;
    let groups = synth_groups(cfg)?;
    let ds = generate_synthetic(rows, &groups, features, noise, cfg.seed()?).or_stage(Stage::Config)?;
    let dir = out_dir(cfg)?;
    let data_path = dir.join("data.csv");
    let file = fs::File::create(&data_path)
        .map_err(|e| format!("cannot write {}: {e}", data_path.display()))
        .at(Stage::Serialize)?;
    let schema = write_csv(&ds, std::io::BufWriter::new(file)).or_stage(Stage::Serialize)?;
    write(&dir.join("schema.txt"), &schema.to_text())?;
    let counts = ds.group_counts().or_stage(Stage::Validate)?;
    if json_out {
        print!(
            "{}",
            pretty(&json!({
                "data": data_path,
                "schema": dir.join("schema.txt"),
                "rows": ds.len(),
                "group_names": ds.group_names,
                "group_sizes": counts.samples,
                "group_positives": counts.positives,
            }))
        );
    } else {
        println!("wrote {} rows to {}", ds.len(), data_path.display());
        for (z, name) in ds.group_names.iter().enumerate() {
            println!("  {name:<12}{:>7} rows {:>7} positives", counts.samples[z], counts.positives[z]);
        }
    }
    Ok(())
}

pub fn project(cfg: &RunConfig, json_out: bool) -> CliResult<()> {
    let Some(v) = cfg.list::<f64>("vector")? else {
        return fail(Stage::Config, "missing required key 'vector'");
    };
    let scale = cfg.get_or("lambda", 1.0)?;
    let w = project_scaled_simplex(&v, scale).or_stage(Stage::Config)?;
    if json_out {
        print!("{}", pretty(&json!({ "lambda": scale, "input": v, "projection": w })));
    } else {
        println!("{}", w.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","));
    }
    Ok(())
}
