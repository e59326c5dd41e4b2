//! Experiment driver: random search with a reusable model pool, alpha
//! sweeps, the lambda trade-off experiment, paired convergence runs and a
//! brute-force min-max threshold oracle.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::booster::{labels_from_scores, train, BoosterConfig, Model, TrainingTrace};
use crate::data::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::losses::GroupLossKind;
use crate::metrics::{alpha_score, group_metric, overall_metric, GroupMetricReport, MetricName};

/// Sampling ranges for random hyperparameter search. Float ranges are
/// inclusive; `learning_rate` and `dual_learning_rate` are sampled
/// log-uniformly, everything else uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lambda: (f64, f64),
    pub learning_rate: (f64, f64),
    pub dual_learning_rate: (f64, f64),
    pub rounds: (usize, usize),
    pub max_depth: (usize, usize),
    pub min_samples_leaf: (usize, usize),
    pub l2_leaf_reg: (f64, f64),
    /// Supplies the loss kinds and multiplier freshness of every sample.
    pub base: BoosterConfig,
    pub seed: u64,
}

impl SearchSpace {
    pub fn around(base: BoosterConfig, seed: u64) -> Self {
        SearchSpace {
            lambda: (0.0, 1.0),
            learning_rate: (0.01, 0.3),
            dual_learning_rate: (0.05, 5.0),
            rounds: (20, 200),
            max_depth: (1, 5),
            min_samples_leaf: (5, 50),
            l2_leaf_reg: (0.0, 1.0),
            base,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let float = |name: &str, (lo, hi): (f64, f64), positive: bool| {
            if !lo.is_finite() || !hi.is_finite() || lo > hi || (positive && lo <= 0.0) || (!positive && lo < 0.0) {
                return Err(Error::arg(format!("degenerate range for {name}: [{lo}, {hi}]")));
            }
            Ok(())
        };
        let int = |name: &str, (lo, hi): (usize, usize)| {
            if lo > hi {
                return Err(Error::arg(format!("degenerate range for {name}: [{lo}, {hi}]")));
            }
            Ok(())
        };
        float("lambda", self.lambda, false)?;
        if self.lambda.1 > 1.0 {
            return Err(Error::arg("lambda range must stay inside [0, 1]"));
        }
        float("learning_rate", self.learning_rate, true)?;
        float("dual_learning_rate", self.dual_learning_rate, true)?;
        float("l2_leaf_reg", self.l2_leaf_reg, false)?;
        int("rounds", self.rounds)?;
        int("max_depth", self.max_depth)?;
        int("min_samples_leaf", self.min_samples_leaf)?;
        if self.min_samples_leaf.0 == 0 {
            return Err(Error::arg("min_samples_leaf range must start at 1 or more"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo.ln()..=hi.ln()).exp()
    }
}

pub fn random_search(space: &SearchSpace, count: usize) -> Result<Vec<BoosterConfig>> {
    if count == 0 {
        return Err(Error::arg("random search needs at least one sample"));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut c = space.base;
        c.lambda = uniform(&mut rng, space.lambda);
        c.learning_rate = log_uniform(&mut rng, space.learning_rate);
        c.dual_learning_rate = log_uniform(&mut rng, space.dual_learning_rate);
        c.rounds = rng.random_range(space.rounds.0..=space.rounds.1);
        c.tree.max_depth = rng.random_range(space.max_depth.0..=space.max_depth.1);
        c.tree.min_samples_leaf = rng.random_range(space.min_samples_leaf.0..=space.min_samples_leaf.1);
        c.tree.l2_leaf_reg = uniform(&mut rng, space.l2_leaf_reg);
        c.seed = rng.next_u64();
        c.validate()?;
        out.push(c);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub id: usize,
    pub config: BoosterConfig,
    pub model: Model,
}

/// Trained models kept around so that many selection trials can reuse them.
#[derive(Debug, Default)]
pub struct ModelPool {
    pub entries: Vec<PoolEntry>,
    trainings: AtomicUsize,
}

impl ModelPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Trains one model per config. Training runs in parallel; entry `i`
    /// always holds config `i`.
    pub fn train(train_set: &Dataset, configs: &[BoosterConfig]) -> Result<Self> {
        let pool = ModelPool::new();
        let models: Vec<Result<Model>> = configs
            .par_iter()
            .map(|c| {
                pool.trainings.fetch_add(1, Ordering::Relaxed);
                train(train_set, c).map(|(m, _)| m)
            })
            .collect();
        let mut pool = pool;
        for (id, (config, model)) in configs.iter().zip(models).enumerate() {
            pool.entries.push(PoolEntry {
                id,
                config: *config,
                model: model?,
            });
        }
        Ok(pool)
    }

    /// Adds an externally built model.
    pub fn push(&mut self, config: BoosterConfig, model: Model) -> usize {
        let id = self.entries.len();
        self.entries.push(PoolEntry { id, config, model });
        id
    }

    /// Number of models trained by this pool since it was created.
    pub fn trainings(&self) -> usize {
        self.trainings.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Performance metric used for a task: accuracy or MSE.
pub fn performance_metric(task: TaskKind) -> MetricName {
    match task {
        TaskKind::BinaryClassification => MetricName::Accuracy,
        TaskKind::Regression => MetricName::MeanSquaredError,
    }
}

/// Metric values turned into "higher is better" scores.
fn oriented(metric: MetricName, value: f64) -> f64 {
    if metric.higher_is_better() {
        value
    } else {
        -value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub performance: f64,
    pub fairness: GroupMetricReport,
}

pub fn evaluate(model: &Model, ds: &Dataset, fairness_metric: MetricName, threshold: f64) -> Result<Evaluation> {
    let scores = model.predict_scores(&ds.features)?;
    let predictions = match ds.task {
        TaskKind::BinaryClassification => labels_from_scores(&scores, threshold),
        TaskKind::Regression => scores,
    };
    let performance = overall_metric(performance_metric(ds.task), &ds.labels, &predictions)?;
    let fairness = group_metric(fairness_metric, &ds.labels, &predictions, &ds.groups, ds.num_groups())?;
    Ok(Evaluation { performance, fairness })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub selected: usize,
    pub validation_score: f64,
    pub test_performance: f64,
    pub test_fairness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub performance_metric: MetricName,
    pub fairness_metric: MetricName,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "alpha,selected,validation_score,test_{},test_wg_{}\n",
            self.performance_metric, self.fairness_metric
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:?},{},{:?},{:?},{:?}\n",
                r.alpha, r.selected, r.validation_score, r.test_performance, r.test_fairness
            ));
        }
        out
    }
}

/// Validation and test evaluations of every pool entry, computed once.
pub struct PoolEvaluations {
    pub performance_metric: MetricName,
    pub fairness_metric: MetricName,
    pub validation: Vec<Evaluation>,
    pub test: Vec<Evaluation>,
}

impl PoolEvaluations {
    pub fn new(pool: &ModelPool, valid: &Dataset, test: &Dataset, fairness_metric: MetricName) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::arg("model pool is empty"));
        }
        let eval = |ds: &Dataset| -> Result<Vec<Evaluation>> {
            pool.entries
                .par_iter()
                .map(|e| evaluate(&e.model, ds, fairness_metric, 0.5))
                .collect()
        };
        Ok(PoolEvaluations {
            performance_metric: performance_metric(valid.task),
            fairness_metric,
            validation: eval(valid)?,
            test: eval(test)?,
        })
    }

    /// Validation alpha-score of entry `i`.
    pub fn score(&self, i: usize, alpha: f64) -> Result<f64> {
        let v = &self.validation[i];
        alpha_score(
            oriented(self.performance_metric, v.performance),
            oriented(self.fairness_metric, v.fairness.worst_group_value),
            alpha,
        )
    }

    /// Among `candidates`, the entry with the highest validation score;
    /// ties go to the lowest id.
    pub fn select(&self, candidates: &[usize], alpha: f64) -> Result<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &i in candidates {
            let s = self.score(i, alpha)?;
            if best.is_none_or(|(bi, bs)| s > bs || (s == bs && i < bi)) {
                best = Some((i, s));
            }
        }
        best.ok_or_else(|| Error::arg("no candidates to select from"))
    }

    pub fn sweep(&self, candidates: &[usize], alphas: &[f64]) -> Result<SweepResult> {
        let rows = alphas
            .iter()
            .map(|&alpha| {
                let (selected, validation_score) = self.select(candidates, alpha)?;
                let t = &self.test[selected];
                Ok(SweepRow {
                    alpha,
                    selected,
                    validation_score,
                    test_performance: t.performance,
                    test_fairness: t.fairness.worst_group_value,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SweepResult {
            performance_metric: self.performance_metric,
            fairness_metric: self.fairness_metric,
            rows,
        })
    }
}

/// For each alpha, picks the pool entry with the best validation
/// alpha-score and reports its test metrics.
pub fn run_sweep(
    valid: &Dataset,
    test: &Dataset,
    pool: &ModelPool,
    alphas: &[f64],
    fairness_metric: MetricName,
) -> Result<SweepResult> {
    let evals = PoolEvaluations::new(pool, valid, test, fairness_metric)?;
    let all: Vec<usize> = (0..pool.len()).collect();
    evals.sweep(&all, alphas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummaryRow {
    pub alpha: f64,
    pub trials: usize,
    pub mean_test_performance: f64,
    pub mean_test_fairness: f64,
}

/// Repeated selection trials: each trial draws `sample_size` pool entries
/// without replacement and sweeps alpha over them. Never trains.
pub fn run_trials(
    evals: &PoolEvaluations,
    alphas: &[f64],
    sample_size: usize,
    trials: usize,
    seed: u64,
) -> Result<(Vec<SweepResult>, Vec<TrialSummaryRow>)> {
    let pool_size = evals.validation.len();
    if sample_size == 0 || sample_size > pool_size {
        return Err(Error::arg(format!(
            "trial sample size {sample_size} must lie in 1..={pool_size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut picked = sample(&mut rng, pool_size, sample_size).into_vec();
        picked.sort_unstable();
        results.push(evals.sweep(&picked, alphas)?);
    }
    let summary = alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let n = results.len().max(1) as f64;
            TrialSummaryRow {
                alpha,
                trials: results.len(),
                mean_test_performance: results.iter().map(|r| r.rows[k].test_performance).sum::<f64>() / n,
                mean_test_fairness: results.iter().map(|r| r.rows[k].test_fairness).sum::<f64>() / n,
            }
        })
        .collect();
    Ok((results, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub overall_loss: f64,
    pub worst_group_loss: f64,
    /// `worst_group_loss - overall_loss`
    pub gap: f64,
}

pub fn lambda_rows_to_csv(rows: &[LambdaRow]) -> String {
    let mut out = String::from("lambda,overall_loss,worst_group_loss,gap\n");
    for r in rows {
        out.push_str(&format!("{:?},{:?},{:?},{:?}\n", r.lambda, r.overall_loss, r.worst_group_loss, r.gap));
    }
    out
}

/// Trains one model per lambda with otherwise identical settings and
/// reports the training-set gap between the worst group loss and the
/// overall loss.
pub fn lambda_monotonicity_experiment(
    ds: &Dataset,
    lambdas: &[f64],
    base_config: &BoosterConfig,
) -> Result<Vec<LambdaRow>> {
    if lambdas.is_empty() {
        return Err(Error::arg("lambda grid is empty"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(Error::arg("every lambda in the grid must lie in (0, 1]"));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("lambda grid must be sorted ascending"));
    }
    lambdas
        .par_iter()
        .map(|&lambda| {
            let config = BoosterConfig { lambda, ..*base_config };
            let (_, trace) = train(ds, &config)
                .map_err(|e| Error::arg(format!("training at lambda = {lambda} failed: {e}")))?;
            let overall_loss = trace.final_overall_loss();
            let worst_group_loss = trace.final_group_losses().max().1;
            Ok(LambdaRow {
                lambda,
                overall_loss,
                worst_group_loss,
                gap: worst_group_loss - overall_loss,
            })
        })
        .collect()
}

/// Spearman rank correlation, ties receiving their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::arg("spearman needs two equal-length samples of size >= 2"));
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::arg("spearman is undefined for a constant sample"));
    }
    Ok(cov / (vx * vy).sqrt())
}

/// The non-differentiable metric a group loss stands in for.
pub fn target_metric(kind: GroupLossKind, task: TaskKind) -> MetricName {
    match (kind, task) {
        (GroupLossKind::TruePositive, _) => MetricName::TruePositiveRate,
        (GroupLossKind::PositiveRate, _) => MetricName::PositiveRate,
        (GroupLossKind::Equalized, TaskKind::BinaryClassification) => MetricName::Accuracy,
        (GroupLossKind::Equalized, TaskKind::Regression) => MetricName::MeanSquaredError,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub model: Model,
    pub trace: TrainingTrace,
    /// Training-set worst-group value of [`target_metric`] after each round
    /// (index 0 is before the first tree).
    pub worst_group_metric: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub metric: MetricName,
    pub baseline: ConvergenceRun,
    pub fair: ConvergenceRun,
}

impl ConvergenceResult {
    /// Both runs stacked, one row per (run, round).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (name, run) in [("baseline", &self.baseline), ("fair", &self.fair)] {
            let csv = run.trace.to_csv();
            let mut lines = csv.lines();
            let header = lines.next().unwrap_or_default();
            if out.is_empty() {
                out.push_str(&format!("run,lambda,{header},wg_{}\n", self.metric));
            }
            for (line, m) in lines.zip(&run.worst_group_metric) {
                out.push_str(&format!("{name},{:?},{line},{m:?}\n", run.trace.lambda));
            }
        }
        out
    }
}

fn convergence_run(ds: &Dataset, config: &BoosterConfig, metric: MetricName) -> Result<ConvergenceRun> {
    let (model, trace) = train(ds, config)?;
    let worst_group_metric = model
        .staged_scores(&ds.features)?
        .into_iter()
        .map(|scores| {
            let predictions = match ds.task {
                TaskKind::BinaryClassification => labels_from_scores(&scores, 0.5),
                TaskKind::Regression => scores,
            };
            group_metric(metric, &ds.labels, &predictions, &ds.groups, ds.num_groups()).map(|r| r.worst_group_value)
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceRun {
        model,
        trace,
        worst_group_metric,
    })
}

/// A lambda = 0 baseline and a run at `config.lambda`, otherwise identical.
pub fn convergence_experiment(ds: &Dataset, config: &BoosterConfig) -> Result<ConvergenceResult> {
    let metric = target_metric(config.group_kind, ds.task);
    let baseline_config = BoosterConfig { lambda: 0.0, ..*config };
    let (baseline, fair) = rayon::join(
        || convergence_run(ds, &baseline_config, metric),
        || convergence_run(ds, config, metric),
    );
    Ok(ConvergenceResult {
        metric,
        baseline: baseline?,
        fair: fair?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    /// Predict 1 iff `x >= threshold`; may be infinite.
    pub threshold: f64,
    /// 0-1 loss in each group.
    pub group_losses: Vec<f64>,
}

impl ThresholdSolution {
    pub fn max_loss(&self) -> f64 {
        self.group_losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum_loss(&self) -> f64 {
        self.group_losses.iter().sum()
    }
}

const ORACLE_MAX_POINTS: usize = 200;

/// Every threshold classifier on 1D points: `-inf`, the midpoints between
/// consecutive distinct values, and `+inf`, in ascending order.
pub fn enumerate_thresholds(points: &[f64], labels: &[f64], groups: &[usize]) -> Result<Vec<ThresholdSolution>> {
    if points.is_empty() {
        return Err(Error::arg("threshold oracle needs at least one point"));
    }
    if points.len() > ORACLE_MAX_POINTS {
        return Err(Error::arg(format!("threshold oracle is limited to {ORACLE_MAX_POINTS} points")));
    }
    if labels.len() != points.len() || groups.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: labels.len().min(groups.len()),
        });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::arg("threshold oracle points must be finite"));
    }
    let num_groups = groups.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; num_groups];
    for &g in groups {
        sizes[g] += 1;
    }
    if let Some(z) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyGroup { group: format!("#{z}") });
    }
    let mut values = points.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(values.windows(2).map(|w| w[0] + 0.5 * (w[1] - w[0])));
    thresholds.push(f64::INFINITY);

    Ok(thresholds
        .into_iter()
        .map(|t| {
            let mut errors = vec![0usize; num_groups];
            for i in 0..points.len() {
                let predicted = if points[i] >= t { 1.0 } else { 0.0 };
                if predicted != labels[i] {
                    errors[groups[i]] += 1;
                }
            }
            ThresholdSolution {
                threshold: t,
                group_losses: errors
                    .iter()
                    .zip(&sizes)
                    .map(|(&e, &s)| e as f64 / s as f64)
                    .collect(),
            }
        })
        .collect())
}

/// The threshold classifier minimizing the largest group 0-1 loss; ties go
/// to the smaller sum of group losses, then to the lower threshold.
pub fn minmax_threshold_oracle(points: &[f64], labels: &[f64], groups: &[usize]) -> Result<ThresholdSolution> {
    let all = enumerate_thresholds(points, labels, groups)?;
    let mut best = &all[0];
    for cand in &all[1..] {
        let (cm, bm) = (cand.max_loss(), best.max_loss());
        if cm < bm || (cm == bm && cand.sum_loss() < best.sum_loss()) {
            best = cand;
        }
    }
    Ok(best.clone())
}

/// Reproducibility record written next to experiment outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub datasets: Vec<(String, String)>,
    pub configs: Vec<BoosterConfig>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            seed,
            datasets: Vec::new(),
            configs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn dataset(&mut self, name: &str, ds: &Dataset) {
        self.datasets.push((name.to_string(), ds.fingerprint()));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
