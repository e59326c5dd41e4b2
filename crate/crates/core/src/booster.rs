//! The min-max fair boosting loop.
//!
//! Every round does one projected ascent step on the group multipliers and
//! one boosting step on the scores:
//!
//! 1. group losses `Lbar` at the current scores;
//! 2. `mu <- Proj_S(mu + zeta * (Lbar - eps))`, `S = {mu >= 0, sum(mu) = lambda}`;
//! 3. per-sample gradient of `(1 - lambda) L + sum_z mu_z Lbar_z`;
//! 4. least-squares tree fit to the negated gradient;
//! 5. `scores += gamma * tree`;
//! 6. `eps <- max_z Lbar_z` at the new scores.
//!
//! Trees are fit to the gradient of the summed objective (`n` times the
//! gradient of the mean form), so `gamma` is an ordinary boosting learning
//! rate. The descent diagnostics in the trace use this same gradient.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::losses::{
    gradient_unchecked, group_losses_with, lagrangian_gradient_with, overall_loss_unchecked, sigmoid,
    GradientScale, GroupCounts, GroupLossKind, GroupLossVector, PointwiseLossKind,
};
use crate::matrix::Matrix;
use crate::simplex::project_scaled_simplex;
use crate::tree::{fit_tree_presorted, RegressionTree, SortedFeatures, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoosterConfig {
    /// Fairness weight in `[0, 1]`; 0 is plain boosting.
    pub lambda: f64,
    pub rounds: usize,
    pub learning_rate: f64,
    pub dual_learning_rate: f64,
    pub pointwise: PointwiseLossKind,
    pub group_kind: GroupLossKind,
    pub tree: TreeParams,
    pub seed: u64,
    /// Use the multipliers after this round's ascent step for the gradient
    /// (`true`) or the ones from before it (`false`).
    pub fresh_multipliers: bool,
}

impl BoosterConfig {
    pub fn for_task(task: TaskKind) -> Self {
        let pointwise = match task {
            TaskKind::BinaryClassification => PointwiseLossKind::LogisticCrossEntropy,
            TaskKind::Regression => PointwiseLossKind::SquaredError,
        };
        BoosterConfig {
            lambda: 0.5,
            rounds: 100,
            learning_rate: 0.1,
            dual_learning_rate: 0.5,
            pointwise,
            group_kind: GroupLossKind::Equalized,
            tree: TreeParams::default(),
            seed: 0,
            fresh_multipliers: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::arg(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::arg(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.dual_learning_rate > 0.0) || !self.dual_learning_rate.is_finite() {
            return Err(Error::arg(format!(
                "dual_learning_rate must be positive, got {}",
                self.dual_learning_rate
            )));
        }
        if self.group_kind.requires_classification() && self.pointwise != PointwiseLossKind::LogisticCrossEntropy {
            return Err(Error::arg(format!(
                "group loss '{}' requires the logistic loss",
                self.group_kind
            )));
        }
        self.tree.validate()
    }

    pub fn validate_for(&self, task: TaskKind) -> Result<()> {
        self.validate()?;
        let expected = BoosterConfig::for_task(task).pointwise;
        if self.pointwise != expected {
            return Err(Error::arg(format!(
                "pointwise loss '{}' does not match task '{task}'",
                self.pointwise
            )));
        }
        Ok(())
    }
}

/// Multipliers and slack. `epsilon` is always the current largest group loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub epsilon: f64,
}

impl DualState {
    pub fn initial(lambda: f64, losses: &GroupLossVector) -> Self {
        let z = losses.len();
        DualState {
            mu: vec![lambda / z as f64; z],
            epsilon: losses.max().1,
        }
    }

    /// Projected ascent along `Lbar - eps`. Returns the new state's
    /// multipliers together with the un-projected step `zeta * (Lbar - eps)`.
    pub fn ascent(&self, losses: &GroupLossVector, zeta: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let step: Vec<f64> = losses.values.iter().map(|l| zeta * (l - self.epsilon)).collect();
        let moved: Vec<f64> = self.mu.iter().zip(&step).map(|(m, s)| m + s).collect();
        Ok((project_scaled_simplex(&moved, lambda)?, step))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub task: TaskKind,
    pub config: BoosterConfig,
    pub num_groups: usize,
    pub num_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Overall loss after this round's tree was added.
    pub overall_loss: f64,
    /// Group losses after this round's tree was added.
    pub group_losses: GroupLossVector,
    /// Multipliers after this round's ascent step.
    pub mu: Vec<f64>,
    /// Largest group loss after this round's tree was added.
    pub epsilon: f64,
    /// `zeta * (Lbar - eps)` before projection.
    pub ascent_step: Vec<f64>,
    /// `<grad, h>` over training rows, with the gradient the tree was fit to.
    pub descent_inner_product: f64,
    /// `||h||^2` over training rows.
    pub tree_norm_sq: f64,
}

impl RoundRecord {
    /// `-<grad, h> / ||h||^2`; the learning-rate bound is twice this over
    /// the (unknown) smoothness constant.
    pub fn step_ratio(&self) -> f64 {
        if self.tree_norm_sq == 0.0 {
            0.0
        } else {
            -self.descent_inner_product / self.tree_norm_sq
        }
    }

    pub fn worst_group_loss(&self) -> f64 {
        self.group_losses.max().1
    }

    /// `(1 - lambda) L + lambda * max_z Lbar_z`.
    pub fn penalized_objective(&self, lambda: f64) -> f64 {
        (1.0 - lambda) * self.overall_loss + lambda * self.worst_group_loss()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub lambda: f64,
    pub initial_overall_loss: f64,
    pub initial_group_losses: GroupLossVector,
    pub initial_dual: DualState,
    pub rounds: Vec<RoundRecord>,
}

impl TrainingTrace {
    pub fn final_overall_loss(&self) -> f64 {
        self.rounds.last().map_or(self.initial_overall_loss, |r| r.overall_loss)
    }

    pub fn final_group_losses(&self) -> &GroupLossVector {
        self.rounds.last().map_or(&self.initial_group_losses, |r| &r.group_losses)
    }

    /// Plot-ready table, one row per round (round 0 is the initial state).
    pub fn to_csv(&self) -> String {
        let z = self.initial_group_losses.len();
        let mut out = String::from("round,overall_loss,worst_group_loss,epsilon,penalized_objective,descent_inner_product,tree_norm_sq,step_ratio");
        for k in 0..z {
            out.push_str(&format!(",group_loss_{k}"));
        }
        for k in 0..z {
            out.push_str(&format!(",mu_{k}"));
        }
        out.push('\n');
        let push_row = |out: &mut String, round: usize, overall: f64, gl: &GroupLossVector, mu: &[f64], eps: f64, diag: (f64, f64, f64)| {
            let wg = gl.max().1;
            let pen = (1.0 - self.lambda) * overall + self.lambda * wg;
            out.push_str(&format!("{round},{overall:?},{wg:?},{eps:?},{pen:?},{:?},{:?},{:?}", diag.0, diag.1, diag.2));
            for v in &gl.values {
                out.push_str(&format!(",{v:?}"));
            }
            for m in mu {
                out.push_str(&format!(",{m:?}"));
            }
            out.push('\n');
        };
        push_row(
            &mut out,
            0,
            self.initial_overall_loss,
            &self.initial_group_losses,
            &self.initial_dual.mu,
            self.initial_dual.epsilon,
            (0.0, 0.0, 0.0),
        );
        for r in &self.rounds {
            push_row(
                &mut out,
                r.round,
                r.overall_loss,
                &r.group_losses,
                &r.mu,
                r.epsilon,
                (r.descent_inner_product, r.tree_norm_sq, r.step_ratio()),
            );
        }
        out
    }
}

pub fn init_base_score(task: TaskKind, labels: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::arg("cannot initialize from zero labels"));
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    Ok(match task {
        TaskKind::BinaryClassification => {
            let p = mean.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
        TaskKind::Regression => mean,
    })
}

fn prepare(ds: &Dataset, config: &BoosterConfig) -> Result<GroupCounts> {
    config.validate_for(ds.task)?;
    ds.validate()?;
    if ds.has_non_finite_features() {
        return Err(Error::InvalidData("features contain non-finite values".into()));
    }
    let counts = ds.group_counts()?;
    counts.validate(config.group_kind, Some(&ds.group_names))?;
    Ok(counts)
}

fn new_model(ds: &Dataset, config: &BoosterConfig, base_score: f64) -> Model {
    Model {
        base_score,
        trees: Vec::with_capacity(config.rounds),
        learning_rate: config.learning_rate,
        task: ds.task,
        config: *config,
        num_groups: ds.num_groups(),
        num_features: ds.num_features(),
    }
}

/// Trains a min-max fair booster for `config.rounds` rounds.
pub fn train(ds: &Dataset, config: &BoosterConfig) -> Result<(Model, TrainingTrace)> {
    let counts = prepare(ds, config)?;
    let (y, groups) = (&ds.labels, &ds.groups);
    let n = ds.len();
    let base_score = init_base_score(ds.task, y)?;
    let mut model = new_model(ds, config, base_score);
    let mut scores = vec![base_score; n];

    let group_loss = |scores: &[f64]| group_losses_with(config.group_kind, config.pointwise, y, scores, groups, &counts);
    let mut losses = group_loss(&scores);
    let mut dual = DualState::initial(config.lambda, &losses);
    let mut trace = TrainingTrace {
        lambda: config.lambda,
        initial_overall_loss: overall_loss_unchecked(config.pointwise, y, &scores),
        initial_group_losses: losses.clone(),
        initial_dual: dual.clone(),
        rounds: Vec::with_capacity(config.rounds),
    };
    if config.rounds == 0 {
        return Ok((model, trace));
    }

    let sorted = SortedFeatures::new(&ds.features);
    let mut gradient = vec![0.0; n];
    let mut targets = vec![0.0; n];
    for round in 1..=config.rounds {
        let (mu_next, ascent_step) = dual.ascent(&losses, config.dual_learning_rate, config.lambda)?;
        let mu_grad = if config.fresh_multipliers { &mu_next } else { &dual.mu };
        lagrangian_gradient_with(
            config.pointwise,
            config.group_kind,
            y,
            &scores,
            groups,
            &counts,
            mu_grad,
            config.lambda,
            GradientScale::PerSample,
            &mut gradient,
        );
        for (t, g) in targets.iter_mut().zip(&gradient) {
            *t = -g;
        }
        let (tree, fitted) = fit_tree_presorted(&ds.features, &sorted, &targets, &config.tree)?;
        let mut inner = 0.0;
        let mut norm_sq = 0.0;
        for i in 0..n {
            inner += gradient[i] * fitted[i];
            norm_sq += fitted[i] * fitted[i];
            scores[i] += config.learning_rate * fitted[i];
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { round });
        }
        model.trees.push(tree);
        losses = group_loss(&scores);
        dual = DualState {
            mu: mu_next,
            epsilon: losses.max().1,
        };
        trace.rounds.push(RoundRecord {
            round,
            overall_loss: overall_loss_unchecked(config.pointwise, y, &scores),
            group_losses: losses.clone(),
            mu: dual.mu.clone(),
            epsilon: dual.epsilon,
            ascent_step,
            descent_inner_product: inner,
            tree_norm_sq: norm_sq,
        });
    }
    Ok((model, trace))
}

/// Ordinary first-order gradient boosting on the overall loss only. The
/// fairness fields of `config` are carried into the model unchanged.
pub fn train_plain(ds: &Dataset, config: &BoosterConfig) -> Result<Model> {
    prepare(ds, config)?;
    let n = ds.len();
    let base_score = init_base_score(ds.task, &ds.labels)?;
    let mut model = new_model(ds, config, base_score);
    let mut scores = vec![base_score; n];
    let sorted = SortedFeatures::new(&ds.features);
    let mut targets = vec![0.0; n];
    for round in 1..=config.rounds {
        for i in 0..n {
            targets[i] = -gradient_unchecked(config.pointwise, ds.labels[i], scores[i]);
        }
        let (tree, fitted) = fit_tree_presorted(&ds.features, &sorted, &targets, &config.tree)?;
        for (s, h) in scores.iter_mut().zip(&fitted) {
            *s += config.learning_rate * h;
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { round });
        }
        model.trees.push(tree);
    }
    Ok(model)
}

impl Model {
    fn check_dim(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                got: features.cols(),
            });
        }
        Ok(())
    }

    /// `base_score + gamma * sum_t h_t(x)` for every row.
    pub fn predict_scores(&self, features: &Matrix) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok(features
            .iter_rows()
            .map(|row| {
                let mut s = self.base_score;
                for tree in &self.trees {
                    s += self.learning_rate * tree.predict_unchecked(row);
                }
                s
            })
            .collect())
    }

    /// Scores after each round: entry `t` holds the prediction of the first
    /// `t` trees (entry 0 is the base score).
    pub fn staged_scores(&self, features: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.check_dim(features)?;
        let mut current = vec![self.base_score; features.rows()];
        let mut stages = Vec::with_capacity(self.trees.len() + 1);
        stages.push(current.clone());
        for tree in &self.trees {
            for (s, row) in current.iter_mut().zip(features.iter_rows()) {
                *s += self.learning_rate * tree.predict_unchecked(row);
            }
            stages.push(current.clone());
        }
        Ok(stages)
    }

    /// Label 1 iff `sigmoid(score) >= threshold`.
    pub fn predict_labels(&self, features: &Matrix, threshold: f64) -> Result<Vec<f64>> {
        if self.task != TaskKind::BinaryClassification {
            return Err(Error::arg("label prediction needs a binary classification model"));
        }
        Ok(labels_from_scores(&self.predict_scores(features)?, threshold))
    }

    /// Labels for classification at threshold 0.5, raw scores for regression.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        match self.task {
            TaskKind::BinaryClassification => self.predict_labels(features, 0.5),
            TaskKind::Regression => self.predict_scores(features),
        }
    }
}

/// Thresholded labels from raw scores.
pub fn labels_from_scores(scores: &[f64], threshold: f64) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| if sigmoid(s) >= threshold { 1.0 } else { 0.0 })
        .collect()
}

pub fn predict_scores(model: &Model, features: &Matrix) -> Result<Vec<f64>> {
    model.predict_scores(features)
}

pub fn predict_labels(model: &Model, features: &Matrix, threshold: f64) -> Result<Vec<f64>> {
    model.predict_labels(features, threshold)
}
