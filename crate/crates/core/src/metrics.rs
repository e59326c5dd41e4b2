//! Group-level evaluation metrics, worst-group summaries and the
//! alpha-weighted model selection score.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    TruePositiveRate,
    PositiveRate,
    #[serde(rename = "mse")]
    MeanSquaredError,
}

impl MetricName {
    pub fn name(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::TruePositiveRate => "true_positive_rate",
            MetricName::PositiveRate => "positive_rate",
            MetricName::MeanSquaredError => "mse",
        }
    }

    /// MSE is a harm: its worst group is the maximum.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricName::MeanSquaredError)
    }

    fn needs_binary_predictions(self) -> bool {
        self.higher_is_better()
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(MetricName::Accuracy),
            "true_positive_rate" | "tpr" => Ok(MetricName::TruePositiveRate),
            "positive_rate" | "pr" => Ok(MetricName::PositiveRate),
            "mse" | "mean_squared_error" => Ok(MetricName::MeanSquaredError),
            other => Err(Error::arg(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricReport {
    pub metric: MetricName,
    pub values: Vec<f64>,
    pub worst_group_value: f64,
    pub worst_group_index: usize,
    /// `max - min` over groups.
    pub disparity: f64,
}

impl GroupMetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    count: usize,
    correct: usize,
    positives: usize,
    true_positives: usize,
    predicted_positive: usize,
    squared_error: f64,
}

impl Tally {
    fn add(&mut self, y: f64, p: f64) {
        self.count += 1;
        if y == p {
            self.correct += 1;
        }
        if y == 1.0 {
            self.positives += 1;
            if p == 1.0 {
                self.true_positives += 1;
            }
        }
        if p == 1.0 {
            self.predicted_positive += 1;
        }
        self.squared_error += (p - y) * (p - y);
    }

    fn value(&self, metric: MetricName) -> Option<f64> {
        match metric {
            MetricName::Accuracy => (self.count > 0).then(|| self.correct as f64 / self.count as f64),
            MetricName::TruePositiveRate => {
                (self.positives > 0).then(|| self.true_positives as f64 / self.positives as f64)
            }
            MetricName::PositiveRate => (self.count > 0).then(|| self.predicted_positive as f64 / self.count as f64),
            MetricName::MeanSquaredError => (self.count > 0).then(|| self.squared_error / self.count as f64),
        }
    }
}

fn check_inputs(metric: MetricName, y: &[f64], predictions: &[f64]) -> Result<()> {
    if y.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: predictions.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::arg("metric over an empty sample"));
    }
    if metric.needs_binary_predictions() && predictions.iter().any(|&p| p != 0.0 && p != 1.0) {
        return Err(Error::arg(format!("{metric} needs 0/1 predictions")));
    }
    Ok(())
}

pub fn overall_metric(metric: MetricName, y: &[f64], predictions: &[f64]) -> Result<f64> {
    check_inputs(metric, y, predictions)?;
    let mut t = Tally::default();
    for (&yi, &pi) in y.iter().zip(predictions) {
        t.add(yi, pi);
    }
    t.value(metric)
        .ok_or_else(|| Error::arg(format!("{metric} is undefined: no positive samples")))
}

/// Per-group metric plus the worst group (lowest value for benefits,
/// highest for MSE, ties to the lowest index) and the max-min disparity.
pub fn group_metric(
    metric: MetricName,
    y: &[f64],
    predictions: &[f64],
    groups: &[usize],
    num_groups: usize,
) -> Result<GroupMetricReport> {
    check_inputs(metric, y, predictions)?;
    if groups.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: groups.len(),
        });
    }
    let mut tallies = vec![Tally::default(); num_groups];
    for i in 0..y.len() {
        let g = groups[i];
        if g >= num_groups {
            return Err(Error::InvalidData(format!("group index {g} out of range")));
        }
        tallies[g].add(y[i], predictions[i]);
    }
    let mut values = Vec::with_capacity(num_groups);
    for (z, t) in tallies.iter().enumerate() {
        if t.count == 0 {
            return Err(Error::EmptyGroup { group: format!("#{z}") });
        }
        values.push(t.value(metric).ok_or(Error::NoPositives { group: format!("#{z}") })?);
    }
    Ok(summarize(metric, values))
}

/// Builds a report from already computed per-group values.
pub fn summarize(metric: MetricName, values: Vec<f64>) -> GroupMetricReport {
    let mut worst = 0;
    for (z, &v) in values.iter().enumerate() {
        let better_worst = if metric.higher_is_better() { v < values[worst] } else { v > values[worst] };
        if better_worst {
            worst = z;
        }
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    GroupMetricReport {
        metric,
        worst_group_value: values[worst],
        worst_group_index: worst,
        disparity: max - min,
        values,
    }
}

/// `alpha * fairness + (1 - alpha) * performance`.
pub fn alpha_score(performance: f64, fairness: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::arg(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(if alpha == 0.0 {
        performance
    } else if alpha == 1.0 {
        fairness
    } else {
        alpha * fairness + (1.0 - alpha) * performance
    })
}
