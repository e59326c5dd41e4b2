//! Pointwise losses, the overall mean loss, per-group proxy losses and the
//! gradient of the Lagrangian `(1 - lambda) L + sum_z mu_z Lbar_z` with
//! respect to the raw scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointwiseLossKind {
    /// Binary cross-entropy on the logit scale.
    #[serde(rename = "logistic")]
    LogisticCrossEntropy,
    /// `0.5 * (score - y)^2`.
    #[serde(rename = "squared")]
    SquaredError,
}

/// Which population each group loss is averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLossKind {
    /// Mean pointwise loss over the whole group.
    Equalized,
    /// Mean pointwise loss over the group's positive samples.
    TruePositive,
    /// Mean loss against a target of 1 for every sample in the group.
    PositiveRate,
}

impl PointwiseLossKind {
    pub fn name(self) -> &'static str {
        match self {
            PointwiseLossKind::LogisticCrossEntropy => "logistic",
            PointwiseLossKind::SquaredError => "squared",
        }
    }
}

impl GroupLossKind {
    pub fn name(self) -> &'static str {
        match self {
            GroupLossKind::Equalized => "equalized",
            GroupLossKind::TruePositive => "true_positive",
            GroupLossKind::PositiveRate => "positive_rate",
        }
    }

    pub fn requires_classification(self) -> bool {
        !matches!(self, GroupLossKind::Equalized)
    }
}

impl fmt::Display for PointwiseLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for GroupLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PointwiseLossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "cross_entropy" | "logloss" => Ok(PointwiseLossKind::LogisticCrossEntropy),
            "squared" | "mse" | "squared_error" => Ok(PointwiseLossKind::SquaredError),
            other => Err(Error::arg(format!("unknown pointwise loss '{other}'"))),
        }
    }
}

impl FromStr for GroupLossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equalized" | "equalized_loss" => Ok(GroupLossKind::Equalized),
            "true_positive" | "tp" | "tpr" => Ok(GroupLossKind::TruePositive),
            "positive_rate" | "p" | "pr" => Ok(GroupLossKind::PositiveRate),
            other => Err(Error::arg(format!("unknown group loss '{other}'"))),
        }
    }
}

/// One loss value per group, for a single criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLossVector {
    pub values: Vec<f64>,
    pub kind: GroupLossKind,
}

impl GroupLossVector {
    /// Largest group loss and the lowest index attaining it.
    pub fn max(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[inline]
pub(crate) fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn loss_unchecked(kind: PointwiseLossKind, y: f64, score: f64) -> f64 {
    match kind {
        PointwiseLossKind::LogisticCrossEntropy => {
            let p = sigmoid(score).clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
        }
        PointwiseLossKind::SquaredError => {
            let r = score - y;
            0.5 * r * r
        }
    }
}

#[inline]
pub(crate) fn gradient_unchecked(kind: PointwiseLossKind, y: f64, score: f64) -> f64 {
    match kind {
        PointwiseLossKind::LogisticCrossEntropy => sigmoid(score) - y,
        PointwiseLossKind::SquaredError => score - y,
    }
}

pub fn pointwise_loss_and_gradient(kind: PointwiseLossKind, y: f64, score: f64) -> Result<(f64, f64)> {
    if !y.is_finite() || !score.is_finite() {
        return Err(Error::arg(format!("non-finite loss input (y={y}, score={score})")));
    }
    if kind == PointwiseLossKind::LogisticCrossEntropy && y != 0.0 && y != 1.0 {
        return Err(Error::arg(format!("logistic loss needs a 0/1 label, got {y}")));
    }
    Ok((loss_unchecked(kind, y, score), gradient_unchecked(kind, y, score)))
}

fn check_lengths(y: &[f64], scores: &[f64]) -> Result<()> {
    if y.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: scores.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::arg("loss over an empty sample"));
    }
    Ok(())
}

pub fn overall_loss(kind: PointwiseLossKind, y: &[f64], scores: &[f64]) -> Result<f64> {
    check_lengths(y, scores)?;
    let mut total = 0.0;
    for (&yi, &si) in y.iter().zip(scores) {
        total += pointwise_loss_and_gradient(kind, yi, si)?.0;
    }
    Ok(total / y.len() as f64)
}

/// Per-group sample counts; the denominators of every group loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCounts {
    pub samples: Vec<usize>,
    pub positives: Vec<usize>,
}

impl GroupCounts {
    pub fn new(y: &[f64], groups: &[usize], num_groups: usize) -> Result<Self> {
        if y.len() != groups.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: groups.len(),
            });
        }
        let mut samples = vec![0; num_groups];
        let mut positives = vec![0; num_groups];
        for (&yi, &g) in y.iter().zip(groups) {
            if g >= num_groups {
                return Err(Error::InvalidData(format!(
                    "group index {g} out of range for {num_groups} groups"
                )));
            }
            samples[g] += 1;
            if yi == 1.0 {
                positives[g] += 1;
            }
        }
        Ok(GroupCounts { samples, positives })
    }

    /// Checks every group has a non-zero denominator under `kind`.
    /// `names` is used for the error message when given.
    pub fn validate(&self, kind: GroupLossKind, names: Option<&[String]>) -> Result<()> {
        let name = |z: usize| {
            names
                .and_then(|n| n.get(z).cloned())
                .unwrap_or_else(|| format!("#{z}"))
        };
        for z in 0..self.samples.len() {
            if self.samples[z] == 0 {
                return Err(Error::EmptyGroup { group: name(z) });
            }
            if kind == GroupLossKind::TruePositive && self.positives[z] == 0 {
                return Err(Error::NoPositives { group: name(z) });
            }
        }
        Ok(())
    }

    pub fn denominator(&self, kind: GroupLossKind, z: usize) -> usize {
        match kind {
            GroupLossKind::TruePositive => self.positives[z],
            GroupLossKind::Equalized | GroupLossKind::PositiveRate => self.samples[z],
        }
    }
}

/// Target used by the group criterion for sample `(y, ...)`, or `None` when
/// the sample does not enter the group loss.
#[inline]
fn criterion_target(kind: GroupLossKind, y: f64) -> Option<f64> {
    match kind {
        GroupLossKind::Equalized => Some(y),
        GroupLossKind::TruePositive => (y == 1.0).then_some(1.0),
        GroupLossKind::PositiveRate => Some(1.0),
    }
}

pub fn group_losses(
    kind: GroupLossKind,
    base: PointwiseLossKind,
    y: &[f64],
    scores: &[f64],
    groups: &[usize],
    num_groups: usize,
) -> Result<GroupLossVector> {
    check_lengths(y, scores)?;
    let counts = GroupCounts::new(y, groups, num_groups)?;
    counts.validate(kind, None)?;
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::arg(format!("non-finite score {s}")));
    }
    Ok(group_losses_with(kind, base, y, scores, groups, &counts))
}

/// Group losses with precomputed (and already validated) counts.
pub(crate) fn group_losses_with(
    kind: GroupLossKind,
    base: PointwiseLossKind,
    y: &[f64],
    scores: &[f64],
    groups: &[usize],
    counts: &GroupCounts,
) -> GroupLossVector {
    let mut sums = vec![0.0; counts.samples.len()];
    for i in 0..y.len() {
        if let Some(t) = criterion_target(kind, y[i]) {
            sums[groups[i]] += loss_unchecked(base, t, scores[i]);
        }
    }
    let values = sums
        .iter()
        .enumerate()
        .map(|(z, s)| s / counts.denominator(kind, z) as f64)
        .collect();
    GroupLossVector { values, kind }
}

pub(crate) fn overall_loss_unchecked(base: PointwiseLossKind, y: &[f64], scores: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(scores)
        .map(|(&yi, &si)| loss_unchecked(base, yi, si))
        .sum();
    total / y.len() as f64
}

fn check_multipliers(mu: &[f64], lambda: f64, num_groups: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::arg(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if mu.len() != num_groups {
        return Err(Error::DimensionMismatch {
            expected: num_groups,
            got: mu.len(),
        });
    }
    if mu.iter().any(|&m| !(m >= 0.0)) {
        return Err(Error::arg("multipliers must be non-negative"));
    }
    let total: f64 = mu.iter().sum();
    if (total - lambda).abs() > 1e-9 {
        return Err(Error::arg(format!(
            "multipliers sum to {total}, expected lambda = {lambda}"
        )));
    }
    Ok(())
}

/// Which normalization the gradient is reported in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum GradientScale {
    /// Derivative of the mean-form objective: O(1/n) per sample.
    Mean,
    /// `n` times the mean form, i.e. the derivative of the summed objective.
    PerSample,
}

/// Shared kernel. Requires validated inputs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lagrangian_gradient_with(
    base: PointwiseLossKind,
    kind: GroupLossKind,
    y: &[f64],
    scores: &[f64],
    groups: &[usize],
    counts: &GroupCounts,
    mu: &[f64],
    lambda: f64,
    scale: GradientScale,
    out: &mut [f64],
) {
    let n = y.len() as f64;
    let overall_weight = match scale {
        GradientScale::Mean => (1.0 - lambda) / n,
        GradientScale::PerSample => 1.0 - lambda,
    };
    let group_weight: Vec<f64> = mu
        .iter()
        .enumerate()
        .map(|(z, &m)| {
            let d = counts.denominator(kind, z) as f64;
            match scale {
                GradientScale::Mean => m / d,
                GradientScale::PerSample => m * (n / d),
            }
        })
        .collect();
    for i in 0..y.len() {
        let mut g = overall_weight * gradient_unchecked(base, y[i], scores[i]);
        let z = groups[i];
        if mu[z] != 0.0 {
            if let Some(t) = criterion_target(kind, y[i]) {
                g += group_weight[z] * gradient_unchecked(base, t, scores[i]);
            }
        }
        out[i] = g;
    }
}

/// Derivative of `(1 - lambda) L + sum_z mu_z Lbar_z` with respect to each
/// score. The booster fits trees to the negation of this (rescaled by `n`).
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_gradient(
    base: PointwiseLossKind,
    kind: GroupLossKind,
    y: &[f64],
    scores: &[f64],
    groups: &[usize],
    num_groups: usize,
    mu: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    check_lengths(y, scores)?;
    check_multipliers(mu, lambda, num_groups)?;
    let counts = GroupCounts::new(y, groups, num_groups)?;
    counts.validate(kind, None)?;
    let mut out = vec![0.0; y.len()];
    lagrangian_gradient_with(
        base,
        kind,
        y,
        scores,
        groups,
        &counts,
        mu,
        lambda,
        GradientScale::Mean,
        &mut out,
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LOGISTIC: PointwiseLossKind = PointwiseLossKind::LogisticCrossEntropy;
    const SQUARED: PointwiseLossKind = PointwiseLossKind::SquaredError;

    #[test]
    fn logistic_at_zero() {
        let (l, g) = pointwise_loss_and_gradient(LOGISTIC, 1.0, 0.0).unwrap();
        assert_relative_eq!(l, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_relative_eq!(g, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn squared_identity() {
        assert_eq!(pointwise_loss_and_gradient(SQUARED, 0.3, 0.3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn logistic_negative_label_matches_finite_difference() {
        let (l, g) = pointwise_loss_and_gradient(LOGISTIC, 0.0, 2.0).unwrap();
        // ln(1 + e^2) and sigma(2)
        assert_relative_eq!(l, 2.126928011042972, epsilon = 1e-12);
        assert_relative_eq!(g, 0.8807970779778823, epsilon = 1e-12);
        let h = 1e-6;
        let fd = (loss_unchecked(LOGISTIC, 0.0, 2.0 + h) - loss_unchecked(LOGISTIC, 0.0, 2.0 - h)) / (2.0 * h);
        assert!(((fd - g) / g).abs() < 1e-5);
    }

    #[test]
    fn pointwise_rejects_bad_inputs() {
        assert!(pointwise_loss_and_gradient(LOGISTIC, 2.0, 0.0).is_err());
        assert!(pointwise_loss_and_gradient(SQUARED, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn logistic_loss_is_clipped() {
        let (l, _) = pointwise_loss_and_gradient(LOGISTIC, 1.0, -1e4).unwrap();
        assert!(l.is_finite());
        assert_relative_eq!(l, -(1e-12f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn overall_loss_cases() {
        let (l, _) = pointwise_loss_and_gradient(LOGISTIC, 1.0, 0.4).unwrap();
        assert_eq!(overall_loss(LOGISTIC, &[1.0], &[0.4]).unwrap(), l);
        assert_eq!(overall_loss(SQUARED, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(overall_loss(SQUARED, &[], &[]).is_err());
        assert!(overall_loss(SQUARED, &[1.0], &[1.0, 2.0]).is_err());

        // Four samples tabulated by hand: softplus(-s) for y=1, softplus(s) for y=0.
        let y = [1.0, 0.0, 1.0, 0.0];
        let s = [0.5, -1.0, 2.0, 0.3];
        let soft = |x: f64| (1.0 + x.exp()).ln();
        let expected = (soft(-0.5) + soft(-1.0) + soft(-2.0) + soft(0.3)) / 4.0;
        assert_relative_eq!(overall_loss(LOGISTIC, &y, &s).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn single_group_equalized_equals_overall() {
        let y = [1.0, 0.0, 1.0];
        let s = [0.1, -0.4, 1.3];
        let g = group_losses(GroupLossKind::Equalized, LOGISTIC, &y, &s, &[0, 0, 0], 1).unwrap();
        assert_relative_eq!(g.values[0], overall_loss(LOGISTIC, &y, &s).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn all_positive_labels_make_criteria_coincide() {
        let y = [1.0; 4];
        let s = [0.3, -0.2, 1.0, -1.5];
        let gr = [0, 1, 0, 1];
        let eq = group_losses(GroupLossKind::Equalized, LOGISTIC, &y, &s, &gr, 2).unwrap();
        let tp = group_losses(GroupLossKind::TruePositive, LOGISTIC, &y, &s, &gr, 2).unwrap();
        let pr = group_losses(GroupLossKind::PositiveRate, LOGISTIC, &y, &s, &gr, 2).unwrap();
        assert_eq!(eq.values, tp.values);
        assert_eq!(eq.values, pr.values);
    }

    #[test]
    fn two_by_two_tabulation() {
        let y = [1.0, 0.0, 1.0, 1.0];
        let s = [0.0, 1.0, -1.0, 0.0];
        let g = group_losses(GroupLossKind::Equalized, LOGISTIC, &y, &s, &[0, 0, 1, 1], 2).unwrap();
        // per-sample: ln2, ln(1+e), ln(1+e), ln2
        let ln2 = std::f64::consts::LN_2;
        let l1e = (1.0 + 1f64.exp()).ln();
        assert_relative_eq!(g.values[0], (ln2 + l1e) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(g.values[1], (l1e + ln2) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn true_positive_needs_positives() {
        let err = group_losses(
            GroupLossKind::TruePositive,
            LOGISTIC,
            &[1.0, 0.0],
            &[0.0, 0.0],
            &[0, 1],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoPositives { .. }));
        // with the squared loss the positive-rate loss is the mean of (s - 1)^2 / 2
        let pr = group_losses(GroupLossKind::PositiveRate, SQUARED, &[0.0, 1.0], &[0.0, 3.0], &[0, 0], 1).unwrap();
        assert_relative_eq!(pr.values[0], 0.5 * (0.5 + 2.0));
    }

    #[test]
    fn gradient_without_fairness_term() {
        let y = [1.0, 0.0, 1.0, 0.0];
        let s = [0.2, 0.1, -0.7, 1.1];
        let grad = lagrangian_gradient(LOGISTIC, GroupLossKind::Equalized, &y, &s, &[0, 1, 0, 1], 2, &[0.0, 0.0], 0.0).unwrap();
        for i in 0..4 {
            assert_eq!(grad[i], gradient_unchecked(LOGISTIC, y[i], s[i]) / 4.0);
        }
    }

    #[test]
    fn concentrated_multiplier_has_local_support() {
        let y = [1.0, 0.0, 1.0, 0.0];
        let s = [0.2, 0.1, -0.7, 1.1];
        let grad = lagrangian_gradient(LOGISTIC, GroupLossKind::Equalized, &y, &s, &[0, 1, 0, 1], 2, &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(grad[0], 0.0);
        assert_eq!(grad[2], 0.0);
        assert!(grad[1] != 0.0 && grad[3] != 0.0);
    }

    #[test]
    fn gradient_rejects_infeasible_multipliers() {
        let r = lagrangian_gradient(SQUARED, GroupLossKind::Equalized, &[1.0, 2.0], &[0.0, 0.0], &[0, 1], 2, &[0.2, 0.2], 0.5);
        assert!(r.is_err());
        let r = lagrangian_gradient(SQUARED, GroupLossKind::Equalized, &[1.0, 2.0], &[0.0, 0.0], &[0, 1], 2, &[-0.1, 0.6], 0.5);
        assert!(r.is_err());
    }

    fn objective(base: PointwiseLossKind, kind: GroupLossKind, y: &[f64], s: &[f64], g: &[usize], nz: usize, mu: &[f64], lambda: f64) -> f64 {
        let overall = overall_loss(base, y, s).unwrap();
        let gl = group_losses(kind, base, y, s, g, nz).unwrap();
        (1.0 - lambda) * overall + mu.iter().zip(&gl.values).map(|(m, l)| m * l).sum::<f64>()
    }

    fn random_instance(rng: &mut ChaCha8Rng, base: PointwiseLossKind) -> (Vec<f64>, Vec<f64>, Vec<usize>, usize) {
        let n = rng.random_range(12..=50);
        let nz = rng.random_range(2..=4);
        let mut groups: Vec<usize> = (0..n).map(|i| i % nz).collect();
        groups.rotate_left(rng.random_range(0..n));
        let y: Vec<f64> = (0..n)
            .map(|i| match base {
                LOGISTIC => if i < 2 * nz { 1.0 } else { rng.random_range(0..2) as f64 },
                SQUARED => rng.random_range(-2.0..2.0),
            })
            .collect();
        let s = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        (y, s, groups, nz)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let combos = [
            (LOGISTIC, GroupLossKind::Equalized),
            (LOGISTIC, GroupLossKind::TruePositive),
            (LOGISTIC, GroupLossKind::PositiveRate),
            (SQUARED, GroupLossKind::Equalized),
        ];
        for (base, kind) in combos {
            for _ in 0..20 {
                let (y, s, g, nz) = random_instance(&mut rng, base);
                let lambda = rng.random_range(0.0..1.0);
                let raw: Vec<f64> = (0..nz).map(|_| rng.random_range(0.0..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mu: Vec<f64> = raw.iter().map(|r| r * lambda / total).collect();
                let grad = lagrangian_gradient(base, kind, &y, &s, &g, nz, &mu, lambda).unwrap();
                let h = 1e-6;
                for i in 0..y.len() {
                    let mut sp = s.clone();
                    let mut sm = s.clone();
                    sp[i] += h;
                    sm[i] -= h;
                    let fd = (objective(base, kind, &y, &sp, &g, nz, &mu, lambda)
                        - objective(base, kind, &y, &sm, &g, nz, &mu, lambda))
                        / (2.0 * h);
                    let denom = grad[i].abs().max(1e-3);
                    assert!((fd - grad[i]).abs() / denom < 1e-5, "{base:?} {kind:?} i={i} fd={fd} an={}", grad[i]);
                }
            }
        }
    }

    #[test]
    fn equalized_weighted_mean_is_overall() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for base in [LOGISTIC, SQUARED] {
            let (y, s, g, nz) = random_instance(&mut rng, base);
            let gl = group_losses(GroupLossKind::Equalized, base, &y, &s, &g, nz).unwrap();
            let counts = GroupCounts::new(&y, &g, nz).unwrap();
            let n = y.len() as f64;
            let weighted: f64 = (0..nz).map(|z| counts.samples[z] as f64 / n * gl.values[z]).sum();
            assert_relative_eq!(weighted, overall_loss(base, &y, &s).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn positive_rate_ignores_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (y, s, g, nz) = random_instance(&mut rng, LOGISTIC);
        let mut flipped = y.clone();
        flipped.reverse();
        let a = group_losses(GroupLossKind::PositiveRate, LOGISTIC, &y, &s, &g, nz).unwrap();
        let b = group_losses(GroupLossKind::PositiveRate, LOGISTIC, &flipped, &s, &g, nz).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn squared_group_loss_zero_iff_exact() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let g = [0, 0, 1, 1];
        let gl = group_losses(GroupLossKind::Equalized, SQUARED, &y, &[1.0, 2.0, 3.0, 4.5], &g, 2).unwrap();
        assert_eq!(gl.values[0], 0.0);
        assert!(gl.values[1] > 0.0);
    }

    #[test]
    fn per_sample_scale_is_n_times_mean() {
        let y = [1.0, 0.0, 1.0, 0.0, 1.0];
        let s = [0.2, 0.1, -0.7, 1.1, 0.0];
        let g = [0, 1, 0, 1, 1];
        let counts = GroupCounts::new(&y, &g, 2).unwrap();
        let mu = [0.1, 0.3];
        let mut mean = [0.0; 5];
        let mut per = [0.0; 5];
        for (scale, out) in [(GradientScale::Mean, &mut mean), (GradientScale::PerSample, &mut per)] {
            lagrangian_gradient_with(LOGISTIC, GroupLossKind::TruePositive, &y, &s, &g, &counts, &mu, 0.4, scale, out);
        }
        for i in 0..5 {
            assert_relative_eq!(per[i], 5.0 * mean[i], epsilon = 1e-14);
        }
    }
}
