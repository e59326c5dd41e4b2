use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::split::allocate;
use crate::data::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One subgroup of a synthetic binary classification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGroup {
    pub name: String,
    /// Share of the `n` rows.
    pub fraction: f64,
    /// Share of the group's rows with label 1.
    pub positive_rate: f64,
    /// Offset added to the class signal of every row in the group. A group
    /// with a negative shift has positives that resemble the other groups'
    /// negatives.
    pub signal_shift: f64,
}

impl SyntheticGroup {
    pub fn new(name: impl Into<String>, fraction: f64, positive_rate: f64, signal_shift: f64) -> Self {
        SyntheticGroup {
            name: name.into(),
            fraction,
            positive_rate,
            signal_shift,
        }
    }
}

/// Generates a binary classification dataset with `d` numeric features.
///
/// Row `i` in group `g` with label `y` has features
/// `x_j = w_j * ((2y - 1) + shift_g) + noise * N(0, 1)` with `w_j = 1 / (j + 1)`.
/// Group sizes and per-group positive counts are allocated exactly (largest
/// remainder), then rows are shuffled.
pub fn generate_synthetic(n: usize, groups: &[SyntheticGroup], d: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if groups.is_empty() {
        return Err(Error::arg("at least one group is required"));
    }
    if d == 0 {
        return Err(Error::arg("feature count must be positive"));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::arg(format!("noise must be non-negative, got {noise}")));
    }
    let total: f64 = groups.iter().map(|g| g.fraction).sum();
    if groups.iter().any(|g| !(g.fraction > 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::arg("group fractions must be positive and sum to 1"));
    }
    if let Some(g) = groups.iter().find(|g| !(g.positive_rate > 0.0 && g.positive_rate < 1.0)) {
        return Err(Error::arg(format!(
            "positive rate of group '{}' must lie in (0, 1), got {}",
            g.name, g.positive_rate
        )));
    }
    let fractions: Vec<f64> = groups.iter().map(|g| g.fraction).collect();
    let sizes = allocate(n, &fractions);
    if let Some(z) = sizes.iter().position(|&s| s < 2) {
        return Err(Error::arg(format!(
            "group '{}' gets {} rows at n = {n}; each group needs at least 2",
            groups[z].name, sizes[z]
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..d).map(|j| 1.0 / (j + 1) as f64).collect();
    let mut rows: Vec<(usize, f64, Vec<f64>)> = Vec::with_capacity(n);
    for (z, (group, &size)) in groups.iter().zip(&sizes).enumerate() {
        let positives = ((group.positive_rate * size as f64).round() as usize).clamp(1, size - 1);
        for k in 0..size {
            let y = if k < positives { 1.0 } else { 0.0 };
            let signal = 2.0 * y - 1.0 + group.signal_shift;
            let x: Vec<f64> = weights
                .iter()
                .map(|w| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    w * signal + noise * e
                })
                .collect();
            rows.push((z, y, x));
        }
    }
    rows.shuffle(&mut rng);

    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut group_idx = Vec::with_capacity(n);
    for (z, y, x) in rows {
        data.extend(x);
        labels.push(y);
        group_idx.push(z);
    }
    Dataset::new(
        Matrix::from_vec(n, d, data)?,
        labels,
        group_idx,
        groups.iter().map(|g| g.name.clone()).collect(),
        TaskKind::BinaryClassification,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_groups() -> Vec<SyntheticGroup> {
        vec![
            SyntheticGroup::new("large", 0.87, 0.7, 0.0),
            SyntheticGroup::new("small", 0.13, 0.4, -0.5),
        ]
    }

    #[test]
    fn group_sizes_follow_fractions() {
        let ds = generate_synthetic(1000, &two_groups(), 4, 1.0, 3).unwrap();
        let counts = ds.group_counts().unwrap();
        assert!((counts.samples[0] as i64 - 870).abs() <= 1);
        assert!((counts.samples[1] as i64 - 130).abs() <= 1);
        assert_eq!(counts.positives[0], 609);
        assert_eq!(counts.positives[1], 52);
    }

    #[test]
    fn smallest_of_eight_groups() {
        let mut groups: Vec<SyntheticGroup> = (0..7).map(|z| SyntheticGroup::new(format!("g{z}"), 0.99 / 7.0, 0.5, 0.0)).collect();
        groups.push(SyntheticGroup::new("tiny", 0.01, 0.5, -0.5));
        let ds = generate_synthetic(50_000, &groups, 3, 1.0, 1).unwrap();
        let counts = ds.group_counts().unwrap();
        assert_eq!(counts.samples[7], 500);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_synthetic(300, &two_groups(), 3, 0.5, 9).unwrap();
        let b = generate_synthetic(300, &two_groups(), 3, 0.5, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_group_and_bad_rates() {
        let groups = vec![SyntheticGroup::new("a", 0.999, 0.5, 0.0), SyntheticGroup::new("b", 0.001, 0.5, 0.0)];
        assert!(generate_synthetic(100, &groups, 2, 1.0, 0).is_err());
        let groups = vec![SyntheticGroup::new("a", 1.0, 1.0, 0.0)];
        assert!(generate_synthetic(100, &groups, 2, 1.0, 0).is_err());
        let groups = vec![SyntheticGroup::new("a", 0.5, 0.5, 0.0)];
        assert!(generate_synthetic(100, &groups, 2, 1.0, 0).is_err());
    }

    #[test]
    fn noiseless_data_is_separable_on_first_feature() {
        let groups = vec![SyntheticGroup::new("a", 0.6, 0.5, 0.0), SyntheticGroup::new("b", 0.4, 0.3, 0.5)];
        let ds = generate_synthetic(200, &groups, 2, 0.0, 4).unwrap();
        for i in 0..ds.len() {
            assert_eq!(ds.features.get(i, 0) > 0.25, ds.labels[i] == 1.0);
        }
    }
}
