#![allow(dead_code)]

use m2fgb_core::data::{generate_synthetic, Dataset, SyntheticGroup, TaskKind};
use m2fgb_core::matrix::Matrix;

/// Everything one straight-line boosting round produces.
#[derive(Debug, Clone)]
pub struct RefRound {
    pub mu: Vec<f64>,
    pub epsilon: f64,
    pub overall_loss: f64,
    pub group_losses: Vec<f64>,
    pub leaf_values: Vec<f64>,
    pub scores: Vec<f64>,
    pub ascent_step: Vec<f64>,
    pub descent_inner_product: f64,
    pub tree_norm_sq: f64,
}

#[derive(Debug, Clone)]
pub struct RefTrace {
    pub base_score: f64,
    pub initial_mu: Vec<f64>,
    pub initial_epsilon: f64,
    pub initial_group_losses: Vec<f64>,
    pub rounds: Vec<RefRound>,
}

fn sig(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

fn logloss(y: f64, s: f64) -> f64 {
    let p = sig(s).clamp(1e-12, 1.0 - 1e-12);
    if y == 1.0 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Group losses of a logistic model; `true_positive` restricts each group
/// to its positives.
fn ref_group_losses(y: &[f64], g: &[usize], k: usize, s: &[f64], true_positive: bool) -> Vec<f64> {
    (0..k)
        .map(|z| {
            let members: Vec<usize> = (0..y.len())
                .filter(|&i| g[i] == z && (!true_positive || y[i] == 1.0))
                .collect();
            members.iter().map(|&i| logloss(y[i], s[i])).sum::<f64>() / members.len() as f64
        })
        .collect()
}

fn ref_project(v: &[f64], scale: f64) -> Vec<f64> {
    let mass = |t: f64| v.iter().map(|&x| (x - t).max(0.0)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - scale;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > scale {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - t).max(0.0)).collect()
}

fn sse(t: &[f64], idx: &[usize]) -> f64 {
    let m = idx.iter().map(|&i| t[i]).sum::<f64>() / idx.len() as f64;
    idx.iter().map(|&i| (t[i] - m).powi(2)).sum()
}

/// Recursive exhaustive CART fit; returns leaf values and writes each row's
/// fitted value.
fn ref_tree(x: &[Vec<f64>], t: &[f64], idx: Vec<usize>, depth: usize, max_depth: usize, msl: usize, fitted: &mut [f64], leaves: &mut Vec<f64>) {
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    if depth < max_depth {
        let parent = sse(t, &idx);
        for j in 0..x[0].len() {
            let mut order = idx.clone();
            order.sort_by(|&a, &b| x[a][j].partial_cmp(&x[b][j]).unwrap());
            for k in msl..=order.len().saturating_sub(msl) {
                if k == 0 || k == order.len() || x[order[k - 1]][j] == x[order[k]][j] {
                    continue;
                }
                let (l, r) = (order[..k].to_vec(), order[k..].to_vec());
                let gain = parent - sse(t, &l) - sse(t, &r);
                if gain > 1e-10 && best.as_ref().is_none_or(|b| gain > b.0 + 1e-12) {
                    best = Some((gain, l, r));
                }
            }
        }
    }
    match best {
        Some((_, l, r)) => {
            ref_tree(x, t, l, depth + 1, max_depth, msl, fitted, leaves);
            ref_tree(x, t, r, depth + 1, max_depth, msl, fitted, leaves);
        }
        None => {
            let v = idx.iter().map(|&i| t[i]).sum::<f64>() / idx.len() as f64;
            for &i in &idx {
                fitted[i] = v;
            }
            leaves.push(v);
        }
    }
}

pub struct RefSettings {
    pub lambda: f64,
    pub rounds: usize,
    pub gamma: f64,
    pub zeta: f64,
    pub true_positive: bool,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Straight-line logistic min-max boosting written from the algorithm
/// description alone.
pub fn reference_train(x: &[Vec<f64>], y: &[f64], g: &[usize], k: usize, st: &RefSettings) -> RefTrace {
    let n = y.len();
    let p = y.iter().sum::<f64>() / n as f64;
    let base_score = (p / (1.0 - p)).ln();
    let mut s = vec![base_score; n];
    let denom: Vec<f64> = (0..k)
        .map(|z| (0..n).filter(|&i| g[i] == z && (!st.true_positive || y[i] == 1.0)).count() as f64)
        .collect();

    let mut lbar = ref_group_losses(y, g, k, &s, st.true_positive);
    let mut mu = vec![st.lambda / k as f64; k];
    let mut eps = lbar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let trace_start = (mu.clone(), eps, lbar.clone());
    let mut rounds = Vec::new();
    for _ in 0..st.rounds {
        let step: Vec<f64> = (0..k).map(|z| st.zeta * (lbar[z] - eps)).collect();
        let moved: Vec<f64> = (0..k).map(|z| mu[z] + step[z]).collect();
        mu = ref_project(&moved, st.lambda);
        // per-sample gradient: n times the gradient of the mean-form Lagrangian
        let target: Vec<f64> = (0..n)
            .map(|i| {
                let z = g[i];
                let plain = sig(s[i]) - y[i];
                let fair = if st.true_positive && y[i] == 0.0 { 0.0 } else { sig(s[i]) - y[i] };
                let grad_mean = (1.0 - st.lambda) * plain / n as f64 + mu[z] * fair / denom[z];
                -(n as f64) * grad_mean
            })
            .collect();
        let mut fitted = vec![0.0; n];
        let mut leaves = Vec::new();
        ref_tree(x, &target, (0..n).collect(), 0, st.max_depth, st.min_samples_leaf, &mut fitted, &mut leaves);
        let inner: f64 = (0..n).map(|i| -target[i] * fitted[i]).sum();
        let norm_sq: f64 = fitted.iter().map(|h| h * h).sum();
        for i in 0..n {
            s[i] += st.gamma * fitted[i];
        }
        lbar = ref_group_losses(y, g, k, &s, st.true_positive);
        eps = lbar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        leaves.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rounds.push(RefRound {
            mu: mu.clone(),
            epsilon: eps,
            overall_loss: (0..n).map(|i| logloss(y[i], s[i])).sum::<f64>() / n as f64,
            group_losses: lbar.clone(),
            leaf_values: leaves,
            scores: s.clone(),
            ascent_step: step,
            descent_inner_product: inner,
            tree_norm_sq: norm_sq,
        });
    }
    RefTrace {
        base_score,
        initial_mu: trace_start.0,
        initial_epsilon: trace_start.1,
        initial_group_losses: trace_start.2,
        rounds,
    }
}

/// The fixed 12-sample, 2-group, 2-feature instance. Its features are
/// chosen so that no node in the first two rounds has a near-tied split.
pub fn tiny_instance() -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
    let x = vec![
        vec![1.86, 0.17],
        vec![0.70, -0.22],
        vec![-1.22, -0.47],
        vec![0.37, -1.78],
        vec![1.88, -1.65],
        vec![1.18, 0.10],
        vec![-1.89, 0.27],
        vec![-0.69, -1.21],
        vec![-1.63, 1.71],
        vec![0.59, -1.33],
        vec![0.38, 0.59],
        vec![-0.06, 0.73],
    ];
    let y = vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let g = vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
    (x, y, g)
}

pub fn tiny_dataset() -> Dataset {
    let (x, y, g) = tiny_instance();
    Dataset::new(
        Matrix::from_rows(&x).unwrap(),
        y,
        g,
        vec!["g0".into(), "g1".into()],
        TaskKind::BinaryClassification,
        None,
    )
    .unwrap()
}

/// 8 groups, smallest 2%, with weaker signal in the smaller groups.
pub fn eight_groups() -> Vec<SyntheticGroup> {
    let fractions = [0.30, 0.20, 0.15, 0.12, 0.10, 0.07, 0.04, 0.02];
    let rates = [0.5, 0.45, 0.55, 0.4, 0.5, 0.35, 0.4, 0.3];
    let shifts = [0.0, 0.1, -0.1, 0.2, -0.2, -0.4, -0.6, -1.0];
    (0..8)
        .map(|z| SyntheticGroup::new(format!("g{z}"), fractions[z], rates[z], shifts[z]))
        .collect()
}

pub fn four_groups() -> Vec<SyntheticGroup> {
    vec![
        SyntheticGroup::new("a", 0.55, 0.5, 0.0),
        SyntheticGroup::new("b", 0.25, 0.4, 0.3),
        SyntheticGroup::new("c", 0.13, 0.45, -0.4),
        SyntheticGroup::new("d", 0.07, 0.35, -0.8),
    ]
}

pub fn eight_group_data(n: usize, d: usize, seed: u64) -> Dataset {
    generate_synthetic(n, &eight_groups(), d, 1.0, seed).unwrap()
}

pub fn four_group_data(n: usize, seed: u64) -> Dataset {
    generate_synthetic(n, &four_groups(), 5, 1.0, seed).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
