//! Least-squares regression trees with exact greedy splits.
//!
//! Trees grow level by level. Each level makes one pass over every
//! feature's presorted row order, accumulating left-side statistics for all
//! open nodes at once, so a level costs `O(n d)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Splits whose gain is below this fraction of the node's sum of squared
/// targets are treated as zero gain.
const RELATIVE_MIN_GAIN: f64 = 1e-12;
const PARALLEL_WORK: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// 0 means a single leaf.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2_leaf_reg: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_samples_leaf: 20,
            l2_leaf_reg: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::arg("min_samples_leaf must be at least 1"));
        }
        if !(self.l2_leaf_reg >= 0.0) || !self.l2_leaf_reg.is_finite() {
            return Err(Error::arg(format!("l2_leaf_reg must be non-negative, got {}", self.l2_leaf_reg)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// Nodes are stored in preorder with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub num_features: usize,
}

impl RegressionTree {
    pub fn leaf(value: f64, num_features: usize) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
            num_features,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                got: row.len(),
            });
        }
        Ok(self.predict_unchecked(row))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Checks the structural invariants: preorder layout, every split has
    /// two in-range children, finite leaves, in-range features.
    pub fn validate(&self) -> Result<()> {
        fn go(t: &RegressionTree, i: usize, next: &mut usize) -> std::result::Result<(), String> {
            if i >= t.nodes.len() {
                return Err(format!("node {i} out of range"));
            }
            *next += 1;
            match t.nodes[i] {
                Node::Leaf { value } if !value.is_finite() => Err(format!("leaf {i} is not finite")),
                Node::Leaf { .. } => Ok(()),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= t.num_features || !threshold.is_finite() {
                        return Err(format!("bad split at node {i}"));
                    }
                    if left != *next {
                        return Err(format!("node {i}: left child is not next in preorder"));
                    }
                    go(t, left, next)?;
                    if right != *next {
                        return Err(format!("node {i}: right child is not next in preorder"));
                    }
                    go(t, right, next)
                }
            }
        }
        let mut next = 0;
        go(self, 0, &mut next).map_err(Error::InvalidData)?;
        if next != self.nodes.len() {
            return Err(Error::InvalidData("unreachable tree nodes".into()));
        }
        Ok(())
    }
}

pub fn tree_predict(tree: &RegressionTree, row: &[f64]) -> Result<f64> {
    tree.predict(row)
}

/// Row indices of every feature column sorted by value (ties by row index).
#[derive(Debug, Clone)]
pub struct SortedFeatures {
    order: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl SortedFeatures {
    pub fn new(features: &Matrix) -> Self {
        let order = (0..features.cols())
            .into_par_iter()
            .map(|j| {
                let mut idx: Vec<u32> = (0..features.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    features
                        .get(a as usize, j)
                        .total_cmp(&features.get(b as usize, j))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect::<Vec<_>>();
        let values = order
            .iter()
            .enumerate()
            .map(|(j, idx)| idx.iter().map(|&r| features.get(r as usize, j)).collect())
            .collect();
        SortedFeatures { order, values }
    }
}

pub fn fit_tree(features: &Matrix, targets: &[f64], params: &TreeParams) -> Result<RegressionTree> {
    let sorted = SortedFeatures::new(features);
    Ok(fit_tree_presorted(features, &sorted, targets, params)?.0)
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
    feature: usize,
}

struct Growing {
    count: usize,
    sum: f64,
    sum_sq: f64,
    depth: usize,
    split: Option<(usize, f64, usize, usize)>,
}

const CLOSED: u32 = u32::MAX;

#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + 0.5 * (hi - lo);
    if m > lo {
        m
    } else {
        hi
    }
}

/// Fits a tree and also returns its value on every training row.
pub(crate) fn fit_tree_presorted(
    features: &Matrix,
    sorted: &SortedFeatures,
    targets: &[f64],
    params: &TreeParams,
) -> Result<(RegressionTree, Vec<f64>)> {
    params.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::arg("cannot fit a tree on zero rows"));
    }
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets.len(),
        });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::arg("tree targets must be finite"));
    }
    let msl = params.min_samples_leaf;
    let d = features.cols();

    let mut arena = vec![Growing {
        count: n,
        sum: targets.iter().sum(),
        sum_sq: targets.iter().map(|t| t * t).sum(),
        depth: 0,
        split: None,
    }];
    let mut node_of: Vec<u32> = vec![0; n];
    let mut open: Vec<usize> = vec![0];

    while !open.is_empty() {
        open.retain(|&k| arena[k].depth < params.max_depth && arena[k].count >= 2 * msl);
        if open.is_empty() {
            break;
        }
        // slot of each open node in the per-feature scratch arrays
        let mut slot = vec![usize::MAX; arena.len()];
        for (s, &k) in open.iter().enumerate() {
            slot[k] = s;
        }
        let totals: Vec<(usize, f64)> = open.iter().map(|&k| (arena[k].count, arena[k].sum)).collect();
        let scan = |j: usize| scan_feature(&sorted.order[j], &sorted.values[j], j, targets, &node_of, &slot, &totals, msl);
        let per_feature: Vec<Vec<Option<Candidate>>> = if n * d >= PARALLEL_WORK {
            (0..d).into_par_iter().map(scan).collect()
        } else {
            (0..d).map(scan).collect()
        };

        let mut next_open = Vec::new();
        for (s, &k) in open.iter().enumerate() {
            let mut best: Option<Candidate> = None;
            for cands in &per_feature {
                if let Some(c) = cands[s] {
                    if best.is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            let Some(best) = best else { continue };
            if !(best.gain > RELATIVE_MIN_GAIN * arena[k].sum_sq) {
                continue;
            }
            let depth = arena[k].depth + 1;
            let left = arena.len();
            let right = left + 1;
            for _ in 0..2 {
                arena.push(Growing {
                    count: 0,
                    sum: 0.0,
                    sum_sq: 0.0,
                    depth,
                    split: None,
                });
            }
            arena[k].split = Some((best.feature, best.threshold, left, right));
            next_open.push(left);
            next_open.push(right);
        }
        // route rows of split nodes into their children
        for i in 0..n {
            let k = node_of[i];
            if k == CLOSED {
                continue;
            }
            match arena[k as usize].split {
                Some((f, thr, l, r)) => {
                    let child = if features.get(i, f) < thr { l } else { r };
                    node_of[i] = child as u32;
                    let t = targets[i];
                    let c = &mut arena[child];
                    c.count += 1;
                    c.sum += t;
                    c.sum_sq += t * t;
                }
                None => node_of[i] = CLOSED,
            }
        }
        open = next_open;
    }

    let leaf_value = |g: &Growing| g.sum / (g.count as f64 + params.l2_leaf_reg);
    let mut nodes = Vec::with_capacity(arena.len());
    emit_preorder(&arena, 0, &mut nodes, &leaf_value);

    // fitted values: route every row from the root in the finished tree
    let tree = RegressionTree { nodes, num_features: d };
    let fitted = (0..n).map(|i| tree.predict_unchecked(features.row(i))).collect();
    Ok((tree, fitted))
}

fn emit_preorder(
    arena: &[Growing],
    k: usize,
    nodes: &mut Vec<Node>,
    leaf_value: &dyn Fn(&Growing) -> f64,
) -> usize {
    let at = nodes.len();
    match arena[k].split {
        None => {
            nodes.push(Node::Leaf {
                value: leaf_value(&arena[k]),
            });
        }
        Some((feature, threshold, l, r)) => {
            nodes.push(Node::Leaf { value: 0.0 });
            let left = emit_preorder(arena, l, nodes, leaf_value);
            let right = emit_preorder(arena, r, nodes, leaf_value);
            nodes[at] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
    }
    at
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    order: &[u32],
    values: &[f64],
    feature: usize,
    targets: &[f64],
    node_of: &[u32],
    slot: &[usize],
    totals: &[(usize, f64)],
    msl: usize,
) -> Vec<Option<Candidate>> {
    let m = totals.len();
    let mut count = vec![0usize; m];
    let mut sum = vec![0.0f64; m];
    let mut last = vec![f64::NAN; m];
    let mut best: Vec<Option<Candidate>> = vec![None; m];
    for (&r, &v) in order.iter().zip(values) {
        let r = r as usize;
        let k = node_of[r];
        if k == CLOSED {
            continue;
        }
        let s = slot[k as usize];
        if s == usize::MAX {
            continue;
        }
        if count[s] > 0 && v > last[s] {
            let (n_total, s_total) = totals[s];
            let n_left = count[s];
            let n_right = n_total - n_left;
            if n_left >= msl && n_right >= msl {
                let mean_left = sum[s] / n_left as f64;
                let mean_right = (s_total - sum[s]) / n_right as f64;
                let diff = mean_left - mean_right;
                let gain = (n_left as f64) * (n_right as f64) / (n_total as f64) * diff * diff;
                if best[s].is_none_or(|b| gain > b.gain) {
                    best[s] = Some(Candidate {
                        gain,
                        threshold: midpoint(last[s], v),
                        feature,
                    });
                }
            }
        }
        count[s] += 1;
        sum[s] += targets[r];
        last[s] = v;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(max_depth: usize, msl: usize) -> TreeParams {
        TreeParams {
            max_depth,
            min_samples_leaf: msl,
            l2_leaf_reg: 0.0,
        }
    }

    fn column(xs: &[f64]) -> Matrix {
        Matrix::from_vec(xs.len(), 1, xs.to_vec()).unwrap()
    }

    fn sse(t: &[f64], pred: &[f64]) -> f64 {
        t.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Best single split by trying every midpoint of every feature.
    fn exhaustive_best_split(x: &Matrix, t: &[f64], msl: usize) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..x.cols() {
            let mut vals = x.column(j);
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = midpoint(w[0], w[1]);
                let (l, r): (Vec<usize>, Vec<usize>) = (0..t.len()).partition(|&i| x.get(i, j) < thr);
                if l.len() < msl || r.len() < msl {
                    continue;
                }
                let mean = |idx: &[usize]| idx.iter().map(|&i| t[i]).sum::<f64>() / idx.len() as f64;
                let (ml, mr) = (mean(&l), mean(&r));
                let err: f64 = l.iter().map(|&i| (t[i] - ml).powi(2)).sum::<f64>()
                    + r.iter().map(|&i| (t[i] - mr).powi(2)).sum::<f64>();
                if best.is_none_or(|b| err < b.2 - 1e-12) {
                    best = Some((j, thr, err));
                }
            }
        }
        best
    }

    #[test]
    fn constant_targets_give_one_leaf() {
        let x = column(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let tree = fit_tree(&x, &[0.7; 5], &params(3, 1)).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_relative_eq!(tree.predict(&[9.0]).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn depth_zero_is_the_mean() {
        let x = column(&[0.0, 1.0, 2.0]);
        let tree = fit_tree(&x, &[1.0, 2.0, 6.0], &params(0, 1)).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 3.0 }]);
    }

    #[test]
    fn l2_shrinks_leaves() {
        let x = column(&[0.0, 1.0, 2.0]);
        let p = TreeParams { l2_leaf_reg: 1.0, ..params(0, 1) };
        let tree = fit_tree(&x, &[1.0, 2.0, 6.0], &p).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 2.25 }]);
    }

    #[test]
    fn sign_step_is_recovered() {
        let xs = [-2.0, -1.5, -1.0, -0.2, 0.0, 0.4, 1.0, 3.0];
        let t: Vec<f64> = xs.iter().map(|&x| if x < 0.0 { -1.0 } else { 1.0 }).collect();
        let x = column(&xs);
        let tree = fit_tree(&x, &t, &params(1, 1)).unwrap();
        let (j, thr, _) = exhaustive_best_split(&x, &t, 1).unwrap();
        match tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!((feature, threshold), (j, thr));
                assert_eq!(threshold, -0.1);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(tree.nodes[1], Node::Leaf { value: -1.0 });
        assert_eq!(tree.nodes[2], Node::Leaf { value: 1.0 });
    }

    #[test]
    fn threshold_ties_route_right() {
        let tree = RegressionTree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 1.0 },
            ],
            num_features: 1,
        };
        assert_eq!(tree.predict(&[0.5]).unwrap(), 1.0);
        assert_eq!(tree.predict(&[0.4999]).unwrap(), -1.0);
        assert!(tree.predict(&[0.5, 1.0]).is_err());
        assert_eq!(RegressionTree::leaf(2.5, 3).predict(&[1.0, 2.0, 3.0]).unwrap(), 2.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = column(&[0.0, 1.0]);
        assert!(fit_tree(&x, &[1.0], &params(1, 1)).is_err());
        assert!(fit_tree(&x, &[1.0, f64::NAN], &params(1, 1)).is_err());
        assert!(fit_tree(&Matrix::zeros(0, 1), &[], &params(1, 1)).is_err());
        assert!(fit_tree(&x, &[1.0, 2.0], &params(1, 0)).is_err());
    }

    #[test]
    fn equal_gain_prefers_lowest_feature() {
        // two identical columns: the split must use feature 0
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let tree = fit_tree(&x, &[0.0, 0.0, 1.0, 1.0], &params(1, 1)).unwrap();
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 1.5));
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| (rng.random_range(0..20) as f64) / 4.0).collect())
            .collect();
        let t = rows.iter().map(|r| r[0].sin() + 0.3 * r[d - 1] + rng.random_range(-0.2..0.2)).collect();
        (Matrix::from_rows(&rows).unwrap(), t)
    }

    /// Straight recursive traversal used as an independent routing oracle.
    fn reference_predict(nodes: &[Node], i: usize, row: &[f64]) -> f64 {
        match nodes[i] {
            Node::Leaf { value } => value,
            Node::Split { feature, threshold, left, right } => {
                if row[feature] < threshold {
                    reference_predict(nodes, left, row)
                } else {
                    reference_predict(nodes, right, row)
                }
            }
        }
    }

    #[test]
    fn depth_three_tree_routes_like_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, t) = random_problem(&mut rng, 50, 3);
        let tree = fit_tree(&x, &t, &params(3, 2)).unwrap();
        tree.validate().unwrap();
        assert!(tree.depth() <= 3);
        for r in x.iter_rows() {
            assert_eq!(tree.predict(r).unwrap(), reference_predict(&tree.nodes, 0, r));
        }
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (x, t) = random_problem(&mut rng, 40, 3);
            let tree = fit_tree(&x, &t, &params(1, 3)).unwrap();
            let oracle = exhaustive_best_split(&x, &t, 3);
            match (tree.nodes[0], oracle) {
                (Node::Split { feature, threshold, .. }, Some((j, thr, err))) => {
                    let pred: Vec<f64> = x.iter_rows().map(|r| tree.predict(r).unwrap()).collect();
                    assert_relative_eq!(sse(&t, &pred), err, max_relative = 1e-9);
                    assert_eq!((feature, threshold), (j, thr));
                }
                (Node::Leaf { .. }, None) => {}
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn least_squares_structure(seed in 0u64..500, depth in 1usize..5, msl in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, t) = random_problem(&mut rng, 60, 2);
            let sorted = SortedFeatures::new(&x);
            let (tree, fitted) = fit_tree_presorted(&x, &sorted, &t, &params(depth, msl)).unwrap();
            tree.validate().unwrap();
            // orthogonality of leaf means
            let th: f64 = t.iter().zip(&fitted).map(|(a, b)| a * b).sum();
            let hh: f64 = fitted.iter().map(|h| h * h).sum();
            prop_assert!((th - hh).abs() <= 1e-9 * hh.abs().max(1e-12));
            // leaf sizes and piecewise constancy
            let mut leaf_rows = std::collections::HashMap::new();
            for (i, r) in x.iter_rows().enumerate() {
                let leaf = leaf_index(&tree, r);
                leaf_rows.entry(leaf).or_insert_with(Vec::new).push(i);
                prop_assert_eq!(fitted[i], tree.predict(r).unwrap());
            }
            for rows in leaf_rows.values() {
                prop_assert!(rows.len() >= msl);
                prop_assert!(rows.iter().all(|&i| fitted[i] == fitted[rows[0]]));
            }
        }

        #[test]
        fn every_split_reduces_sse(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, t) = random_problem(&mut rng, 50, 2);
            let mut prev = f64::INFINITY;
            for depth in 0..5 {
                let tree = fit_tree(&x, &t, &params(depth, 2)).unwrap();
                let pred: Vec<f64> = x.iter_rows().map(|r| tree.predict(r).unwrap()).collect();
                let e = sse(&t, &pred);
                prop_assert!(e <= prev + 1e-12);
                if tree.depth() == depth && depth > 0 {
                    prop_assert!(e < prev);
                }
                prev = e;
            }
        }
    }

    fn leaf_index(tree: &RegressionTree, row: &[f64]) -> usize {
        let mut i = 0;
        while let Node::Split { feature, threshold, left, right } = tree.nodes[i] {
            i = if row[feature] < threshold { left } else { right };
        }
        i
    }

    #[test]
    fn parallel_and_serial_scans_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (x, t) = random_problem(&mut rng, 5000, 8);
        let sorted = SortedFeatures::new(&x);
        let (par, _) = fit_tree_presorted(&x, &sorted, &t, &params(4, 5)).unwrap();
        let (seq, _) = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| fit_tree_presorted(&x, &sorted, &t, &params(4, 5)).unwrap());
        assert_eq!(par, seq);
    }
}
