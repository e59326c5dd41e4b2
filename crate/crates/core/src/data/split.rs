use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, TaskKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// (train, validation, test)
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            fractions: [train, validation, test],
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::arg(format!("split fractions must be positive, got {:?}", self.fractions)));
        }
        let total: f64 = self.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("split fractions sum to {total}, expected 1")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: [0.6, 0.2, 0.2],
            seed: 0,
        }
    }
}

/// Splits `count` items into parts proportional to `fractions` by the
/// largest-remainder rule; ties in remainder go to the earlier part.
pub(crate) fn allocate(count: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * count as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(count.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    sizes
}

/// Splits every (group, label) cell separately so each partition keeps the
/// per-group label proportions, then concatenates the cells. Rows inside
/// each partition keep their original relative order.
pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let mut cells: Vec<((usize, i8), Vec<usize>)> = Vec::new();
    for i in 0..ds.len() {
        let label_key = match ds.task {
            TaskKind::BinaryClassification => ds.labels[i] as i8,
            TaskKind::Regression => -1,
        };
        let key = (ds.groups[i], label_key);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(i),
            None => cells.push((key, vec![i])),
        }
    }
    cells.sort_by_key(|(k, _)| *k);
    for z in 0..ds.num_groups() {
        if !cells.iter().any(|((g, _), _)| *g == z) {
            return Err(Error::EmptyGroup {
                group: ds.group_names[z].clone(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for ((g, label), mut rows) in cells {
        if rows.len() < 3 {
            let what = if label < 0 { String::new() } else { format!(", label {label}") };
            return Err(Error::InvalidData(format!(
                "cell (group '{}'{what}) has {} samples; at least 3 are needed to fill every partition",
                ds.group_names[g],
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        let mut sizes = allocate(rows.len(), &spec.fractions);
        // keep every partition nonempty by borrowing from the largest one
        for k in 0..3 {
            if sizes[k] == 0 {
                let donor = (0..3).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap();
                sizes[donor] -= 1;
                sizes[k] += 1;
            }
        }
        let mut start = 0;
        for (k, &size) in sizes.iter().enumerate() {
            parts[k].extend_from_slice(&rows[start..start + size]);
            start += size;
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok((ds.subset(&parts[0]), ds.subset(&parts[1]), ds.subset(&parts[2])))
}
