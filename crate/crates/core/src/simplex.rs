//! Euclidean projection onto the scaled simplex `{w >= 0, sum(w) = scale}`.

use crate::error::{Error, Result};

/// Relative slack under which an input is already considered a member of
/// the simplex and returned untouched.
const MEMBERSHIP_TOL: f64 = 1e-12;

/// The set `{w in R^dim : w >= 0, ||w||_1 = scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSimplex {
    scale: f64,
    dim: usize,
}

impl ScaledSimplex {
    pub fn new(scale: f64, dim: usize) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::arg(format!(
                "simplex scale must be finite and non-negative, got {scale}"
            )));
        }
        if dim == 0 {
            return Err(Error::arg("simplex dimension must be at least 1"));
        }
        Ok(ScaledSimplex { scale, dim })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Uniform point `scale / dim` in every coordinate.
    pub fn center(&self) -> Vec<f64> {
        vec![self.scale / self.dim as f64; self.dim]
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.dim
            && w.iter().all(|&x| x >= 0.0 && x.is_finite())
            && (w.iter().sum::<f64>() - self.scale).abs() <= MEMBERSHIP_TOL * self.scale.max(1.0)
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        project_scaled_simplex(v, self.scale)
    }
}

/// Closest point to `v` (in Euclidean norm) on the scaled simplex of radius
/// `scale`.
///
/// Uses the sort-and-threshold method: with `u` the entries sorted in
/// decreasing order, the threshold `tau = (sum_{j<=k} u_j - scale) / k` for
/// the largest `k` with `u_k > tau`, and `w_i = max(v_i - tau, 0)`.
/// Inputs already on the simplex are returned unchanged.
pub fn project_scaled_simplex(v: &[f64], scale: f64) -> Result<Vec<f64>> {
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::arg(format!(
            "simplex scale must be finite and non-negative, got {scale}"
        )));
    }
    if v.is_empty() {
        return Err(Error::arg("cannot project an empty vector"));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::arg(format!("non-finite entry {x} in projection input")));
    }
    if scale == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - scale).abs() <= MEMBERSHIP_TOL * scale.max(1.0) {
        return Ok(v.to_vec());
    }

    // Work relative to the largest entry: a constant shift of `v` then
    // leaves every intermediate value unchanged whenever the shifted entries
    // are exactly representable.
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let relative: Vec<f64> = v.iter().map(|&x| x - top).collect();
    let tau = threshold(&relative, scale);
    Ok(relative.iter().map(|&x| (x - tau).max(0.0)).collect())
}

fn threshold(v: &[f64], scale: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = sorted[0] - scale;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - scale) / (k + 1) as f64;
        if u > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    tau
}
