//! Group-annotated datasets: loading, preprocessing, splitting and
//! synthetic generation.

mod csv_io;
mod preprocess;
mod schema;
mod split;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::GroupCounts;
use crate::matrix::Matrix;

pub use csv_io::{load_csv, read_csv, write_csv};
pub use preprocess::{preprocess, ColumnTransform, PreprocessWarning, Preprocessor};
pub use schema::{ColumnRole, ColumnSchema};
pub use split::{stratified_split, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "binary")]
    BinaryClassification,
    #[serde(rename = "regression")]
    Regression,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::BinaryClassification => "binary",
            TaskKind::Regression => "regression",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" | "classification" | "binary_classification" => Ok(TaskKind::BinaryClassification),
            "regression" => Ok(TaskKind::Regression),
            other => Err(Error::arg(format!("unknown task '{other}'"))),
        }
    }
}

/// How a feature column is stored in the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    /// Stored as level codes `0..levels.len()`.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

impl FeatureColumn {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureColumn {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }
}

/// Supervised samples annotated with a sensitive group index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub groups: Vec<usize>,
    pub group_names: Vec<String>,
    pub task: TaskKind,
    pub columns: Vec<FeatureColumn>,
}

impl Dataset {
    /// Builds a dataset and checks its invariants. Feature columns default
    /// to numeric columns named `x0, x1, ...` when `columns` is `None`.
    pub fn new(
        features: Matrix,
        labels: Vec<f64>,
        groups: Vec<usize>,
        group_names: Vec<String>,
        task: TaskKind,
        columns: Option<Vec<FeatureColumn>>,
    ) -> Result<Self> {
        let columns = columns
            .unwrap_or_else(|| (0..features.cols()).map(|j| FeatureColumn::numeric(format!("x{j}"))).collect());
        let ds = Dataset {
            features,
            labels,
            groups,
            group_names,
            task,
            columns,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.features.rows() != n || self.groups.len() != n {
            return Err(Error::InvalidData(format!(
                "row count mismatch: {} feature rows, {} labels, {} group entries",
                self.features.rows(),
                n,
                self.groups.len()
            )));
        }
        if self.columns.len() != self.features.cols() {
            return Err(Error::InvalidData(format!(
                "{} column descriptors for {} feature columns",
                self.columns.len(),
                self.features.cols()
            )));
        }
        if self.group_names.is_empty() {
            return Err(Error::InvalidData("dataset has no groups".into()));
        }
        let counts = self.group_counts()?;
        counts.validate(crate::losses::GroupLossKind::Equalized, Some(&self.group_names))?;
        for (i, &y) in self.labels.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::InvalidData(format!("non-finite label at row {i}")));
            }
            if self.task == TaskKind::BinaryClassification && y != 0.0 && y != 1.0 {
                return Err(Error::InvalidData(format!(
                    "label {y} at row {i} is not 0/1 for binary classification"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn group_counts(&self) -> Result<GroupCounts> {
        GroupCounts::new(&self.labels, &self.groups, self.num_groups())
    }

    pub fn has_non_finite_features(&self) -> bool {
        self.features.as_slice().iter().any(|x| !x.is_finite())
    }

    /// Rows `idx` in the given order. Group names are kept, so every group
    /// index keeps meaning the same group; the result is not re-validated.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            group_names: self.group_names.clone(),
            task: self.task,
            columns: self.columns.clone(),
        }
    }

    /// SHA-256 over the task, shape, groups, labels and feature bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.task.name().as_bytes());
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.num_features() as u64).to_le_bytes());
        for name in &self.group_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        for &g in &self.groups {
            h.update((g as u64).to_le_bytes());
        }
        for &y in &self.labels {
            h.update(y.to_bits().to_le_bytes());
        }
        for &x in self.features.as_slice() {
            h.update(x.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
