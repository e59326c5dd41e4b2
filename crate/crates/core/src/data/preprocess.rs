use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset, FeatureColumn};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// What happens to one raw column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnTransform {
    /// `(x - mean) / std`, population standard deviation.
    Standardize { name: String, mean: f64, std: f64 },
    /// One indicator column per level, in level order.
    OneHot { name: String, levels: Vec<String> },
    /// Zero-variance numeric column.
    Dropped { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessWarning {
    pub column: String,
    pub message: String,
}

/// Frozen preprocessing statistics. Fit on the training partition, then
/// apply the same transform to validation and test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub transforms: Vec<ColumnTransform>,
}

impl Preprocessor {
    pub fn fit(raw: &Dataset) -> Result<(Preprocessor, Vec<PreprocessWarning>)> {
        if raw.is_empty() {
            return Err(Error::InvalidData("cannot fit preprocessing on an empty dataset".into()));
        }
        let n = raw.len() as f64;
        let mut transforms = Vec::with_capacity(raw.columns.len());
        let mut warnings = Vec::new();
        for (j, col) in raw.columns.iter().enumerate() {
            match &col.kind {
                ColumnKind::Numeric => {
                    let values = raw.features.column(j);
                    let mean = values.iter().sum::<f64>() / n;
                    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    let std = var.sqrt();
                    if std <= 1e-12 * mean.abs().max(1.0) {
                        log::warn!("dropping zero-variance column '{}'", col.name);
                        warnings.push(PreprocessWarning {
                            column: col.name.clone(),
                            message: "zero variance; column dropped".into(),
                        });
                        transforms.push(ColumnTransform::Dropped { name: col.name.clone() });
                    } else {
                        transforms.push(ColumnTransform::Standardize {
                            name: col.name.clone(),
                            mean,
                            std,
                        });
                    }
                }
                ColumnKind::Categorical { levels } => transforms.push(ColumnTransform::OneHot {
                    name: col.name.clone(),
                    levels: levels.clone(),
                }),
            }
        }
        Ok((Preprocessor { transforms }, warnings))
    }

    pub fn output_columns(&self) -> Vec<FeatureColumn> {
        let mut out = Vec::new();
        for t in &self.transforms {
            match t {
                ColumnTransform::Standardize { name, .. } => out.push(FeatureColumn::numeric(name.clone())),
                ColumnTransform::OneHot { name, levels } => {
                    out.extend(levels.iter().map(|l| FeatureColumn::numeric(format!("{name}={l}"))))
                }
                ColumnTransform::Dropped { .. } => {}
            }
        }
        out
    }

    /// Applies the frozen transform. Category levels unseen at fit time map
    /// to an all-zero indicator block.
    pub fn transform(&self, raw: &Dataset) -> Result<Dataset> {
        if raw.columns.len() != self.transforms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.transforms.len(),
                got: raw.columns.len(),
            });
        }
        for (col, t) in raw.columns.iter().zip(&self.transforms) {
            let (expected, ok) = match t {
                ColumnTransform::Standardize { name, .. } | ColumnTransform::Dropped { name } => {
                    (name, matches!(col.kind, ColumnKind::Numeric))
                }
                ColumnTransform::OneHot { name, .. } => (name, matches!(col.kind, ColumnKind::Categorical { .. })),
            };
            if &col.name != expected || !ok {
                return Err(Error::Schema(format!(
                    "column '{}' does not match fitted column '{expected}'",
                    col.name
                )));
            }
        }
        // Map each raw categorical code onto the fitted level index.
        let code_maps: Vec<Option<Vec<Option<usize>>>> = raw
            .columns
            .iter()
            .zip(&self.transforms)
            .map(|(col, t)| match (&col.kind, t) {
                (ColumnKind::Categorical { levels: raw_levels }, ColumnTransform::OneHot { levels, .. }) => {
                    Some(raw_levels.iter().map(|l| levels.iter().position(|f| f == l)).collect())
                }
                _ => None,
            })
            .collect();

        let columns = self.output_columns();
        let width = columns.len();
        let mut features = Matrix::zeros(raw.len(), width);
        for i in 0..raw.len() {
            let row = raw.features.row(i);
            let mut c = 0;
            for (j, t) in self.transforms.iter().enumerate() {
                match t {
                    ColumnTransform::Standardize { mean, std, .. } => {
                        features.set(i, c, (row[j] - mean) / std);
                        c += 1;
                    }
                    ColumnTransform::OneHot { levels, .. } => {
                        let map = code_maps[j].as_ref().unwrap();
                        if let Some(Some(level)) = map.get(row[j] as usize) {
                            features.set(i, c + level, 1.0);
                        }
                        c += levels.len();
                    }
                    ColumnTransform::Dropped { .. } => {}
                }
            }
        }
        let ds = Dataset {
            features,
            labels: raw.labels.clone(),
            groups: raw.groups.clone(),
            group_names: raw.group_names.clone(),
            task: raw.task,
            columns,
        };
        if ds.has_non_finite_features() {
            return Err(Error::InvalidData("non-finite feature after preprocessing".into()));
        }
        Ok(ds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("preprocessor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidData(format!("preprocessor file: {e}")))
    }
}

/// Fit on `raw` and transform it: indicator columns for categoricals and
/// standard scaling for numerics.
pub fn preprocess(raw: &Dataset) -> Result<(Dataset, Preprocessor, Vec<PreprocessWarning>)> {
    let (pre, warnings) = Preprocessor::fit(raw)?;
    let ds = pre.transform(raw)?;
    Ok((ds, pre, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{read_csv, ColumnSchema};
    use approx::assert_relative_eq;

    fn raw(csv: &str, schema: &str) -> Dataset {
        read_csv(csv.as_bytes(), &ColumnSchema::parse(schema).unwrap()).unwrap()
    }

    #[test]
    fn standardizes_with_population_std() {
        let ds = raw("x,g,y\n2,a,0\n4,a,1\n6,b,0\n", "x = numeric\ng = group\ny = label");
        let (out, _, warnings) = preprocess(&ds).unwrap();
        assert!(warnings.is_empty());
        let col = out.features.column(0);
        let s = (8.0f64 / 3.0).sqrt();
        assert_relative_eq!(col[0], -2.0 / s, epsilon = 1e-12);
        assert_relative_eq!(col[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(col[2], 1.224744871391589, epsilon = 1e-12);
    }

    #[test]
    fn categorical_expands_to_indicators() {
        let ds = raw("c,g,y\nred,a,0\nblue,a,1\ngreen,b,0\nred,b,1\n", "c = categorical\ng = group\ny = label");
        let (out, _, _) = preprocess(&ds).unwrap();
        assert_eq!(out.num_features(), 3);
        assert_eq!(out.features.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(out.features.row(2), &[0.0, 0.0, 1.0]);
        assert_eq!(out.columns[1].name, "c=blue");
    }

    #[test]
    fn constant_column_is_dropped_with_warning() {
        let ds = raw("k,x,g,y\n5,1,a,0\n5,2,a,1\n5,3,b,0\n", "k = numeric\nx = numeric\ng = group\ny = label");
        let (out, _, warnings) = preprocess(&ds).unwrap();
        assert_eq!(out.num_features(), 1);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].column, "k");
    }

    #[test]
    fn refit_on_scaled_data_is_identity_and_frozen_is_stable() {
        let ds = raw("x,z,g,y\n2,1,a,0\n4,9,a,1\n6,-3,b,0\n11,0.5,b,1\n", "x = numeric\nz = numeric\ng = group\ny = label");
        let (once, pre, _) = preprocess(&ds).unwrap();
        let (twice, _, _) = preprocess(&once).unwrap();
        for (a, b) in once.features.as_slice().iter().zip(twice.features.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(pre.transform(&ds).unwrap(), once);
        assert_eq!(pre.transform(&ds).unwrap(), pre.transform(&ds).unwrap());
    }

    #[test]
    fn frozen_statistics_apply_to_other_partition() {
        let train = raw("x,c,g,y\n0,u,a,0\n2,v,b,1\n", "x = numeric\nc = categorical\ng = group\ny = label");
        let test = raw("x,c,g,y\n4,w,a,0\n1,v,b,1\n", "x = numeric\nc = categorical\ng = group\ny = label");
        let (pre, _) = Preprocessor::fit(&train).unwrap();
        let out = pre.transform(&test).unwrap();
        assert_eq!(out.features.row(0), &[3.0, 0.0, 0.0]);
        assert_eq!(out.features.row(1), &[0.0, 0.0, 1.0]);
        let back = Preprocessor::from_json(&pre.to_json()).unwrap();
        assert_eq!(back, pre);
    }
}
