use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{ColumnKind, ColumnRole, ColumnSchema, Dataset, FeatureColumn, TaskKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Separator for subgroup names built from several group columns.
pub const GROUP_NAME_SEPARATOR: &str = "|";

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

enum Slot {
    Numeric(usize),
    Categorical(usize),
    Label,
    Group(usize),
    Skip,
}

/// Parses CSV text with a header row. Groups are numbered by first
/// appearance of their value combination.
pub fn read_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::InvalidData("empty file: no header row".into()));
    }
    for (name, _) in &schema.columns {
        if !headers.contains(name) {
            return Err(Error::Cell {
                row: 1,
                column: name.clone(),
                message: "column missing from header".into(),
            });
        }
    }

    let group_order = schema.group_columns();
    let mut columns = Vec::new();
    let mut slots = Vec::with_capacity(headers.len());
    for h in &headers {
        let role = schema.role_of(h).ok_or_else(|| Error::Cell {
            row: 1,
            column: h.clone(),
            message: "column not declared in schema".into(),
        })?;
        slots.push(match role {
            ColumnRole::Numeric => {
                columns.push(FeatureColumn::numeric(h.clone()));
                Slot::Numeric(columns.len() - 1)
            }
            ColumnRole::Categorical => {
                columns.push(FeatureColumn {
                    name: h.clone(),
                    kind: ColumnKind::Categorical { levels: Vec::new() },
                });
                Slot::Categorical(columns.len() - 1)
            }
            ColumnRole::Label => Slot::Label,
            ColumnRole::Group => Slot::Group(group_order.iter().position(|g| g == h).unwrap()),
            ColumnRole::Ignore => Slot::Skip,
        });
    }

    let d = columns.len();
    let mut level_index: Vec<HashMap<String, usize>> = vec![HashMap::new(); d];
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut group_names: Vec<String> = Vec::new();
    let mut group_lookup: HashMap<Vec<String>, usize> = HashMap::new();

    for (r, record) in rdr.records().enumerate() {
        let row = r + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Cell {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut feature_row = vec![0.0; d];
        let mut key = vec![String::new(); group_order.len()];
        let mut label = None;
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let cell_err = |message: String| Error::Cell {
                row,
                column: headers[c].clone(),
                message,
            };
            if matches!(slots[c], Slot::Skip) {
                continue;
            }
            if cell.is_empty() {
                return Err(cell_err("missing value".into()));
            }
            match slots[c] {
                Slot::Numeric(j) => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| cell_err(format!("cannot parse '{cell}' as a number")))?;
                    if !v.is_finite() {
                        return Err(cell_err(format!("non-finite value '{cell}'")));
                    }
                    feature_row[j] = v;
                }
                Slot::Categorical(j) => {
                    let next = level_index[j].len();
                    let code = *level_index[j].entry(cell.to_string()).or_insert(next);
                    if code == next {
                        if let ColumnKind::Categorical { levels } = &mut columns[j].kind {
                            levels.push(cell.to_string());
                        }
                    }
                    feature_row[j] = code as f64;
                }
                Slot::Label => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| cell_err(format!("cannot parse label '{cell}'")))?;
                    if schema.task == TaskKind::BinaryClassification && v != 0.0 && v != 1.0 {
                        return Err(cell_err(format!("label '{cell}' is not 0 or 1")));
                    }
                    if !v.is_finite() {
                        return Err(cell_err(format!("non-finite label '{cell}'")));
                    }
                    label = Some(v);
                }
                Slot::Group(k) => key[k] = cell.to_string(),
                Slot::Skip => unreachable!(),
            }
        }
        let next = group_names.len();
        let g = *group_lookup.entry(key.clone()).or_insert(next);
        if g == next {
            group_names.push(key.join(GROUP_NAME_SEPARATOR));
        }
        data.extend_from_slice(&feature_row);
        labels.push(label.expect("label slot present"));
        groups.push(g);
    }
    if labels.is_empty() {
        return Err(Error::InvalidData("empty file: no data rows".into()));
    }
    let features = Matrix::from_vec(labels.len(), d, data)?;
    Dataset::new(features, labels, groups, group_names, schema.task, Some(columns))
}

/// Writes a dataset with numeric features as CSV with columns
/// `<feature names>, label, group`, plus the matching schema.
pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> Result<ColumnSchema> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ds.columns.iter().map(|c| c.name.clone()).collect();
    header.push("label".into());
    header.push("group".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds
            .features
            .row(i)
            .iter()
            .zip(&ds.columns)
            .map(|(v, col)| match &col.kind {
                ColumnKind::Numeric => format!("{v:?}"),
                ColumnKind::Categorical { levels } => levels[*v as usize].clone(),
            })
            .collect();
        rec.push(format!("{}", ds.labels[i]));
        rec.push(ds.group_names[ds.groups[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    let mut columns: Vec<(String, ColumnRole)> = ds
        .columns
        .iter()
        .map(|c| {
            let role = match c.kind {
                ColumnKind::Numeric => ColumnRole::Numeric,
                ColumnKind::Categorical { .. } => ColumnRole::Categorical,
            };
            (c.name.clone(), role)
        })
        .collect();
    columns.push(("label".into(), ColumnRole::Label));
    columns.push(("group".into(), ColumnRole::Group));
    ColumnSchema::new(columns, ds.task)
}
