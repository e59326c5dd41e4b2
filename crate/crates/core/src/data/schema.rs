use std::path::Path;
use std::str::FromStr;

use crate::data::TaskKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Numeric,
    Categorical,
    Label,
    /// Sensitive attribute; the combination of all group columns defines
    /// the subgroup of a row. Group columns are not used as features.
    Group,
    Ignore,
}

impl FromStr for ColumnRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Ok(ColumnRole::Numeric),
            "categorical" => Ok(ColumnRole::Categorical),
            "label" => Ok(ColumnRole::Label),
            "group" => Ok(ColumnRole::Group),
            "ignore" => Ok(ColumnRole::Ignore),
            other => Err(Error::Schema(format!("unknown column role '{other}'"))),
        }
    }
}

/// Column roles for a CSV file.
///
/// Text format, one entry per line:
///
/// ```text
/// # comment
/// @task = binary        # or regression; defaults to binary
/// age = numeric
/// purpose = categorical
/// sex = group
/// age_over_30 = group
/// credit_risk = label
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSchema {
    pub columns: Vec<(String, ColumnRole)>,
    pub task: TaskKind,
}

impl ColumnSchema {
    pub fn new(columns: Vec<(String, ColumnRole)>, task: TaskKind) -> Result<Self> {
        let schema = ColumnSchema { columns, task };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.columns.iter().filter(|(_, r)| *r == ColumnRole::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!("expected exactly one label column, found {labels}")));
        }
        if self.group_columns().is_empty() {
            return Err(Error::Schema("at least one group column is required".into()));
        }
        for (i, (name, _)) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::Schema(format!("column '{name}' listed twice")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        let mut task = TaskKind::BinaryClassification;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("line {}: expected 'column = role'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(Error::Schema(format!("line {}: empty column name", lineno + 1)));
            }
            if key == "@task" {
                task = value
                    .parse()
                    .map_err(|e: Error| Error::Schema(format!("line {}: {e}", lineno + 1)))?;
                continue;
            }
            let role = value
                .parse()
                .map_err(|e: Error| Error::Schema(format!("line {}: {e}", lineno + 1)))?;
            columns.push((key.to_string(), role));
        }
        ColumnSchema::new(columns, task)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("@task = {}\n", self.task.name());
        for (name, role) in &self.columns {
            let role = match role {
                ColumnRole::Numeric => "numeric",
                ColumnRole::Categorical => "categorical",
                ColumnRole::Label => "label",
                ColumnRole::Group => "group",
                ColumnRole::Ignore => "ignore",
            };
            out.push_str(&format!("{name} = {role}\n"));
        }
        out
    }

    pub fn label_column(&self) -> &str {
        self.columns
            .iter()
            .find(|(_, r)| *r == ColumnRole::Label)
            .map(|(n, _)| n.as_str())
            .expect("validated schema has a label")
    }

    pub fn group_columns(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|(_, r)| *r == ColumnRole::Group)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn role_of(&self, column: &str) -> Option<ColumnRole> {
        self.columns.iter().find(|(n, _)| n == column).map(|(_, r)| *r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_roles_and_task() {
        let s = ColumnSchema::parse("# demo\n@task = regression\nx = numeric\nc = categorical # note\ng = group\ny = label\n").unwrap();
        assert_eq!(s.task, TaskKind::Regression);
        assert_eq!(s.label_column(), "y");
        assert_eq!(s.group_columns(), vec!["g"]);
        assert_eq!(ColumnSchema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_schemas() {
        assert!(ColumnSchema::parse("x = numeric\ng = group\n").is_err());
        assert!(ColumnSchema::parse("y = label\ny2 = label\ng = group\n").is_err());
        assert!(ColumnSchema::parse("y = label\nx = numeric\n").is_err());
        assert!(ColumnSchema::parse("y = label\ng = group\nx = weird\n").is_err());
        assert!(ColumnSchema::parse("y label\n").is_err());
        assert!(ColumnSchema::parse("y = label\ng = group\ng = numeric\n").is_err());
    }
}
