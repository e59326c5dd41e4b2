//! `key = value` run configuration with flag overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use m2fgb_core::booster::BoosterConfig;
use m2fgb_core::data::TaskKind;

use crate::failure::{fail, AtStage, CliResult, Stage};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("data", "input CSV"),
    ("schema", "column schema file"),
    ("valid_data", "validation CSV (default: split from data)"),
    ("test_data", "test CSV (default: split from data)"),
    ("split", "train,validation,test fractions"),
    ("split_seed", "seed of the stratified split"),
    ("out", "output directory"),
    ("seed", "master seed"),
    ("lambda", "fairness weight in [0, 1]"),
    ("rounds", "boosting rounds"),
    ("learning_rate", "tree step size"),
    ("dual_learning_rate", "multiplier step size"),
    ("pointwise", "logistic | squared"),
    ("group_loss", "equalized | true_positive | positive_rate"),
    ("max_depth", "tree depth"),
    ("min_samples_leaf", "minimum rows per leaf"),
    ("l2_leaf_reg", "leaf shrinkage"),
    ("fresh_multipliers", "use the updated multipliers for the gradient"),
    ("model", "model file"),
    ("preprocessor", "frozen preprocessing file"),
    ("fairness_metric", "accuracy | true_positive_rate | positive_rate | mse"),
    ("threshold", "probability threshold for labels"),
    ("alphas", "comma-separated alpha grid"),
    ("lambdas", "comma-separated lambda grid"),
    ("pool_size", "models in the random-search pool"),
    ("trials", "selection trials over the pool"),
    ("trial_sample", "pool entries drawn per trial"),
    ("search_lambda", "lambda range lo,hi"),
    ("search_learning_rate", "learning rate range lo,hi"),
    ("search_dual_learning_rate", "multiplier step range lo,hi"),
    ("search_rounds", "rounds range lo,hi"),
    ("search_max_depth", "depth range lo,hi"),
    ("synth_rows", "synthetic rows"),
    ("synth_features", "synthetic features"),
    ("synth_noise", "synthetic noise level"),
    ("synth_groups", "name:fraction:positive_rate:shift;..."),
    ("vector", "comma-separated vector to project"),
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Relative paths resolve against this directory.
    base_dir: PathBuf,
}

fn check_key(key: &str) -> CliResult<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        fail(Stage::Config, format!("unknown config key '{key}'"))
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: PathBuf) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return fail(Stage::Config, format!("line {}: expected 'key = value'", lineno + 1));
            };
            let key = key.trim();
            check_key(key).map_err(|mut f| {
                f.message = format!("line {}: {}", lineno + 1, f.message);
                f
            })?;
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return fail(Stage::Config, format!("line {}: key '{key}' set twice", lineno + 1));
            }
        }
        Ok(RunConfig { values, base_dir })
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(RunConfig {
                values: BTreeMap::new(),
                base_dir: PathBuf::from("."),
            }),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read config {}: {e}", path.display()))
                    .at(Stage::Config)?;
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                Self::parse(&text, if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir })
            }
        }
    }

    /// Flag values win over file values. Override paths are relative to the
    /// working directory, not the config file.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        check_key(key)?;
        let value = if self.is_path_key(key) && Path::new(value).is_relative() {
            std::env::current_dir()
                .at(Stage::Config)?
                .join(value)
                .to_string_lossy()
                .into_owned()
        } else {
            value.to_string()
        };
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    fn is_path_key(&self, key: &str) -> bool {
        matches!(
            key,
            "data" | "schema" | "valid_data" | "test_data" | "out" | "model" | "preprocessor"
        )
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| format!("invalid value '{v}' for {key}: {e}"))
                .at(Stage::Config),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        match self.raw(key) {
            Some(v) => Ok(v),
            None => fail(Stage::Config, format!("missing required key '{key}'")),
        }
    }

    pub fn path(&self, key: &str) -> CliResult<Option<PathBuf>> {
        Ok(self.raw(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                self.base_dir.join(p)
            } else {
                p
            }
        }))
    }

    pub fn require_path(&self, key: &str) -> CliResult<PathBuf> {
        self.require(key)?;
        Ok(self.path(key)?.expect("present"))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.raw(key) else { return Ok(None) };
        raw.split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|e| format!("invalid entry '{}' in {key}: {e}", part.trim()))
                    .at(Stage::Config)
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }

    pub fn pair<T: FromStr + Copy>(&self, key: &str, default: (T, T)) -> CliResult<(T, T)>
    where
        T::Err: std::fmt::Display,
    {
        match self.list::<T>(key)? {
            None => Ok(default),
            Some(v) if v.len() == 2 => Ok((v[0], v[1])),
            Some(_) => fail(Stage::Config, format!("{key} needs exactly two values 'lo,hi'")),
        }
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.get_or("seed", 0)
    }

    /// Booster settings for `task`, validated.
    pub fn booster(&self, task: TaskKind) -> CliResult<BoosterConfig> {
        let d = BoosterConfig::for_task(task);
        let c = BoosterConfig {
            lambda: self.get_or("lambda", d.lambda)?,
            rounds: self.get_or("rounds", d.rounds)?,
            learning_rate: self.get_or("learning_rate", d.learning_rate)?,
            dual_learning_rate: self.get_or("dual_learning_rate", d.dual_learning_rate)?,
            pointwise: self.get_or("pointwise", d.pointwise)?,
            group_kind: self.get_or("group_loss", d.group_kind)?,
            tree: m2fgb_core::tree::TreeParams {
                max_depth: self.get_or("max_depth", d.tree.max_depth)?,
                min_samples_leaf: self.get_or("min_samples_leaf", d.tree.min_samples_leaf)?,
                l2_leaf_reg: self.get_or("l2_leaf_reg", d.tree.l2_leaf_reg)?,
            },
            seed: self.seed()?,
            fresh_multipliers: self.get_or("fresh_multipliers", d.fresh_multipliers)?,
        };
        c.validate_for(task).at(Stage::Config)?;
        Ok(c)
    }
}
