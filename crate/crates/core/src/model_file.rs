//! Text model format.
//!
//! ```text
//! m2fgb-model 1
//! task binary
//! pointwise logistic
//! group_kind true_positive
//! lambda 0.5
//! learning_rate 0.1
//! dual_learning_rate 0.5
//! rounds 2
//! max_depth 3
//! min_samples_leaf 20
//! l2_leaf_reg 0.0
//! seed 0
//! fresh_multipliers true
//! num_groups 4
//! num_features 3
//! base_score 0.8472978603872037
//! trees 2
//! tree 0 3
//! split 0 0.25
//! leaf -0.5
//! leaf 0.75
//! tree 1 1
//! leaf 0.1
//! end
//! ```
//!
//! Tree nodes are listed in preorder: `split <feature> <threshold>` is
//! followed by its left subtree, then its right subtree. Floats are written
//! in shortest round-trip form, so save then load reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::booster::{BoosterConfig, Model};
use crate::data::TaskKind;
use crate::error::{Error, Result};
use crate::tree::{Node, RegressionTree, TreeParams};

const MAGIC: &str = "m2fgb-model";
const VERSION: u32 = 1;

pub fn to_text(model: &Model) -> String {
    let c = &model.config;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "task {}", model.task.name());
    let _ = writeln!(s, "pointwise {}", c.pointwise.name());
    let _ = writeln!(s, "group_kind {}", c.group_kind.name());
    let _ = writeln!(s, "lambda {:?}", c.lambda);
    let _ = writeln!(s, "learning_rate {:?}", model.learning_rate);
    let _ = writeln!(s, "dual_learning_rate {:?}", c.dual_learning_rate);
    let _ = writeln!(s, "rounds {}", c.rounds);
    let _ = writeln!(s, "max_depth {}", c.tree.max_depth);
    let _ = writeln!(s, "min_samples_leaf {}", c.tree.min_samples_leaf);
    let _ = writeln!(s, "l2_leaf_reg {:?}", c.tree.l2_leaf_reg);
    let _ = writeln!(s, "seed {}", c.seed);
    let _ = writeln!(s, "fresh_multipliers {}", c.fresh_multipliers);
    let _ = writeln!(s, "num_groups {}", model.num_groups);
    let _ = writeln!(s, "num_features {}", model.num_features);
    let _ = writeln!(s, "base_score {:?}", model.base_score);
    let _ = writeln!(s, "trees {}", model.trees.len());
    for (t, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(s, "tree {t} {}", tree.nodes.len());
        for node in &tree.nodes {
            match node {
                Node::Split { feature, threshold, .. } => {
                    let _ = writeln!(s, "split {feature} {threshold:?}");
                }
                Node::Leaf { value } => {
                    let _ = writeln!(s, "leaf {value:?}");
                }
            }
        }
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::ModelFormat {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_fields(&mut self) -> Result<Vec<&'a str>> {
        loop {
            let (i, l) = self.inner.next().ok_or_else(|| Error::ModelFormat {
                line: self.line + 1,
                message: "unexpected end of file".into(),
            })?;
            self.line = i + 1;
            let fields: Vec<&str> = l.split_whitespace().collect();
            if !fields.is_empty() {
                return Ok(fields);
            }
        }
    }

    fn value(&mut self, key: &str) -> Result<&'a str> {
        let f = self.next_fields()?;
        if f.len() != 2 || f[0] != key {
            return Err(self.err(format!("expected '{key} <value>'")));
        }
        Ok(f[1])
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.value(key)?;
        v.parse().map_err(|_| self.err(format!("cannot parse {key} value '{v}'")))
    }
}

pub fn from_text(text: &str) -> Result<Model> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let head = lines.next_fields()?;
    if head.len() != 2 || head[0] != MAGIC {
        return Err(lines.err("not an m2fgb model file"));
    }
    if head[1] != VERSION.to_string() {
        return Err(lines.err(format!("unsupported model version {}", head[1])));
    }
    let task: TaskKind = lines.value("task")?.parse().map_err(|e: Error| lines.err(e.to_string()))?;
    let pointwise = lines.value("pointwise")?.parse().map_err(|e: Error| lines.err(e.to_string()))?;
    let group_kind = lines.value("group_kind")?.parse().map_err(|e: Error| lines.err(e.to_string()))?;
    let lambda = lines.parse("lambda")?;
    let learning_rate = lines.parse("learning_rate")?;
    let dual_learning_rate = lines.parse("dual_learning_rate")?;
    let rounds = lines.parse("rounds")?;
    let max_depth = lines.parse("max_depth")?;
    let min_samples_leaf = lines.parse("min_samples_leaf")?;
    let l2_leaf_reg = lines.parse("l2_leaf_reg")?;
    let seed = lines.parse("seed")?;
    let fresh_multipliers = lines.parse("fresh_multipliers")?;
    let num_groups = lines.parse("num_groups")?;
    let num_features: usize = lines.parse("num_features")?;
    let base_score = lines.parse("base_score")?;
    let count: usize = lines.parse("trees")?;

    let mut trees = Vec::with_capacity(count);
    for t in 0..count {
        let f = lines.next_fields()?;
        if f.len() != 3 || f[0] != "tree" || f[1] != t.to_string() {
            return Err(lines.err(format!("expected 'tree {t} <node count>'")));
        }
        let size: usize = f[2].parse().map_err(|_| lines.err("bad node count"))?;
        let mut raw = Vec::with_capacity(size);
        for _ in 0..size {
            let f = lines.next_fields()?;
            match f.as_slice() {
                ["split", feat, thr] => {
                    let feature = feat.parse().map_err(|_| lines.err("bad split feature"))?;
                    let threshold = thr.parse().map_err(|_| lines.err("bad split threshold"))?;
                    raw.push(Node::Split {
                        feature,
                        threshold,
                        left: 0,
                        right: 0,
                    });
                }
                ["leaf", v] => raw.push(Node::Leaf {
                    value: v.parse().map_err(|_| lines.err("bad leaf value"))?,
                }),
                _ => return Err(lines.err("expected 'split' or 'leaf'")),
            }
        }
        let nodes = link_preorder(raw).map_err(|m| lines.err(format!("tree {t}: {m}")))?;
        let tree = RegressionTree { nodes, num_features };
        tree.validate().map_err(|e| lines.err(format!("tree {t}: {e}")))?;
        trees.push(tree);
    }
    let f = lines.next_fields()?;
    if f != ["end"] {
        return Err(lines.err("expected 'end'"));
    }

    let config = BoosterConfig {
        lambda,
        rounds,
        learning_rate,
        dual_learning_rate,
        pointwise,
        group_kind,
        tree: TreeParams {
            max_depth,
            min_samples_leaf,
            l2_leaf_reg,
        },
        seed,
        fresh_multipliers,
    };
    Ok(Model {
        base_score,
        trees,
        learning_rate,
        task,
        config,
        num_groups,
        num_features,
    })
}

/// Recovers child indices from a preorder node sequence.
fn link_preorder(mut nodes: Vec<Node>) -> std::result::Result<Vec<Node>, String> {
    fn go(nodes: &mut [Node], i: usize) -> std::result::Result<usize, String> {
        if i >= nodes.len() {
            return Err("truncated preorder".into());
        }
        match nodes[i] {
            Node::Leaf { .. } => Ok(i + 1),
            Node::Split { feature, threshold, .. } => {
                let left = i + 1;
                let right = go(nodes, left)?;
                let end = go(nodes, right)?;
                nodes[i] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                Ok(end)
            }
        }
    }
    if nodes.is_empty() {
        return Err("empty tree".into());
    }
    let end = go(&mut nodes, 0)?;
    if end != nodes.len() {
        return Err("trailing nodes after the root subtree".into());
    }
    Ok(nodes)
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
