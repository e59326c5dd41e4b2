//! Min-max group-fair gradient boosting.
//!
//! The training loop alternates a projected ascent step on per-group
//! multipliers with a least-squares tree fit to the negative Lagrangian
//! gradient. Group losses come in three flavours (equalized loss, true
//! positive loss, positive-rate loss) so the same booster can target
//! worst-group accuracy, true positive rate, or positive prediction rate.
//!
//! ```
//! use m2fgb_core::booster::{train, BoosterConfig};
//! use m2fgb_core::data::{generate_synthetic, SyntheticGroup};
//! use m2fgb_core::losses::GroupLossKind;
//!
//! let groups = vec![
//!     SyntheticGroup::new("major", 0.8, 0.5, 0.0),
//!     SyntheticGroup::new("minor", 0.2, 0.4, -0.8),
//! ];
//! let ds = generate_synthetic(400, &groups, 3, 0.5, 7).unwrap();
//! let mut config = BoosterConfig::for_task(ds.task);
//! config.lambda = 0.5;
//! config.rounds = 10;
//! config.group_kind = GroupLossKind::TruePositive;
//! let (model, trace) = train(&ds, &config).unwrap();
//! assert_eq!(trace.rounds.len(), 10);
//! assert_eq!(model.trees.len(), 10);
//! ```

pub mod booster;
pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod model_file;
pub mod simplex;
pub mod tree;

pub use error::{Error, Result};
