//! Procedural generator for RAVEN-style 3×3 matrix items.
//!
//! Items are sampled symbolically (rules per component, attribute values per
//! entry, seven single-attribute distractors), checked by a symbolic solver,
//! rendered to grayscale panels and stored in the RPMD binary format. The
//! [`balance`] module audits rule×attribute coverage and plans rebalanced
//! per-configuration counts.

pub mod balance;
pub mod config;
pub mod dataset;
pub mod error;
pub mod generate;
pub mod item;
pub mod raster;
pub mod rules;
pub mod solve;

pub use balance::{audit_balance, rebalance_plan, BalanceTable, Mix};
pub use config::Configuration;
pub use dataset::{read_dataset, write_dataset};
pub use error::{Result, RpmError};
pub use generate::{generate_split, sample_item, sample_symbolic, Split};
pub use item::{ComponentState, Entry, RpmItem, SymbolicItem};
pub use rules::{Attribute, Rule, RuleChoice, RuleMenu, RuleSpec};
pub use solve::solve_symbolic;
