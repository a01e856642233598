//! CPCNet for RAVEN-style matrices, with the single-choice training and
//! evaluation harness.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod schedule;
pub mod sweep;
pub mod train;

pub use config::{Ablation, CpcNetConfig, Precision};
pub use error::{CoreError, Result};
pub use eval::{evaluate_single_choice, EvalReport, RandomScorer, Scorer};
pub use model::{loss, score, Bindings, CpcNet, Forward, Mode};
pub use schedule::{lr_schedule, TrainConfig};
pub use sweep::{ablation_sweep, Variant};
pub use train::{train, TrainOutcome};
