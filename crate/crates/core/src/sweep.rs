use std::fmt::{self, Write as _};
use std::str::FromStr;

use autodiff::Float;
use rpm::RpmItem;

use crate::config::{Ablation, CpcNetConfig};
use crate::error::{CoreError, Result};
use crate::eval::{evaluate_single_choice, EvalReport};
use crate::model::CpcNet;
use crate::schedule::TrainConfig;
use crate::train::{train, Flow, TrainOutcome};

/// One model variant of a sweep: iteration count and ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub l: usize,
    pub ablation: Ablation,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.l, self.ablation)
    }
}

/// Parses `L` or `L:ABLATION`, e.g. `2` or `2:IC`.
impl FromStr for Variant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let (l, ablation) = match s.trim().split_once(':') {
            Some((l, a)) => (l, a.parse()?),
            None => (s.trim(), Ablation::Full),
        };
        let l = l.parse().map_err(|_| CoreError::Config(format!("bad variant {s:?}: expected L or L:ABLATION")))?;
        Ok(Self { l, ablation })
    }
}

/// Parses a comma-separated variant list.
pub fn parse_grid(s: &str) -> Result<Vec<Variant>> {
    let variants = s.split(',').filter(|v| !v.trim().is_empty()).map(str::parse).collect::<Result<Vec<_>>>()?;
    if variants.is_empty() {
        return Err(CoreError::Config("variant grid is empty".into()));
    }
    Ok(variants)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub variant: Variant,
    pub trainable: usize,
    pub outcome: TrainOutcome,
    pub report: EvalReport,
}

/// Trains and evaluates every variant on the same data with the same model
/// seed and training config. `base` supplies everything except `l` and the
/// ablation.
pub fn ablation_sweep<T: Float>(
    variants: &[Variant],
    base: &CpcNetConfig,
    model_seed: u64,
    train_set: &[RpmItem],
    val_set: &[RpmItem],
    test_set: &[RpmItem],
    cfg: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let config = CpcNetConfig { l: variant.l, ablation: variant.ablation, ..base.clone() };
        let mut model = CpcNet::<T>::new(config, model_seed)?;
        let outcome = train(&mut model, train_set, val_set, cfg, &mut |_, _, _| Ok(Flow::Continue))?;
        let report = evaluate_single_choice(&model, test_set)?;
        rows.push(SweepRow { variant, trainable: model.trainable_count(), outcome, report });
    }
    Ok(rows)
}

/// One line per variant: test accuracy, best validation accuracy, epochs run.
pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut s = format!("{:<10}{:>12}{:>10}{:>10}{:>8}\n", "variant", "params", "test", "best_val", "epochs");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10}{:>12}{:>10.2}{:>10.2}{:>8}",
            r.variant.to_string(),
            r.trainable,
            100.0 * r.report.overall(),
            100.0 * r.outcome.best_val_acc.unwrap_or(0.0),
            r.outcome.log.len()
        );
    }
    s
}
