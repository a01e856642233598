use autodiff::{Adam, AdamConfig, Float, Graph, TensorError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpm::RpmItem;

use crate::data::{batch, check_resolution};
use crate::error::{CoreError, Result};
use crate::eval::evaluate_single_choice;
use crate::model::{loss, Bindings, CpcNet, Mode};
use crate::schedule::{lr_schedule, TrainConfig};

/// One row of the metric log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub step: u64,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub train_loss: f64,
    pub val_acc: f64,
}

pub const CSV_HEADER: &str = "epoch,step,lr,train_loss,val_acc";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!("{},{},{:e},{:.17e},{:.6}", self.epoch, self.step, self.lr, self.train_loss, self.val_acc)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_val_acc: Option<f64>,
    pub steps: u64,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for row in &self.log {
            s.push_str(&row.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Returned by an [`EpochHook`] to continue or end training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Per-epoch notification: the log row, the current model, and whether
/// this epoch set a new best validation accuracy.
pub type EpochHook<'a, T> = dyn FnMut(&EpochLog, &CpcNet<T>, bool) -> Result<Flow> + 'a;

fn shuffle_seed(seed: u64, epoch: usize) -> u64 {
    autodiff::init::splitmix64(seed ^ autodiff::init::splitmix64(epoch as u64 + 1))
}

/// Trains on the 8 binary samples of every training item with Adam and the
/// warmup/decay schedule, validating after each epoch. On return the model
/// holds the best-validation parameters (the initial ones if no epoch ran).
pub fn train<T: Float>(
    model: &mut CpcNet<T>,
    train_set: &[RpmItem],
    val_set: &[RpmItem],
    cfg: &TrainConfig,
    hook: &mut EpochHook<'_, T>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(CoreError::Dataset("training and validation sets must be non-empty".into()));
    }
    check_resolution(train_set, model.config.resolution)?;
    check_resolution(val_set, model.config.resolution)?;

    let mut adam = Adam::new(&model.params, AdamConfig::default());
    let mut samples: Vec<(usize, usize)> = (0..train_set.len()).flat_map(|i| (0..8).map(move |c| (i, c))).collect();
    let mut outcome =
        TrainOutcome { log: Vec::new(), best_epoch: None, best_val_acc: None, steps: 0, stopped_early: false };
    let mut best_params = model.params.clone();
    let mut step = 0u64;

    for epoch in 1..=cfg.epochs {
        samples.sort_unstable();
        samples.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed(cfg.seed, epoch)));
        let mut loss_sum = 0.0;
        let mut lr = lr_schedule(step, cfg);
        for picks in samples.chunks(cfg.batch_size) {
            lr = lr_schedule(step, cfg);
            let (x, labels) = batch::<T>(train_set, picks)?;
            let numeric = |e: CoreError, model: &CpcNet<T>| match e {
                CoreError::Tensor(TensorError::NonFinite { op, index }) => CoreError::NonFinite {
                    step,
                    lr,
                    grad_norm: model.params.grad_norm(),
                    detail: format!("{op} produced a non-finite value at index {index}"),
                },
                other => other,
            };
            let mut g = Graph::new();
            let step_result = (|| -> Result<(f64, Vec<_>)> {
                let xv = g.constant(&x)?;
                let bind = Bindings::from_params(&mut g, &model.params)?;
                let fwd = model.forward(&mut g, xv, &bind, Mode::Train)?;
                let l = loss(&mut g, &fwd, &labels)?;
                let value = g.scalar(l)?.as_f64();
                model.params.zero_grad();
                g.backward(l, &mut model.params)?;
                Ok((value, fwd.bn_stats))
            })();
            let (value, stats) = step_result.map_err(|e| numeric(e, model))?;
            let grad_norm = model.params.grad_norm();
            if !value.is_finite() || !grad_norm.is_finite() {
                return Err(CoreError::NonFinite { step, lr, grad_norm, detail: format!("loss {value}") });
            }
            adam.step(&mut model.params, lr)?;
            model.update_running_stats(&stats)?;
            loss_sum += value * picks.len() as f64;
            step += 1;
        }
        model.params.zero_grad();

        let val_acc = evaluate_single_choice(&*model, val_set)?.overall();
        let row = EpochLog { epoch, step, lr, train_loss: loss_sum / samples.len() as f64, val_acc };
        let improved = outcome.best_val_acc.is_none_or(|b| val_acc > b);
        if improved {
            outcome.best_val_acc = Some(val_acc);
            outcome.best_epoch = Some(epoch);
            best_params = model.params.clone();
        }
        let flow = hook(&row, model, improved)?;
        outcome.log.push(row);
        if flow == Flow::Stop {
            outcome.stopped_early = epoch < cfg.epochs;
            break;
        }
        if cfg.patience > 0 && epoch - outcome.best_epoch.unwrap_or(0) >= cfg.patience {
            outcome.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    outcome.steps = step;
    model.params = best_params;
    Ok(outcome)
}
