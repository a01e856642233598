use std::path::{Path, PathBuf};

use autodiff::{checkpoint, Float};
use cpcnet::eval::{binary_accuracy, SymbolicOracle, TargetStub};
use cpcnet::sweep::{parse_grid, render_sweep};
use cpcnet::train::{EpochLog, Flow};
use cpcnet::{
    ablation_sweep, evaluate_single_choice, train as fit, Ablation, CpcNet, CpcNetConfig, Precision, TrainConfig,
};
use rpm::{audit_balance, dataset, generate_split, Mix, RpmItem, RuleMenu, Split};

use crate::failure::Failure;
use crate::manifest::{write_atomic, RunManifest};
use crate::settings::Settings;
use crate::{AblateArgs, AuditArgs, EvalArgs, GenerateArgs, ModelArgs, TrainArgs};

pub const TRAIN_FILE: &str = "train.rpmd";
pub const VAL_FILE: &str = "val.rpmd";
pub const TEST_FILE: &str = "test.rpmd";
pub const MODEL_FILE: &str = "model.cpcw";
pub const CONFIG_FILE: &str = "model.cfg";
pub const LOG_FILE: &str = "train_log.csv";
pub const SWEEP_FILE: &str = "sweep.txt";

fn create_out(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::data(format!("cannot create {}: {e}", out.display())))
}

/// Reads an RPMD file; a zero-length file counts as an empty dataset.
fn load(path: &Path) -> Result<Vec<RpmItem>, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    dataset::from_bytes(&bytes).map_err(|e| Failure::from(e).context(path.display()))
}

fn load_nonempty(path: &Path) -> Result<Vec<RpmItem>, Failure> {
    let items = load(path)?;
    if items.is_empty() {
        return Err(Failure::data(format!("{} holds no items", path.display())));
    }
    Ok(items)
}

pub fn generate(a: GenerateArgs, s: &mut Settings) -> Result<(), Failure> {
    let mix: Mix = s.get("mix", a.mix, "ab-raven".to_string())?.parse()?;
    let counts = [
        (Split::Train, TRAIN_FILE, s.get("train", a.train, 0)?),
        (Split::Val, VAL_FILE, s.get("val", a.val, 0)?),
        (Split::Test, TEST_FILE, s.get("test", a.test, 0)?),
    ];
    let resolution = s.get("resolution", a.resolution, 80)?;
    let seed = s.get("seed", a.seed, 0)?;
    let out: PathBuf = s.require("out", a.out.map(|p| p.display().to_string()))?.into();
    s.finish()?;
    if resolution < rpm::raster::MIN_RESOLUTION {
        return Err(Failure::usage(format!("--resolution must be at least {}", rpm::raster::MIN_RESOLUTION)));
    }

    create_out(&out)?;
    let mut manifest = RunManifest::new("generate", &out);
    let menu = RuleMenu::full();
    for (split, file, n) in counts {
        let plan = if split == Split::Train { mix.train_plan(n)? } else { mix.eval_plan(n)? };
        let items = generate_split(&plan, &menu, resolution, seed, split)?;
        write_atomic(&out.join(file), &dataset::to_bytes(&items)?)?;
        manifest.output(file);
        if split == Split::Train {
            println!("mix {} / train split ({} items)\n", mix.name(), items.len());
            print!("{}", audit_balance(&items)?.report());
        }
    }
    manifest.write(s.resolved(), &[("data", seed)])
}

pub fn audit(a: AuditArgs, s: &mut Settings) -> Result<(), Failure> {
    let path: PathBuf = s.require("data", a.data.map(|p| p.display().to_string()))?.into();
    s.finish()?;
    let items = load(&path)?;
    print!("{}", audit_balance(&items)?.report());
    Ok(())
}

/// Model config and training config from the shared flags; `decay_steps`
/// defaults to the rest of the run after warmup.
fn resolve_model(
    m: ModelArgs,
    s: &mut Settings,
    resolution: usize,
    train_items: usize,
) -> Result<(CpcNetConfig, TrainConfig), Failure> {
    let defaults = CpcNetConfig::default();
    let td = TrainConfig::default();
    let k = s.get("k", m.k, defaults.k)?;
    let head_width = s.get("head-width", m.head_width, defaults.head_width)?;
    let precision: Precision = s.get("precision", m.precision, "f32".to_string())?.parse()?;
    let epochs = s.get("epochs", m.epochs, td.epochs)?;
    let seed = s.get("seed", m.seed, td.seed)?;
    let batch_size = s.get("batch-size", m.batch_size, td.batch_size)?;
    let base_lr = s.get("base-lr", m.base_lr, td.base_lr)?;
    let peak_lr = s.get("peak-lr", m.peak_lr, td.peak_lr)?;
    let warmup_steps = s.get("warmup-steps", m.warmup_steps, td.warmup_steps)?;
    let total = (epochs as u64) * ((8 * train_items).div_ceil(batch_size.max(1)) as u64);
    let decay_steps = s.get("decay-steps", m.decay_steps, total.saturating_sub(warmup_steps).max(1))?;
    let patience = s.get("patience", m.patience, td.patience)?;
    let model = CpcNetConfig { k, head_width, precision, resolution, ..defaults };
    let tc = TrainConfig {
        batch_size,
        base_lr,
        peak_lr,
        warmup_steps,
        decay_steps,
        epochs,
        seed,
        patience,
        precision,
        ..td
    };
    tc.validate()?;
    Ok((model, tc))
}

fn print_epoch(row: &EpochLog) {
    println!(
        "epoch {:>4}  step {:>7}  lr {:.5}  loss {:.5}  val {:.2}%",
        row.epoch,
        row.step,
        row.lr,
        row.train_loss,
        100.0 * row.val_acc
    );
}

pub fn train(a: TrainArgs, s: &mut Settings) -> Result<(), Failure> {
    let data: PathBuf = s.require("data", a.data.map(|p| p.display().to_string()))?.into();
    let l = s.get("l", a.l, CpcNetConfig::default().l)?;
    let ablation: Ablation = s.get("ablation", a.ablation, "full".to_string())?.parse()?;
    let checkpoint_every = s.get("checkpoint-every", a.checkpoint_every, 0)?;
    let out: PathBuf = s.require("out", a.out.map(|p| p.display().to_string()))?.into();
    let (train_path, val_path) = (data.join(TRAIN_FILE), data.join(VAL_FILE));
    let train_items = load_nonempty(&train_path)?;
    let val_items = load_nonempty(&val_path)?;
    let resolution = usize::from(train_items[0].resolution);
    let (base, mut tc) = resolve_model(a.model, s, resolution, train_items.len())?;
    tc.checkpoint_every = checkpoint_every;
    s.finish()?;
    let config = CpcNetConfig { l, ablation, ..base };
    config.validate()?;

    create_out(&out)?;
    let mut manifest = RunManifest::new("train", &out);
    manifest.input(&train_path);
    manifest.input(&val_path);
    let snapshots = match config.precision {
        Precision::F32 => train_typed::<f32>(&config, &tc, &train_items, &val_items, &out)?,
        Precision::F64 => train_typed::<f64>(&config, &tc, &train_items, &val_items, &out)?,
    };
    write_atomic(&out.join(CONFIG_FILE), config.to_kv().as_bytes())?;
    for f in [MODEL_FILE, CONFIG_FILE, LOG_FILE] {
        manifest.output(f);
    }
    for f in snapshots {
        manifest.output(f);
    }
    manifest.write(s.resolved(), &[("model", tc.seed), ("shuffle", tc.seed)])
}

fn train_typed<T: Float>(
    config: &CpcNetConfig,
    tc: &TrainConfig,
    train_items: &[RpmItem],
    val_items: &[RpmItem],
    out: &Path,
) -> Result<Vec<String>, Failure> {
    let mut model = CpcNet::<T>::new(config.clone(), tc.seed)?;
    println!("{} trainable parameters", model.trainable_count());
    let mut snapshots = Vec::new();
    let mut hook = |row: &EpochLog, m: &CpcNet<T>, _improved: bool| -> cpcnet::Result<Flow> {
        print_epoch(row);
        if tc.checkpoint_every > 0 && row.epoch % tc.checkpoint_every == 0 {
            let name = format!("epoch_{:04}.cpcw", row.epoch);
            write_atomic(&out.join(&name), &checkpoint::to_bytes(&m.params))
                .map_err(|f| cpcnet::CoreError::Dataset(f.error.to_string()))?;
            snapshots.push(name);
        }
        Ok(Flow::Continue)
    };
    let outcome = fit(&mut model, train_items, val_items, tc, &mut hook)?;
    write_atomic(&out.join(MODEL_FILE), &checkpoint::to_bytes(&model.params))?;
    write_atomic(&out.join(LOG_FILE), outcome.csv().as_bytes())?;
    match (outcome.best_epoch, outcome.best_val_acc) {
        (Some(e), Some(v)) => println!("best epoch {e}: val accuracy {:.2}%", 100.0 * v),
        _ => println!("no epochs run; wrote the initial model"),
    }
    println!("train binary accuracy {:.2}%", 100.0 * binary_accuracy(&model, train_items)?);
    Ok(snapshots)
}

/// Sibling `.cfg` of a checkpoint path.
fn config_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("cfg")
}

fn load_config(checkpoint_path: &Path) -> Result<CpcNetConfig, Failure> {
    let cfg_path = config_path(checkpoint_path);
    let text = std::fs::read_to_string(&cfg_path)
        .map_err(|e| Failure::data(format!("cannot read model config {}: {e}", cfg_path.display())))?;
    CpcNetConfig::from_kv(&text).map_err(|e| Failure::data(format!("{}: {e}", cfg_path.display())))
}

pub fn load_model<T: Float>(config: CpcNetConfig, checkpoint_path: &Path) -> Result<CpcNet<T>, Failure> {
    let mut model = CpcNet::<T>::new(config, 0)?;
    let bytes = std::fs::read(checkpoint_path)
        .map_err(|e| Failure::data(format!("cannot read checkpoint {}: {e}", checkpoint_path.display())))?;
    checkpoint::load_into(&mut model.params, bytes.as_slice())
        .map_err(|e| Failure::from(e).context(checkpoint_path.display()))?;
    Ok(model)
}

pub fn eval(a: EvalArgs, s: &mut Settings) -> Result<(), Failure> {
    let data: PathBuf = s.require("data", a.data.map(|p| p.display().to_string()))?.into();
    let stub = s.flag("oracle-stub", a.oracle_stub)?;
    let symbolic = s.flag("symbolic", a.symbolic)?;
    let ckpt = s.get_opt("checkpoint", a.checkpoint.map(|p| p.display().to_string()))?;
    s.finish()?;
    let report = match (stub, symbolic, ckpt) {
        (true, false, None) => evaluate_single_choice(&TargetStub, &load(&data)?)?,
        (false, true, None) => evaluate_single_choice(&SymbolicOracle, &load(&data)?)?,
        (false, false, Some(path)) => {
            let path = PathBuf::from(path);
            let config = load_config(&path)?;
            let items = load(&data)?;
            match config.precision {
                Precision::F32 => evaluate_single_choice(&load_model::<f32>(config, &path)?, &items)?,
                Precision::F64 => evaluate_single_choice(&load_model::<f64>(config, &path)?, &items)?,
            }
        }
        _ => return Err(Failure::usage("give exactly one of --checkpoint, --oracle-stub or --symbolic")),
    };
    print!("{}", report.render());
    Ok(())
}

pub fn ablate(a: AblateArgs, s: &mut Settings) -> Result<(), Failure> {
    let data: PathBuf = s.require("data", a.data.map(|p| p.display().to_string()))?.into();
    let variants = parse_grid(&s.get("grid", a.grid, "0,1,2".to_string())?)?;
    let out: PathBuf = s.require("out", a.out.map(|p| p.display().to_string()))?.into();
    let paths = [data.join(TRAIN_FILE), data.join(VAL_FILE), data.join(TEST_FILE)];
    let [train_items, val_items, test_items] = [&paths[0], &paths[1], &paths[2]].map(|p| load_nonempty(p));
    let (train_items, val_items, test_items) = (train_items?, val_items?, test_items?);
    let resolution = usize::from(train_items[0].resolution);
    let (base, tc) = resolve_model(a.model, s, resolution, train_items.len())?;
    s.finish()?;
    base.validate()?;

    create_out(&out)?;
    let mut manifest = RunManifest::new("ablate", &out);
    for p in &paths {
        manifest.input(p);
    }
    let rows = match base.precision {
        Precision::F32 => ablation_sweep::<f32>(&variants, &base, tc.seed, &train_items, &val_items, &test_items, &tc)?,
        Precision::F64 => ablation_sweep::<f64>(&variants, &base, tc.seed, &train_items, &val_items, &test_items, &tc)?,
    };
    let mut text = render_sweep(&rows);
    for r in &rows {
        text.push_str(&format!("\n[{}]\n{}", r.variant, r.report.render()));
    }
    print!("{text}");
    write_atomic(&out.join(SWEEP_FILE), text.as_bytes())?;
    manifest.output(SWEEP_FILE);
    manifest.write(s.resolved(), &[("model", tc.seed), ("shuffle", tc.seed)])
}
