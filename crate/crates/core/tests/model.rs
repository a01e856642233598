use autodiff::gradcheck::{grad_check, GradCheckOptions};
use autodiff::{Graph, ParamSet, Tensor};
use cpcnet::model::{init_params, loss, scores, Bindings, CpcNet, Mode};
use cpcnet::{Ablation, CpcNetConfig, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(k: usize, l: usize, resolution: usize, ablation: Ablation) -> CpcNetConfig {
    CpcNetConfig { k, l, resolution, ablation, head_width: 16, precision: Precision::F64, ..Default::default() }
}

fn random_input(batch: usize, res: usize, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = batch * 9 * res * res;
    Tensor::from_vec(&[batch, 3, 3, res, res, 1], (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

/// Finite-difference check of the summed-BCE loss with respect to every
/// trainable parameter and the input pixels.
fn check_model(cfg: CpcNetConfig, seed: u64) -> autodiff::gradcheck::GradCheckReport {
    let model = CpcNet::<f64>::new(cfg.clone(), seed).unwrap();
    let names: Vec<String> =
        model.params.iter().filter(|(_, _, t)| t.requires_grad).map(|(_, n, _)| n.to_string()).collect();
    let mut inputs: Vec<Tensor<f64>> = names.iter().map(|n| model.params.by_name(n).unwrap().clone()).collect();
    inputs.push(random_input(2, cfg.resolution, seed));
    let labels = [1.0, 0.0];
    grad_check(
        |g, vars| {
            let mut bind = Bindings::new();
            for (n, v) in names.iter().zip(vars) {
                bind.insert(n.clone(), *v);
            }
            let fwd = model.forward(g, *vars.last().unwrap(), &bind, Mode::Train).map_err(to_tensor)?;
            loss(g, &fwd, &labels).map_err(to_tensor)
        },
        &inputs,
        GradCheckOptions::default(),
    )
    .unwrap()
}

fn to_tensor(e: cpcnet::CoreError) -> autodiff::TensorError {
    match e {
        cpcnet::CoreError::Tensor(t) => t,
        other => autodiff::TensorError::invalid("model", other.to_string()),
    }
}

#[test]
fn full_model_gradients_one_iteration() {
    let r = check_model(toy(4, 1, 8, Ablation::Full), 1);
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn full_model_gradients_two_iterations() {
    let r = check_model(toy(4, 2, 8, Ablation::Full), 2);
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn ablated_model_gradients() {
    for (i, ab) in [Ablation::UpperPath, Ablation::NoConsistency, Ablation::LowerHead].into_iter().enumerate() {
        let r = check_model(toy(4, 1, 8, ab), 10 + i as u64);
        assert!(r.max_rel_error < 1e-4, "{ab}: {r:?}");
    }
}

fn run(model: &CpcNet<f64>, x: &Tensor<f64>) -> (Graph<f64>, cpcnet::Forward<f64>) {
    let mut g = Graph::new();
    let xv = g.constant(x).unwrap();
    let bind = Bindings::from_params(&mut g, &model.params).unwrap();
    let f = model.forward(&mut g, xv, &bind, Mode::Train).unwrap();
    (g, f)
}

#[test]
fn states_keep_their_shape() {
    for (k, l, res) in [(4, 0, 8), (4, 3, 16), (8, 2, 20), (3, 1, 33), (6, 2, 40)] {
        let cfg = toy(k, l, res, Ablation::Full);
        let model = CpcNet::<f64>::new(cfg.clone(), 0).unwrap();
        let (g, f) = run(&model, &random_input(2, res, 0));
        assert_eq!(f.states.len(), l + 1);
        let [r, c, h, w, kk] = cfg.encoding_shape();
        for (z1, z2) in &f.states {
            for z in [z1.unwrap(), z2.unwrap()] {
                assert_eq!(g.shape(z), &[2 * r * c, h, w, kk]);
            }
        }
    }
}

#[test]
fn encoder_output_at_eighty() {
    let cfg = CpcNetConfig { k: 8, l: 0, head_width: 4, ..Default::default() };
    let model = CpcNet::<f32>::new(cfg, 0).unwrap();
    let x = Tensor::<f32>::zeros(&[1, 3, 3, 80, 80, 1]);
    let mut g = Graph::new();
    let xv = g.constant(&x).unwrap();
    let bind = Bindings::from_params(&mut g, &model.params).unwrap();
    let f = model.forward(&mut g, xv, &bind, Mode::Train).unwrap();
    assert_eq!(g.shape(f.states[0].0.unwrap()), &[9, 10, 10, 8]);
}

#[test]
fn identical_entries_encode_identically() {
    let cfg = toy(4, 0, 16, Ablation::Full);
    let model = CpcNet::<f64>::new(cfg, 3).unwrap();
    let one = random_input(1, 16, 5);
    let plane = 16 * 16;
    let mut data = one.data().to_vec();
    let first = data[..plane].to_vec();
    data[4 * plane..5 * plane].copy_from_slice(&first);
    let x = Tensor::from_vec(&[1, 3, 3, 16, 16, 1], data).unwrap();
    let (g, f) = run(&model, &x);
    let z = g.data(f.states[0].0.unwrap());
    let feat = z.len() / 9;
    assert_eq!(&z[..feat], &z[4 * feat..5 * feat]);
}

#[test]
fn rejects_wrong_input_shape() {
    let model = CpcNet::<f64>::new(toy(4, 1, 8, Ablation::Full), 0).unwrap();
    let mut g = Graph::new();
    let xv = g.constant(&random_input(1, 10, 0)).unwrap();
    let bind = Bindings::from_params(&mut g, &model.params).unwrap();
    let err = model.forward(&mut g, xv, &bind, Mode::Train).err().unwrap();
    assert!(err.to_string().contains("expected input"), "{err}");
}

#[test]
fn zero_q_output_leaves_u_unchanged() {
    let cfg = toy(4, 2, 16, Ablation::Full);
    let mut model = CpcNet::<f64>::new(cfg.clone(), 4).unwrap();
    for i in 1..=2 {
        for s in ["weight", "bias"] {
            let t = model.params.by_name_mut(&format!("it{i}.q.dense2.{s}")).unwrap();
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let ic = CpcNet { config: CpcNetConfig { ablation: Ablation::NoConsistency, ..cfg }, params: model.params.clone() };
    let x = random_input(2, 16, 9);
    assert_eq!(model.predict(&x, Mode::Train).unwrap(), ic.predict(&x, Mode::Train).unwrap());
}

#[test]
fn no_consistency_ignores_q() {
    let cfg = toy(4, 2, 16, Ablation::Full);
    let base = CpcNet::<f64>::new(cfg.clone(), 6).unwrap();
    let ic_cfg = CpcNetConfig { ablation: Ablation::NoConsistency, ..cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut randomized = base.params.clone();
    let mut zeroed = base.params.clone();
    for (_, name, _) in base.params.iter() {
        if name.contains(".q.") {
            randomized.by_name_mut(name).unwrap().data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-3.0..3.0));
            zeroed.by_name_mut(name).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let x = random_input(2, 16, 2);
    let a = CpcNet { config: ic_cfg.clone(), params: randomized }.predict(&x, Mode::Train).unwrap();
    let b = CpcNet { config: ic_cfg, params: zeroed }.predict(&x, Mode::Train).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ablation_parameter_sets() {
    let full: ParamSet<f32> = init_params(&toy(4, 2, 16, Ablation::Full), 0).unwrap();
    let names = |ab| -> Vec<String> {
        let p: ParamSet<f32> = init_params(&toy(4, 2, 16, ab), 0).unwrap();
        p.names().map(str::to_string).collect()
    };
    let has = |n: &[String], pat: &str| n.iter().any(|s| s.contains(pat));
    for ab in Ablation::ALL {
        let n = names(ab);
        assert!(n.iter().all(|s| full.contains(s)), "{ab} is not a subset of full");
    }
    let up = names(Ablation::UpperPath);
    assert!(!has(&up, ".h1.") && !has(&up, ".g1.") && !has(&up, "p1.") && has(&up, ".h2.") && has(&up, "p2."));
    let lp = names(Ablation::LowerPath);
    assert!(!has(&lp, ".h2.") && !has(&lp, ".g2.") && !has(&lp, "p2.") && has(&lp, "p1."));
    let ic = names(Ablation::NoConsistency);
    assert!(!has(&ic, ".q.") && ic.len() < full.len());
    assert!(!has(&names(Ablation::UpperHead), "p1.") && has(&names(Ablation::UpperHead), ".h1."));
    assert!(!has(&names(Ablation::LowerHead), "p2.") && has(&names(Ablation::LowerHead), ".g2."));
}

#[test]
fn single_head_variants_have_one_loss_term() {
    let x = random_input(1, 8, 3);
    for (ab, head1, head2) in [
        (Ablation::UpperPath, false, true),
        (Ablation::LowerPath, true, false),
        (Ablation::UpperHead, false, true),
        (Ablation::LowerHead, true, false),
        (Ablation::Full, true, true),
    ] {
        let model = CpcNet::<f64>::new(toy(4, 1, 8, ab), 0).unwrap();
        let (y1, y2) = model.predict(&x, Mode::Train).unwrap();
        assert_eq!((y1.is_some(), y2.is_some()), (head1, head2), "{ab}");
        let s = scores(&y1, &y2, 1)[0];
        let expect = y1.map_or(0.0, |v| v[0]) + y2.map_or(0.0, |v| v[0]);
        assert_eq!(s, expect);
    }
}

#[test]
fn loss_examples() {
    let mut g = Graph::<f64>::new();
    let zero = g.constant(&Tensor::from_vec(&[1], vec![0.0]).unwrap()).unwrap();
    let both = cpcnet::Forward { y1: Some(zero), y2: Some(zero), states: vec![], bn_stats: vec![] };
    let l = loss(&mut g, &both, &[1.0]).unwrap();
    assert!((g.scalar(l).unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    let one = cpcnet::Forward { y1: None, y2: Some(zero), states: vec![], bn_stats: vec![] };
    let l = loss(&mut g, &one, &[1.0]).unwrap();
    assert!((g.scalar(l).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn equal_paths_and_heads_give_equal_logits() {
    let cfg = toy(4, 0, 16, Ablation::Full);
    let mut model = CpcNet::<f64>::new(cfg, 8).unwrap();
    for s in ["dense1.weight", "dense1.bias", "dense2.weight", "dense2.bias"] {
        let t = model.params.by_name(&format!("p1.{s}")).unwrap().clone();
        *model.params.by_name_mut(&format!("p2.{s}")).unwrap() = t;
    }
    let (y1, y2) = model.predict(&random_input(3, 16, 1), Mode::Train).unwrap();
    assert_eq!(y1, y2);
}

#[test]
fn forward_is_bit_reproducible() {
    let cfg = toy(4, 2, 16, Ablation::Full);
    let x = random_input(2, 16, 7);
    let a = CpcNet::<f64>::new(cfg.clone(), 5).unwrap().predict(&x, Mode::Train).unwrap();
    let b = CpcNet::<f64>::new(cfg, 5).unwrap().predict(&x, Mode::Train).unwrap();
    assert_eq!(a, b);
}

#[test]
fn running_stats_follow_momentum() {
    let cfg = toy(4, 0, 8, Ablation::Full);
    let mut model = CpcNet::<f64>::new(cfg, 0).unwrap();
    let (_, f) = run(&model, &random_input(2, 8, 1));
    let (name, stats) = f.bn_stats.iter().find(|(n, _)| n == "enc.bn1").unwrap().clone();
    model.update_running_stats(&f.bn_stats).unwrap();
    let rm = model.params.by_name(&format!("{name}.running_mean")).unwrap();
    let rv = model.params.by_name(&format!("{name}.running_var")).unwrap();
    for c in 0..stats.mean.len() {
        assert!((rm.data()[c] - 0.1 * stats.mean[c]).abs() < 1e-15);
        assert!((rv.data()[c] - (0.9 + 0.1 * stats.var[c])).abs() < 1e-15);
    }
}
