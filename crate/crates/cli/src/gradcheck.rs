//! `cpcnet gradcheck`: central finite differences for every differentiable
//! op and for the full model, one line per check.

use std::time::Instant;

use autodiff::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use autodiff::{Activation, Graph, Padding, Result as TResult, Tensor, Var};
use cpcnet::model::grad_check_model;
use cpcnet::{Ablation, CpcNetConfig, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::failure::Failure;
use crate::settings::Settings;
use crate::GradcheckArgs;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape matches data")
}

/// Weighted sum of `y` with fixed random weights.
fn project(g: &mut Graph<f64>, y: Var, seed: u64) -> TResult<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let r = random(&mut rng, &g.shape(y).to_vec());
    let rv = g.constant(&r)?;
    let p = g.mul(y, rv)?;
    g.sum(p)
}

type Check = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> TResult<Var>>;

/// One op instance: its inputs and the scalar function to differentiate.
fn op_instance(op: &str, seed: u64) -> (Vec<Tensor<f64>>, Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match op {
        "conv2d" => {
            let cases = [
                (5, 5, 2, 3, 3, 1, Padding::Same),
                (8, 8, 1, 4, 7, 2, Padding::Same),
                (6, 7, 3, 2, 2, 3, Padding::Valid),
            ];
            let (h, w, cin, cout, k, s, pad) = cases[seed as usize % cases.len()];
            let inputs = vec![
                random(&mut rng, &[2, h, w, cin]),
                random(&mut rng, &[k, k, cin, cout]),
                random(&mut rng, &[cout]),
            ];
            (
                inputs,
                Box::new(move |g, v| {
                    let y = g.conv2d(v[0], v[1], Some(v[2]), s, pad)?;
                    project(g, y, seed)
                }),
            )
        }
        "maxpool2d" => {
            let (pool, stride) = [(3, 2), (2, 2), (3, 1)][seed as usize % 3];
            (
                vec![random(&mut rng, &[2, 7, 6, 3])],
                Box::new(move |g, v| {
                    let y = g.maxpool2d(v[0], pool, stride, Padding::Same)?;
                    project(g, y, seed)
                }),
            )
        }
        "batchnorm_train" => {
            let inputs = vec![random(&mut rng, &[4, 3, 2, 5]), random(&mut rng, &[5]), random(&mut rng, &[5])];
            (
                inputs,
                Box::new(move |g, v| {
                    let (y, _) = g.batchnorm_train(v[0], v[1], v[2], 1e-5)?;
                    project(g, y, seed)
                }),
            )
        }
        "batchnorm_infer" => {
            let inputs = vec![random(&mut rng, &[4, 3, 2, 5]), random(&mut rng, &[5]), random(&mut rng, &[5])];
            let mean: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let var: Vec<f64> = (0..5).map(|_| rng.gen_range(0.5..2.0)).collect();
            (
                inputs,
                Box::new(move |g, v| {
                    let y = g.batchnorm_infer(v[0], v[1], v[2], &mean, &var, 1e-5)?;
                    project(g, y, seed)
                }),
            )
        }
        "dense" => {
            let act = if seed % 2 == 0 { Activation::None } else { Activation::Relu };
            let inputs = vec![random(&mut rng, &[2, 3, 4]), random(&mut rng, &[4, 5]), random(&mut rng, &[5])];
            (
                inputs,
                Box::new(move |g, v| {
                    let y = g.dense(v[0], v[1], Some(v[2]), act)?;
                    project(g, y, seed)
                }),
            )
        }
        "relu" => (
            vec![random(&mut rng, &[2, 3, 4])],
            Box::new(move |g, v| {
                let y = g.relu(v[0])?;
                project(g, y, seed)
            }),
        ),
        "add/sub/mul" => (
            vec![random(&mut rng, &[2, 3, 4]), random(&mut rng, &[2, 3, 4])],
            Box::new(move |g, v| {
                let s = g.add(v[0], v[1])?;
                let d = g.sub(s, v[1])?;
                let m = g.mul(d, v[1])?;
                let y = g.sub(m, v[0])?;
                project(g, y, seed)
            }),
        ),
        "reduce_mean" => {
            let axis = seed as usize % 3;
            (
                vec![random(&mut rng, &[2, 3, 4])],
                Box::new(move |g, v| {
                    let y = g.reduce_mean(v[0], axis)?;
                    project(g, y, seed)
                }),
            )
        }
        "permute/reshape" => (
            vec![random(&mut rng, &[2, 3, 4])],
            Box::new(move |g, v| {
                let p = g.permute(v[0], &[2, 0, 1])?;
                let y = g.reshape(p, &[4, 6])?;
                project(g, y, seed)
            }),
        ),
        "bce_with_logits" => {
            let labels: Vec<f64> = (0..6).map(|i| ((i + seed as usize) % 2) as f64).collect();
            (vec![random(&mut rng, &[6])], Box::new(move |g, v| g.bce_with_logits(v[0], &labels)))
        }
        other => unreachable!("unknown op {other}"),
    }
}

const OPS: [&str; 10] = [
    "conv2d",
    "maxpool2d",
    "batchnorm_train",
    "batchnorm_infer",
    "dense",
    "relu",
    "add/sub/mul",
    "reduce_mean",
    "permute/reshape",
    "bce_with_logits",
];

struct Line {
    name: String,
    result: std::result::Result<GradCheckReport, String>,
}

fn merge(acc: &mut Option<GradCheckReport>, r: GradCheckReport) {
    match acc {
        Some(a) => {
            if r.max_rel_error > a.max_rel_error {
                a.max_rel_error = r.max_rel_error;
                a.worst = r.worst;
            }
            a.checked += r.checked;
            a.skipped_kinks += r.skipped_kinks;
        }
        None => *acc = Some(r),
    }
}

pub fn run(a: GradcheckArgs, s: &mut Settings) -> Result<(), Failure> {
    let scale = s.get("scale", a.scale, "toy".to_string())?;
    s.finish()?;
    let instances = match scale.as_str() {
        "toy" => 2,
        "full" => 10,
        other => return Err(Failure::usage(format!("unknown --scale {other:?} (expected toy or full)"))),
    };
    let opts = GradCheckOptions::default();
    let start = Instant::now();
    let mut lines = Vec::new();
    for op in OPS {
        let mut acc = None;
        let mut err = None;
        for seed in 0..instances {
            let (inputs, f) = op_instance(op, seed);
            match grad_check(|g, v| f(g, v), &inputs, opts) {
                Ok(r) => merge(&mut acc, r),
                Err(e) => {
                    err = Some(format!("instance {seed}: {e}"));
                    break;
                }
            }
        }
        let result = match (err, acc) {
            (Some(e), _) => Err(e),
            (None, Some(r)) => Ok(r),
            (None, None) => Err("no instances".into()),
        };
        lines.push(Line { name: format!("{op} x{instances}"), result });
    }

    let toy = |l, ablation| CpcNetConfig {
        k: 4,
        l,
        resolution: 8,
        ablation,
        head_width: 16,
        precision: Precision::F64,
        ..Default::default()
    };
    let mut models = vec![toy(2, Ablation::Full)];
    if scale == "full" {
        models.extend([1, 1, 1, 1, 1].into_iter().zip(Ablation::ALL.into_iter().skip(1)).map(|(l, a)| toy(l, a)));
    }
    for (i, cfg) in models.iter().enumerate() {
        let result = grad_check_model(cfg, i as u64 + 1, opts).map_err(|e| e.to_string());
        lines.push(Line {
            name: format!("cpcnet K={} L={} {}x{} {}", cfg.k, cfg.l, cfg.resolution, cfg.resolution, cfg.ablation),
            result,
        });
    }

    let mut failed = 0;
    println!("{:<34}{:>10}{:>8}{:>14}  status", "check", "coords", "kinks", "max_rel_err");
    for line in &lines {
        match &line.result {
            Ok(r) => {
                let ok = r.max_rel_error <= opts.tol && r.checked > 0;
                failed += usize::from(!ok);
                println!(
                    "{:<34}{:>10}{:>8}{:>14.3e}  {}",
                    line.name,
                    r.checked,
                    r.skipped_kinks,
                    r.max_rel_error,
                    if ok { "pass" } else { "FAIL" }
                );
            }
            Err(e) => {
                failed += 1;
                println!("{:<34}{:>10}{:>8}{:>14}  FAIL ({e})", line.name, "-", "-", "-");
            }
        }
    }
    println!("tolerance {:e}, h {:e}; {:.1}s", opts.tol, opts.h, start.elapsed().as_secs_f64());
    if failed > 0 {
        return Err(Failure::numeric(format!("{failed} gradient check(s) failed")));
    }
    Ok(())
}
