use std::collections::HashMap;

use autodiff::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use autodiff::init::{constant, fan_in_uniform};
use autodiff::{Activation, BatchStats, Float, Graph, Padding, ParamSet, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Ablation, CpcNetConfig, BN_EPS, BN_MOMENTUM, STEM_CHANNELS};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; collected for running-stat updates.
    Train,
    /// Running statistics.
    Infer,
}

/// Maps parameter names to graph leaves for one forward pass.
#[derive(Debug, Default, Clone)]
pub struct Bindings {
    vars: HashMap<String, Var>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, v: Var) {
        self.vars.insert(name.into(), v);
    }

    /// Binds every trainable tensor of `params` as a parameter leaf.
    pub fn from_params<T: Float>(g: &mut Graph<T>, params: &ParamSet<T>) -> Result<Self> {
        let mut b = Self::new();
        for (id, name, t) in params.iter() {
            if t.requires_grad {
                b.insert(name, g.param(params, id)?);
            }
        }
        Ok(b)
    }

    fn get(&self, name: &str) -> Result<Var> {
        self.vars.get(name).copied().ok_or_else(|| TensorError::MissingParam(name.to_string()).into())
    }
}

/// Result of one forward pass over a batch.
pub struct Forward<T> {
    /// Per-sample logits `[B]` of each surviving head.
    pub y1: Option<Var>,
    pub y2: Option<Var>,
    /// `(z1, z2)` after the encoder and after each iteration, in
    /// `[B·R·C, H, W, K]` layout. Removed paths are `None`.
    pub states: Vec<(Option<Var>, Option<Var>)>,
    /// Batch statistics of every batch-norm layer (train mode only).
    pub bn_stats: Vec<(String, BatchStats<T>)>,
}

/// CPCNet: shared entry encoder, L two-path iterations with cross
/// subtraction, two classification heads.
#[derive(Debug, Clone)]
pub struct CpcNet<T: Float = f32> {
    pub config: CpcNetConfig,
    pub params: ParamSet<T>,
}

const BLOCKS: [&str; 4] = ["h1", "g1", "h2", "g2"];

fn block_path(block: &str) -> u8 {
    if block.ends_with('1') {
        1
    } else {
        2
    }
}

struct Init<'a, T: Float> {
    params: &'a mut ParamSet<T>,
    seed: u64,
}

impl<T: Float> Init<'_, T> {
    fn conv(&mut self, name: String, k: usize, cin: usize, cout: usize) -> Result<()> {
        let t = fan_in_uniform(&[k, k, cin, cout], k * k * cin, self.seed, &name);
        self.params.insert(name, t)?;
        Ok(())
    }

    fn bn(&mut self, prefix: &str, c: usize) -> Result<()> {
        self.params.insert(format!("{prefix}.gamma"), constant(&[c], 1.0, true))?;
        self.params.insert(format!("{prefix}.beta"), constant(&[c], 0.0, true))?;
        self.params.insert(format!("{prefix}.running_mean"), constant(&[c], 0.0, false))?;
        self.params.insert(format!("{prefix}.running_var"), constant(&[c], 1.0, false))?;
        Ok(())
    }

    fn dense(&mut self, prefix: &str, din: usize, dout: usize) -> Result<()> {
        let name = format!("{prefix}.weight");
        let w = fan_in_uniform(&[din, dout], din, self.seed, &name);
        self.params.insert(name, w)?;
        self.params.insert(format!("{prefix}.bias"), constant(&[dout], 0.0, true))?;
        Ok(())
    }

    fn residual(&mut self, prefix: &str, k: usize) -> Result<()> {
        self.conv(format!("{prefix}.conv1.kernel"), 3, k, k)?;
        self.bn(&format!("{prefix}.bn1"), k)?;
        self.conv(format!("{prefix}.conv2.kernel"), 3, k, k)?;
        self.bn(&format!("{prefix}.bn2"), k)
    }
}

/// Builds the parameter set for `config`. Removed components have no
/// parameters at all.
pub fn init_params<T: Float>(config: &CpcNetConfig, seed: u64) -> Result<ParamSet<T>> {
    config.validate()?;
    let mut params = ParamSet::new();
    let mut init = Init { params: &mut params, seed };
    let (k, ab) = (config.k, config.ablation);
    init.conv("enc.conv1.kernel".into(), 7, 1, STEM_CHANNELS)?;
    init.bn("enc.bn1", STEM_CHANNELS)?;
    init.conv("enc.conv2.kernel".into(), 3, STEM_CHANNELS, k)?;
    init.bn("enc.bn2", k)?;
    for i in 1..=config.l {
        for b in BLOCKS {
            if ab.has_path(block_path(b)) {
                init.residual(&format!("it{i}.{b}"), k)?;
            }
        }
        if ab.has_consistency() {
            init.dense(&format!("it{i}.q.dense1"), k, k)?;
            init.dense(&format!("it{i}.q.dense2"), k, k)?;
        }
    }
    for p in [1u8, 2] {
        if ab.has_head(p) {
            init.dense(&format!("p{p}.dense1"), config.head_inputs(), config.head_width)?;
            init.dense(&format!("p{p}.dense2"), config.head_width, 1)?;
        }
    }
    Ok(params)
}

struct Pass<'a, T: Float> {
    g: &'a mut Graph<T>,
    bind: &'a Bindings,
    params: &'a ParamSet<T>,
    mode: Mode,
    stats: Vec<(String, BatchStats<T>)>,
}

impl<T: Float> Pass<'_, T> {
    fn conv(&mut self, x: Var, name: &str, stride: usize) -> Result<Var> {
        let k = self.bind.get(name)?;
        Ok(self.g.conv2d(x, k, None, stride, Padding::Same)?)
    }

    fn bn(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let gamma = self.bind.get(&format!("{prefix}.gamma"))?;
        let beta = self.bind.get(&format!("{prefix}.beta"))?;
        match self.mode {
            Mode::Train => {
                let (y, stats) = self.g.batchnorm_train(x, gamma, beta, BN_EPS)?;
                self.stats.push((prefix.to_string(), stats));
                Ok(y)
            }
            Mode::Infer => {
                let running = |s: &str| {
                    self.params
                        .by_name(&format!("{prefix}.{s}"))
                        .ok_or_else(|| TensorError::MissingParam(format!("{prefix}.{s}")))
                };
                let (m, v) = (running("running_mean")?, running("running_var")?);
                Ok(self.g.batchnorm_infer(x, gamma, beta, m.data(), v.data(), BN_EPS)?)
            }
        }
    }

    fn dense(&mut self, x: Var, prefix: &str, act: Activation) -> Result<Var> {
        let w = self.bind.get(&format!("{prefix}.weight"))?;
        let b = self.bind.get(&format!("{prefix}.bias"))?;
        Ok(self.g.dense(x, w, Some(b), act)?)
    }

    /// Entry encoder, shared across all R·C entries.
    fn encode(&mut self, e: Var) -> Result<Var> {
        let e = self.conv(e, "enc.conv1.kernel", 2)?;
        let e = self.bn(e, "enc.bn1")?;
        let e = self.g.relu(e)?;
        let e = self.g.maxpool2d(e, 3, 2, Padding::Same)?;
        let e = self.conv(e, "enc.conv2.kernel", 1)?;
        let e = self.bn(e, "enc.bn2")?;
        let e = self.g.relu(e)?;
        Ok(self.g.maxpool2d(e, 3, 2, Padding::Same)?)
    }

    /// conv → BN → ReLU → conv → BN → (+x) → ReLU, all 3×3 "same".
    fn residual(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let y = self.conv(x, &format!("{prefix}.conv1.kernel"), 1)?;
        let y = self.bn(y, &format!("{prefix}.bn1"))?;
        let y = self.g.relu(y)?;
        let y = self.conv(y, &format!("{prefix}.conv2.kernel"), 1)?;
        let y = self.bn(y, &format!("{prefix}.bn2"))?;
        let y = self.g.add(y, x)?;
        Ok(self.g.relu(y)?)
    }

    /// Applies a residual block over the (R, C) axes: every (b, h, w)
    /// position becomes a batch element holding an R×C×K image.
    fn conceptual(&mut self, z: Var, prefix: &str, dims: [usize; 6]) -> Result<Var> {
        let [b, r, c, h, w, k] = dims;
        let x = self.g.reshape(z, &dims)?;
        let x = self.g.permute(x, &[0, 3, 4, 1, 2, 5])?;
        let x = self.g.reshape(x, &[b * h * w, r, c, k])?;
        let y = self.residual(x, prefix)?;
        let y = self.g.reshape(y, &[b, h, w, r, c, k])?;
        let y = self.g.permute(y, &[0, 3, 4, 1, 2, 5])?;
        Ok(self.g.reshape(y, &[b * r * c, h, w, k])?)
    }

    fn q(&mut self, u: Var, i: usize) -> Result<Var> {
        let v = self.dense(u, &format!("it{i}.q.dense1"), Activation::Relu)?;
        self.dense(v, &format!("it{i}.q.dense2"), Activation::None)
    }

    /// Channel mean, flatten to R·C·H·W, two dense layers → `[B]`.
    fn head(&mut self, z: Var, p: u8, batch: usize) -> Result<Var> {
        let m = self.g.reduce_mean(z, 3)?;
        let m = self.g.reshape(m, &[batch, self.g.shape(m).iter().product::<usize>() / batch])?;
        let h = self.dense(m, &format!("p{p}.dense1"), Activation::Relu)?;
        let y = self.dense(h, &format!("p{p}.dense2"), Activation::None)?;
        Ok(self.g.reshape(y, &[batch])?)
    }
}

impl<T: Float> CpcNet<T> {
    pub fn new(config: CpcNetConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn trainable_count(&self) -> usize {
        self.params.trainable_count()
    }

    /// Runs the model on `x` of shape `[B, R, C, res, res, 1]`, reading
    /// trainable tensors from `bind` and running statistics from
    /// `self.params`. Parameters the variant does not use are ignored.
    pub fn forward(&self, g: &mut Graph<T>, x: Var, bind: &Bindings, mode: Mode) -> Result<Forward<T>> {
        let cfg = &self.config;
        let (rows, cols, res) = (cfg.rows, cfg.cols, cfg.resolution);
        let xs = g.shape(x).to_vec();
        if xs.len() != 6 || xs[1..] != [rows, cols, res, res, 1] {
            return Err(TensorError::invalid(
                "forward",
                format!("expected input [B, {rows}, {cols}, {res}, {res}, 1], got {xs:?}"),
            )
            .into());
        }
        let batch = xs[0];
        let mut p = Pass { g, bind, params: &self.params, mode, stats: Vec::new() };
        let e = p.g.reshape(x, &[batch * rows * cols, res, res, 1])?;
        let z = p.encode(e)?;
        self.reason(p, z, batch)
    }

    /// Runs the entry encoder alone on `x [N, res, res, 1]`, giving
    /// `[N, H, W, K]`. In [`Mode::Infer`] each panel is encoded
    /// independently, so encodings can be computed once and reused.
    pub fn encode_panels(&self, g: &mut Graph<T>, x: Var, bind: &Bindings, mode: Mode) -> Result<Var> {
        let res = self.config.resolution;
        let xs = g.shape(x).to_vec();
        if xs.len() != 4 || xs[1..] != [res, res, 1] {
            return Err(
                TensorError::invalid("encode", format!("expected input [N, {res}, {res}, 1], got {xs:?}")).into()
            );
        }
        let mut p = Pass { g, bind, params: &self.params, mode, stats: Vec::new() };
        p.encode(x)
    }

    /// Everything after the encoder, on `z [B·R·C, H, W, K]`.
    pub fn forward_encoded(
        &self,
        g: &mut Graph<T>,
        z: Var,
        batch: usize,
        bind: &Bindings,
        mode: Mode,
    ) -> Result<Forward<T>> {
        let [r, c, h, w, k] = self.config.encoding_shape();
        if g.shape(z) != [batch * r * c, h, w, k] {
            return Err(TensorError::shapes("forward_encoded", &[batch * r * c, h, w, k], g.shape(z)).into());
        }
        let p = Pass { g, bind, params: &self.params, mode, stats: Vec::new() };
        self.reason(p, z, batch)
    }

    fn reason(&self, mut p: Pass<'_, T>, z: Var, batch: usize) -> Result<Forward<T>> {
        let cfg = &self.config;
        let (rows, cols) = (cfg.rows, cfg.cols);
        let zs = p.g.shape(z).to_vec();
        let dims = [batch, rows, cols, zs[1], zs[2], zs[3]];
        let ab = cfg.ablation;
        let mut z1 = ab.has_path(1).then_some(z);
        let mut z2 = ab.has_path(2).then_some(z);
        let mut states = vec![(z1, z2)];
        for i in 1..=cfg.l {
            let u1 = match z1 {
                Some(z) => {
                    let t = p.conceptual(z, &format!("it{i}.g1"), dims)?;
                    Some(p.residual(t, &format!("it{i}.h1"))?)
                }
                None => None,
            };
            let u2 = match z2 {
                Some(z) => {
                    let t = p.residual(z, &format!("it{i}.h2"))?;
                    Some(p.conceptual(t, &format!("it{i}.g2"), dims)?)
                }
                None => None,
            };
            (z1, z2) = match (u1, u2) {
                (Some(u1), Some(u2)) if ab.has_consistency() => {
                    let v1 = p.q(u1, i)?;
                    let v2 = p.q(u2, i)?;
                    (Some(p.g.sub(u1, v2)?), Some(p.g.sub(u2, v1)?))
                }
                other => other,
            };
            for z in [z1, z2].into_iter().flatten() {
                if p.g.shape(z) != zs.as_slice() {
                    return Err(TensorError::shapes("iteration", &zs, p.g.shape(z)).into());
                }
            }
            states.push((z1, z2));
        }

        let y1 = match z1 {
            Some(z) if ab.has_head(1) => Some(p.head(z, 1, batch)?),
            _ => None,
        };
        let y2 = match z2 {
            Some(z) if ab.has_head(2) => Some(p.head(z, 2, batch)?),
            _ => None,
        };
        Ok(Forward { y1, y2, states, bn_stats: p.stats })
    }

    /// Folds batch statistics into the running estimates:
    /// `running = m·running + (1 − m)·batch`.
    pub fn update_running_stats(&mut self, stats: &[(String, BatchStats<T>)]) -> Result<()> {
        let m = T::of(BN_MOMENTUM);
        let one = T::one();
        for (prefix, s) in stats {
            for (suffix, batch) in [("running_mean", &s.mean), ("running_var", &s.var)] {
                let name = format!("{prefix}.{suffix}");
                let t = self.params.by_name_mut(&name).ok_or(TensorError::MissingParam(name))?;
                for (r, &b) in t.data_mut().iter_mut().zip(batch.iter()) {
                    *r = m * *r + (one - m) * b;
                }
            }
        }
        Ok(())
    }

    /// Binds every trainable tensor as a constant leaf of `g`.
    pub fn constant_bindings(&self, g: &mut Graph<T>) -> Result<Bindings> {
        let mut bind = Bindings::new();
        for (id, name, t) in self.params.iter() {
            if t.requires_grad {
                let v = g.constant(self.params.get(id))?;
                bind.insert(name, v);
            }
        }
        Ok(bind)
    }

    /// Logits of both heads for a batch, without recording gradients.
    pub fn predict(&self, x: &Tensor<T>, mode: Mode) -> Result<(Option<Vec<T>>, Option<Vec<T>>)> {
        let mut g = Graph::new();
        let xv = g.constant(x)?;
        let bind = self.constant_bindings(&mut g)?;
        let f = self.forward(&mut g, xv, &bind, mode)?;
        Ok((f.y1.map(|v| g.data(v).to_vec()), f.y2.map(|v| g.data(v).to_vec())))
    }

    pub fn ablation(&self) -> Ablation {
        self.config.ablation
    }
}

/// Finite-difference check of the summed-BCE loss of a freshly initialized
/// 64-bit model with respect to every trainable tensor and the input pixels,
/// on a batch of two random samples labelled (1, 0).
pub fn grad_check_model(config: &CpcNetConfig, seed: u64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let model = CpcNet::<f64>::new(config.clone(), seed)?;
    let names: Vec<String> =
        model.params.iter().filter(|(_, _, t)| t.requires_grad).map(|(_, n, _)| n.to_string()).collect();
    let mut inputs: Vec<Tensor<f64>> =
        model.params.iter().filter(|(_, _, t)| t.requires_grad).map(|(_, _, t)| t.clone()).collect();
    let res = config.resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = 2 * config.rows * config.cols * res * res;
    inputs.push(Tensor::from_vec(
        &[2, config.rows, config.cols, res, res, 1],
        (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )?);
    let labels = [1.0, 0.0];
    let as_tensor = |e: CoreError| match e {
        CoreError::Tensor(t) => t,
        other => TensorError::invalid("model", other.to_string()),
    };
    Ok(grad_check(
        |g, vars| {
            let mut bind = Bindings::new();
            for (n, v) in names.iter().zip(vars) {
                bind.insert(n.clone(), *v);
            }
            let x = *vars.last().expect("input pixels are the last leaf");
            let fwd = model.forward(g, x, &bind, Mode::Train).map_err(as_tensor)?;
            loss(g, &fwd, &labels).map_err(as_tensor)
        },
        &inputs,
        opts,
    )?)
}

/// Sum of the surviving heads' BCE terms, each averaged over the batch.
pub fn loss<T: Float>(g: &mut Graph<T>, fwd: &Forward<T>, labels: &[T]) -> Result<Var> {
    let terms = [fwd.y1, fwd.y2]
        .into_iter()
        .flatten()
        .map(|y| g.bce_with_logits(y, labels))
        .collect::<autodiff::Result<Vec<_>>>()?;
    let mut total = *terms.first().ok_or_else(|| TensorError::invalid("loss", "model has no classification head"))?;
    for &t in &terms[1..] {
        total = g.add(total, t)?;
    }
    Ok(total)
}

/// Test-time score: the sum of the surviving heads' logits.
pub fn score<T: Float>(y1: Option<T>, y2: Option<T>) -> T {
    y1.unwrap_or_else(T::zero) + y2.unwrap_or_else(T::zero)
}

/// Per-sample scores from [`CpcNet::predict`] output.
pub fn scores<T: Float>(y1: &Option<Vec<T>>, y2: &Option<Vec<T>>, batch: usize) -> Vec<T> {
    (0..batch).map(|i| score(y1.as_ref().map(|v| v[i]), y2.as_ref().map(|v| v[i]))).collect()
}
