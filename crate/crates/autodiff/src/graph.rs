//! Recording tape for reverse-mode differentiation.
//!
//! Every op appends its output value and a node describing how to
//! propagate gradients back to its inputs. Inputs always precede their
//! consumers, and [`Graph::backward`] walks the nodes in exact reverse
//! recording order.

use crate::error::{Result, TensorError};
use crate::kernels::{self, BatchNormCache, ConvGeom, PoolGeom};
use crate::params::{ParamId, ParamSet};
use crate::scalar::Float;
use crate::tensor::Tensor;

pub use crate::kernels::Padding;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Batch statistics produced by a train-mode batch-norm, for updating
/// running averages outside the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

struct Value<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    param: Option<ParamId>,
}

enum Op<T> {
    Leaf,
    Conv2d { x: Var, kernel: Var, bias: Option<Var>, geom: ConvGeom },
    MaxPool { x: Var, argmax: Vec<u32> },
    BatchNorm { x: Var, gamma: Var, beta: Var, cache: BatchNormCache<T> },
    Dense { x: Var, weight: Var, bias: Option<Var>, rows: usize },
    Relu { x: Var },
    Mean { x: Var, axis: usize },
    Reshape { x: Var },
    Permute { x: Var, perm: Vec<usize> },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sum { x: Var },
    Bce { x: Var, labels: Vec<T> },
}

/// Activation applied after a dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

/// Gradients of the values recorded on a graph, indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Float> Gradients<T> {
    /// Gradient of the loss with respect to `v`, or `None` when `v` did
    /// not require gradients or does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

pub struct Graph<T: Float = f32> {
    values: Vec<Value<T>>,
    ops: Vec<Op<T>>,
}

impl<T: Float> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn check_finite<T: Float>(op: &'static str, data: &[T]) -> Result<()> {
    // `v - v` is NaN exactly for non-finite `v`; lane sums keep this vectorizable.
    let mut lanes = [T::zero(); 8];
    let mut chunks = data.chunks_exact(8);
    for c in &mut chunks {
        for (l, v) in lanes.iter_mut().zip(c) {
            *l = *l + (*v - *v);
        }
    }
    let tail = chunks.remainder().iter().fold(T::zero(), |a, v| a + (*v - *v));
    if lanes.iter().fold(tail, |a, l| a + *l) == T::zero() {
        return Ok(());
    }
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(TensorError::NonFinite { op, index }),
        None => Ok(()),
    }
}

/// Adds `delta(i)` into the gradient buffer of `v` if it needs one.
fn accumulate<T: Float>(grads: &mut [Option<Vec<T>>], values: &[Value<T>], v: Var, f: impl FnOnce(&mut [T])) {
    let value = &values[v.0];
    if !value.requires_grad {
        return;
    }
    let buf = grads[v.0].get_or_insert_with(|| vec![T::zero(); value.data.len()]);
    f(buf);
}

impl<T: Float> Graph<T> {
    pub fn new() -> Self {
        Self { values: Vec::new(), ops: Vec::new() }
    }

    /// Number of recorded values (leaves included).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.ops.clear();
    }

    fn check(&self, v: Var) -> Result<&Value<T>> {
        self.values.get(v.0).ok_or(TensorError::UnknownVar(v.0))
    }

    fn push(
        &mut self,
        op_name: &'static str,
        shape: Vec<usize>,
        data: Vec<T>,
        op: Op<T>,
        inputs: &[Var],
    ) -> Result<Var> {
        check_finite(op_name, &data)?;
        let requires_grad = inputs.iter().any(|v| self.values[v.0].requires_grad);
        let id = self.values.len();
        self.values.push(Value { shape, data, requires_grad, param: None });
        self.ops.push(op);
        Ok(Var(id))
    }

    fn push_leaf(&mut self, t: &Tensor<T>, requires_grad: bool, param: Option<ParamId>) -> Result<Var> {
        check_finite("leaf", t.data())?;
        let id = self.values.len();
        self.values.push(Value { shape: t.shape().to_vec(), data: t.data().to_vec(), requires_grad, param });
        self.ops.push(Op::Leaf);
        Ok(Var(id))
    }

    /// Records a copy of `t`; gradients flow to it iff `t.requires_grad`.
    pub fn input(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.push_leaf(t, t.requires_grad, None)
    }

    /// Records a constant that never receives gradients.
    pub fn constant(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.push_leaf(t, false, None)
    }

    /// Records a parameter; [`Graph::backward`] accumulates its gradient
    /// into the parameter's buffer when it requires one.
    pub fn param(&mut self, params: &ParamSet<T>, id: ParamId) -> Result<Var> {
        let t = params.get(id);
        self.push_leaf(t, t.requires_grad, Some(id))
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.values[v.0].shape
    }

    pub fn data(&self, v: Var) -> &[T] {
        &self.values[v.0].data
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let value = &self.values[v.0];
        Tensor::from_vec(&value.shape, value.data.clone()).expect("graph values are well-formed")
    }

    /// The single element of a one-element value.
    pub fn scalar(&self, v: Var) -> Result<T> {
        let value = self.check(v)?;
        if value.data.len() != 1 {
            return Err(TensorError::NotScalar { shape: value.shape.clone() });
        }
        Ok(value.data[0])
    }

    pub fn conv2d(&mut self, x: Var, kernel: Var, bias: Option<Var>, stride: usize, padding: Padding) -> Result<Var> {
        let xs = self.check(x)?.shape.clone();
        let ks = self.check(kernel)?.shape.clone();
        let geom = ConvGeom::new(&xs, &ks, stride, padding)?;
        if let Some(b) = bias {
            let bs = &self.check(b)?.shape;
            if bs.as_slice() != [geom.cout] {
                return Err(TensorError::shapes("conv2d bias", bs, &[geom.cout]));
            }
        }
        let out = kernels::conv2d_forward(
            &self.values[x.0].data,
            &self.values[kernel.0].data,
            bias.map(|b| self.values[b.0].data.as_slice()),
            &geom,
        );
        let mut inputs = vec![x, kernel];
        inputs.extend(bias);
        self.push("conv2d", geom.output_shape().to_vec(), out, Op::Conv2d { x, kernel, bias, geom }, &inputs)
    }

    pub fn maxpool2d(&mut self, x: Var, pool: usize, stride: usize, padding: Padding) -> Result<Var> {
        let geom = PoolGeom::new(&self.check(x)?.shape, pool, stride, padding)?;
        let (out, argmax) = kernels::maxpool2d_forward(&self.values[x.0].data, &geom);
        self.push("maxpool2d", geom.output_shape().to_vec(), out, Op::MaxPool { x, argmax }, &[x])
    }

    fn check_channel_params(&self, x: Var, gamma: Var, beta: Var) -> Result<usize> {
        let xs = &self.check(x)?.shape;
        let c = *xs.last().ok_or_else(|| TensorError::invalid("batchnorm", "rank-0 input"))?;
        for p in [gamma, beta] {
            let ps = &self.check(p)?.shape;
            if ps.as_slice() != [c] {
                return Err(TensorError::shapes("batchnorm", xs, ps));
            }
        }
        Ok(c)
    }

    /// Train-mode batch normalization over all axes but the last.
    pub fn batchnorm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, BatchStats<T>)> {
        let c = self.check_channel_params(x, gamma, beta)?;
        let (y, cache, mean, var) = kernels::batchnorm_train(
            &self.values[x.0].data,
            c,
            &self.values[gamma.0].data,
            &self.values[beta.0].data,
            T::of(eps),
        );
        let shape = self.values[x.0].shape.clone();
        let out = self.push("batchnorm", shape, y, Op::BatchNorm { x, gamma, beta, cache }, &[x, gamma, beta])?;
        Ok((out, BatchStats { mean, var }))
    }

    /// Inference-mode batch normalization with fixed running statistics.
    pub fn batchnorm_infer(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        eps: f64,
    ) -> Result<Var> {
        let c = self.check_channel_params(x, gamma, beta)?;
        if running_mean.len() != c || running_var.len() != c {
            return Err(TensorError::shapes("batchnorm", &[c], &[running_mean.len(), running_var.len()]));
        }
        let (y, cache) = kernels::batchnorm_infer(
            &self.values[x.0].data,
            c,
            &self.values[gamma.0].data,
            &self.values[beta.0].data,
            running_mean,
            running_var,
            T::of(eps),
        );
        let shape = self.values[x.0].shape.clone();
        self.push("batchnorm", shape, y, Op::BatchNorm { x, gamma, beta, cache }, &[x, gamma, beta])
    }

    /// Affine map over the last axis: `[..., Din] · [Din, Dout] + b`.
    pub fn dense(&mut self, x: Var, weight: Var, bias: Option<Var>, activation: Activation) -> Result<Var> {
        let xs = self.check(x)?.shape.clone();
        let ws = self.check(weight)?.shape.clone();
        let din = *xs.last().unwrap_or(&0);
        if ws.len() != 2 || ws[0] != din {
            return Err(TensorError::shapes("dense", &xs, &ws));
        }
        let dout = ws[1];
        if let Some(b) = bias {
            let bs = &self.check(b)?.shape;
            if bs.as_slice() != [dout] {
                return Err(TensorError::shapes("dense bias", bs, &[dout]));
            }
        }
        let rows = self.values[x.0].data.len() / din;
        let mut out = vec![T::zero(); rows * dout];
        T::gemm(rows, din, dout, &self.values[x.0].data, false, &self.values[weight.0].data, false, &mut out, false);
        if let Some(b) = bias {
            let bd = &self.values[b.0].data;
            for row in out.chunks_exact_mut(dout) {
                for (o, bv) in row.iter_mut().zip(bd) {
                    *o += *bv;
                }
            }
        }
        let mut shape = xs;
        *shape.last_mut().expect("rank >= 1") = dout;
        let mut inputs = vec![x, weight];
        inputs.extend(bias);
        let y = self.push("dense", shape, out, Op::Dense { x, weight, bias, rows }, &inputs)?;
        match activation {
            Activation::None => Ok(y),
            Activation::Relu => self.relu(y),
        }
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.check(x)?;
        let out = v.data.iter().map(|&a| if a > T::zero() { a } else { T::zero() }).collect();
        let shape = v.shape.clone();
        self.push("relu", shape, out, Op::Relu { x }, &[x])
    }

    /// Mean over one axis; the axis is removed from the shape.
    pub fn reduce_mean(&mut self, x: Var, axis: usize) -> Result<Var> {
        let v = self.check(x)?;
        if axis >= v.shape.len() {
            return Err(TensorError::invalid("reduce_mean", format!("axis {axis} out of range for {:?}", v.shape)));
        }
        let out = kernels::mean_axis(&v.data, &v.shape, axis);
        let mut shape = v.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        self.push("reduce_mean", shape, out, Op::Mean { x, axis }, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.check(x)?;
        let numel: usize = shape.iter().product();
        if numel != v.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(TensorError::shapes("reshape", &v.shape, shape));
        }
        let data = v.data.clone();
        self.push("reshape", shape.to_vec(), data, Op::Reshape { x }, &[x])
    }

    /// Keeps the first `keep_leading` axes and collapses the rest.
    pub fn flatten(&mut self, x: Var, keep_leading: usize) -> Result<Var> {
        let s = self.check(x)?.shape.clone();
        if keep_leading >= s.len() {
            return Err(TensorError::invalid("flatten", format!("cannot keep {keep_leading} axes of {s:?}")));
        }
        let mut shape = s[..keep_leading].to_vec();
        shape.push(s[keep_leading..].iter().product());
        self.reshape(x, &shape)
    }

    /// Axis permutation: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let v = self.check(x)?;
        let rank = v.shape.len();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(TensorError::invalid("permute", format!("{perm:?} is not a permutation of rank {rank}")));
        }
        let shape = kernels::permute_shape(&v.shape, perm);
        let mut out = vec![T::zero(); v.data.len()];
        kernels::permute(&v.data, &v.shape, perm, &mut out, false);
        self.push("permute", shape, out, Op::Permute { x, perm: perm.to_vec() }, &[x])
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<(Vec<usize>, Vec<T>)> {
        let (va, vb) = (self.check(a)?, self.check(b)?);
        if va.shape != vb.shape {
            return Err(TensorError::shapes(name, &va.shape, &vb.shape));
        }
        let out = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        Ok((va.shape.clone(), out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, out) = self.binary("add", a, b, |x, y| x + y)?;
        self.push("add", shape, out, Op::Add { a, b }, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, out) = self.binary("sub", a, b, |x, y| x - y)?;
        self.push("sub", shape, out, Op::Sub { a, b }, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, out) = self.binary("mul", a, b, |x, y| x * y)?;
        self.push("mul", shape, out, Op::Mul { a, b }, &[a, b])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.check(x)?.data.iter().copied().sum();
        self.push("sum", vec![1], vec![total], Op::Sum { x }, &[x])
    }

    /// Mean binary cross-entropy over a batch of logits (one per sample),
    /// in the overflow-free form `max(x,0) - x·y + ln(1 + e^{-|x|})`.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[T]) -> Result<Var> {
        let v = self.check(logits)?;
        if v.data.len() != labels.len() {
            return Err(TensorError::shapes("bce_with_logits", &v.shape, &[labels.len()]));
        }
        if labels.iter().any(|&y| y != T::zero() && y != T::one()) {
            return Err(TensorError::invalid("bce_with_logits", "labels must be 0 or 1"));
        }
        let n = T::of_usize(labels.len().max(1));
        let total: T =
            v.data.iter().zip(labels).map(|(&x, &y)| x.max(T::zero()) - x * y + (-x.abs()).exp().ln_1p()).sum();
        let labels = labels.to_vec();
        self.push("bce_with_logits", vec![1], vec![total / n], Op::Bce { x: logits, labels }, &[logits])
    }

    /// Back-propagates from a scalar `loss`. Parameter gradients are
    /// accumulated (`+=`) into their tensors' grad buffers and leaf
    /// gradients are returned. The graph is cleared afterwards.
    pub fn backward(&mut self, loss: Var, params: &mut ParamSet<T>) -> Result<Gradients<T>> {
        let lv = self.check(loss)?;
        if lv.data.len() != 1 {
            let shape = lv.shape.clone();
            return Err(TensorError::NotScalar { shape });
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.values.len()).map(|_| None).collect();
        if lv.requires_grad {
            grads[loss.0] = Some(vec![T::one()]);
        }
        let values = &self.values;
        for (idx, op) in self.ops.iter().enumerate().rev() {
            if matches!(op, Op::Leaf) {
                continue;
            }
            // Intermediate gradients are released once propagated.
            let Some(dy) = grads[idx].take() else { continue };
            check_finite("backward", &dy)?;
            backprop(op, &dy, values, &mut grads);
        }
        for (i, value) in values.iter().enumerate() {
            if let Some(g) = grads[i].as_ref() {
                check_finite("backward", g)?;
                if let Some(pid) = value.param {
                    params.get_mut(pid).accumulate_grad(g);
                }
            }
        }
        self.clear();
        Ok(Gradients { grads })
    }
}

fn backprop<T: Float>(op: &Op<T>, dy: &[T], values: &[Value<T>], grads: &mut [Option<Vec<T>>]) {
    match op {
        Op::Leaf => {}
        Op::Conv2d { x, kernel, bias, geom } => {
            let xd = &values[x.0].data;
            let kd = &values[kernel.0].data;
            // Split borrows: x and kernel are distinct earlier values.
            let mut dx =
                values[x.0].requires_grad.then(|| grads[x.0].take().unwrap_or_else(|| vec![T::zero(); xd.len()]));
            let mut dk = values[kernel.0]
                .requires_grad
                .then(|| grads[kernel.0].take().unwrap_or_else(|| vec![T::zero(); kd.len()]));
            kernels::conv2d_backward(xd, kd, geom, dy, dx.as_deref_mut(), dk.as_deref_mut());
            if let Some(dx) = dx {
                grads[x.0] = Some(dx);
            }
            if let Some(dk) = dk {
                grads[kernel.0] = Some(dk);
            }
            if let Some(b) = bias {
                let cout = geom.cout;
                accumulate(grads, values, *b, |db| {
                    for row in dy.chunks_exact(cout) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += *v;
                        }
                    }
                });
            }
        }
        Op::MaxPool { x, argmax } => {
            accumulate(grads, values, *x, |dx| kernels::maxpool2d_backward(argmax, dy, dx));
        }
        Op::BatchNorm { x, gamma, beta, cache } => {
            let gd = &values[gamma.0].data;
            let take = |grads: &mut [Option<Vec<T>>], v: Var| {
                values[v.0]
                    .requires_grad
                    .then(|| grads[v.0].take().unwrap_or_else(|| vec![T::zero(); values[v.0].data.len()]))
            };
            let mut dx = take(grads, *x);
            let mut dg = take(grads, *gamma);
            let mut db = take(grads, *beta);
            kernels::batchnorm_backward(cache, gd, dy, dx.as_deref_mut(), dg.as_deref_mut(), db.as_deref_mut());
            for (v, g) in [(*x, dx), (*gamma, dg), (*beta, db)] {
                if let Some(g) = g {
                    grads[v.0] = Some(g);
                }
            }
        }
        Op::Dense { x, weight, bias, rows } => {
            let ws = &values[weight.0].shape;
            let (din, dout) = (ws[0], ws[1]);
            let rows = *rows;
            let wd = &values[weight.0].data;
            let xd = &values[x.0].data;
            accumulate(grads, values, *x, |dx| T::gemm(rows, dout, din, dy, false, wd, true, dx, true));
            accumulate(grads, values, *weight, |dw| T::gemm(din, rows, dout, xd, true, dy, false, dw, true));
            if let Some(b) = bias {
                accumulate(grads, values, *b, |db| {
                    for row in dy.chunks_exact(dout) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += *v;
                        }
                    }
                });
            }
        }
        Op::Relu { x } => {
            let xd = &values[x.0].data;
            accumulate(grads, values, *x, |dx| {
                for ((d, g), v) in dx.iter_mut().zip(dy).zip(xd) {
                    if *v > T::zero() {
                        *d += *g;
                    }
                }
            });
        }
        Op::Mean { x, axis } => {
            let shape = &values[x.0].shape;
            accumulate(grads, values, *x, |dx| kernels::mean_axis_backward(dy, shape, *axis, dx));
        }
        Op::Reshape { x } => accumulate(grads, values, *x, |dx| add_into(dx, dy)),
        Op::Permute { x, perm } => {
            let shape = &values[x.0].shape;
            let out_shape = kernels::permute_shape(shape, perm);
            let mut inverse = vec![0; perm.len()];
            for (i, &p) in perm.iter().enumerate() {
                inverse[p] = i;
            }
            accumulate(grads, values, *x, |dx| kernels::permute(dy, &out_shape, &inverse, dx, true));
        }
        Op::Add { a, b } => {
            accumulate(grads, values, *a, |da| add_into(da, dy));
            accumulate(grads, values, *b, |db| add_into(db, dy));
        }
        Op::Sub { a, b } => {
            accumulate(grads, values, *a, |da| add_into(da, dy));
            accumulate(grads, values, *b, |db| {
                for (d, g) in db.iter_mut().zip(dy) {
                    *d -= *g;
                }
            });
        }
        Op::Mul { a, b } => {
            let (ad, bd) = (&values[a.0].data, &values[b.0].data);
            accumulate(grads, values, *a, |da| {
                for ((d, g), o) in da.iter_mut().zip(dy).zip(bd) {
                    *d += *g * *o;
                }
            });
            accumulate(grads, values, *b, |db| {
                for ((d, g), o) in db.iter_mut().zip(dy).zip(ad) {
                    *d += *g * *o;
                }
            });
        }
        Op::Sum { x } => {
            let g = dy[0];
            accumulate(grads, values, *x, |dx| dx.iter_mut().for_each(|d| *d += g));
        }
        Op::Bce { x, labels } => {
            let xd = &values[x.0].data;
            let scale = dy[0] / T::of_usize(labels.len().max(1));
            accumulate(grads, values, *x, |dx| {
                for ((d, &logit), &y) in dx.iter_mut().zip(xd).zip(labels) {
                    *d += scale * (sigmoid(logit) - y);
                }
            });
        }
    }
}

fn add_into<T: Float>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
