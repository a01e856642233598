use crate::scalar::Float;

/// Saved activations for the batch-norm backward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    /// Whether the normalization used batch statistics (train mode).
    pub batch_stats: bool,
}

/// Train-mode batch normalization over every axis but the last.
/// Returns `(y, cache, batch_mean, batch_var)`; the variance is the biased
/// (population) estimate.
pub fn batchnorm_train<T: Float>(
    x: &[T],
    channels: usize,
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> (Vec<T>, BatchNormCache<T>, Vec<T>, Vec<T>) {
    let m = x.len() / channels;
    let inv_m = T::one() / T::of_usize(m);
    let mut mean = vec![T::zero(); channels];
    for row in x.chunks_exact(channels) {
        for (s, v) in mean.iter_mut().zip(row) {
            *s += *v;
        }
    }
    mean.iter_mut().for_each(|s| *s *= inv_m);
    let mut var = vec![T::zero(); channels];
    for row in x.chunks_exact(channels) {
        for ((s, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            let d = *v - *mu;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s *= inv_m);
    let inv_std: Vec<T> = var.iter().map(|v| T::one() / (*v + eps).sqrt()).collect();
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for row in x.chunks_exact(channels) {
        for c in 0..channels {
            let xh = (row[c] - mean[c]) * inv_std[c];
            xhat.push(xh);
            y.push(gamma[c] * xh + beta[c]);
        }
    }
    let cache = BatchNormCache { xhat, inv_std, batch_stats: true };
    (y, cache, mean, var)
}

/// Inference-mode batch normalization using running statistics.
pub fn batchnorm_infer<T: Float>(
    x: &[T],
    channels: usize,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: T,
) -> (Vec<T>, BatchNormCache<T>) {
    let inv_std: Vec<T> = running_var.iter().map(|v| T::one() / (*v + eps).sqrt()).collect();
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for row in x.chunks_exact(channels) {
        for c in 0..channels {
            let xh = (row[c] - running_mean[c]) * inv_std[c];
            xhat.push(xh);
            y.push(gamma[c] * xh + beta[c]);
        }
    }
    let cache = BatchNormCache { xhat, inv_std, batch_stats: false };
    (y, cache)
}

/// Accumulates `dx`, `dgamma`, `dbeta` (`+=`).
pub fn batchnorm_backward<T: Float>(
    cache: &BatchNormCache<T>,
    gamma: &[T],
    dy: &[T],
    dx: Option<&mut [T]>,
    dgamma: Option<&mut [T]>,
    dbeta: Option<&mut [T]>,
) {
    let channels = gamma.len();
    let m = dy.len() / channels;
    let mut sum_dy = vec![T::zero(); channels];
    let mut sum_dy_xhat = vec![T::zero(); channels];
    for (drow, xrow) in dy.chunks_exact(channels).zip(cache.xhat.chunks_exact(channels)) {
        for c in 0..channels {
            sum_dy[c] += drow[c];
            sum_dy_xhat[c] += drow[c] * xrow[c];
        }
    }
    if let Some(dg) = dgamma {
        for (g, s) in dg.iter_mut().zip(&sum_dy_xhat) {
            *g += *s;
        }
    }
    if let Some(db) = dbeta {
        for (b, s) in db.iter_mut().zip(&sum_dy) {
            *b += *s;
        }
    }
    let Some(dx) = dx else { return };
    if cache.batch_stats {
        let mf = T::of_usize(m);
        let scale: Vec<T> = (0..channels).map(|c| gamma[c] * cache.inv_std[c] / mf).collect();
        for ((dxr, drow), xrow) in
            dx.chunks_exact_mut(channels).zip(dy.chunks_exact(channels)).zip(cache.xhat.chunks_exact(channels))
        {
            for c in 0..channels {
                dxr[c] += scale[c] * (mf * drow[c] - sum_dy[c] - xrow[c] * sum_dy_xhat[c]);
            }
        }
    } else {
        for (dxr, drow) in dx.chunks_exact_mut(channels).zip(dy.chunks_exact(channels)) {
            for c in 0..channels {
                dxr[c] += drow[c] * gamma[c] * cache.inv_std[c];
            }
        }
    }
}
