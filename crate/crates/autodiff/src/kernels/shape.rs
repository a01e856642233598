use crate::scalar::Float;

/// Splits `shape` around `axis` into `(outer, len, inner)` extents.
pub fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub fn mean_axis<T: Float>(x: &[T], shape: &[usize], axis: usize) -> Vec<T> {
    let (outer, len, inner) = split_axis(shape, axis);
    let inv = T::one() / T::of_usize(len);
    let mut out = vec![T::zero(); outer * inner];
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for j in 0..len {
            let src = &x[(o * len + j) * inner..(o * len + j + 1) * inner];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
        dst.iter_mut().for_each(|d| *d *= inv);
    }
    out
}

pub fn mean_axis_backward<T: Float>(dy: &[T], shape: &[usize], axis: usize, dx: &mut [T]) {
    let (outer, len, inner) = split_axis(shape, axis);
    let inv = T::one() / T::of_usize(len);
    for o in 0..outer {
        let src = &dy[o * inner..(o + 1) * inner];
        for j in 0..len {
            let dst = &mut dx[(o * len + j) * inner..(o * len + j + 1) * inner];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s * inv;
            }
        }
    }
}

pub fn permute_shape(shape: &[usize], perm: &[usize]) -> Vec<usize> {
    perm.iter().map(|&p| shape[p]).collect()
}

/// Axis permutation: output axis `i` is input axis `perm[i]`.
/// When `accumulate` is set the result is added into `out`.
pub fn permute<T: Float>(x: &[T], shape: &[usize], perm: &[usize], out: &mut [T], accumulate: bool) {
    let rank = shape.len();
    let mut in_strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let out_shape = permute_shape(shape, perm);
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    // Innermost run: contiguous when the last axis stays last.
    let (run, run_stride) = (out_shape[rank - 1], strides[rank - 1]);
    let outer_rank = rank - 1;
    let mut idx = vec![0usize; outer_rank];
    let mut dst = 0;
    let total_runs: usize = out_shape[..outer_rank].iter().product();
    for _ in 0..total_runs {
        let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        let out_run = &mut out[dst..dst + run];
        if run_stride == 1 {
            let src = &x[base..base + run];
            if accumulate {
                out_run.iter_mut().zip(src).for_each(|(o, s)| *o += *s);
            } else {
                out_run.copy_from_slice(src);
            }
        } else {
            for (j, o) in out_run.iter_mut().enumerate() {
                let v = x[base + j * run_stride];
                if accumulate {
                    *o += v;
                } else {
                    *o = v;
                }
            }
        }
        dst += run;
        for a in (0..outer_rank).rev() {
            idx[a] += 1;
            if idx[a] < out_shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}
