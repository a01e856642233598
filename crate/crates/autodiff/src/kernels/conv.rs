use crate::error::{Result, TensorError};
use crate::scalar::Float;

/// Spatial padding mode, following the usual `same` / `valid` convention:
/// `same` yields `ceil(in / stride)` outputs and splits odd padding so the
/// extra row/column goes to the bottom/right.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

/// Upper bound on the number of im2col elements materialized at once.
const COL_BUDGET: usize = 1 << 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub cout: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

/// Output extent and leading pad for one spatial axis.
pub(crate) fn axis_geometry(
    op: &'static str,
    input: usize,
    window: usize,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(TensorError::invalid(op, "stride must be >= 1"));
    }
    if window == 0 {
        return Err(TensorError::invalid(op, "window extent must be >= 1"));
    }
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + window).saturating_sub(input);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if window > input {
                return Err(TensorError::invalid(op, format!("window {window} exceeds unpadded input extent {input}")));
            }
            Ok(((input - window) / stride + 1, 0))
        }
    }
}

impl ConvGeom {
    pub fn new(input: &[usize], kernel: &[usize], stride: usize, padding: Padding) -> Result<Self> {
        if input.len() != 4 || kernel.len() != 4 || input[3] != kernel[2] {
            return Err(TensorError::shapes("conv2d", input, kernel));
        }
        let (out_h, pad_top) = axis_geometry("conv2d", input[1], kernel[0], stride, padding)?;
        let (out_w, pad_left) = axis_geometry("conv2d", input[2], kernel[1], stride, padding)?;
        Ok(Self {
            n: input[0],
            h: input[1],
            w: input[2],
            cin: input[3],
            kh: kernel[0],
            kw: kernel[1],
            cout: kernel[3],
            stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        })
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.n, self.out_h, self.out_w, self.cout]
    }

    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1
    }

    fn images_per_chunk(&self) -> usize {
        let per_image = self.out_h * self.out_w * self.patch_len();
        (COL_BUDGET / per_image.max(1)).max(1)
    }

    /// Input row/column for output position `o` and kernel tap `k`, if in bounds.
    #[inline]
    fn source(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        (o * stride + k).checked_sub(pad).filter(|&i| i < extent)
    }
}

/// Valid kernel-tap range `[lo, hi)` along one axis for output position `o`.
#[inline]
fn tap_range(o: usize, stride: usize, pad: usize, extent: usize, window: usize) -> (usize, usize) {
    let start = o * stride;
    let lo = pad.saturating_sub(start).min(window);
    let hi = (extent + pad).saturating_sub(start).min(window).max(lo);
    (lo, hi)
}

fn im2col<T: Float>(x: &[T], g: &ConvGeom, images: std::ops::Range<usize>, col: &mut [T]) {
    let patch = g.patch_len();
    let span = g.kw * g.cin;
    let mut row = 0;
    for n in images {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let dst = &mut col[row * patch..(row + 1) * patch];
                let (lo, hi) = tap_range(ox, g.stride, g.pad_left, g.w, g.kw);
                for ky in 0..g.kh {
                    let seg = &mut dst[ky * span..(ky + 1) * span];
                    let Some(iy) = ConvGeom::source(oy, ky, g.stride, g.pad_top, g.h) else {
                        seg.fill(T::zero());
                        continue;
                    };
                    seg[..lo * g.cin].fill(T::zero());
                    seg[hi * g.cin..].fill(T::zero());
                    if hi > lo {
                        let ix = ox * g.stride + lo - g.pad_left;
                        let src = ((n * g.h + iy) * g.w + ix) * g.cin;
                        seg[lo * g.cin..hi * g.cin].copy_from_slice(&x[src..src + (hi - lo) * g.cin]);
                    }
                }
                row += 1;
            }
        }
    }
}

fn col2im<T: Float>(col: &[T], g: &ConvGeom, images: std::ops::Range<usize>, dx: &mut [T]) {
    let patch = g.patch_len();
    let span = g.kw * g.cin;
    let mut row = 0;
    for n in images {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let src = &col[row * patch..(row + 1) * patch];
                let (lo, hi) = tap_range(ox, g.stride, g.pad_left, g.w, g.kw);
                row += 1;
                if hi == lo {
                    continue;
                }
                let ix = ox * g.stride + lo - g.pad_left;
                for ky in 0..g.kh {
                    let Some(iy) = ConvGeom::source(oy, ky, g.stride, g.pad_top, g.h) else {
                        continue;
                    };
                    let dst = ((n * g.h + iy) * g.w + ix) * g.cin;
                    let seg = &src[ky * span + lo * g.cin..ky * span + hi * g.cin];
                    for (d, s) in dx[dst..dst + seg.len()].iter_mut().zip(seg) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// Channel-last convolution: `x [N,H,W,Cin] * k [kh,kw,Cin,Cout] -> [N,H',W',Cout]`.
pub fn conv2d_forward<T: Float>(x: &[T], kernel: &[T], bias: Option<&[T]>, g: &ConvGeom) -> Vec<T> {
    let rows_per_image = g.out_h * g.out_w;
    let patch = g.patch_len();
    let mut out = vec![T::zero(); g.n * rows_per_image * g.cout];
    let step = g.images_per_chunk();
    let mut col = Vec::new();
    let mut n0 = 0;
    while n0 < g.n {
        let n1 = (n0 + step).min(g.n);
        let rows = (n1 - n0) * rows_per_image;
        let dst = &mut out[n0 * rows_per_image * g.cout..n1 * rows_per_image * g.cout];
        if g.is_pointwise() && g.pad_top == 0 && g.pad_left == 0 {
            let src = &x[n0 * g.h * g.w * g.cin..n1 * g.h * g.w * g.cin];
            T::gemm(rows, patch, g.cout, src, false, kernel, false, dst, false);
        } else {
            col.resize(rows * patch, T::zero());
            im2col(x, g, n0..n1, &mut col);
            T::gemm(rows, patch, g.cout, &col, false, kernel, false, dst, false);
        }
        n0 = n1;
    }
    if let Some(b) = bias {
        for px in out.chunks_exact_mut(g.cout) {
            for (o, bv) in px.iter_mut().zip(b) {
                *o += *bv;
            }
        }
    }
    out
}

/// Accumulates input and kernel gradients (`+=`) for [`conv2d_forward`].
pub fn conv2d_backward<T: Float>(
    x: &[T],
    kernel: &[T],
    g: &ConvGeom,
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dk: Option<&mut [T]>,
) {
    let rows_per_image = g.out_h * g.out_w;
    let patch = g.patch_len();
    let step = g.images_per_chunk();
    let mut col = Vec::new();
    let mut dcol = Vec::new();
    let mut n0 = 0;
    while n0 < g.n {
        let n1 = (n0 + step).min(g.n);
        let rows = (n1 - n0) * rows_per_image;
        let dy_chunk = &dy[n0 * rows_per_image * g.cout..n1 * rows_per_image * g.cout];
        let pointwise = g.is_pointwise() && g.pad_top == 0 && g.pad_left == 0;
        if let Some(dk) = dk.as_deref_mut() {
            if pointwise {
                let src = &x[n0 * g.h * g.w * g.cin..n1 * g.h * g.w * g.cin];
                T::gemm(patch, rows, g.cout, src, true, dy_chunk, false, dk, true);
            } else {
                col.resize(rows * patch, T::zero());
                im2col(x, g, n0..n1, &mut col);
                T::gemm(patch, rows, g.cout, &col, true, dy_chunk, false, dk, true);
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            if pointwise {
                let dst = &mut dx[n0 * g.h * g.w * g.cin..n1 * g.h * g.w * g.cin];
                T::gemm(rows, g.cout, patch, dy_chunk, false, kernel, true, dst, true);
            } else {
                dcol.resize(rows * patch, T::zero());
                T::gemm(rows, g.cout, patch, dy_chunk, false, kernel, true, &mut dcol, false);
                col2im(&dcol, g, n0..n1, dx);
            }
        }
        n0 = n1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct seven-loop convolution used as an oracle.
    fn direct(x: &[f64], k: &[f64], g: &ConvGeom) -> Vec<f64> {
        let mut out = vec![0.0; g.n * g.out_h * g.out_w * g.cout];
        for n in 0..g.n {
            for oy in 0..g.out_h {
                for ox in 0..g.out_w {
                    for co in 0..g.cout {
                        let mut acc = 0.0;
                        for ky in 0..g.kh {
                            for kx in 0..g.kw {
                                let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                                let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                                if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                                    continue;
                                }
                                for ci in 0..g.cin {
                                    let xv = x[((n * g.h + iy as usize) * g.w + ix as usize) * g.cin + ci];
                                    let kv = k[((ky * g.kw + kx) * g.cin + ci) * g.cout + co];
                                    acc += xv * kv;
                                }
                            }
                        }
                        out[((n * g.out_h + oy) * g.out_w + ox) * g.cout + co] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_gemm_matches_direct_loops() {
        for &(h, w, k, s, pad) in &[
            (7, 5, 3, 1, Padding::Same),
            (8, 8, 7, 2, Padding::Same),
            (6, 9, 2, 3, Padding::Valid),
            (5, 5, 1, 1, Padding::Same),
            (4, 4, 4, 2, Padding::Same),
        ] {
            let g = ConvGeom::new(&[2, h, w, 3], &[k, k, 3, 4], s, pad).unwrap();
            let x: Vec<f64> = (0..2 * h * w * 3).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
            let kern: Vec<f64> = (0..k * k * 12).map(|i| ((i * 5 % 11) as f64) * 0.1 - 0.5).collect();
            let got = conv2d_forward(&x, &kern, None, &g);
            let want = direct(&x, &kern, &g);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-9, "{h}x{w} k{k} s{s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn same_padding_extent_is_ceil_division() {
        for input in 1..=100 {
            for stride in 1..=3 {
                for window in [1, 3, 7] {
                    let (out, _) = axis_geometry("t", input, window, stride, Padding::Same).unwrap();
                    assert_eq!(out, input.div_ceil(stride));
                }
            }
        }
    }

    #[test]
    fn valid_padding_rejects_oversized_kernel() {
        assert!(ConvGeom::new(&[1, 2, 2, 1], &[3, 3, 1, 1], 1, Padding::Valid).is_err());
        assert!(ConvGeom::new(&[1, 2, 2, 2], &[1, 1, 1, 1], 1, Padding::Valid).is_err());
    }
}
