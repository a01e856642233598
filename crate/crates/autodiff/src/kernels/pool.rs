use super::conv::axis_geometry;
use super::Padding;
use crate::error::{Result, TensorError};
use crate::scalar::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolGeom {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub pool: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolGeom {
    pub fn new(input: &[usize], pool: usize, stride: usize, padding: Padding) -> Result<Self> {
        if input.len() != 4 {
            return Err(TensorError::invalid("maxpool2d", format!("expected [N,H,W,C], got {input:?}")));
        }
        let (out_h, pad_top) = axis_geometry("maxpool2d", input[1], pool, stride, padding)?;
        let (out_w, pad_left) = axis_geometry("maxpool2d", input[2], pool, stride, padding)?;
        Ok(Self { n: input[0], h: input[1], w: input[2], c: input[3], pool, stride, pad_top, pad_left, out_h, out_w })
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.n, self.out_h, self.out_w, self.c]
    }
}

/// Max pooling; padded cells never win. Returns the output and, for each
/// output cell, the flat input index of the first (row-major) maximum.
pub fn maxpool2d_forward<T: Float>(x: &[T], g: &PoolGeom) -> (Vec<T>, Vec<u32>) {
    let len = g.n * g.out_h * g.out_w * g.c;
    let mut out = Vec::with_capacity(len);
    let mut arg = Vec::with_capacity(len);
    for n in 0..g.n {
        for oy in 0..g.out_h {
            let y0 = (oy * g.stride).saturating_sub(g.pad_top);
            let y1 = (oy * g.stride + g.pool).saturating_sub(g.pad_top).min(g.h);
            for ox in 0..g.out_w {
                let x0 = (ox * g.stride).saturating_sub(g.pad_left);
                let x1 = (ox * g.stride + g.pool).saturating_sub(g.pad_left).min(g.w);
                for c in 0..g.c {
                    let mut best = T::neg_infinity();
                    let mut best_i = 0usize;
                    for iy in y0..y1 {
                        for ix in x0..x1 {
                            let i = ((n * g.h + iy) * g.w + ix) * g.c + c;
                            if x[i] > best {
                                best = x[i];
                                best_i = i;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_i as u32);
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool2d_backward<T: Float>(argmax: &[u32], dy: &[T], dx: &mut [T]) {
    for (&i, &d) in argmax.iter().zip(dy) {
        dx[i as usize] += d;
    }
}
