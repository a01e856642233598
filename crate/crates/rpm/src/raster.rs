//! Integer-grid scanline renderer. No anti-aliasing; a pixel is inked when
//! its center lies inside the shape, so output is byte-exact everywhere.

use crate::config::{Configuration, SlotBox};
use crate::error::{Result, RpmError};
use crate::item::{Entry, Shape, SymbolicItem};

pub const MIN_RESOLUTION: u16 = 16;
pub const BACKGROUND: u8 = 255;
pub const OUTLINE: u8 = 0;

const S3_2: f64 = 0.866_025_403_784_438_6;
const S2_2: f64 = 0.707_106_781_186_547_6;

// Unit-circumradius vertices, y pointing down.
const TRIANGLE: [(f64, f64); 3] = [(0.0, -1.0), (S3_2, 0.5), (-S3_2, 0.5)];
const SQUARE: [(f64, f64); 4] = [(-S2_2, -S2_2), (S2_2, -S2_2), (S2_2, S2_2), (-S2_2, S2_2)];
const PENTAGON: [(f64, f64); 5] = [
    (0.0, -1.0),
    (0.951_056_516_295_153_5, -0.309_016_994_374_947_45),
    (0.587_785_252_292_473_1, 0.809_016_994_374_947_5),
    (-0.587_785_252_292_473_1, 0.809_016_994_374_947_5),
    (-0.951_056_516_295_153_5, -0.309_016_994_374_947_45),
];
const HEXAGON: [(f64, f64); 6] = [(1.0, 0.0), (0.5, S3_2), (-0.5, S3_2), (-1.0, 0.0), (-0.5, -S3_2), (0.5, -S3_2)];

/// Ratio of inradius to circumradius, used to inset the fill by a uniform
/// outline width.
fn apothem(shape: Shape) -> f64 {
    match shape {
        Shape::Triangle => 0.5,
        Shape::Square => S2_2,
        Shape::Pentagon => 0.809_016_994_374_947_5,
        Shape::Hexagon => S3_2,
        Shape::Circle => 1.0,
    }
}

/// Fraction of the slot's shorter side spanned by the circumcircle.
pub fn size_scale(level: u8) -> f64 {
    0.45 + 0.1 * (level.clamp(1, 6) - 1) as f64
}

pub fn fill_gray(color: u8) -> u8 {
    255 - 25 * color.min(9)
}

struct Canvas<'a> {
    px: &'a mut [u8],
    res: usize,
}

impl Canvas<'_> {
    /// Fills pixels whose centers fall in `[x0, x1)` on row `y`.
    fn span(&mut self, y: usize, x0: f64, x1: f64, value: u8) {
        let start = (x0 - 0.5).ceil().max(0.0) as usize;
        let end = ((x1 - 0.5).ceil().max(0.0) as usize).min(self.res);
        for x in start..end {
            self.px[y * self.res + x] = value;
        }
    }

    fn polygon(&mut self, cx: f64, cy: f64, r: f64, verts: &[(f64, f64)], value: u8) {
        let pts: Vec<(f64, f64)> = verts.iter().map(|&(x, y)| (cx + r * x, cy + r * y)).collect();
        for y in 0..self.res {
            let sy = y as f64 + 0.5;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..pts.len() {
                let (x0, y0) = pts[i];
                let (x1, y1) = pts[(i + 1) % pts.len()];
                let (ya, yb) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
                if sy < ya || sy >= yb {
                    continue;
                }
                let x = x0 + (sy - y0) * (x1 - x0) / (y1 - y0);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if lo < hi {
                self.span(y, lo, hi, value);
            }
        }
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, value: u8) {
        for y in 0..self.res {
            let dy = y as f64 + 0.5 - cy;
            let q = r * r - dy * dy;
            if q <= 0.0 {
                continue;
            }
            let h = q.sqrt();
            self.span(y, cx - h, cx + h, value);
        }
    }

    fn shape(&mut self, shape: Shape, cx: f64, cy: f64, r: f64, value: u8) {
        match shape {
            Shape::Triangle => self.polygon(cx, cy, r, &TRIANGLE, value),
            Shape::Square => self.polygon(cx, cy, r, &SQUARE, value),
            Shape::Pentagon => self.polygon(cx, cy, r, &PENTAGON, value),
            Shape::Hexagon => self.polygon(cx, cy, r, &HEXAGON, value),
            Shape::Circle => self.circle(cx, cy, r, value),
        }
    }
}

fn draw_object(canvas: &mut Canvas, slot: &SlotBox, shape: Shape, size: u8, color: u8) {
    let res = canvas.res as f64;
    let cx = (slot.x + slot.w / 2.0) * res;
    let cy = (slot.y + slot.h / 2.0) * res;
    let r = size_scale(size) * slot.w.min(slot.h) * res / 2.0;
    let stroke = (res / 40.0).max(1.0);
    canvas.shape(shape, cx, cy, r, OUTLINE);
    let inner = r - stroke / apothem(shape);
    if inner > 0.0 {
        canvas.shape(shape, cx, cy, inner, fill_gray(color));
    }
}

/// Renders one entry into a `res × res` plane.
pub fn rasterize_entry(config: Configuration, entry: &Entry, resolution: u16) -> Result<Vec<u8>> {
    if resolution < MIN_RESOLUTION {
        return Err(RpmError::InvalidArgument(format!(
            "resolution {resolution} is below the minimum of {MIN_RESOLUTION}"
        )));
    }
    let res = resolution as usize;
    let mut px = vec![BACKGROUND; res * res];
    let mut canvas = Canvas { px: &mut px, res };
    for (layout, state) in config.components().iter().zip(&entry.components) {
        for (i, slot) in layout.slots.iter().enumerate() {
            if state.positions >> i & 1 == 1 {
                draw_object(&mut canvas, slot, Shape::from_level(state.ty), state.size, state.color);
            }
        }
    }
    Ok(px)
}

/// Renders the 8 context entries followed by the 8 choices.
pub fn rasterize(item: &SymbolicItem, resolution: u16) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 * resolution as usize * resolution as usize);
    for e in item.context.iter().chain(&item.choices) {
        out.extend(rasterize_entry(item.config, e, resolution)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::item::ComponentState;

    fn center(ty: u8, size: u8, color: u8) -> Entry {
        Entry { components: vec![ComponentState { positions: 1, ty, size, color }] }
    }

    fn ink_bbox(px: &[u8], res: usize) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for y in 0..res {
            for x in 0..res {
                if px[y * res + x] != BACKGROUND {
                    b = Some(match b {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        b
    }

    #[test]
    fn empty_entry_is_white() {
        let e = Entry { components: vec![ComponentState { positions: 0, ty: 0, size: 1, color: 0 }] };
        let px = rasterize_entry(Configuration::Grid2x2, &e, 32).unwrap();
        assert!(px.iter().all(|&p| p == BACKGROUND));
    }

    #[test]
    fn max_circle_fills_slot() {
        let px = rasterize_entry(Configuration::Center, &center(4, 6, 3), 80).unwrap();
        let (x0, y0, x1, y1) = ink_bbox(&px, 80).unwrap();
        assert!(x0 <= 4 && y0 <= 4 && x1 >= 75 && y1 >= 75, "{:?}", (x0, y0, x1, y1));
        assert_eq!(px[40 * 80 + 40], fill_gray(3));
        assert_eq!(px[40 * 80 + x0], OUTLINE);
    }

    #[test]
    fn shapes_and_colors_render_distinctly() {
        let mut seen = Vec::new();
        for ty in 0..5 {
            for color in [0, 9] {
                let px = rasterize_entry(Configuration::Center, &center(ty, 3, color), 32).unwrap();
                assert!(!seen.contains(&px));
                seen.push(px);
            }
        }
    }

    #[test]
    fn rejects_tiny_resolution() {
        assert!(rasterize_entry(Configuration::Center, &center(0, 1, 0), 15).is_err());
    }
}
