use autodiff::{Float, Tensor};
use rpm::RpmItem;

use crate::error::{CoreError, Result};

/// One binary sample: the 9 entries with choice `choice` in the last cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySample {
    pub choice: usize,
    /// `[9, res, res]` raw gray levels.
    pub pixels: Vec<u8>,
    pub label: bool,
}

/// Expands an item into its 8 candidate completions; exactly one is
/// labelled positive.
pub fn expand_single_choice(item: &RpmItem) -> Vec<BinarySample> {
    let plane = item.resolution as usize * item.resolution as usize;
    (0..8)
        .map(|c| {
            let mut pixels = Vec::with_capacity(9 * plane);
            for cell in 0..8 {
                pixels.extend_from_slice(item.context_panel(cell));
            }
            pixels.extend_from_slice(item.choice_panel(c));
            BinarySample { choice: c, pixels, label: c == item.target as usize }
        })
        .collect()
}

/// Ink intensity: white background maps to 0, black outline to 1.
pub fn normalize<T: Float>(p: u8) -> T {
    T::of(f64::from(255 - p) / 255.0)
}

pub fn check_resolution(items: &[RpmItem], resolution: usize) -> Result<()> {
    match items.iter().position(|it| it.resolution as usize != resolution) {
        Some(i) => Err(CoreError::Dataset(format!(
            "item {i} has resolution {}, model expects {resolution}",
            items[i].resolution
        ))),
        None => Ok(()),
    }
}

/// Stacks `(item, choice)` pairs into `[B, 3, 3, res, res, 1]` plus labels.
pub fn batch<T: Float>(items: &[RpmItem], picks: &[(usize, usize)]) -> Result<(Tensor<T>, Vec<T>)> {
    let res =
        items.get(picks.first().map_or(0, |p| p.0)).ok_or_else(|| CoreError::Dataset("empty batch".into()))?.resolution
            as usize;
    let plane = res * res;
    let mut data = Vec::with_capacity(picks.len() * 9 * plane);
    let mut labels = Vec::with_capacity(picks.len());
    for &(i, c) in picks {
        let item = &items[i];
        if item.resolution as usize != res {
            return Err(CoreError::Dataset(format!("item {i}: mixed resolutions in one batch")));
        }
        for cell in 0..8 {
            data.extend(item.context_panel(cell).iter().map(|&p| normalize::<T>(p)));
        }
        data.extend(item.choice_panel(c).iter().map(|&p| normalize::<T>(p)));
        labels.push(if c == item.target as usize { T::one() } else { T::zero() });
    }
    let t = Tensor::from_vec(&[picks.len(), 3, 3, res, res, 1], data)?;
    Ok((t, labels))
}
