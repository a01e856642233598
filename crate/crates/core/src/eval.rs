use std::fmt::Write as _;

use autodiff::{Float, Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpm::{solve_symbolic, Configuration, RpmItem};

use crate::data::{check_resolution, normalize};
use crate::error::{CoreError, Result};
use crate::model::{scores, CpcNet, Mode};

/// Scores the 8 choices of each item; higher is better.
pub trait Scorer {
    fn score_items(&self, items: &[RpmItem]) -> Result<Vec<[f64; 8]>>;
}

/// Items scored per forward pass when evaluating a model.
const EVAL_ITEMS: usize = 4;

/// Inference-mode scoring. Each item's 16 panels are encoded once and the
/// encodings are shared by its 8 candidate matrices; with running BN
/// statistics this equals encoding every candidate matrix separately.
impl<T: Float> Scorer for CpcNet<T> {
    fn score_items(&self, items: &[RpmItem]) -> Result<Vec<[f64; 8]>> {
        check_resolution(items, self.config.resolution)?;
        if self.config.rows != 3 || self.config.cols != 3 {
            return Err(CoreError::Config("scoring RPM items needs a 3x3 model".into()));
        }
        let res = self.config.resolution;
        let plane = res * res;
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(EVAL_ITEMS) {
            let n = chunk.len();
            let mut pixels = Vec::with_capacity(n * 16 * plane);
            for it in chunk {
                pixels.extend(it.images.iter().map(|&p| normalize::<T>(p)));
            }
            let mut g = Graph::new();
            let bind = self.constant_bindings(&mut g)?;
            let x = g.constant(&Tensor::from_vec(&[n * 16, res, res, 1], pixels)?)?;
            let enc = self.encode_panels(&mut g, x, &bind, Mode::Infer)?;
            let (enc_shape, enc_data) = (g.shape(enc).to_vec(), g.data(enc));
            let cell = enc_data.len() / (n * 16);
            let mut z = Vec::with_capacity(n * 8 * 9 * cell);
            for i in 0..n {
                let panels = &enc_data[i * 16 * cell..(i + 1) * 16 * cell];
                for c in 0..8 {
                    z.extend_from_slice(&panels[..8 * cell]);
                    z.extend_from_slice(&panels[(8 + c) * cell..(9 + c) * cell]);
                }
            }
            let z = g.constant(&Tensor::from_vec(&[n * 8 * 9, enc_shape[1], enc_shape[2], enc_shape[3]], z)?)?;
            let f = self.forward_encoded(&mut g, z, n * 8, &bind, Mode::Infer)?;
            let y1 = f.y1.map(|v| g.data(v).to_vec());
            let y2 = f.y2.map(|v| g.data(v).to_vec());
            let s = scores(&y1, &y2, n * 8);
            for row in s.chunks(8) {
                out.push(std::array::from_fn(|c| row[c].as_f64()));
            }
        }
        Ok(out)
    }
}

/// Scores 1 for the stored target and 0 elsewhere.
pub struct TargetStub;

impl Scorer for TargetStub {
    fn score_items(&self, items: &[RpmItem]) -> Result<Vec<[f64; 8]>> {
        Ok(items
            .iter()
            .map(|it| {
                let mut s = [0.0; 8];
                s[it.target as usize] = 1.0;
                s
            })
            .collect())
    }
}

/// Scores every choice equally.
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score_items(&self, items: &[RpmItem]) -> Result<Vec<[f64; 8]>> {
        Ok(vec![[self.0; 8]; items.len()])
    }
}

/// Independent uniform scores drawn from a per-item stream, so the result
/// does not depend on batching or item order.
pub struct RandomScorer(pub u64);

impl Scorer for RandomScorer {
    fn score_items(&self, items: &[RpmItem]) -> Result<Vec<[f64; 8]>> {
        Ok((0..items.len())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(autodiff::init::splitmix64(
                    self.0 ^ (i as u64).wrapping_mul(0x9e37_79b9),
                ));
                std::array::from_fn(|_| rng.gen::<f64>())
            })
            .collect())
    }
}

/// Picks the choice found by the symbolic solver; needs symbolic items.
pub struct SymbolicOracle;

impl Scorer for SymbolicOracle {
    fn score_items(&self, items: &[RpmItem]) -> Result<Vec<[f64; 8]>> {
        items
            .iter()
            .enumerate()
            .map(|(i, it)| {
                let sym =
                    it.symbolic.as_ref().ok_or_else(|| CoreError::Dataset(format!("item {i} has no symbolic form")))?;
                let (best, _) = solve_symbolic(sym)?;
                let mut s = [0.0; 8];
                s[best] = 1.0;
                Ok(s)
            })
            .collect()
    }
}

/// Index of the highest score; ties go to the lowest index.
pub fn argmax(scores: &[f64; 8]) -> usize {
    let mut best = 0;
    for i in 1..8 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    /// `(correct, total)` per configuration, [`Configuration::ALL`] order.
    pub per_config: [(usize, usize); 7],
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl EvalReport {
    pub fn items(&self) -> usize {
        self.per_config.iter().map(|p| p.1).sum()
    }

    pub fn correct(&self) -> usize {
        self.per_config.iter().map(|p| p.0).sum()
    }

    /// Item-weighted accuracy in [0, 1]; 0 for an empty report.
    pub fn overall(&self) -> f64 {
        match self.items() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    pub fn accuracy(&self, c: Configuration) -> Option<f64> {
        let (k, n) = self.per_config[c.id() as usize];
        (n > 0).then(|| k as f64 / n as f64)
    }

    fn group_mean(&self, grid: bool) -> Option<f64> {
        let accs: Vec<f64> =
            Configuration::ALL.into_iter().filter(|c| c.is_grid() == grid).filter_map(|c| self.accuracy(c)).collect();
        mean(&accs)
    }

    /// Unweighted mean over the grid configurations present.
    pub fn grid_mean(&self) -> Option<f64> {
        self.group_mean(true)
    }

    pub fn non_grid_mean(&self) -> Option<f64> {
        self.group_mean(false)
    }

    /// Non-grid mean minus grid mean.
    pub fn gap(&self) -> Option<f64> {
        Some(self.non_grid_mean()? - self.grid_mean()?)
    }

    /// Percentages in the order Avg, Center, 2x2Grid, 3x3Grid, L-R, U-D,
    /// O-IC, O-IG, then a `key=value` block.
    pub fn render(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |a| format!("{:.2}", 100.0 * a));
        let mut s = String::new();
        let _ = write!(s, "{:>8}", "Avg");
        for c in Configuration::ALL {
            let _ = write!(s, "{:>9}", c.short_name());
        }
        s.push('\n');
        let _ = write!(s, "{:>8}", pct((self.items() > 0).then(|| self.overall())));
        for c in Configuration::ALL {
            let _ = write!(s, "{:>9}", pct(self.accuracy(c)));
        }
        s.push_str("\n\n");
        s.push_str(&self.key_values());
        s
    }

    pub fn key_values(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |a| format!("{a:.6}"));
        let mut s = String::new();
        let _ = writeln!(s, "items={}", self.items());
        let _ = writeln!(s, "correct={}", self.correct());
        let _ = writeln!(s, "accuracy={:.6}", self.overall());
        for c in Configuration::ALL {
            let _ = writeln!(s, "accuracy.{}={}", c.short_name(), opt(self.accuracy(c)));
        }
        let _ = writeln!(s, "grid_mean={}", opt(self.grid_mean()));
        let _ = writeln!(s, "non_grid_mean={}", opt(self.non_grid_mean()));
        let _ = writeln!(s, "gap={}", opt(self.gap()));
        s
    }
}

/// Single-choice protocol: each item's prediction is the argmax of its
/// eight independent choice scores.
pub fn evaluate_single_choice<S: Scorer + ?Sized>(scorer: &S, items: &[RpmItem]) -> Result<EvalReport> {
    let scores = scorer.score_items(items)?;
    if scores.len() != items.len() {
        return Err(CoreError::Dataset(format!("scorer returned {} rows for {} items", scores.len(), items.len())));
    }
    let mut report = EvalReport::default();
    for (item, s) in items.iter().zip(&scores) {
        let slot = &mut report.per_config[item.config.id() as usize];
        slot.1 += 1;
        if argmax(s) == item.target as usize {
            slot.0 += 1;
        }
    }
    Ok(report)
}

/// Fraction of binary samples whose score sign matches the label.
pub fn binary_accuracy<S: Scorer + ?Sized>(scorer: &S, items: &[RpmItem]) -> Result<f64> {
    let scores = scorer.score_items(items)?;
    let mut hits = 0usize;
    for (item, s) in items.iter().zip(&scores) {
        for (c, &v) in s.iter().enumerate() {
            hits += usize::from((v > 0.0) == (c == item.target as usize));
        }
    }
    Ok(if items.is_empty() { 0.0 } else { hits as f64 / (8 * items.len()) as f64 })
}
