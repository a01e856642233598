use std::fmt;
use std::str::FromStr;

use crate::error::{CoreError, Result};

/// Model variants. `UpperPath`/`LowerPath` remove a whole path, `NoConsistency`
/// drops the q cross-subtraction, `UpperHead`/`LowerHead` discard one
/// classification head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ablation {
    Full,
    UpperPath,
    LowerPath,
    NoConsistency,
    UpperHead,
    LowerHead,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::UpperPath,
        Ablation::LowerPath,
        Ablation::NoConsistency,
        Ablation::UpperHead,
        Ablation::LowerHead,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::UpperPath => "UP",
            Ablation::LowerPath => "LP",
            Ablation::NoConsistency => "IC",
            Ablation::UpperHead => "UC",
            Ablation::LowerHead => "LC",
        }
    }

    /// Whether path `p` (1 or 2) is computed at all.
    pub fn has_path(self, p: u8) -> bool {
        !matches!((self, p), (Ablation::UpperPath, 1) | (Ablation::LowerPath, 2))
    }

    /// Whether head `p` contributes to loss and score.
    pub fn has_head(self, p: u8) -> bool {
        self.has_path(p) && !matches!((self, p), (Ablation::UpperHead, 1) | (Ablation::LowerHead, 2))
    }

    /// q needs both paths and is removed by the IC variant.
    pub fn has_consistency(self) -> bool {
        matches!(self, Ablation::Full | Ablation::UpperHead | Ablation::LowerHead)
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Ablation {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| CoreError::Config(format!("unknown ablation {s:?} (expected full, UP, LP, IC, UC or LC)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl FromStr for Precision {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            _ => Err(CoreError::Config(format!("unknown precision {s:?} (expected f32 or f64)"))),
        }
    }
}

pub const STEM_CHANNELS: usize = 32;
pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CpcNetConfig {
    pub k: usize,
    pub l: usize,
    pub rows: usize,
    pub cols: usize,
    /// Side length of each (square) entry image.
    pub resolution: usize,
    pub ablation: Ablation,
    pub head_width: usize,
    pub precision: Precision,
}

impl Default for CpcNetConfig {
    fn default() -> Self {
        Self {
            k: 64,
            l: 5,
            rows: 3,
            cols: 3,
            resolution: 80,
            ablation: Ablation::Full,
            head_width: 128,
            precision: Precision::F32,
        }
    }
}

fn same_out(n: usize) -> usize {
    n.div_ceil(2)
}

impl CpcNetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CoreError::Config(m));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.head_width == 0 {
            return fail("head_width must be at least 1".into());
        }
        if self.rows == 0 || self.cols == 0 {
            return fail("matrix extents must be positive".into());
        }
        if self.resolution < 7 {
            return fail(format!("resolution {} is smaller than the 7x7 stem kernel", self.resolution));
        }
        Ok(())
    }

    /// Spatial extent after the encoder: four halvings with "same" padding
    /// except the stride-1 second convolution.
    pub fn feature_extent(&self) -> usize {
        same_out(same_out(same_out(self.resolution)))
    }

    /// Shape of one sample's encoding, `(R, C, H, W, K)`.
    pub fn encoding_shape(&self) -> [usize; 5] {
        let h = self.feature_extent();
        [self.rows, self.cols, h, h, self.k]
    }

    pub fn head_inputs(&self) -> usize {
        let h = self.feature_extent();
        self.rows * self.cols * h * h
    }

    /// `key=value` lines; `#` starts a comment.
    pub fn to_kv(&self) -> String {
        format!(
            "k={}\nl={}\nresolution={}\nablation={}\nhead_width={}\nprecision={}\n",
            self.k,
            self.l,
            self.resolution,
            self.ablation,
            self.head_width,
            self.precision.name()
        )
    }

    /// Parses `key=value` lines over the defaults. Unknown keys are errors.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| CoreError::Config(format!("line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| CoreError::Config(format!("line {}: {key} must be a non-negative integer", n + 1)))
            };
            match key {
                "k" => c.k = int(value)?,
                "l" => c.l = int(value)?,
                "resolution" => c.resolution = int(value)?,
                "head_width" => c.head_width = int(value)?,
                "ablation" => c.ablation = value.parse()?,
                "precision" => c.precision = value.parse()?,
                _ => return Err(CoreError::Config(format!("line {}: unknown key {key:?}", n + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_extents() {
        let c = CpcNetConfig::default();
        assert_eq!(c.encoding_shape(), [3, 3, 10, 10, 64]);
        assert_eq!(c.head_inputs(), 900);
        let c = CpcNetConfig { resolution: 40, k: 16, ..c };
        assert_eq!(c.encoding_shape(), [3, 3, 5, 5, 16]);
    }

    #[test]
    fn kv_round_trip() {
        let c = CpcNetConfig {
            k: 8,
            l: 2,
            resolution: 32,
            ablation: Ablation::NoConsistency,
            precision: Precision::F64,
            ..Default::default()
        };
        assert_eq!(CpcNetConfig::from_kv(&c.to_kv()).unwrap(), c);
        assert_eq!(CpcNetConfig::from_kv("# defaults\n\n").unwrap(), CpcNetConfig::default());
        assert!(CpcNetConfig::from_kv("k=0").is_err());
        assert!(CpcNetConfig::from_kv("depth=3").is_err());
        assert!(CpcNetConfig::from_kv("resolution=6").is_err());
    }

    #[test]
    fn ablation_structure() {
        assert!(!Ablation::UpperPath.has_path(1) && !Ablation::UpperPath.has_head(1));
        assert!(Ablation::UpperHead.has_path(1) && !Ablation::UpperHead.has_head(1));
        assert!(!Ablation::NoConsistency.has_consistency());
        assert!(!Ablation::LowerPath.has_consistency());
        assert_eq!("ic".parse::<Ablation>().unwrap(), Ablation::NoConsistency);
    }
}
