use std::fmt;
use std::str::FromStr;

use crate::error::RpmError;

/// Axis-aligned box in normalized panel coordinates (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl SlotBox {
    const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }
}

/// One independently governed group of slots inside an entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLayout {
    pub slots: Vec<SlotBox>,
    /// Smallest permitted size level; outer frames stay large so inner
    /// objects remain visible.
    pub min_size: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Configuration {
    Center,
    Grid2x2,
    Grid3x3,
    LeftRight,
    UpDown,
    OutInCenter,
    OutInGrid,
}

impl Configuration {
    /// Report order: Center, 2x2Grid, 3x3Grid, L-R, U-D, O-IC, O-IG.
    pub const ALL: [Configuration; 7] = [
        Configuration::Center,
        Configuration::Grid2x2,
        Configuration::Grid3x3,
        Configuration::LeftRight,
        Configuration::UpDown,
        Configuration::OutInCenter,
        Configuration::OutInGrid,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Configuration::Center => "Center",
            Configuration::Grid2x2 => "2x2Grid",
            Configuration::Grid3x3 => "3x3Grid",
            Configuration::LeftRight => "Left-Right",
            Configuration::UpDown => "Up-Down",
            Configuration::OutInCenter => "Out-InCenter",
            Configuration::OutInGrid => "Out-InGrid",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Configuration::Center => "Center",
            Configuration::Grid2x2 => "2x2Grid",
            Configuration::Grid3x3 => "3x3Grid",
            Configuration::LeftRight => "L-R",
            Configuration::UpDown => "U-D",
            Configuration::OutInCenter => "O-IC",
            Configuration::OutInGrid => "O-IG",
        }
    }

    /// Configurations with a multi-slot component, the only ones able to
    /// host Number and Position rules.
    pub fn is_grid(self) -> bool {
        matches!(self, Configuration::Grid2x2 | Configuration::Grid3x3 | Configuration::OutInGrid)
    }

    pub fn components(self) -> Vec<ComponentLayout> {
        let single = |b: SlotBox, min_size| ComponentLayout { slots: vec![b], min_size };
        let grid = |origin: f64, cell: f64, n: usize| ComponentLayout {
            slots: (0..n * n)
                .map(|i| SlotBox::new(origin + cell * (i % n) as f64, origin + cell * (i / n) as f64, cell, cell))
                .collect(),
            min_size: 1,
        };
        let whole = SlotBox::new(0.0, 0.0, 1.0, 1.0);
        match self {
            Configuration::Center => vec![single(whole, 1)],
            Configuration::Grid2x2 => vec![grid(0.0, 0.5, 2)],
            Configuration::Grid3x3 => vec![grid(0.0, 1.0 / 3.0, 3)],
            Configuration::LeftRight => {
                vec![single(SlotBox::new(0.0, 0.25, 0.5, 0.5), 1), single(SlotBox::new(0.5, 0.25, 0.5, 0.5), 1)]
            }
            Configuration::UpDown => {
                vec![single(SlotBox::new(0.25, 0.0, 0.5, 0.5), 1), single(SlotBox::new(0.25, 0.5, 0.5, 0.5), 1)]
            }
            Configuration::OutInCenter => {
                vec![single(whole, 3), single(SlotBox::new(0.335, 0.335, 0.33, 0.33), 1)]
            }
            Configuration::OutInGrid => vec![single(whole, 3), grid(0.25, 0.25, 2)],
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Configuration {
    type Err = RpmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s) || c.short_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| RpmError::InvalidArgument(format!("unknown configuration {s:?}")))
    }
}
