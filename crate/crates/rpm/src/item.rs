use crate::config::Configuration;
use crate::rules::{AttrGroup, Attribute, RuleSpec};

pub const SHAPE_COUNT: u8 = 5;
pub const SIZE_LEVELS: u8 = 6;
pub const COLOR_LEVELS: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Triangle,
    Square,
    Pentagon,
    Hexagon,
    Circle,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Triangle, Shape::Square, Shape::Pentagon, Shape::Hexagon, Shape::Circle];

    pub fn from_level(v: u8) -> Shape {
        Self::ALL[v as usize % Self::ALL.len()]
    }
}

/// State of one component within one matrix entry. All occupied slots share
/// type, size and color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComponentState {
    /// Occupied slots as a bitmask over the component's slot list.
    pub positions: u16,
    /// 0..5, see [`Shape`].
    pub ty: u8,
    /// 1..=6.
    pub size: u8,
    /// 0..=9; 0 is white fill.
    pub color: u8,
}

impl ComponentState {
    pub fn value(&self, attribute: Attribute) -> u16 {
        match attribute {
            Attribute::Number => self.positions.count_ones() as u16,
            Attribute::Position | Attribute::NumberPosition => self.positions,
            Attribute::Type => self.ty as u16,
            Attribute::Size => self.size as u16,
            Attribute::Color => self.color as u16,
        }
    }

    pub fn group_value(&self, group: AttrGroup) -> u16 {
        match group {
            AttrGroup::Layout => self.positions,
            AttrGroup::Type => self.ty as u16,
            AttrGroup::Size => self.size as u16,
            AttrGroup::Color => self.color as u16,
        }
    }

    pub fn set_group_value(&mut self, group: AttrGroup, v: u16) {
        match group {
            AttrGroup::Layout => self.positions = v,
            AttrGroup::Type => self.ty = v as u8,
            AttrGroup::Size => self.size = v as u8,
            AttrGroup::Color => self.color = v as u8,
        }
    }
}

/// One matrix entry: a state per component of the configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entry {
    pub components: Vec<ComponentState>,
}

/// Symbolic form of an item.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicItem {
    pub config: Configuration,
    /// Four rules per component (layout, type, size, color), component-major.
    pub rules: Vec<RuleSpec>,
    /// The eight context entries in row-major order.
    pub context: Vec<Entry>,
    pub choices: Vec<Entry>,
    pub target: u8,
    /// Some distractors had to perturb two attributes.
    pub widened: bool,
}

impl SymbolicItem {
    pub fn answer(&self) -> &Entry {
        &self.choices[self.target as usize]
    }

    /// Rules governing component `c`.
    pub fn component_rules(&self, c: usize) -> &[RuleSpec] {
        &self.rules[c * 4..c * 4 + 4]
    }
}

/// An item as stored on disk: rule metadata, target and the 16 rendered
/// panels (8 context then 8 choices). `symbolic` is present only for freshly
/// generated items.
#[derive(Debug, Clone, PartialEq)]
pub struct RpmItem {
    pub config: Configuration,
    pub rules: Vec<RuleSpec>,
    pub target: u8,
    pub resolution: u16,
    /// 16 planes of `resolution²` bytes each.
    pub images: Vec<u8>,
    pub symbolic: Option<SymbolicItem>,
}

impl RpmItem {
    pub const PANELS: usize = 16;

    pub fn panel(&self, index: usize) -> &[u8] {
        let n = self.resolution as usize * self.resolution as usize;
        &self.images[index * n..(index + 1) * n]
    }

    pub fn context_panel(&self, cell: usize) -> &[u8] {
        self.panel(cell)
    }

    pub fn choice_panel(&self, choice: usize) -> &[u8] {
        self.panel(8 + choice)
    }
}
