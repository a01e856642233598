use std::fmt;

use crate::error::{Result, RpmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Constant,
    Progression,
    Arithmetic,
    DistributeThree,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::Constant, Rule::Progression, Rule::Arithmetic, Rule::DistributeThree];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::Constant => "Constant",
            Rule::Progression => "Progression",
            Rule::Arithmetic => "Arithmetic",
            Rule::DistributeThree => "Distribute-Three",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Number,
    Position,
    NumberPosition,
    Type,
    Size,
    Color,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Number,
        Attribute::Position,
        Attribute::NumberPosition,
        Attribute::Type,
        Attribute::Size,
        Attribute::Color,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Number => "Number",
            Attribute::Position => "Position",
            Attribute::NumberPosition => "Number/Position",
            Attribute::Type => "Type",
            Attribute::Size => "Size",
            Attribute::Color => "Color",
        }
    }

    /// Which of a component's four rule slots this attribute occupies.
    pub fn group(self) -> AttrGroup {
        match self {
            Attribute::Number | Attribute::Position | Attribute::NumberPosition => AttrGroup::Layout,
            Attribute::Type => AttrGroup::Type,
            Attribute::Size => AttrGroup::Size,
            Attribute::Color => AttrGroup::Color,
        }
    }

    /// Number and Position rules need more than one slot to vary.
    pub fn needs_grid(self) -> bool {
        matches!(self, Attribute::Number | Attribute::Position)
    }
}

/// Every component carries exactly one rule per group, in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrGroup {
    Layout,
    Type,
    Size,
    Color,
}

impl AttrGroup {
    pub const ALL: [AttrGroup; 4] = [AttrGroup::Layout, AttrGroup::Type, AttrGroup::Size, AttrGroup::Color];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The attribute a group falls back to when the menu says nothing.
    pub fn default_attribute(self) -> Attribute {
        match self {
            AttrGroup::Layout => Attribute::NumberPosition,
            AttrGroup::Type => Attribute::Type,
            AttrGroup::Size => Attribute::Size,
            AttrGroup::Color => Attribute::Color,
        }
    }
}

/// Whether a rule×attribute pair ever occurs in the reference corpus counts.
pub fn is_legal(rule: Rule, attribute: Attribute) -> bool {
    match attribute {
        Attribute::NumberPosition => rule == Rule::Constant,
        Attribute::Number | Attribute::Position => rule != Rule::Constant,
        Attribute::Type => rule != Rule::Arithmetic,
        Attribute::Size | Attribute::Color => true,
    }
}

/// A rule bound to an attribute.
///
/// `param` is the increment for Progression (±1 or ±2), the sign for
/// Arithmetic (+1 add, -1 subtract) and 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RuleSpec {
    pub rule: Rule,
    pub attribute: Attribute,
    pub param: i8,
}

impl RuleSpec {
    pub fn new(rule: Rule, attribute: Attribute, param: i8) -> Result<Self> {
        let spec = Self { rule, attribute, param };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(attribute: Attribute) -> Self {
        Self { rule: Rule::Constant, attribute, param: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !is_legal(self.rule, self.attribute) {
            return Err(RpmError::InvalidMenu(format!(
                "{} on {} is not a legal combination",
                self.rule.name(),
                self.attribute.name()
            )));
        }
        let ok = match self.rule {
            Rule::Constant | Rule::DistributeThree => self.param == 0,
            Rule::Progression => matches!(self.param, -2 | -1 | 1 | 2),
            Rule::Arithmetic => matches!(self.param, -1 | 1),
        };
        if ok {
            Ok(())
        } else {
            Err(RpmError::InvalidMenu(format!("{self}: parameter {} out of range", self.param)))
        }
    }

    /// Row predicate. `slots` is the slot count of the governed component
    /// (only Position progression depends on it). For Distribute-Three this
    /// checks distinctness only; use [`RuleSpec::check_rows`] for the
    /// cross-row condition.
    pub fn check_row(&self, row: [u16; 3], slots: usize) -> bool {
        let [a, b, c] = row;
        match (self.rule, self.attribute) {
            (Rule::Constant, _) => a == b && b == c,
            (Rule::Progression, Attribute::Position) => {
                let d = self.param as i32;
                b == rotate(a, d, slots) && c == rotate(b, d, slots)
            }
            (Rule::Progression, _) => {
                let d = self.param as i32;
                b as i32 == a as i32 + d && c as i32 == b as i32 + d
            }
            (Rule::Arithmetic, Attribute::Position) => {
                if self.param > 0 {
                    b != 0 && a & b == 0 && c == a | b
                } else {
                    b != 0 && b & !a == 0 && c == a & !b
                }
            }
            (Rule::Arithmetic, _) => {
                let (a, b, c) = (a as i32, b as i32, c as i32);
                b >= 1 && c == a + self.param as i32 * b
            }
            (Rule::DistributeThree, _) => a != b && b != c && a != c,
        }
    }

    /// Predicate over all three rows of a completed matrix.
    pub fn check_rows(&self, rows: &[[u16; 3]; 3], slots: usize) -> bool {
        if !rows.iter().all(|r| self.check_row(*r, slots)) {
            return false;
        }
        if self.rule == Rule::DistributeThree {
            let sorted = |r: &[u16; 3]| {
                let mut s = *r;
                s.sort_unstable();
                s
            };
            let first = sorted(&rows[0]);
            return rows.iter().all(|r| sorted(r) == first);
        }
        true
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}", self.rule.name(), self.attribute.name())?;
        if self.param != 0 {
            write!(f, "({:+})", self.param)?;
        }
        Ok(())
    }
}

/// Moves every occupied slot `d` places forward, cyclically over `slots`.
pub fn rotate(mask: u16, d: i32, slots: usize) -> u16 {
    let n = slots as i32;
    let mut out = 0u16;
    for i in 0..n {
        if mask >> i & 1 == 1 {
            out |= 1 << (i + d).rem_euclid(n);
        }
    }
    out
}

/// A menu entry: a legal rule×attribute pair, optionally pinning the
/// parameter (otherwise sampled per item among feasible values).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleChoice {
    pub rule: Rule,
    pub attribute: Attribute,
    pub param: Option<i8>,
}

impl RuleChoice {
    pub fn new(rule: Rule, attribute: Attribute) -> Self {
        Self { rule, attribute, param: None }
    }

    pub fn with_param(rule: Rule, attribute: Attribute, param: i8) -> Self {
        Self { rule, attribute, param: Some(param) }
    }
}

/// The rule×attribute pairs a generator may draw from. Groups with no
/// entry hosted by a component fall back to Constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleMenu {
    entries: Vec<RuleChoice>,
}

impl RuleMenu {
    pub fn new(entries: Vec<RuleChoice>) -> Result<Self> {
        if entries.is_empty() {
            return Err(RpmError::InvalidMenu("menu is empty".into()));
        }
        for e in &entries {
            RuleSpec::new(e.rule, e.attribute, e.param.unwrap_or_else(|| default_param(e.rule)))?;
        }
        Ok(Self { entries })
    }

    /// Every legal combination with sampled parameters.
    pub fn full() -> Self {
        let entries = Rule::ALL
            .iter()
            .flat_map(|&r| Attribute::ALL.iter().map(move |&a| (r, a)))
            .filter(|&(r, a)| is_legal(r, a))
            .map(|(r, a)| RuleChoice::new(r, a))
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[RuleChoice] {
        &self.entries
    }
}

fn default_param(rule: Rule) -> i8 {
    match rule {
        Rule::Progression | Rule::Arithmetic => 1,
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rule: Rule, attribute: Attribute, param: i8) -> RuleSpec {
        RuleSpec::new(rule, attribute, param).unwrap()
    }

    #[test]
    fn constant_rows() {
        let r = spec(Rule::Constant, Attribute::Size, 0);
        assert!(r.check_row([3, 3, 3], 1));
        assert!(!r.check_row([3, 3, 4], 1));
    }

    #[test]
    fn progression_rows() {
        assert!(spec(Rule::Progression, Attribute::Size, 2).check_row([1, 3, 5], 1));
        assert!(!spec(Rule::Progression, Attribute::Size, 1).check_row([1, 3, 5], 1));
        assert!(spec(Rule::Progression, Attribute::Color, -1).check_row([5, 4, 3], 1));
    }

    #[test]
    fn arithmetic_rows() {
        let add = spec(Rule::Arithmetic, Attribute::Number, 1);
        assert!(add.check_row([2, 3, 5], 4));
        assert!(!add.check_row([2, 3, 6], 4));
        let sub = spec(Rule::Arithmetic, Attribute::Color, -1);
        assert!(sub.check_row([7, 3, 4], 1));
        assert!(!sub.check_row([7, 0, 7], 1));
    }

    #[test]
    fn position_rules_use_set_semantics() {
        let add = spec(Rule::Arithmetic, Attribute::Position, 1);
        assert!(add.check_row([0b0011, 0b0100, 0b0111], 4));
        assert!(!add.check_row([0b0011, 0b0010, 0b0011], 4));
        let sub = spec(Rule::Arithmetic, Attribute::Position, -1);
        assert!(sub.check_row([0b0111, 0b0100, 0b0011], 4));
        let prog = spec(Rule::Progression, Attribute::Position, 1);
        assert!(prog.check_row([0b1001, 0b0011, 0b0110], 4));
    }

    #[test]
    fn distribute_three_needs_matching_rows() {
        let d3 = spec(Rule::DistributeThree, Attribute::Type, 0);
        assert!(d3.check_rows(&[[0, 1, 2], [1, 2, 0], [2, 0, 1]], 1));
        assert!(!d3.check_rows(&[[0, 1, 2], [1, 2, 0], [2, 0, 3]], 1));
        assert!(!d3.check_row([1, 1, 2], 1));
    }

    #[test]
    fn rotation_wraps() {
        assert_eq!(rotate(0b1000, 1, 4), 0b0001);
        assert_eq!(rotate(0b0001, -1, 4), 0b1000);
        assert_eq!(rotate(0b1_0000_0001, 2, 9), 0b0_0000_0110);
    }

    #[test]
    fn legality_table() {
        assert!(!is_legal(Rule::Arithmetic, Attribute::Type));
        assert!(!is_legal(Rule::Constant, Attribute::Number));
        assert!(!is_legal(Rule::Constant, Attribute::Position));
        assert!(!is_legal(Rule::Progression, Attribute::NumberPosition));
        assert_eq!(RuleMenu::full().entries().len(), 18);
        assert!(RuleMenu::new(vec![RuleChoice::new(Rule::Arithmetic, Attribute::Type)]).is_err());
        assert!(RuleMenu::new(vec![]).is_err());
    }
}
