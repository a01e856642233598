use std::fmt::Write as _;
use std::str::FromStr;

use crate::config::Configuration;
use crate::error::{Result, RpmError};
use crate::item::RpmItem;
use crate::rules::{Attribute, Rule};

/// Rule×attribute coverage of a dataset. Each item adds at most one to a
/// cell, however many of its components carry that combination.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BalanceTable {
    /// `counts[rule][attribute]`.
    pub counts: [[u64; 6]; 4],
    /// Same counts restricted to grid configurations.
    pub grid_counts: [[u64; 6]; 4],
    pub items_per_config: [u64; 7],
    /// Cell increments contributed by each configuration.
    pub incidence_per_config: [u64; 7],
}

impl BalanceTable {
    pub fn items(&self) -> u64 {
        self.items_per_config.iter().sum()
    }

    pub fn count(&self, rule: Rule, attribute: Attribute) -> u64 {
        self.counts[rule.id() as usize][attribute.id() as usize]
    }

    pub fn total_incidence(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Sum over the Number and Position columns.
    pub fn grid_only_total(&self) -> u64 {
        self.counts.iter().map(|r| r[0] + r[1]).sum()
    }

    /// Sum over Number/Position, Type, Size and Color.
    pub fn shared_total(&self) -> u64 {
        self.counts.iter().map(|r| r[2..].iter().sum::<u64>()).sum()
    }

    /// Human-readable table followed by a `key=value` block.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<18}", "");
        for a in Attribute::ALL {
            let _ = write!(s, "{:>17}", a.name());
        }
        s.push('\n');
        for r in Rule::ALL {
            let _ = write!(s, "{:<18}", r.name());
            for a in Attribute::ALL {
                let _ = write!(s, "{:>17}", self.count(r, a));
            }
            s.push('\n');
        }
        let _ = writeln!(s, "grid-only combinations (Number, Position): {}", self.grid_only_total());
        let _ = writeln!(s, "shared combinations (Number/Position, Type, Size, Color): {}", self.shared_total());
        let _ = writeln!(s, "\n{:<14}{:>10}{:>12}", "configuration", "items", "incidence");
        for c in Configuration::ALL {
            let i = c.id() as usize;
            let _ = writeln!(
                s,
                "{:<14}{:>10}{:>12}",
                c.short_name(),
                self.items_per_config[i],
                self.incidence_per_config[i]
            );
        }
        s.push('\n');
        s.push_str(&self.key_values());
        s
    }

    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "items={}", self.items());
        for r in Rule::ALL {
            for a in Attribute::ALL {
                let _ = writeln!(s, "count.{}.{}={}", r.name(), a.name(), self.count(r, a));
            }
        }
        for r in Rule::ALL {
            for a in Attribute::ALL {
                let _ = writeln!(
                    s,
                    "grid.{}.{}={}",
                    r.name(),
                    a.name(),
                    self.grid_counts[r.id() as usize][a.id() as usize]
                );
            }
        }
        for c in Configuration::ALL {
            let _ = writeln!(s, "items.{}={}", c.short_name(), self.items_per_config[c.id() as usize]);
        }
        for c in Configuration::ALL {
            let _ = writeln!(s, "incidence.{}={}", c.short_name(), self.incidence_per_config[c.id() as usize]);
        }
        let _ = writeln!(s, "total.grid_only={}", self.grid_only_total());
        let _ = writeln!(s, "total.shared={}", self.shared_total());
        s
    }
}

/// Tallies rule×attribute incidence over items.
pub fn audit_balance(items: &[RpmItem]) -> Result<BalanceTable> {
    let mut t = BalanceTable::default();
    for (index, item) in items.iter().enumerate() {
        if item.rules.is_empty() {
            return Err(RpmError::MissingMetadata { index, msg: "no rule metadata".into() });
        }
        let mut seen = [[false; 6]; 4];
        for r in &item.rules {
            seen[r.rule.id() as usize][r.attribute.id() as usize] = true;
        }
        let c = item.config.id() as usize;
        t.items_per_config[c] += 1;
        for (ri, row) in seen.iter().enumerate() {
            for (ai, &hit) in row.iter().enumerate() {
                if hit {
                    t.counts[ri][ai] += 1;
                    t.incidence_per_config[c] += 1;
                    if item.config.is_grid() {
                        t.grid_counts[ri][ai] += 1;
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Splits `total` proportionally to `weights` (one per configuration, in
/// [`Configuration::ALL`] order) by largest remainder; ties go to the
/// earlier configuration.
pub fn rebalance_plan(total: usize, weights: &[u64; 7]) -> Result<[usize; 7]> {
    let sum: u64 = weights.iter().sum();
    if sum == 0 {
        return Err(RpmError::InvalidArgument("configuration weights sum to zero".into()));
    }
    let total = total as u128;
    let mut out = [0usize; 7];
    let mut rem = [(0u128, 0usize); 7];
    for (i, &w) in weights.iter().enumerate() {
        let num = total * w as u128;
        out[i] = (num / sum as u128) as usize;
        rem[i] = (num % sum as u128, i);
    }
    let assigned: usize = out.iter().sum();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rem.iter().take(total as usize - assigned) {
        out[i] += 1;
    }
    Ok(out)
}

/// Named configuration mixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mix {
    /// Grid configurations upweighted 31:3 against the rest.
    AbRaven,
    /// Equal share per configuration.
    Raven,
    Uniform,
    Center,
}

impl Mix {
    pub fn weights(self) -> [u64; 7] {
        match self {
            Mix::AbRaven => [3, 31, 31, 3, 3, 3, 31],
            Mix::Raven | Mix::Uniform => [1; 7],
            Mix::Center => [1, 0, 0, 0, 0, 0, 0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mix::AbRaven => "ab-raven",
            Mix::Raven => "raven",
            Mix::Uniform => "uniform",
            Mix::Center => "center",
        }
    }

    /// Training counts per configuration.
    pub fn train_plan(self, total: usize) -> Result<Vec<(Configuration, usize)>> {
        Ok(Configuration::ALL.into_iter().zip(rebalance_plan(total, &self.weights())?).collect())
    }

    /// Held-out counts: uniform over the configurations present in the mix.
    pub fn eval_plan(self, total: usize) -> Result<Vec<(Configuration, usize)>> {
        let present = self.weights().map(|w| u64::from(w > 0));
        Ok(Configuration::ALL.into_iter().zip(rebalance_plan(total, &present)?).collect())
    }
}

impl FromStr for Mix {
    type Err = RpmError;

    fn from_str(s: &str) -> Result<Self> {
        [Mix::AbRaven, Mix::Raven, Mix::Uniform, Mix::Center].into_iter().find(|m| m.name() == s).ok_or_else(|| {
            RpmError::InvalidArgument(format!("unknown mix {s:?} (expected ab-raven, raven, uniform or center)"))
        })
    }
}
