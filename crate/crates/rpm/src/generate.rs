use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ComponentLayout, Configuration};
use crate::error::{Result, RpmError};
use crate::item::{ComponentState, Entry, RpmItem, SymbolicItem, COLOR_LEVELS, SHAPE_COUNT, SIZE_LEVELS};
use crate::raster::rasterize;
use crate::rules::{rotate, AttrGroup, Attribute, Rule, RuleChoice, RuleMenu, RuleSpec};
use crate::solve::completes;

/// Dataset split, mixed into per-item seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream per (dataset seed, split, item index), so items can be
/// generated in any order.
pub fn item_rng(seed: u64, split: Split, index: u64) -> ChaCha8Rng {
    let s = splitmix64(splitmix64(seed ^ 0x5250_4d44) ^ (split as u64) << 56 ^ index);
    ChaCha8Rng::seed_from_u64(s)
}

#[derive(Debug, Clone, Copy)]
enum Domain {
    Scalar { lo: u16, hi: u16 },
    Count { slots: usize },
    Mask { slots: usize },
}

fn domain(attribute: Attribute, layout: &ComponentLayout) -> Domain {
    let slots = layout.slots.len();
    match attribute {
        Attribute::Number => Domain::Count { slots },
        Attribute::Position | Attribute::NumberPosition => Domain::Mask { slots },
        Attribute::Type => Domain::Scalar { lo: 0, hi: SHAPE_COUNT as u16 - 1 },
        Attribute::Size => Domain::Scalar { lo: layout.min_size as u16, hi: SIZE_LEVELS as u16 },
        Attribute::Color => Domain::Scalar { lo: 0, hi: COLOR_LEVELS as u16 - 1 },
    }
}

fn scalar_bounds(d: Domain) -> (u16, u16) {
    match d {
        Domain::Scalar { lo, hi } => (lo, hi),
        Domain::Count { slots } => (1, slots as u16),
        Domain::Mask { slots } => (1, ((1u32 << slots) - 1) as u16),
    }
}

fn arithmetic_pairs(lo: u16, hi: u16, sign: i8) -> Vec<(u16, u16)> {
    let mut pairs = Vec::new();
    for a in lo..=hi {
        for b in lo.max(1)..=hi {
            let c = a as i32 + sign as i32 * b as i32;
            if c >= lo as i32 && c <= hi as i32 {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Whether `spec` can be realized on a component with this layout.
pub fn feasible(spec: &RuleSpec, layout: &ComponentLayout) -> bool {
    let d = domain(spec.attribute, layout);
    if spec.attribute.needs_grid() && layout.slots.len() < 2 {
        return false;
    }
    match d {
        Domain::Mask { slots } => match spec.rule {
            Rule::Constant => true,
            Rule::Progression => (spec.param.unsigned_abs() as usize) < slots,
            Rule::Arithmetic | Rule::DistributeThree => slots >= 2,
        },
        _ => {
            let (lo, hi) = scalar_bounds(d);
            match spec.rule {
                Rule::Constant => true,
                Rule::Progression => hi as i32 - lo as i32 >= 2 * spec.param.unsigned_abs() as i32,
                Rule::Arithmetic => !arithmetic_pairs(lo, hi, spec.param).is_empty(),
                Rule::DistributeThree => hi - lo >= 2,
            }
        }
    }
}

fn candidate_params(rule: Rule) -> &'static [i8] {
    match rule {
        Rule::Progression => &[1, -1, 2, -2],
        Rule::Arithmetic => &[1, -1],
        _ => &[0],
    }
}

/// Resolves a menu entry to a concrete, feasible spec for this component.
fn resolve(choice: &RuleChoice, layout: &ComponentLayout, rng: &mut ChaCha8Rng) -> Option<RuleSpec> {
    let params: Vec<i8> = match choice.param {
        Some(p) => vec![p],
        None => candidate_params(choice.rule).to_vec(),
    };
    let ok: Vec<RuleSpec> = params
        .into_iter()
        .map(|param| RuleSpec { rule: choice.rule, attribute: choice.attribute, param })
        .filter(|s| feasible(s, layout))
        .collect();
    ok.choose(rng).copied()
}

fn hostable(choice: &RuleChoice, layout: &ComponentLayout) -> bool {
    let params: Vec<i8> = match choice.param {
        Some(p) => vec![p],
        None => candidate_params(choice.rule).to_vec(),
    };
    params
        .into_iter()
        .any(|param| feasible(&RuleSpec { rule: choice.rule, attribute: choice.attribute, param }, layout))
}

fn random_mask(slots: usize, rng: &mut ChaCha8Rng) -> u16 {
    rng.gen_range(1..(1u32 << slots)) as u16
}

fn mask_with_count(slots: usize, count: u16, rng: &mut ChaCha8Rng) -> u16 {
    let mut idx: Vec<usize> = (0..slots).collect();
    idx.shuffle(rng);
    idx[..count as usize].iter().fold(0, |m, &i| m | 1 << i)
}

fn three_distinct(lo: u16, hi: u16, rng: &mut ChaCha8Rng) -> [u16; 3] {
    let mut vals: Vec<u16> = (lo..=hi).collect();
    vals.shuffle(rng);
    [vals[0], vals[1], vals[2]]
}

fn latin(v: [u16; 3]) -> [[u16; 3]; 3] {
    [[v[0], v[1], v[2]], [v[1], v[2], v[0]], [v[2], v[0], v[1]]]
}

fn scalar_rows(spec: &RuleSpec, lo: u16, hi: u16, rng: &mut ChaCha8Rng) -> [[u16; 3]; 3] {
    match spec.rule {
        Rule::DistributeThree => latin(three_distinct(lo, hi, rng)),
        _ => {
            let mut rows = [[0u16; 3]; 3];
            let d = spec.param as i32;
            let pairs = if spec.rule == Rule::Arithmetic { arithmetic_pairs(lo, hi, spec.param) } else { Vec::new() };
            for row in rows.iter_mut() {
                *row = match spec.rule {
                    Rule::Constant => [rng.gen_range(lo..=hi); 3],
                    Rule::Progression => {
                        let (s_lo, s_hi) =
                            if d > 0 { (lo as i32, hi as i32 - 2 * d) } else { (lo as i32 - 2 * d, hi as i32) };
                        let s = rng.gen_range(s_lo..=s_hi);
                        [s as u16, (s + d) as u16, (s + 2 * d) as u16]
                    }
                    _ => {
                        let (a, b) = *pairs.choose(rng).expect("feasibility checked");
                        [a, b, (a as i32 + d * b as i32) as u16]
                    }
                };
            }
            rows
        }
    }
}

fn mask_rows(spec: &RuleSpec, slots: usize, rng: &mut ChaCha8Rng) -> [[u16; 3]; 3] {
    let full = ((1u32 << slots) - 1) as u16;
    if spec.rule == Rule::DistributeThree {
        let mut v = [0u16; 3];
        v[0] = random_mask(slots, rng);
        loop {
            v[1] = random_mask(slots, rng);
            if v[1] != v[0] {
                break;
            }
        }
        loop {
            v[2] = random_mask(slots, rng);
            if v[2] != v[0] && v[2] != v[1] {
                break;
            }
        }
        return latin(v);
    }
    let mut rows = [[0u16; 3]; 3];
    for row in rows.iter_mut() {
        *row = match spec.rule {
            Rule::Constant => [random_mask(slots, rng); 3],
            Rule::Progression => {
                let d = spec.param as i32;
                let m = loop {
                    let m = random_mask(slots, rng);
                    if rotate(m, d, slots) != m {
                        break m;
                    }
                };
                let b = rotate(m, d, slots);
                [m, b, rotate(b, d, slots)]
            }
            _ if spec.param > 0 => {
                let a = loop {
                    let a = random_mask(slots, rng);
                    if a != full {
                        break a;
                    }
                };
                let b = loop {
                    let b = random_mask(slots, rng) & !a;
                    if b != 0 {
                        break b;
                    }
                };
                [a, b, a | b]
            }
            _ => {
                let a = loop {
                    let a = random_mask(slots, rng);
                    if a.count_ones() >= 2 {
                        break a;
                    }
                };
                let b = loop {
                    let b = random_mask(slots, rng) & a;
                    if b != 0 && b != a {
                        break b;
                    }
                };
                [a, b, a & !b]
            }
        };
    }
    rows
}

/// Samples the four rules of every component from `menu`. Groups with no
/// hostable menu entry stay Constant.
pub fn sample_rules(config: Configuration, menu: &RuleMenu, rng: &mut ChaCha8Rng) -> Result<Vec<RuleSpec>> {
    let layouts = config.components();
    if !menu.entries().iter().any(|e| layouts.iter().any(|l| hostable(e, l))) {
        return Err(RpmError::Unsatisfiable { config: config.name(), what: "any entry of the rule menu".into() });
    }
    let mut rules = Vec::with_capacity(layouts.len() * 4);
    for layout in &layouts {
        for group in AttrGroup::ALL {
            let options: Vec<&RuleChoice> =
                menu.entries().iter().filter(|e| e.attribute.group() == group && hostable(e, layout)).collect();
            let spec = match options.choose(rng) {
                Some(choice) => resolve(choice, layout, rng).expect("hostable entries resolve"),
                None => RuleSpec::constant(group.default_attribute()),
            };
            rules.push(spec);
        }
    }
    Ok(rules)
}

/// Fills all nine entries so that every row satisfies `rules`.
pub fn sample_grid(config: Configuration, rules: &[RuleSpec], rng: &mut ChaCha8Rng) -> Result<Vec<Entry>> {
    let layouts = config.components();
    if rules.len() != layouts.len() * 4 {
        return Err(RpmError::InvalidArgument(format!(
            "{} needs {} rules, got {}",
            config.name(),
            layouts.len() * 4,
            rules.len()
        )));
    }
    let blank = ComponentState { positions: 1, ty: 0, size: 1, color: 0 };
    let mut grid = vec![Entry { components: vec![blank; layouts.len()] }; 9];
    for (c, layout) in layouts.iter().enumerate() {
        for (g, spec) in rules[c * 4..c * 4 + 4].iter().enumerate() {
            if spec.attribute.group().index() != g || !feasible(spec, layout) {
                return Err(RpmError::Unsatisfiable {
                    config: config.name(),
                    what: format!("{spec} on component {c}"),
                });
            }
            let slots = layout.slots.len();
            let d = domain(spec.attribute, layout);
            let rows = match d {
                Domain::Mask { .. } => mask_rows(spec, slots, rng),
                _ => {
                    let (lo, hi) = scalar_bounds(d);
                    scalar_rows(spec, lo, hi, rng)
                }
            };
            for (r, row) in rows.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    let v = match d {
                        Domain::Count { slots } => mask_with_count(slots, v, rng),
                        _ => v,
                    };
                    grid[r * 3 + k].components[c].set_group_value(AttrGroup::ALL[g], v);
                }
            }
        }
    }
    Ok(grid)
}

/// Alternative values for one attribute group of one component.
fn alternatives(layout: &ComponentLayout, group: AttrGroup, current: u16, rng: &mut ChaCha8Rng) -> Vec<u16> {
    let slots = layout.slots.len();
    let mut out: Vec<u16> = match group {
        AttrGroup::Layout if slots < 2 => Vec::new(),
        AttrGroup::Layout => {
            let mut v = Vec::new();
            for _ in 0..64 {
                let m = random_mask(slots, rng);
                if m != current && !v.contains(&m) {
                    v.push(m);
                }
                if v.len() == 8 {
                    break;
                }
            }
            v
        }
        AttrGroup::Type => (0..SHAPE_COUNT as u16).collect(),
        AttrGroup::Size => (layout.min_size as u16..=SIZE_LEVELS as u16).collect(),
        AttrGroup::Color => (0..COLOR_LEVELS as u16).collect(),
    };
    out.retain(|&v| v != current);
    out.shuffle(rng);
    out
}

/// Builds seven wrong choices, each the answer with one attribute of one
/// component changed, and shuffles them with the answer. Falls back to
/// two-attribute changes when single changes run out. Returns
/// `(choices, target, widened)`.
pub fn generate_distractors(
    config: Configuration,
    rules: &[RuleSpec],
    context: &[Entry],
    answer: &Entry,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Entry>, u8, bool)> {
    let layouts = config.components();
    let wrong = |e: &Entry| !completes(config, rules, context, e);

    let mut groups: Vec<Vec<Entry>> = Vec::new();
    for (c, layout) in layouts.iter().enumerate() {
        for group in AttrGroup::ALL {
            let current = answer.components[c].group_value(group);
            let cands: Vec<Entry> = alternatives(layout, group, current, rng)
                .into_iter()
                .map(|v| {
                    let mut e = answer.clone();
                    e.components[c].set_group_value(group, v);
                    e
                })
                .filter(|e| wrong(e))
                .collect();
            if !cands.is_empty() {
                groups.push(cands);
            }
        }
    }
    groups.shuffle(rng);

    let mut picked: Vec<Entry> = Vec::with_capacity(7);
    let mut cursor = vec![0usize; groups.len()];
    while picked.len() < 7 {
        let mut progressed = false;
        for (g, cands) in groups.iter().enumerate() {
            if picked.len() == 7 {
                break;
            }
            if let Some(e) = cands.get(cursor[g]) {
                cursor[g] += 1;
                progressed = true;
                if !picked.contains(e) {
                    picked.push(e.clone());
                }
            }
        }
        if !progressed {
            break;
        }
    }

    let widened = picked.len() < 7;
    if widened {
        let singles: Vec<&Entry> = groups.iter().flatten().collect();
        let mut pairs = Vec::new();
        for (i, a) in singles.iter().enumerate() {
            for b in &singles[i + 1..] {
                let mut e = (*a).clone();
                for (c, comp) in e.components.iter_mut().enumerate() {
                    for group in AttrGroup::ALL {
                        let bv = b.components[c].group_value(group);
                        if bv != answer.components[c].group_value(group) {
                            comp.set_group_value(group, bv);
                        }
                    }
                }
                if e != *answer && wrong(&e) && !picked.contains(&e) && !pairs.contains(&e) {
                    pairs.push(e);
                }
            }
        }
        pairs.shuffle(rng);
        picked.extend(pairs.into_iter().take(7 - picked.len()));
        if picked.len() < 7 {
            return Err(RpmError::Unsatisfiable { config: config.name(), what: "seven distinct distractors".into() });
        }
    }

    let mut choices = picked;
    choices.push(answer.clone());
    choices.shuffle(rng);
    let target = choices.iter().position(|e| e == answer).expect("answer present") as u8;
    Ok((choices, target, widened))
}

/// Samples a complete symbolic item.
pub fn sample_symbolic(config: Configuration, menu: &RuleMenu, rng: &mut ChaCha8Rng) -> Result<SymbolicItem> {
    let rules = sample_rules(config, menu, rng)?;
    symbolic_from_rules(config, rules, rng)
}

/// Samples values and distractors for fixed rules.
pub fn symbolic_from_rules(config: Configuration, rules: Vec<RuleSpec>, rng: &mut ChaCha8Rng) -> Result<SymbolicItem> {
    let mut grid = sample_grid(config, &rules, rng)?;
    let answer = grid.pop().expect("nine entries");
    let (choices, target, widened) = generate_distractors(config, &rules, &grid, &answer, rng)?;
    Ok(SymbolicItem { config, rules, context: grid, choices, target, widened })
}

/// Samples and renders one item.
pub fn sample_item(config: Configuration, menu: &RuleMenu, resolution: u16, seed: u64) -> Result<RpmItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    render(sample_symbolic(config, menu, &mut rng)?, resolution)
}

/// Renders a symbolic item into an [`RpmItem`].
pub fn render(sym: SymbolicItem, resolution: u16) -> Result<RpmItem> {
    let images = rasterize(&sym, resolution)?;
    Ok(RpmItem {
        config: sym.config,
        rules: sym.rules.clone(),
        target: sym.target,
        resolution,
        images,
        symbolic: Some(sym),
    })
}

/// Generates a split following `plan` (items per configuration, in plan
/// order). Item `i` of the split always draws from the same stream.
pub fn generate_split(
    plan: &[(Configuration, usize)],
    menu: &RuleMenu,
    resolution: u16,
    seed: u64,
    split: Split,
) -> Result<Vec<RpmItem>> {
    let mut items = Vec::with_capacity(plan.iter().map(|p| p.1).sum());
    let mut index = 0u64;
    for &(config, count) in plan {
        for _ in 0..count {
            let mut rng = item_rng(seed, split, index);
            items.push(render(sample_symbolic(config, menu, &mut rng)?, resolution)?);
            index += 1;
        }
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::solve_symbolic;

    #[test]
    fn progression_on_size_in_center() {
        let menu = RuleMenu::new(vec![
            RuleChoice::new(Rule::Constant, Attribute::Type),
            RuleChoice::with_param(Rule::Progression, Attribute::Size, 1),
        ])
        .unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let item = sample_symbolic(Configuration::Center, &menu, &mut rng).unwrap();
            let mut all = item.context.clone();
            all.push(item.answer().clone());
            for row in all.chunks(3) {
                let ty = row[0].components[0].ty;
                assert!(row.iter().all(|e| e.components[0].ty == ty));
                let s: Vec<u8> = row.iter().map(|e| e.components[0].size).collect();
                assert_eq!((s[1] - s[0], s[2] - s[1]), (1, 1));
            }
        }
    }

    #[test]
    fn number_addition_in_grid() {
        let menu = RuleMenu::new(vec![RuleChoice::with_param(Rule::Arithmetic, Attribute::Number, 1)]).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let item = sample_symbolic(Configuration::Grid2x2, &menu, &mut rng).unwrap();
            let mut all = item.context.clone();
            all.push(item.answer().clone());
            for row in all.chunks(3) {
                let n: Vec<u32> = row.iter().map(|e| e.components[0].positions.count_ones()).collect();
                assert_eq!(n[2], n[0] + n[1]);
            }
        }
    }

    #[test]
    fn unhostable_menu_is_rejected() {
        let menu = RuleMenu::new(vec![RuleChoice::new(Rule::Arithmetic, Attribute::Number)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_symbolic(Configuration::Center, &menu, &mut rng), Err(RpmError::Unsatisfiable { .. })));
        let pinned = RuleMenu::new(vec![RuleChoice::with_param(Rule::Progression, Attribute::Number, 2)]).unwrap();
        assert!(sample_symbolic(Configuration::Grid2x2, &pinned, &mut rng).is_err());
    }

    #[test]
    fn distractors_differ_in_one_attribute() {
        for seed in 0..200 {
            let config = Configuration::ALL[seed as usize % 7];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let item = sample_symbolic(config, &RuleMenu::full(), &mut rng).unwrap();
            assert_eq!(solve_symbolic(&item).unwrap().0, item.target as usize);
            if item.widened {
                continue;
            }
            for (i, ch) in item.choices.iter().enumerate() {
                if i == item.target as usize {
                    continue;
                }
                let diffs: usize = ch
                    .components
                    .iter()
                    .zip(&item.answer().components)
                    .map(|(a, b)| AttrGroup::ALL.iter().filter(|&&g| a.group_value(g) != b.group_value(g)).count())
                    .sum();
                assert_eq!(diffs, 1, "{config} seed {seed}");
            }
        }
    }

    #[test]
    fn same_seed_same_target() {
        let a = sample_item(Configuration::Grid3x3, &RuleMenu::full(), 16, 42).unwrap();
        let b = sample_item(Configuration::Grid3x3, &RuleMenu::full(), 16, 42).unwrap();
        assert_eq!(a.target, b.target);
        assert_eq!(a.images, b.images);
    }
}
