//! Generator soundness checked against the symbolic solver.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpm::generate::{item_rng, symbolic_from_rules};
use rpm::item::{ComponentState, Entry};
use rpm::rules::is_legal;
use rpm::solve::completes;
use rpm::*;

const SWEEP: u64 = 10_000;

#[test]
fn oracle_recovers_every_target() {
    let menu = RuleMenu::full();
    let mut widened = 0;
    let mut seen = HashSet::new();
    for i in 0..SWEEP {
        let config = Configuration::ALL[i as usize % 7];
        let mut rng = item_rng(7, Split::Train, i);
        let item = sample_symbolic(config, &menu, &mut rng).unwrap();
        let (index, rules) = solve_symbolic(&item).unwrap_or_else(|e| panic!("item {i} ({config}): {e}"));
        assert_eq!(index, item.target as usize, "item {i}");
        assert_eq!(rules, item.rules);

        let valid = item.choices.iter().filter(|c| completes(config, &item.rules, &item.context, c)).count();
        assert_eq!(valid, 1, "item {i}");
        let distinct: HashSet<&Entry> = item.choices.iter().collect();
        assert_eq!(distinct.len(), 8, "item {i}");

        for r in &item.rules {
            assert!(is_legal(r.rule, r.attribute), "item {i}: {r}");
            if matches!(r.attribute, Attribute::Number | Attribute::Position) {
                assert!(config.is_grid(), "item {i}: {r} in {config}");
            }
            seen.insert((r.rule, r.attribute));
        }
        widened += item.widened as u32;
    }
    // Every legal combination shows up somewhere in the sweep.
    assert_eq!(seen.len(), 18);
    assert!(widened < SWEEP as u32 / 100, "{widened} items needed two-attribute distractors");
}

#[test]
fn replacing_the_answer_breaks_the_item() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut item = sample_symbolic(Configuration::Center, &RuleMenu::full(), &mut rng).unwrap();
    let t = item.target as usize;
    let other = (t + 1) % 8;
    item.choices[t] = item.choices[other].clone();
    assert!(matches!(solve_symbolic(&item), Err(RpmError::MultipleValidChoices(_)) | Err(RpmError::NoValidChoice)));
    // Put a distractor in the answer slot while keeping distinct entries.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut item = sample_symbolic(Configuration::Center, &RuleMenu::full(), &mut rng).unwrap();
    let t = item.target as usize;
    let mut broken = item.choices[t].clone();
    broken.components[0].color = (broken.components[0].color + 1) % 10;
    if item.choices.contains(&broken) {
        broken.components[0].ty = (broken.components[0].ty + 1) % 5;
    }
    item.choices[t] = broken;
    assert!(matches!(solve_symbolic(&item), Err(RpmError::NoValidChoice)));
}

#[test]
fn hand_built_constant_item() {
    let state = ComponentState { positions: 1, ty: 2, size: 4, color: 5 };
    let entry = Entry { components: vec![state] };
    let rules = vec![
        RuleSpec::constant(Attribute::NumberPosition),
        RuleSpec::constant(Attribute::Type),
        RuleSpec::constant(Attribute::Size),
        RuleSpec::constant(Attribute::Color),
    ];
    let mut choices: Vec<Entry> =
        (0..8).map(|i| Entry { components: vec![ComponentState { color: i as u8, ..state }] }).collect();
    choices.swap(4, 5);
    let item = SymbolicItem {
        config: Configuration::Center,
        rules,
        context: vec![entry; 8],
        choices,
        target: 4,
        widened: false,
    };
    assert_eq!(solve_symbolic(&item).unwrap().0, 4);
}

#[test]
fn fixed_rules_are_respected() {
    let rules = vec![
        RuleSpec::new(Rule::DistributeThree, Attribute::Position, 0).unwrap(),
        RuleSpec::new(Rule::Progression, Attribute::Type, -1).unwrap(),
        RuleSpec::new(Rule::Arithmetic, Attribute::Size, -1).unwrap(),
        RuleSpec::new(Rule::DistributeThree, Attribute::Color, 0).unwrap(),
    ];
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let item = symbolic_from_rules(Configuration::Grid3x3, rules.clone(), &mut rng).unwrap();
        assert_eq!(solve_symbolic(&item).unwrap().0, item.target as usize);
    }
}
