use crate::config::Configuration;
use crate::error::{Result, RpmError};
use crate::item::{Entry, SymbolicItem};
use crate::rules::RuleSpec;

/// Whether `candidate` placed in the last cell satisfies every rule.
pub fn completes(config: Configuration, rules: &[RuleSpec], context: &[Entry], candidate: &Entry) -> bool {
    let layouts = config.components();
    if rules.len() != layouts.len() * 4
        || context.len() != 8
        || candidate.components.len() != layouts.len()
        || context.iter().any(|e| e.components.len() != layouts.len())
    {
        return false;
    }
    let cell = |i: usize| if i == 8 { candidate } else { &context[i] };
    layouts.iter().enumerate().all(|(c, layout)| {
        rules[c * 4..c * 4 + 4].iter().all(|rule| {
            let mut rows = [[0u16; 3]; 3];
            for (r, row) in rows.iter_mut().enumerate() {
                for (k, v) in row.iter_mut().enumerate() {
                    *v = cell(r * 3 + k).components[c].value(rule.attribute);
                }
            }
            rule.check_rows(&rows, layout.slots.len())
        })
    })
}

/// Finds the unique choice completing the matrix. Returns its index and the
/// rules it satisfies; zero or several valid choices is an error.
pub fn solve_symbolic(item: &SymbolicItem) -> Result<(usize, Vec<RuleSpec>)> {
    let valid: Vec<usize> = item
        .choices
        .iter()
        .enumerate()
        .filter(|(_, c)| completes(item.config, &item.rules, &item.context, c))
        .map(|(i, _)| i)
        .collect();
    match valid.as_slice() {
        [] => Err(RpmError::NoValidChoice),
        [i] => Ok((*i, item.rules.clone())),
        _ => Err(RpmError::MultipleValidChoices(valid)),
    }
}
