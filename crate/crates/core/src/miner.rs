//! Deterministic, non-LLM miners.
//!
//! [`mine_generalize_validate`] generalizes permit entries into rules that
//! match no deny entry, then picks rules by greedy set cover. [`exact_minimal_policy`] is an exhaustive oracle
//! for tiny instances.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats::{self, AccessLog};
use crate::model::{AttributeValue, PolicySet, Rule, Scenario};

/// Oracle scale limits.
pub const ORACLE_MAX_ATTRS: usize = 6;
pub const ORACLE_MAX_CELLS: usize = 64;
pub const ORACLE_MAX_BUDGET: usize = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct MinerOptions {
    /// Return an empty policy instead of [`Error::NoPermits`].
    pub allow_empty: bool,
}

/// Combined subject-then-object value vector of one entry.
type Cell = Vec<u32>;
/// Per-position constraint; `None` is a wildcard.
type Pattern = Vec<Option<u32>>;

struct Cells {
    n_subject_attrs: usize,
    /// Distinct permit vectors with their multiplicity, in first-seen order.
    permits: Vec<(Cell, usize)>,
    denies: Vec<Cell>,
}

impl Cells {
    fn from_log(log: &AccessLog) -> Result<Self> {
        let first = log
            .entries
            .first()
            .ok_or_else(|| Error::format("access data", "no entries"))?;
        let (ns, no) = (first.subject.len(), first.object.len());
        let mut permit_index: HashMap<Cell, usize> = HashMap::new();
        let mut permits: Vec<(Cell, usize)> = Vec::new();
        let mut denies: HashSet<Cell> = HashSet::new();
        let mut deny_order = Vec::new();
        for e in &log.entries {
            if e.subject.len() != ns || e.object.len() != no {
                return Err(Error::format("access data", "entries have differing attribute counts"));
            }
            let cell: Cell = e.subject.values().iter().chain(e.object.values()).copied().collect();
            if e.permit {
                match permit_index.get(&cell) {
                    Some(&k) => permits[k].1 += 1,
                    None => {
                        permit_index.insert(cell.clone(), permits.len());
                        permits.push((cell, 1));
                    }
                }
            } else if denies.insert(cell.clone()) {
                deny_order.push(cell);
            }
        }
        if permits.iter().any(|(c, _)| denies.contains(c)) {
            return Err(Error::InconsistentData);
        }
        Ok(Cells {
            n_subject_attrs: ns,
            permits,
            denies: deny_order,
        })
    }

    fn width(&self) -> usize {
        self.permits
            .first()
            .map(|(c, _)| c.len())
            .or_else(|| self.denies.first().map(Vec::len))
            .unwrap_or(0)
    }

    fn hits_deny(&self, pattern: &Pattern) -> bool {
        self.denies.iter().any(|d| covers(pattern, d))
    }

    fn to_rule(&self, pattern: &Pattern) -> Rule {
        let conditions = pattern
            .iter()
            .enumerate()
            .filter_map(|(pos, v)| {
                v.map(|v| {
                    if pos < self.n_subject_attrs {
                        AttributeValue::subject(pos as u32 + 1, v)
                    } else {
                        AttributeValue::object((pos - self.n_subject_attrs) as u32 + 1, v)
                    }
                })
            })
            .collect();
        Rule::permit(conditions)
            .normalize()
            .expect("patterns hold one value per attribute")
    }
}

fn covers(pattern: &Pattern, cell: &Cell) -> bool {
    pattern
        .iter()
        .zip(cell)
        .all(|(p, v)| p.is_none_or(|p| p == *v))
}

fn arity(pattern: &Pattern) -> usize {
    pattern.iter().filter(|p| p.is_some()).count()
}

struct Candidate {
    rule: Rule,
    pattern: Pattern,
    arity: usize,
    line: String,
}

impl Candidate {
    fn new(cells: &Cells, pattern: Pattern) -> Self {
        let rule = cells.to_rule(&pattern);
        let line = formats::emit_rule_line(&rule);
        Candidate {
            arity: arity(&pattern),
            rule,
            pattern,
            line,
        }
    }
}

pub fn mine_generalize_validate(scenario: &Scenario) -> Result<PolicySet> {
    mine_log_generalize_validate(&AccessLog::from_scenario(scenario), MinerOptions::default())
}

/// Generalize-and-validate over an arbitrary access log.
///
/// Candidates come from two sources. Each distinct permit vector starts as
/// a fully specific rule whose conditions are dropped one at a time (object
/// attributes by descending index, then subject attributes by descending
/// index), keeping a drop only if the rule still matches no deny entry.
/// In addition, the attributes shared by any two permit entries form a
/// candidate when that pattern matches no deny entry. Candidates are then
/// chosen greedily by how many uncovered permit entries they cover, ties
/// going to fewer conditions and then the smaller emitted rule line.
pub fn mine_log_generalize_validate(log: &AccessLog, opts: MinerOptions) -> Result<PolicySet> {
    let cells = Cells::from_log(log)?;
    if cells.permits.is_empty() {
        return if opts.allow_empty {
            Ok(PolicySet::default())
        } else {
            Err(Error::NoPermits)
        };
    }
    let width = cells.width();
    let ns = cells.n_subject_attrs;
    let drop_order: Vec<usize> = (ns..width).rev().chain((0..ns).rev()).collect();

    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    for (cell, _) in &cells.permits {
        let mut pattern: Pattern = cell.iter().copied().map(Some).collect();
        for &pos in &drop_order {
            let kept = pattern[pos].take();
            if cells.hits_deny(&pattern) {
                pattern[pos] = kept;
            }
        }
        if seen.insert(pattern.clone()) {
            candidates.push(Candidate::new(&cells, pattern));
        }
    }
    // Attributes shared by two permit entries form a group rule when sound.
    let mut shared_patterns = Vec::new();
    let mut tried = HashSet::new();
    for (a, (ca, _)) in cells.permits.iter().enumerate() {
        for (cb, _) in &cells.permits[a + 1..] {
            let shared: Pattern = ca
                .iter()
                .zip(cb)
                .map(|(x, y)| (x == y).then_some(*x))
                .collect();
            if !seen.contains(&shared) && tried.insert(shared.clone()) {
                shared_patterns.push(shared);
            }
        }
    }
    let sound: Vec<bool> = shared_patterns
        .par_iter()
        .map(|p| !cells.hits_deny(p))
        .collect();
    for (pattern, ok) in shared_patterns.into_iter().zip(sound) {
        if ok {
            candidates.push(Candidate::new(&cells, pattern));
        }
    }

    let coverage: Vec<Vec<usize>> = candidates
        .iter()
        .map(|c| {
            (0..cells.permits.len())
                .filter(|&k| covers(&c.pattern, &cells.permits[k].0))
                .collect()
        })
        .collect();
    let mut uncovered = vec![true; cells.permits.len()];
    let mut remaining = cells.permits.len();
    let mut used = vec![false; candidates.len()];
    let mut rules = Vec::new();
    while remaining > 0 {
        let gain = |i: usize| -> usize {
            coverage[i]
                .iter()
                .filter(|&&k| uncovered[k])
                .map(|&k| cells.permits[k].1)
                .sum()
        };
        let best = (0..candidates.len())
            .filter(|&i| !used[i])
            .map(|i| (i, gain(i)))
            .filter(|&(_, g)| g > 0)
            .min_by(|&(a, ga), &(b, gb)| {
                gb.cmp(&ga)
                    .then(candidates[a].arity.cmp(&candidates[b].arity))
                    .then_with(|| candidates[a].line.cmp(&candidates[b].line))
            })
            .map(|(i, _)| i)
            .expect("every permit entry is covered by its own generalization");
        used[best] = true;
        for &k in &coverage[best] {
            if uncovered[k] {
                uncovered[k] = false;
                remaining -= 1;
            }
        }
        rules.push(candidates[best].rule.clone());
    }
    Ok(PolicySet::new(rules))
}

pub fn exact_minimal_policy(scenario: &Scenario, size_budget: usize) -> Result<PolicySet> {
    exact_minimal_policy_for_log(&AccessLog::from_scenario(scenario), size_budget)
}

/// Smallest permit-only policy reproducing the log exactly.
///
/// Every sound rule (a projection of some permit entry that matches no deny
/// entry) is enumerated and ordered by its emitted rule line. Sizes 1, 2,
/// ... are searched in turn; among the covers of the first feasible size
/// the one whose sorted candidate list is lexicographically smallest is
/// returned.
pub fn exact_minimal_policy_for_log(log: &AccessLog, size_budget: usize) -> Result<PolicySet> {
    if size_budget > ORACLE_MAX_BUDGET {
        return Err(Error::ScaleExceeded(format!(
            "size budget {size_budget} > {ORACLE_MAX_BUDGET}"
        )));
    }
    if log.entries.len() > ORACLE_MAX_CELLS {
        return Err(Error::ScaleExceeded(format!(
            "{} cells > {ORACLE_MAX_CELLS}",
            log.entries.len()
        )));
    }
    let cells = Cells::from_log(log)?;
    let width = cells.width();
    if width > ORACLE_MAX_ATTRS {
        return Err(Error::ScaleExceeded(format!(
            "{width} attributes > {ORACLE_MAX_ATTRS}"
        )));
    }
    if cells.permits.is_empty() {
        return Ok(PolicySet::default());
    }

    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    for (cell, _) in &cells.permits {
        for mask in 0u32..(1 << width) {
            let pattern: Pattern = (0..width)
                .map(|pos| (mask & (1 << pos) != 0).then_some(cell[pos]))
                .collect();
            if seen.insert(pattern.clone()) && !cells.hits_deny(&pattern) {
                candidates.push(Candidate::new(&cells, pattern));
            }
        }
    }
    candidates.sort_by(|a, b| a.line.cmp(&b.line));

    let full: u64 = if cells.permits.len() == 64 {
        u64::MAX
    } else {
        (1u64 << cells.permits.len()) - 1
    };
    let masks: Vec<u64> = candidates
        .iter()
        .map(|c| {
            cells
                .permits
                .iter()
                .enumerate()
                .filter(|(_, (cell, _))| covers(&c.pattern, cell))
                .fold(0u64, |m, (k, _)| m | (1 << k))
        })
        .collect();
    let widest = masks.iter().map(|m| m.count_ones()).max().unwrap_or(0);

    for size in 1..=size_budget {
        let mut search = CoverSearch {
            masks: &masks,
            full,
            widest,
            best: None,
            chosen: Vec::with_capacity(size),
        };
        search.run(0, size);
        if let Some(best) = search.best {
            return Ok(best
                .into_iter()
                .map(|i| candidates[i].rule.clone())
                .collect());
        }
    }
    Err(Error::BudgetExceeded {
        budget: size_budget,
    })
}

struct CoverSearch<'a> {
    masks: &'a [u64],
    full: u64,
    widest: u32,
    best: Option<Vec<usize>>,
    chosen: Vec<usize>,
}

impl CoverSearch<'_> {
    /// Branches on the candidates covering the lowest uncovered permit entry.
    fn run(&mut self, covered: u64, depth_left: usize) {
        if covered == self.full {
            let mut set = self.chosen.clone();
            set.sort_unstable();
            if self.best.as_ref().is_none_or(|b| set < *b) {
                self.best = Some(set);
            }
            return;
        }
        let missing = (self.full & !covered).count_ones();
        if depth_left == 0 || missing > self.widest * depth_left as u32 {
            return;
        }
        let target = (self.full & !covered).trailing_zeros();
        for i in 0..self.masks.len() {
            if self.masks[i] & (1 << target) == 0 || self.chosen.contains(&i) {
                continue;
            }
            self.chosen.push(i);
            self.run(covered | self.masks[i], depth_left - 1);
            self.chosen.pop();
        }
    }
}
