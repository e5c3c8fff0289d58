//! Policy decision point.
//!
//! Two combining semantics are supported. `PermitOnly` grants iff some
//! permit rule matches and rejects deny rules outright. `DenyOverrides`
//! denies when any deny rule matches, otherwise permits when a permit rule
//! matches, otherwise denies.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AccessMatrix, AttributeKind, Decision, EntityProfile, PolicySet, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semantics {
    PermitOnly,
    DenyOverrides,
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Semantics::PermitOnly => "permit-only",
            Semantics::DenyOverrides => "deny-overrides",
        })
    }
}

impl FromStr for Semantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "permit-only" | "permit_only" | "PermitOnly" => Ok(Semantics::PermitOnly),
            "deny-overrides" | "deny_overrides" | "DenyOverrides" => Ok(Semantics::DenyOverrides),
            other => Err(Error::Unknown {
                what: "semantics",
                name: other.to_string(),
            }),
        }
    }
}

fn check_semantics(policy: &PolicySet, sem: Semantics) -> Result<()> {
    if sem == Semantics::PermitOnly && policy.has_deny() {
        return Err(Error::DenyRuleUnderPermitOnly);
    }
    Ok(())
}

/// Evaluates one request.
pub fn decide(
    policy: &PolicySet,
    subject: &EntityProfile,
    object: &EntityProfile,
    sem: Semantics,
) -> Result<Decision> {
    check_semantics(policy, sem)?;
    for rule in policy {
        rule.check_arity(subject.len(), object.len())?;
    }
    let compiled = Compiled::new(policy);
    Ok(compiled.decide(subject.values(), object.values()))
}

/// Evaluates every subject × object pair; cell `(i, j)` is set iff the
/// decision for `(subjects[i], objects[j])` is permit.
pub fn reconstruct_acm(
    policy: &PolicySet,
    subjects: &[EntityProfile],
    objects: &[EntityProfile],
    sem: Semantics,
) -> Result<AccessMatrix> {
    check_semantics(policy, sem)?;
    let min_len = |ps: &[EntityProfile]| ps.iter().map(EntityProfile::len).min().unwrap_or(0);
    let (ns, no) = (min_len(subjects), min_len(objects));
    for rule in policy {
        rule.check_arity(ns, no)?;
    }
    let compiled = Compiled::new(policy);
    let n_objects = objects.len();
    let mut cells = vec![false; subjects.len() * n_objects];
    if n_objects > 0 {
        cells
            .par_chunks_mut(n_objects)
            .zip(subjects.par_iter())
            .for_each(|(row, s)| {
                for (cell, o) in row.iter_mut().zip(objects) {
                    *cell = compiled.decide(s.values(), o.values()) == Decision::Permit;
                }
            });
    }
    AccessMatrix::new(subjects.len(), n_objects, cells)
}

/// Rules flattened to `(kind, position, value)` triples, split by decision.
/// Arity must already have been checked.
struct Compiled {
    permits: Vec<Vec<(AttributeKind, usize, u32)>>,
    denies: Vec<Vec<(AttributeKind, usize, u32)>>,
}

impl Compiled {
    fn new(policy: &PolicySet) -> Self {
        let flatten = |r: &Rule| {
            r.conditions()
                .iter()
                .map(|c| (c.attr.kind, c.attr.position(), c.value()))
                .collect::<Vec<_>>()
        };
        let (denies, permits): (Vec<&Rule>, Vec<&Rule>) =
            policy.iter().partition(|r| r.decision == Decision::Deny);
        Compiled {
            permits: permits.into_iter().map(flatten).collect(),
            denies: denies.into_iter().map(flatten).collect(),
        }
    }

    fn decide(&self, s: &[u32], o: &[u32]) -> Decision {
        let hit = |conds: &Vec<(AttributeKind, usize, u32)>| {
            conds.iter().all(|&(kind, pos, v)| match kind {
                AttributeKind::Subject => s[pos] == v,
                AttributeKind::Object => o[pos] == v,
            })
        };
        if self.denies.iter().any(hit) {
            Decision::Deny
        } else if self.permits.iter().any(hit) {
            Decision::Permit
        } else {
            Decision::Deny
        }
    }
}
