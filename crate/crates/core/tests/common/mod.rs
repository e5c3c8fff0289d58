//! Helpers shared by the integration tests. The oracles here deliberately
//! avoid the library's evaluation paths: they walk raw profile vectors.

#![allow(dead_code)]

use minebench::engine::Semantics;
use minebench::generator::{Cardinality, GenerationParams};
use minebench::model::{
    AccessMatrix, AttributeKind, AttributeValue, Decision, EntityProfile, PolicySet, Rule,
};
use proptest::prelude::*;

/// Small-domain parameters: few attributes, so equal profiles are common.
pub fn small_params(n_subjects: usize, n_objects: usize, seed: u64) -> GenerationParams {
    GenerationParams {
        n_subjects,
        n_objects,
        n_subject_attrs: 2,
        n_object_attrs: 2,
        domain_cardinality: Cardinality::Uniform(3),
        n_rules: 6,
        target_density: 0.3,
        density_tolerance: 0.2,
        max_conditions_per_rule: 3,
        seed,
        exact_ones: None,
    }
}

pub fn with_density(mut p: GenerationParams, target: f64, tolerance: f64) -> GenerationParams {
    p.target_density = target;
    p.density_tolerance = tolerance;
    p
}

fn holds(cond: &AttributeValue, s: &[u32], o: &[u32]) -> bool {
    let side = match cond.attr.kind {
        AttributeKind::Subject => s,
        AttributeKind::Object => o,
    };
    side[cond.attr.index() as usize - 1] == cond.value()
}

fn naive_matches(rule: &Rule, s: &[u32], o: &[u32]) -> bool {
    rule.conditions().iter().all(|c| holds(c, s, o))
}

/// Brute-force cell decision.
pub fn naive_decide(policy: &PolicySet, s: &[u32], o: &[u32], sem: Semantics) -> bool {
    let hit = |d: Decision| {
        policy
            .iter()
            .any(|r| r.decision == d && naive_matches(r, s, o))
    };
    match sem {
        Semantics::PermitOnly => hit(Decision::Permit),
        Semantics::DenyOverrides => !hit(Decision::Deny) && hit(Decision::Permit),
    }
}

pub fn naive_reconstruct(
    policy: &PolicySet,
    subjects: &[EntityProfile],
    objects: &[EntityProfile],
    sem: Semantics,
) -> Vec<Vec<bool>> {
    subjects
        .iter()
        .map(|s| {
            objects
                .iter()
                .map(|o| naive_decide(policy, s.values(), o.values(), sem))
                .collect()
        })
        .collect()
}

pub fn matrix_rows(acm: &AccessMatrix) -> Vec<Vec<bool>> {
    (0..acm.n_subjects()).map(|i| acm.row(i).to_vec()).collect()
}

// ---- proptest strategies ----

pub const ATTRS: u32 = 3;
pub const CARD: u32 = 3;

pub fn profile(len: u32, card: u32) -> impl Strategy<Value = EntityProfile> {
    prop::collection::vec(1..=card, len as usize).prop_map(EntityProfile::new)
}

pub fn condition() -> impl Strategy<Value = AttributeValue> {
    (any::<bool>(), 1..=ATTRS, 1..=CARD).prop_map(|(subject, i, v)| {
        if subject {
            AttributeValue::subject(i, v)
        } else {
            AttributeValue::object(i, v)
        }
    })
}

/// Raw, possibly unnormalized and possibly conflicting rule.
pub fn raw_rule(decision: Decision) -> impl Strategy<Value = Rule> {
    prop::collection::vec(condition(), 0..5).prop_map(move |c| Rule::new(c, decision))
}

/// Normalized rule: at most one value per attribute.
pub fn rule(decision: Decision) -> impl Strategy<Value = Rule> {
    raw_rule(decision).prop_map(|r| {
        let mut seen = std::collections::BTreeSet::new();
        let kept = r
            .conditions()
            .iter()
            .copied()
            .filter(|c| seen.insert(c.attr))
            .collect();
        Rule::new(kept, r.decision).normalize().unwrap()
    })
}

pub fn any_rule() -> impl Strategy<Value = Rule> {
    prop_oneof![rule(Decision::Permit), rule(Decision::Deny)]
}

pub fn permit_policy(max: usize) -> impl Strategy<Value = PolicySet> {
    prop::collection::vec(rule(Decision::Permit), 0..=max).prop_map(PolicySet::new)
}

pub fn mixed_policy(max: usize) -> impl Strategy<Value = PolicySet> {
    prop::collection::vec(any_rule(), 0..=max).prop_map(PolicySet::new)
}

pub fn profiles(n: usize) -> impl Strategy<Value = Vec<EntityProfile>> {
    prop::collection::vec(profile(ATTRS, CARD), 1..=n)
}
