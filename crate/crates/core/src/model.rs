//! Domain types: attributes, rules, policies and the access matrix.
//!
//! Attribute and value indices are 1-based so that they line up with the
//! token grammar (`SA_2`, `S_2_3`); profiles store values positionally.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{self, Semantics};
use crate::error::{Error, Result};
use crate::generator::GenerationParams;

/// Which side of a request an attribute describes.
///
/// `Object` orders before `Subject` so that sorted conditions come out
/// object-attributes first, the order used by the rule-line grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttributeKind {
    Object,
    Subject,
}

impl AttributeKind {
    /// Prefix of a value token (`S` / `O`).
    pub fn token_prefix(self) -> &'static str {
        match self {
            AttributeKind::Subject => "S",
            AttributeKind::Object => "O",
        }
    }

    /// Prefix of an attribute name (`SA` / `OA`).
    pub fn name_prefix(self) -> &'static str {
        match self {
            AttributeKind::Subject => "SA",
            AttributeKind::Object => "OA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeRef {
    pub kind: AttributeKind,
    index: u32,
}

impl AttributeRef {
    /// Panics if `index` is zero.
    pub fn new(kind: AttributeKind, index: u32) -> Self {
        assert!(index >= 1, "attribute indices are 1-based");
        AttributeRef { kind, index }
    }

    pub fn subject(index: u32) -> Self {
        Self::new(AttributeKind::Subject, index)
    }

    pub fn object(index: u32) -> Self {
        Self::new(AttributeKind::Object, index)
    }

    pub fn index(self) -> u32 {
        self.index
    }

    /// Zero-based position in an [`EntityProfile`].
    pub fn position(self) -> usize {
        (self.index - 1) as usize
    }
}

impl fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.kind.name_prefix(), self.index)
    }
}

/// One attribute-value pair, rendered as `S_i_j` or `O_i_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeValue {
    pub attr: AttributeRef,
    value: u32,
}

impl AttributeValue {
    /// Panics if `value` is zero.
    pub fn new(attr: AttributeRef, value: u32) -> Self {
        assert!(value >= 1, "value indices are 1-based");
        AttributeValue { attr, value }
    }

    pub fn subject(index: u32, value: u32) -> Self {
        Self::new(AttributeRef::subject(index), value)
    }

    pub fn object(index: u32, value: u32) -> Self {
        Self::new(AttributeRef::object(index), value)
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn token(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}_{}",
            self.attr.kind.token_prefix(),
            self.attr.index,
            self.value
        )
    }
}

/// A subject's or object's full attribute assignment. Position `k` holds
/// the value index of attribute `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityProfile(Vec<u32>);

impl EntityProfile {
    pub fn new(values: Vec<u32>) -> Self {
        EntityProfile(values)
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value of the 1-based attribute `index`, if present.
    pub fn get(&self, index: u32) -> Option<u32> {
        index
            .checked_sub(1)
            .and_then(|p| self.0.get(p as usize))
            .copied()
    }

    /// Value tokens in attribute order, e.g. `["S_1_2", "S_2_1"]`.
    pub fn tokens(&self, kind: AttributeKind) -> Vec<String> {
        self.0
            .iter()
            .enumerate()
            .map(|(k, &v)| AttributeValue::new(AttributeRef::new(kind, k as u32 + 1), v).token())
            .collect()
    }
}

impl From<Vec<u32>> for EntityProfile {
    fn from(values: Vec<u32>) -> Self {
        EntityProfile(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Permit,
    Deny,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Permit => "permit",
            Decision::Deny => "deny",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A conjunction of equality conditions with a decision. An empty
/// condition list matches every request.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    conditions: Vec<AttributeValue>,
    pub decision: Decision,
}

impl Rule {
    /// Builds a rule as given; call [`Rule::normalize`] for canonical form.
    pub fn new(conditions: Vec<AttributeValue>, decision: Decision) -> Self {
        Rule {
            conditions,
            decision,
        }
    }

    pub fn permit(conditions: Vec<AttributeValue>) -> Self {
        Self::new(conditions, Decision::Permit)
    }

    pub fn deny(conditions: Vec<AttributeValue>) -> Self {
        Self::new(conditions, Decision::Deny)
    }

    pub fn conditions(&self) -> &[AttributeValue] {
        &self.conditions
    }

    pub fn is_wildcard(&self) -> bool {
        self.conditions.is_empty()
    }

    /// True iff every condition holds for the pair. A condition on an
    /// attribute the profile does not have is an error, never a mismatch.
    pub fn matches(&self, subject: &EntityProfile, object: &EntityProfile) -> Result<bool> {
        let mut all = true;
        for cond in &self.conditions {
            let profile = match cond.attr.kind {
                AttributeKind::Subject => subject,
                AttributeKind::Object => object,
            };
            match profile.get(cond.attr.index) {
                Some(v) => all &= v == cond.value,
                None => {
                    return Err(Error::AttributeOutOfRange {
                        attr: cond.attr,
                        len: profile.len(),
                    })
                }
            }
        }
        Ok(all)
    }

    /// Checks that every condition resolves against profiles with the given
    /// attribute counts.
    pub fn check_arity(&self, n_subject_attrs: usize, n_object_attrs: usize) -> Result<()> {
        for cond in &self.conditions {
            let len = match cond.attr.kind {
                AttributeKind::Subject => n_subject_attrs,
                AttributeKind::Object => n_object_attrs,
            };
            if cond.attr.position() >= len {
                return Err(Error::AttributeOutOfRange {
                    attr: cond.attr,
                    len,
                });
            }
        }
        Ok(())
    }

    /// Canonical form: duplicates collapsed, object attributes first, then
    /// subject attributes, each by ascending index.
    pub fn normalize(&self) -> Result<Rule> {
        let mut by_attr: BTreeMap<AttributeRef, u32> = BTreeMap::new();
        for cond in &self.conditions {
            if let Some(&prev) = by_attr.get(&cond.attr) {
                if prev != cond.value {
                    return Err(Error::ConflictingConditions {
                        attr: cond.attr,
                        first: prev,
                        second: cond.value,
                    });
                }
            } else {
                by_attr.insert(cond.attr, cond.value);
            }
        }
        Ok(Rule {
            conditions: by_attr
                .into_iter()
                .map(|(attr, value)| AttributeValue::new(attr, value))
                .collect(),
            decision: self.decision,
        })
    }
}

/// Free-function form of [`Rule::matches`].
pub fn rule_matches(rule: &Rule, subject: &EntityProfile, object: &EntityProfile) -> Result<bool> {
    rule.matches(subject, object)
}

/// Free-function form of [`Rule::normalize`].
pub fn normalize_rule(rule: &Rule) -> Result<Rule> {
    rule.normalize()
}

/// An ordered list of rules. Order is kept for reporting only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicySet {
    pub rules: Vec<Rule>,
}

impl PolicySet {
    pub fn new(rules: Vec<Rule>) -> Self {
        PolicySet { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rule> {
        self.rules.iter()
    }

    pub fn has_deny(&self) -> bool {
        self.rules.iter().any(|r| r.decision == Decision::Deny)
    }
}

impl FromIterator<Rule> for PolicySet {
    fn from_iter<I: IntoIterator<Item = Rule>>(iter: I) -> Self {
        PolicySet::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PolicySet {
    type Item = &'a Rule;
    type IntoIter = std::slice::Iter<'a, Rule>;

    fn into_iter(self) -> Self::IntoIter {
        self.rules.iter()
    }
}

/// Dense binary subject × object matrix; `true` means permit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AccessMatrix {
    n_subjects: usize,
    n_objects: usize,
    cells: Vec<bool>,
}

impl AccessMatrix {
    /// Row-major cells. Both dimensions must be positive.
    pub fn new(n_subjects: usize, n_objects: usize, cells: Vec<bool>) -> Result<Self> {
        if n_subjects == 0 || n_objects == 0 {
            return Err(Error::EmptyMatrix);
        }
        if cells.len() != n_subjects * n_objects {
            return Err(Error::format(
                "matrix",
                format!(
                    "{} cells for a {}x{} matrix",
                    cells.len(),
                    n_subjects,
                    n_objects
                ),
            ));
        }
        Ok(AccessMatrix {
            n_subjects,
            n_objects,
            cells,
        })
    }

    pub fn zeros(n_subjects: usize, n_objects: usize) -> Result<Self> {
        Self::new(n_subjects, n_objects, vec![false; n_subjects * n_objects])
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_subjects = rows.len();
        let n_objects = rows.first().map_or(0, |r| r.as_ref().len());
        let mut cells = Vec::with_capacity(n_subjects * n_objects);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_objects {
                return Err(Error::format("matrix", "ragged rows"));
            }
            for &v in row {
                match v {
                    0 => cells.push(false),
                    1 => cells.push(true),
                    other => {
                        return Err(Error::format("matrix", format!("cell value {other}")))
                    }
                }
            }
        }
        Self::new(n_subjects, n_objects, cells)
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_subjects, self.n_objects)
    }

    pub fn total(&self) -> usize {
        self.cells.len()
    }

    pub fn get(&self, subject: usize, object: usize) -> bool {
        assert!(subject < self.n_subjects && object < self.n_objects);
        self.cells[subject * self.n_objects + object]
    }

    pub fn row(&self, subject: usize) -> &[bool] {
        let start = subject * self.n_objects;
        &self.cells[start..start + self.n_objects]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Cell-wise complement.
    pub fn complement(&self) -> Self {
        AccessMatrix {
            n_subjects: self.n_subjects,
            n_objects: self.n_objects,
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }
}

/// A generated benchmark instance: profiles, the ground-truth policy and
/// the matrix that policy induces.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub subjects: Vec<EntityProfile>,
    pub objects: Vec<EntityProfile>,
    pub ground_truth: PolicySet,
    pub acm: AccessMatrix,
    pub params: GenerationParams,
    pub seed: u64,
    /// Number of generation attempts it took to hit the density target.
    pub attempts: usize,
}

impl Scenario {
    /// Validates profile shapes against `params` and that `acm` is exactly
    /// the permit-only reconstruction of `ground_truth`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        subjects: Vec<EntityProfile>,
        objects: Vec<EntityProfile>,
        ground_truth: PolicySet,
        acm: AccessMatrix,
        params: GenerationParams,
        seed: u64,
        attempts: usize,
    ) -> Result<Self> {
        check_profiles(&subjects, AttributeKind::Subject, &params)?;
        check_profiles(&objects, AttributeKind::Object, &params)?;
        let induced =
            engine::reconstruct_acm(&ground_truth, &subjects, &objects, Semantics::PermitOnly)?;
        if induced != acm {
            return Err(Error::InvalidScenario(
                "access matrix differs from the ground-truth reconstruction".into(),
            ));
        }
        Ok(Scenario {
            id: id.into(),
            subjects,
            objects,
            ground_truth,
            acm,
            params,
            seed,
            attempts,
        })
    }

    pub fn density(&self) -> f64 {
        self.acm.ones() as f64 / self.acm.total() as f64
    }
}

fn check_profiles(
    profiles: &[EntityProfile],
    kind: AttributeKind,
    params: &GenerationParams,
) -> Result<()> {
    let (expected_n, n_attrs) = match kind {
        AttributeKind::Subject => (params.n_subjects, params.n_subject_attrs),
        AttributeKind::Object => (params.n_objects, params.n_object_attrs),
    };
    if profiles.len() != expected_n {
        return Err(Error::InvalidScenario(format!(
            "expected {expected_n} {kind:?} profiles, found {}",
            profiles.len()
        )));
    }
    for (i, p) in profiles.iter().enumerate() {
        if p.len() != n_attrs {
            return Err(Error::InvalidScenario(format!(
                "{kind:?} {i} has {} attributes, expected {n_attrs}",
                p.len()
            )));
        }
        for (k, &v) in p.values().iter().enumerate() {
            let card = params.cardinality(kind, k);
            if v == 0 || v > card {
                return Err(Error::InvalidScenario(format!(
                    "{kind:?} {i} attribute {} value {v} outside 1..={card}",
                    k + 1
                )));
            }
        }
    }
    Ok(())
}
