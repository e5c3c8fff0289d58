//! Synthetic scenario generation.
//!
//! The matrix is never filled directly: a random ground-truth policy is
//! drawn and every subject–object pair is evaluated against it, which
//! makes the matrix consistent by construction. Density targets are hit by
//! rejection: rules are redrawn for the first half of the attempt budget,
//! then profiles and rules together for the second half.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{self, Semantics};
use crate::error::{Error, Result};
use crate::model::{
    AccessMatrix, AttributeKind, AttributeRef, AttributeValue, EntityProfile, PolicySet, Rule,
    Scenario,
};

/// Total attempts for [`generate_scenario`]; the first half redraws rules only.
pub const ATTEMPT_BUDGET: usize = 1000;
/// Redraw budget for duplicate rules in [`generate_ground_truth`].
pub const REDRAW_BUDGET: usize = 1000;
pub const DEFAULT_DENSITY_TOLERANCE: f64 = 0.02;

pub type ScenarioRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> ScenarioRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Attribute domain sizes: one value for every attribute, or one per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cardinality {
    Uniform(u32),
    PerAttribute { subject: Vec<u32>, object: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub n_subjects: usize,
    pub n_objects: usize,
    pub n_subject_attrs: usize,
    pub n_object_attrs: usize,
    pub domain_cardinality: Cardinality,
    pub n_rules: usize,
    pub target_density: f64,
    pub density_tolerance: f64,
    pub max_conditions_per_rule: usize,
    pub seed: u64,
    /// When set, the matrix must contain exactly this many ones; the
    /// density window is ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_ones: Option<usize>,
}

impl GenerationParams {
    pub fn total_cells(&self) -> usize {
        self.n_subjects * self.n_objects
    }

    pub fn total_attrs(&self) -> usize {
        self.n_subject_attrs + self.n_object_attrs
    }

    /// Domain size of the attribute at zero-based `position`.
    pub fn cardinality(&self, kind: AttributeKind, position: usize) -> u32 {
        match &self.domain_cardinality {
            Cardinality::Uniform(c) => *c,
            Cardinality::PerAttribute { subject, object } => {
                let v = match kind {
                    AttributeKind::Subject => subject,
                    AttributeKind::Object => object,
                };
                v.get(position).copied().unwrap_or(0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_subjects == 0 || self.n_objects == 0 {
            return bad("subject and object counts must be positive".into());
        }
        if self.total_attrs() == 0 {
            return bad("at least one attribute is required".into());
        }
        if self.n_rules == 0 {
            return bad("n_rules must be positive".into());
        }
        if self.max_conditions_per_rule == 0 || self.max_conditions_per_rule > self.total_attrs() {
            return bad(format!(
                "max_conditions_per_rule must be in 1..={}",
                self.total_attrs()
            ));
        }
        match &self.domain_cardinality {
            Cardinality::Uniform(0) => return bad("cardinality must be positive".into()),
            Cardinality::Uniform(_) => {}
            Cardinality::PerAttribute { subject, object } => {
                if subject.len() != self.n_subject_attrs || object.len() != self.n_object_attrs {
                    return bad("per-attribute cardinality lengths differ from attribute counts".into());
                }
                if subject.iter().chain(object).any(|&c| c == 0) {
                    return bad("cardinality must be positive".into());
                }
            }
        }
        match self.exact_ones {
            Some(k) if k > self.total_cells() => {
                bad(format!("exact_ones {k} exceeds {} cells", self.total_cells()))
            }
            Some(_) => Ok(()),
            None => {
                let (t, tol) = (self.target_density, self.density_tolerance);
                if !(tol >= 0.0 && t - tol > 0.0 && t + tol < 1.0) {
                    bad(format!("density window {t} ± {tol} must lie inside (0, 1)"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn accepts(&self, acm: &AccessMatrix) -> bool {
        match self.exact_ones {
            Some(k) => acm.ones() == k,
            None => {
                let d = acm.ones() as f64 / acm.total() as f64;
                (d - self.target_density).abs() <= self.density_tolerance + 1e-12
            }
        }
    }
}

fn draw_profile(rng: &mut ScenarioRng, params: &GenerationParams, kind: AttributeKind) -> EntityProfile {
    let n = match kind {
        AttributeKind::Subject => params.n_subject_attrs,
        AttributeKind::Object => params.n_object_attrs,
    };
    (0..n)
        .map(|k| rng.gen_range(1..=params.cardinality(kind, k)))
        .collect::<Vec<_>>()
        .into()
}

/// Draws every subject profile, then every object profile, each value
/// uniform over its domain.
pub fn generate_profiles(
    params: &GenerationParams,
    rng: &mut ScenarioRng,
) -> (Vec<EntityProfile>, Vec<EntityProfile>) {
    let subjects = (0..params.n_subjects)
        .map(|_| draw_profile(rng, params, AttributeKind::Subject))
        .collect();
    let objects = (0..params.n_objects)
        .map(|_| draw_profile(rng, params, AttributeKind::Object))
        .collect();
    (subjects, objects)
}

fn all_attributes(params: &GenerationParams) -> Vec<AttributeRef> {
    (1..=params.n_subject_attrs as u32)
        .map(AttributeRef::subject)
        .chain((1..=params.n_object_attrs as u32).map(AttributeRef::object))
        .collect()
}

/// Draws `n_rules` distinct normalized permit rules.
pub fn generate_ground_truth(params: &GenerationParams, rng: &mut ScenarioRng) -> Result<PolicySet> {
    let attrs = all_attributes(params);
    let mut seen = HashSet::new();
    let mut rules = Vec::with_capacity(params.n_rules);
    let mut redraws = 0;
    while rules.len() < params.n_rules {
        let k = rng.gen_range(1..=params.max_conditions_per_rule);
        let conditions = index::sample(rng, attrs.len(), k)
            .into_iter()
            .map(|i| {
                let attr = attrs[i];
                let card = params.cardinality(attr.kind, attr.position());
                AttributeValue::new(attr, rng.gen_range(1..=card))
            })
            .collect();
        let rule = Rule::permit(conditions).normalize()?;
        if seen.insert(rule.clone()) {
            rules.push(rule);
        } else {
            redraws += 1;
            if redraws >= REDRAW_BUDGET {
                return Err(Error::GenerationExhausted {
                    wanted: params.n_rules,
                    attempts: redraws,
                });
            }
        }
    }
    Ok(PolicySet::new(rules))
}

/// Generates a scenario whose id is derived from its shape and seed.
pub fn generate_scenario(params: &GenerationParams) -> Result<Scenario> {
    let id = format!(
        "custom-{}x{}-s{}",
        params.n_subjects, params.n_objects, params.seed
    );
    generate_scenario_with_id(params, id)
}

pub fn generate_scenario_with_id(params: &GenerationParams, id: impl Into<String>) -> Result<Scenario> {
    params.validate()?;
    let mut rng = rng_from_seed(params.seed);
    let (mut subjects, mut objects) = generate_profiles(params, &mut rng);
    for attempt in 1..=ATTEMPT_BUDGET {
        if attempt > ATTEMPT_BUDGET / 2 {
            (subjects, objects) = generate_profiles(params, &mut rng);
        }
        let policy = generate_ground_truth(params, &mut rng)?;
        let acm = engine::reconstruct_acm(&policy, &subjects, &objects, Semantics::PermitOnly)?;
        if params.accepts(&acm) {
            return Scenario::new(
                id,
                subjects,
                objects,
                policy,
                acm,
                params.clone(),
                params.seed,
                attempt,
            );
        }
    }
    let target = params
        .exact_ones
        .map_or(params.target_density, |k| k as f64 / params.total_cells() as f64);
    Err(Error::DensityUnreachable {
        target,
        tolerance: if params.exact_ones.is_some() { 0.0 } else { params.density_tolerance },
        attempts: ATTEMPT_BUDGET,
    })
}

/// Fraction of ones in the matrix.
pub fn density(acm: &AccessMatrix) -> Result<f64> {
    if acm.total() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(acm.ones() as f64 / acm.total() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GenerationParams {
        GenerationParams {
            n_subjects: 15,
            n_objects: 15,
            n_subject_attrs: 3,
            n_object_attrs: 3,
            domain_cardinality: Cardinality::Uniform(5),
            n_rules: 10,
            target_density: 0.3,
            density_tolerance: 0.02,
            max_conditions_per_rule: 3,
            seed: 42,
            exact_ones: None,
        }
    }

    #[test]
    fn forced_singleton_profile() {
        let p = GenerationParams {
            n_subjects: 1,
            n_objects: 1,
            n_subject_attrs: 1,
            n_object_attrs: 1,
            domain_cardinality: Cardinality::Uniform(1),
            max_conditions_per_rule: 1,
            n_rules: 1,
            ..params()
        };
        let (s, o) = generate_profiles(&p, &mut rng_from_seed(9));
        assert_eq!(s, vec![EntityProfile::new(vec![1])]);
        assert_eq!(o, vec![EntityProfile::new(vec![1])]);
    }

    #[test]
    fn profiles_are_deterministic() {
        let p = params();
        let a = generate_profiles(&p, &mut rng_from_seed(5));
        let b = generate_profiles(&p, &mut rng_from_seed(5));
        assert_eq!(a, b);
    }

    #[test]
    fn forced_single_rule() {
        let p = GenerationParams {
            n_subject_attrs: 1,
            n_object_attrs: 0,
            domain_cardinality: Cardinality::Uniform(1),
            max_conditions_per_rule: 1,
            n_rules: 1,
            ..params()
        };
        let policy = generate_ground_truth(&p, &mut rng_from_seed(0)).unwrap();
        assert_eq!(policy, PolicySet::new(vec![Rule::permit(vec![AttributeValue::subject(1, 1)])]));
    }

    #[test]
    fn tiny_domain_exhausts_redraws() {
        let p = GenerationParams {
            n_subject_attrs: 1,
            n_object_attrs: 0,
            domain_cardinality: Cardinality::Uniform(1),
            max_conditions_per_rule: 1,
            n_rules: 2,
            ..params()
        };
        assert!(matches!(
            generate_ground_truth(&p, &mut rng_from_seed(0)),
            Err(Error::GenerationExhausted { wanted: 2, .. })
        ));
    }

    #[test]
    fn ground_truth_rules_are_distinct_and_bounded() {
        let p = params();
        let policy = generate_ground_truth(&p, &mut rng_from_seed(3)).unwrap();
        assert_eq!(policy.len(), 10);
        let distinct: HashSet<_> = policy.iter().collect();
        assert_eq!(distinct.len(), 10);
        for r in &policy {
            assert!((1..=3).contains(&r.conditions().len()));
            assert_eq!(&r.normalize().unwrap(), r);
        }
    }

    #[test]
    fn scenario_hits_density_window() {
        let s = generate_scenario(&params()).unwrap();
        let d = density(&s.acm).unwrap();
        assert!((0.28..=0.32).contains(&d), "density {d}");
        assert!(s.attempts >= 1 && s.attempts <= ATTEMPT_BUDGET);
        assert_eq!(s, generate_scenario(&params()).unwrap());
    }

    #[test]
    fn unreachable_density_errors() {
        let p = GenerationParams {
            n_subjects: 2,
            n_objects: 2,
            n_subject_attrs: 1,
            n_object_attrs: 0,
            domain_cardinality: Cardinality::Uniform(1),
            max_conditions_per_rule: 1,
            n_rules: 1,
            target_density: 0.5,
            density_tolerance: 0.1,
            ..params()
        };
        assert!(matches!(
            generate_scenario(&p),
            Err(Error::DensityUnreachable { attempts: ATTEMPT_BUDGET, .. })
        ));
    }

    #[test]
    fn validate_rejects_bad_windows() {
        let mut p = params();
        p.target_density = 0.01;
        assert!(p.validate().is_err());
        let mut p = params();
        p.max_conditions_per_rule = 7;
        assert!(p.validate().is_err());
        let mut p = params();
        p.domain_cardinality = Cardinality::PerAttribute {
            subject: vec![2, 2],
            object: vec![2, 2, 2],
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn density_values() {
        let mut cells = vec![false; 225];
        cells[..29].iter_mut().for_each(|c| *c = true);
        let m = AccessMatrix::new(15, 15, cells).unwrap();
        assert!((density(&m).unwrap() - 29.0 / 225.0).abs() < 1e-15);
        assert_eq!(density(&AccessMatrix::zeros(3, 3).unwrap()).unwrap(), 0.0);
    }
}
