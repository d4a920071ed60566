//! Trust scoring between an evaluating node and an evaluated node.
//!
//! Trust is computed from the current encounter only: the evaluated node's
//! announced interests and competence. No interaction history is kept; a
//! neighbor's score is overwritten on every re-registration.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::taxonomy::{SkillTaxonomy, TaxonomyError};

/// The interest that gates trust: only health-interested nodes are scored.
pub const HEALTH_INTEREST: &str = "health";

#[derive(Debug, Error, PartialEq)]
pub enum TrustError {
    #[error("interest set must not be empty")]
    EmptyInterestSet,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Non-empty set of interest labels, normalized to lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestSet {
    interests: BTreeSet<String>,
}

impl InterestSet {
    pub fn new<I, S>(labels: I) -> Result<Self, TrustError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let interests: BTreeSet<String> = labels
            .into_iter()
            .map(|l| l.as_ref().trim().to_ascii_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        if interests.is_empty() {
            return Err(TrustError::EmptyInterestSet);
        }
        Ok(InterestSet { interests })
    }

    pub fn len(&self) -> usize {
        self.interests.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, label: &str) -> bool {
        self.interests.contains(&label.trim().to_ascii_lowercase())
    }

    pub fn has_health_interest(&self) -> bool {
        self.contains(HEALTH_INTEREST)
    }

    pub fn common_count(&self, other: &InterestSet) -> usize {
        self.interests.intersection(&other.interests).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.interests.iter().map(|s| s.as_str())
    }
}

/// Trust of an evaluator over an evaluated node.
///
/// `total` is the mean of the interest and skill components, forced to 0 when
/// the evaluated node lacks the health interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustScore {
    pub interest_trust: f64,
    pub skill_trust: f64,
    pub total: f64,
}

/// Interest trust: the share of the evaluator's interests that the evaluated
/// node also holds, or 0 when the evaluated node is not health-interested.
///
/// The denominator is the evaluator's set, so the measure is asymmetric.
pub fn interest_trust(evaluator: &InterestSet, evaluated: &InterestSet) -> f64 {
    if !evaluated.has_health_interest() {
        return 0.0;
    }
    evaluator.common_count(evaluated) as f64 / evaluator.len() as f64
}

/// Skill trust: similarity of the evaluated competence to the reference.
pub fn skill_trust(tax: &SkillTaxonomy, evaluated_skill: &str) -> Result<f64, TrustError> {
    Ok(tax.similarity_to_reference(evaluated_skill)?.value())
}

/// Total trust of the evaluator over the evaluated node.
///
/// Callers only evaluate when they are themselves health-interested; the
/// evaluated-side health gate is applied here.
pub fn total_trust(
    evaluator: &InterestSet,
    evaluated: &InterestSet,
    evaluated_skill: &str,
    tax: &SkillTaxonomy,
) -> Result<TrustScore, TrustError> {
    let skill = skill_trust(tax, evaluated_skill)?;
    let interest = interest_trust(evaluator, evaluated);
    let total = if evaluated.has_health_interest() {
        (interest + skill) / 2.0
    } else {
        0.0
    };
    Ok(TrustScore {
        interest_trust: interest,
        skill_trust: skill,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::build_default_taxonomy;

    const EPS: f64 = 1e-9;

    fn set(labels: &[&str]) -> InterestSet {
        InterestSet::new(labels.iter().copied()).unwrap()
    }

    #[test]
    fn empty_interest_set_rejected() {
        assert_eq!(
            InterestSet::new(Vec::<&str>::new()).unwrap_err(),
            TrustError::EmptyInterestSet
        );
        assert_eq!(
            InterestSet::new(["  "]).unwrap_err(),
            TrustError::EmptyInterestSet
        );
    }

    #[test]
    fn interest_trust_fixtures() {
        assert_eq!(interest_trust(&set(&["health"]), &set(&["health"])), 1.0);
        // evaluated side lacks health: gated to zero
        assert_eq!(
            interest_trust(&set(&["health", "music"]), &set(&["music", "books"])),
            0.0
        );
        let t = interest_trust(
            &set(&["health", "music", "books"]),
            &set(&["health", "music", "tourism"]),
        );
        assert!((t - 2.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn interest_trust_is_asymmetric() {
        let a = set(&["health", "music", "books"]);
        let b = set(&["health"]);
        assert!((interest_trust(&a, &b) - 1.0 / 3.0).abs() < EPS);
        assert_eq!(interest_trust(&b, &a), 1.0);
    }

    #[test]
    fn skill_trust_fixtures() {
        let tax = build_default_taxonomy();
        assert_eq!(skill_trust(&tax, "doctor").unwrap(), 1.0);
        assert_eq!(skill_trust(&tax, "other").unwrap(), 0.0);
        assert!((skill_trust(&tax, "police_officer").unwrap() - 2.0 / 7.0).abs() < EPS);
        assert!(matches!(
            skill_trust(&tax, "astronaut"),
            Err(TrustError::Taxonomy(_))
        ));
    }

    #[test]
    fn total_trust_fixtures() {
        let tax = build_default_taxonomy();
        let health = set(&["health"]);
        let all = set(&["health", "music", "tourism", "movies", "books"]);

        let caregiver = total_trust(&health, &health, "caregiver", &tax).unwrap();
        assert!((caregiver.total - (1.0 + 2.0 / 7.0) / 2.0).abs() < EPS);
        assert!((caregiver.total - 0.64).abs() < 5e-3);

        let doctor = total_trust(&all, &all, "doctor", &tax).unwrap();
        assert_eq!(doctor.total, 1.0);

        let nurse = total_trust(&health, &health, "nurse", &tax).unwrap();
        assert!((nurse.total - (1.0 + 1.0 / 3.0) / 2.0).abs() < EPS);

        let gated = total_trust(&health, &set(&["music"]), "doctor", &tax).unwrap();
        assert_eq!(gated.total, 0.0);
        assert_eq!(gated.interest_trust, 0.0);
    }

    #[test]
    fn total_positive_iff_evaluated_has_health() {
        let tax = build_default_taxonomy();
        let evaluator = set(&["health", "music"]);
        for skill in ["doctor", "nurse", "caregiver", "other"] {
            let with = total_trust(&evaluator, &set(&["health"]), skill, &tax).unwrap();
            assert!(with.total > 0.0, "{skill} scored zero with health interest");
            let without = total_trust(&evaluator, &set(&["books"]), skill, &tax).unwrap();
            assert_eq!(without.total, 0.0);
        }
    }

    #[test]
    fn adding_common_interest_never_decreases_interest_trust() {
        let evaluator = set(&["health", "music", "tourism", "movies", "books"]);
        let base = set(&["health"]);
        let mut prev = interest_trust(&evaluator, &base);
        for grow in [
            vec!["health", "music"],
            vec!["health", "music", "tourism"],
            vec!["health", "music", "tourism", "movies"],
            vec!["health", "music", "tourism", "movies", "books"],
        ] {
            let t = interest_trust(&evaluator, &set(&grow));
            assert!(t >= prev);
            prev = t;
        }
    }

    #[test]
    fn ranking_is_invariant_under_two_decimal_rounding() {
        // Neighbors with the reference column competences: ordering by exact
        // trust matches ordering by trust rounded to two decimals.
        let tax = build_default_taxonomy();
        let health = set(&["health"]);
        let mut exact: Vec<(String, f64)> = ["doctor", "nurse", "police_officer"]
            .iter()
            .map(|s| {
                (
                    s.to_string(),
                    total_trust(&health, &health, s, &tax).unwrap().total,
                )
            })
            .collect();
        let mut rounded = exact.clone();
        exact.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        rounded.sort_by(|a, b| {
            let r = |v: f64| (v * 100.0).round() / 100.0;
            r(b.1).partial_cmp(&r(a.1)).unwrap()
        });
        let order = |v: &[(String, f64)]| v.iter().map(|(s, _)| s.clone()).collect::<Vec<_>>();
        assert_eq!(order(&exact), order(&rounded));
        assert_eq!(order(&exact), vec!["doctor", "nurse", "police_officer"]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        const LABELS: [&str; 6] = ["health", "music", "tourism", "movies", "books", "chess"];
        const SKILLS: [&str; 5] = ["doctor", "nurse", "caregiver", "police_officer", "other"];

        fn arb_labels() -> impl Strategy<Value = Vec<&'static str>> {
            proptest::sample::subsequence(LABELS.to_vec(), 1..=LABELS.len())
        }

        proptest! {
            #[test]
            fn total_trust_in_range_and_gated(
                mut evaluator in arb_labels(),
                evaluated in arb_labels(),
                skill_idx in 0..SKILLS.len(),
            ) {
                // only health-interested nodes evaluate trust
                if !evaluator.contains(&"health") {
                    evaluator.push("health");
                }
                let tax = build_default_taxonomy();
                let ev = set(&evaluator);
                let ed = set(&evaluated);
                let score = total_trust(&ev, &ed, SKILLS[skill_idx], &tax).unwrap();
                prop_assert!((0.0..=1.0).contains(&score.total));
                prop_assert!((0.0..=1.0).contains(&score.interest_trust));
                prop_assert!((0.0..=1.0).contains(&score.skill_trust));
                prop_assert_eq!(score.total > 0.0, ed.has_health_interest());
            }

            #[test]
            fn growing_the_evaluated_set_never_hurts(
                evaluator in arb_labels(),
                evaluated in arb_labels(),
                extra in proptest::sample::select(LABELS.to_vec()),
            ) {
                let ev = set(&evaluator);
                let before = interest_trust(&ev, &set(&evaluated));
                let mut grown = evaluated.clone();
                if !grown.contains(&extra) {
                    grown.push(extra);
                }
                let after = interest_trust(&ev, &set(&grown));
                if set(&grown).has_health_interest() == set(&evaluated).has_health_interest() {
                    prop_assert!(after >= before);
                }
            }
        }
    }
}
