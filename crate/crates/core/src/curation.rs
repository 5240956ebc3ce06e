//! Judge-score rejection sampling and dataset composition tracking.
//!
//! Failed triplets are discarded and recorded, never regenerated.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backends::protocol::{Category, Criterion, JudgeScores};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurationError {
    #[error("invalid curation policy: {0}")]
    InvalidPolicy(String),
    #[error("composition needs at least one published triplet")]
    EmptyDataset,
}

/// One threshold per judge criterion plus a harder floor for safety.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationPolicy {
    pub instruction_fidelity: f64,
    pub preservation_fidelity: f64,
    pub visual_quality: f64,
    pub safety: f64,
    pub safety_hard_floor: f64,
}

impl Default for CurationPolicy {
    fn default() -> Self {
        Self {
            instruction_fidelity: 0.7,
            preservation_fidelity: 0.7,
            visual_quality: 0.7,
            safety: 0.7,
            safety_hard_floor: 0.9,
        }
    }
}

impl CurationPolicy {
    pub fn uniform(threshold: f64, safety_hard_floor: f64) -> Self {
        Self {
            instruction_fidelity: threshold,
            preservation_fidelity: threshold,
            visual_quality: threshold,
            safety: threshold,
            safety_hard_floor,
        }
    }

    pub fn threshold(&self, c: Criterion) -> f64 {
        match c {
            Criterion::InstructionFidelity => self.instruction_fidelity,
            Criterion::PreservationFidelity => self.preservation_fidelity,
            Criterion::VisualQuality => self.visual_quality,
            Criterion::Safety => self.safety,
        }
    }

    pub fn validate(&self) -> Result<(), CurationError> {
        for c in Criterion::ALL {
            let t = self.threshold(c);
            if !(0.0..=1.0).contains(&t) {
                return Err(CurationError::InvalidPolicy(format!(
                    "{} threshold {t} outside [0, 1]",
                    c.as_str()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.safety_hard_floor) {
            return Err(CurationError::InvalidPolicy(format!(
                "safety floor {} outside [0, 1]",
                self.safety_hard_floor
            )));
        }
        if self.safety_hard_floor < self.safety {
            return Err(CurationError::InvalidPolicy(format!(
                "safety floor {} is below the safety threshold {}",
                self.safety_hard_floor, self.safety
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accept,
    /// Every criterion that failed, in criterion order; never empty.
    Reject(Vec<Criterion>),
}

impl Decision {
    pub fn is_accept(&self) -> bool {
        matches!(self, Decision::Accept)
    }
}

/// Accepts iff every score meets its threshold and safety also meets the floor.
pub fn accept(scores: &JudgeScores, policy: &CurationPolicy) -> Decision {
    let failed: Vec<Criterion> = Criterion::ALL
        .into_iter()
        .filter(|&c| {
            let s = scores.get(c);
            let mut ok = s >= policy.threshold(c);
            if c == Criterion::Safety {
                ok &= s >= policy.safety_hard_floor;
            }
            !ok
        })
        .collect();
    if failed.is_empty() {
        Decision::Accept
    } else {
        Decision::Reject(failed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompositionTarget {
    pub global_fraction: f64,
}

impl Default for CompositionTarget {
    fn default() -> Self {
        Self {
            global_fraction: 0.7,
        }
    }
}

impl CompositionTarget {
    pub fn local_fraction(&self) -> f64 {
        1.0 - self.global_fraction
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub total: usize,
    pub counts: BTreeMap<Category, usize>,
    pub global: usize,
    pub local: usize,
    pub global_fraction: f64,
    pub local_fraction: f64,
    /// `global_fraction - target.global_fraction`.
    pub deviation: f64,
}

pub fn composition_report(
    categories: &[Category],
    target: &CompositionTarget,
) -> Result<CompositionReport, CurationError> {
    if categories.is_empty() {
        return Err(CurationError::EmptyDataset);
    }
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for c in categories {
        *counts.entry(*c).or_default() += 1;
    }
    let total = categories.len();
    let global = categories.iter().filter(|c| c.is_global()).count();
    let local = total - global;
    let global_fraction = global as f64 / total as f64;
    Ok(CompositionReport {
        total,
        counts,
        global,
        local,
        global_fraction,
        // Derived from the integer count so the two fractions sum to exactly 1.
        local_fraction: 1.0 - global_fraction,
        deviation: global_fraction - target.global_fraction,
    })
}

impl fmt::Display for CompositionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20} {:>8} {:>9}", "category", "count", "fraction")?;
        for (c, n) in &self.counts {
            writeln!(
                f,
                "{:<20} {:>8} {:>9.4}",
                c.as_str(),
                n,
                *n as f64 / self.total as f64
            )?;
        }
        writeln!(f, "{:<20} {:>8} {:>9.4}", "global", self.global, self.global_fraction)?;
        writeln!(f, "{:<20} {:>8} {:>9.4}", "local", self.local, self.local_fraction)?;
        write!(f, "{:<20} {:>8} {:>+9.4}", "deviation", "", self.deviation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(v: [f64; 4]) -> JudgeScores {
        JudgeScores::new(v).unwrap()
    }

    #[test]
    fn accept_examples() {
        let p = CurationPolicy::uniform(0.7, 0.9);
        assert_eq!(accept(&scores([0.9, 0.9, 0.9, 1.0]), &p), Decision::Accept);
        assert_eq!(
            accept(&scores([0.9, 0.5, 0.9, 1.0]), &p),
            Decision::Reject(vec![Criterion::PreservationFidelity])
        );
        assert_eq!(
            accept(&scores([0.9, 0.9, 0.9, 0.85]), &p),
            Decision::Reject(vec![Criterion::Safety])
        );
    }

    #[test]
    fn reject_lists_every_failure() {
        let p = CurationPolicy::uniform(0.7, 0.9);
        assert_eq!(
            accept(&scores([0.1, 0.2, 0.3, 0.4]), &p),
            Decision::Reject(Criterion::ALL.to_vec())
        );
    }

    #[test]
    fn policy_validation() {
        assert!(CurationPolicy::default().validate().is_ok());
        assert!(CurationPolicy::uniform(0.95, 0.9).validate().is_err());
        assert!(CurationPolicy::uniform(-0.1, 0.9).validate().is_err());
        assert!(CurationPolicy::uniform(0.5, 1.1).validate().is_err());
    }

    #[test]
    fn composition_examples() {
        use Category::*;
        let mut cats = vec![GlobalStyle; 4];
        cats.extend([GlobalEnvironment; 3]);
        cats.extend([LocalAdd, LocalRemove, LocalReplace]);
        let r = composition_report(&cats, &CompositionTarget::default()).unwrap();
        assert_eq!((r.global, r.local), (7, 3));
        assert_eq!(r.global_fraction, 0.7);
        assert_eq!(r.local_fraction, 1.0 - 0.7);
        assert_eq!(r.deviation, 0.0);

        let r = composition_report(&[GlobalStyle; 5], &CompositionTarget::default()).unwrap();
        assert_eq!((r.global_fraction, r.local_fraction), (1.0, 0.0));
        assert!((r.deviation - 0.3).abs() < 1e-15);

        assert_eq!(
            composition_report(&[], &CompositionTarget::default()),
            Err(CurationError::EmptyDataset)
        );
    }

    fn unit() -> impl Strategy<Value = f64> {
        0.0f64..=1.0
    }

    proptest! {
        #[test]
        fn fractions_sum_to_one(idx in proptest::collection::vec(0usize..5, 1..200)) {
            let cats: Vec<Category> = idx.into_iter().map(|i| Category::ALL[i]).collect();
            let r = composition_report(&cats, &CompositionTarget::default()).unwrap();
            prop_assert_eq!(r.global_fraction + r.local_fraction, 1.0);
            prop_assert_eq!(r.counts.values().sum::<usize>(), cats.len());
        }

        #[test]
        fn reject_is_never_empty(s in proptest::array::uniform4(unit()), t in unit(), floor in unit()) {
            let p = CurationPolicy::uniform(t, floor.max(t));
            if let Decision::Reject(f) = accept(&scores(s), &p) {
                prop_assert!(!f.is_empty());
            }
        }
    }
}
