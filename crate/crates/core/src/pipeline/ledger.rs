//! GPU-second accounting and full-scale cost projection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::manifest_store::{CostEntry, ManifestState};
use crate::stage::Stage;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Stages that call a model service and therefore cost GPU time.
pub const COSTED_STAGES: [Stage; 7] = [
    Stage::Caption,
    Stage::Instruct,
    Stage::KeyframeEdit,
    Stage::Depth,
    Stage::Generate,
    Stage::Curate,
    Stage::Enhance,
];

/// Correctly rounded sum of `values` (Shewchuk's partials, as in Python's
/// `math.fsum`). The result does not depend on the order of the inputs.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    let Some(mut hi) = partials.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Round half-even correction when the remaining partials push past a tie.
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LedgerError {
    #[error("gpu_seconds {0} must be finite and >= 0")]
    InvalidCost(f64),
    #[error("the ledger has no entries")]
    Empty,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    entries: Vec<CostEntry>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_state(state: &ManifestState) -> Self {
        Self {
            entries: state.costs.clone(),
        }
    }

    pub fn entries(&self) -> &[CostEntry] {
        &self.entries
    }

    /// Appends an entry and returns the new exact total.
    pub fn record_cost(&mut self, entry: CostEntry) -> Result<f64, LedgerError> {
        if !(entry.gpu_seconds.is_finite() && entry.gpu_seconds >= 0.0) {
            return Err(LedgerError::InvalidCost(entry.gpu_seconds));
        }
        self.entries.push(entry);
        Ok(self.total())
    }

    pub fn total(&self) -> f64 {
        exact_sum(self.entries.iter().map(|e| e.gpu_seconds))
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.entries.extend(other.entries.iter().cloned());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    pub stage: Stage,
    pub entries: usize,
    /// Distinct assets charged at this stage.
    pub samples: usize,
    pub gpu_seconds: f64,
    /// `gpu_seconds / samples`, zero for an empty stage.
    pub per_sample: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub stages: Vec<StageCost>,
    pub total_gpu_seconds: f64,
    pub per_sample_gpu_seconds: f64,
    pub target_samples: f64,
    pub projected_gpu_seconds: f64,
    pub projected_gpu_days: f64,
}

/// Per-stage totals plus the projection `sum of per-stage per-sample means x
/// target_samples`. Every costed stage gets a row, empty or not.
pub fn budget_report(ledger: &CostLedger, target_samples: f64) -> Result<BudgetReport, LedgerError> {
    if ledger.entries.is_empty() {
        return Err(LedgerError::Empty);
    }
    let mut by_stage: BTreeMap<Stage, (Vec<f64>, BTreeSet<&str>)> = COSTED_STAGES
        .iter()
        .map(|&s| (s, (Vec::new(), BTreeSet::new())))
        .collect();
    for e in &ledger.entries {
        let slot = by_stage.entry(e.stage).or_default();
        slot.0.push(e.gpu_seconds);
        slot.1.insert(e.asset_id.as_str());
    }
    let stages: Vec<StageCost> = by_stage
        .into_iter()
        .map(|(stage, (costs, assets))| {
            let total = exact_sum(costs.iter().copied());
            StageCost {
                stage,
                entries: costs.len(),
                samples: assets.len(),
                gpu_seconds: total,
                per_sample: if assets.is_empty() {
                    0.0
                } else {
                    total / assets.len() as f64
                },
            }
        })
        .collect();
    let per_sample = exact_sum(stages.iter().map(|s| s.per_sample));
    let projected = per_sample * target_samples;
    Ok(BudgetReport {
        total_gpu_seconds: ledger.total(),
        per_sample_gpu_seconds: per_sample,
        target_samples,
        projected_gpu_seconds: projected,
        projected_gpu_days: projected / SECONDS_PER_DAY,
        stages,
    })
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14} {:>8} {:>8} {:>16} {:>14}",
            "stage", "entries", "samples", "gpu_seconds", "per_sample"
        )?;
        for s in &self.stages {
            writeln!(
                f,
                "{:<14} {:>8} {:>8} {:>16.3} {:>14.3}",
                s.stage.as_str(),
                s.entries,
                s.samples,
                s.gpu_seconds,
                s.per_sample
            )?;
        }
        writeln!(f, "{:<14} {:>34.3}", "total", self.total_gpu_seconds)?;
        writeln!(f, "per-sample gpu_seconds  {:.3}", self.per_sample_gpu_seconds)?;
        writeln!(f, "target samples          {}", self.target_samples)?;
        write!(
            f,
            "projected               {:.1} GPU-days ({:.0} gpu_seconds)",
            self.projected_gpu_days, self.projected_gpu_seconds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(asset: &str, stage: Stage, s: f64) -> CostEntry {
        CostEntry {
            asset_id: asset.into(),
            stage,
            gpu_seconds: s,
            model_id: "m".into(),
            request_id: format!("{stage}/{asset}/1"),
        }
    }

    #[test]
    fn exact_sum_examples() {
        assert_eq!(exact_sum([]), 0.0);
        assert_eq!(exact_sum([2.0, 3.5]), 5.5);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([1.0, 1e-16, 1e-16]), 1.0000000000000002);
    }

    #[test]
    fn record_cost_totals() {
        let mut l = CostLedger::new();
        assert_eq!(l.record_cost(entry("a", Stage::Caption, 2.0)).unwrap(), 2.0);
        assert_eq!(l.record_cost(entry("a", Stage::Instruct, 3.5)).unwrap(), 5.5);
        assert!(l.record_cost(entry("a", Stage::Depth, -1.0)).is_err());
        assert!(l.record_cost(entry("a", Stage::Depth, f64::NAN)).is_err());
    }

    #[test]
    fn report_projection() {
        let mut l = CostLedger::new();
        l.record_cost(entry("a", Stage::Generate, 600.0)).unwrap();
        l.record_cost(entry("b", Stage::Generate, 600.0)).unwrap();
        let r = budget_report(&l, 1e6).unwrap();
        assert_eq!(r.stages.len(), COSTED_STAGES.len());
        let depth = r.stages.iter().find(|s| s.stage == Stage::Depth).unwrap();
        assert_eq!((depth.entries, depth.gpu_seconds, depth.per_sample), (0, 0.0, 0.0));
        // 10 GPU-minutes per sample for a million samples.
        assert!((r.projected_gpu_days - 6944.444).abs() < 1e-3);
        assert!(budget_report(&CostLedger::new(), 1e6).is_err());
    }

    #[test]
    fn merge_adds() {
        let mut a = CostLedger::new();
        a.record_cost(entry("a", Stage::Caption, 2.0)).unwrap();
        let mut b = CostLedger::new();
        b.record_cost(entry("b", Stage::Caption, 4.0)).unwrap();
        a.merge(&b);
        assert_eq!(a.total(), 6.0);
        let r = budget_report(&a, 1.0).unwrap();
        assert_eq!(r.stages[0].gpu_seconds, 6.0);
    }

    proptest! {
        #[test]
        fn order_independent(mut xs in proptest::collection::vec(-1e12f64..1e12, 0..60), k in 0usize..60) {
            let a = exact_sum(xs.iter().copied());
            if !xs.is_empty() {
                let n = xs.len();
                xs.rotate_left(k % n);
                xs.reverse();
            }
            prop_assert_eq!(a, exact_sum(xs.iter().copied()));
        }
    }
}
