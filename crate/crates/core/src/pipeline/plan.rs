//! The fixed stage graph and its deterministic execution order.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::config::PipelineConfig;
use super::PipelineError;
use crate::stage::Stage;

/// Stages a config may switch off; their edges are contracted.
pub const OPTIONAL_STAGES: [Stage; 3] = [Stage::Dedup, Stage::MotionFilter, Stage::Enhance];

/// Canonical edges of the full graph.
pub const EDGES: [(Stage, Stage); 14] = [
    (Stage::Ingest, Stage::Dedup),
    (Stage::Dedup, Stage::MotionFilter),
    (Stage::MotionFilter, Stage::Standardize),
    (Stage::Standardize, Stage::Caption),
    (Stage::Caption, Stage::Instruct),
    (Stage::Instruct, Stage::KeyframeEdit),
    (Stage::Standardize, Stage::KeyframeEdit),
    (Stage::Instruct, Stage::Depth),
    (Stage::Standardize, Stage::Depth),
    (Stage::KeyframeEdit, Stage::Generate),
    (Stage::Depth, Stage::Generate),
    (Stage::Generate, Stage::Curate),
    (Stage::Curate, Stage::Enhance),
    (Stage::Enhance, Stage::Publish),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StagePlan {
    /// Direct parents of every enabled stage.
    parents: BTreeMap<Stage, BTreeSet<Stage>>,
    order: Vec<Stage>,
}

impl StagePlan {
    /// Topological order; ties go to the earlier stage in declaration order.
    pub fn order(&self) -> &[Stage] {
        &self.order
    }

    pub fn contains(&self, s: Stage) -> bool {
        self.parents.contains_key(&s)
    }

    pub fn parents(&self, s: Stage) -> impl Iterator<Item = Stage> + '_ {
        self.parents.get(&s).into_iter().flatten().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Stage, Stage)> + '_ {
        self.parents
            .iter()
            .flat_map(|(&child, ps)| ps.iter().map(move |&p| (p, child)))
    }

    /// Every stage downstream of `s`.
    pub fn descendants(&self, s: Stage) -> BTreeSet<Stage> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![s];
        while let Some(x) = frontier.pop() {
            for (&child, ps) in &self.parents {
                if ps.contains(&x) && out.insert(child) {
                    frontier.push(child);
                }
            }
        }
        out
    }
}

pub fn build_plan(config: &PipelineConfig) -> Result<StagePlan, PipelineError> {
    let disabled: BTreeSet<Stage> = config.stages.disabled.iter().copied().collect();
    if let Some(s) = disabled.iter().find(|s| !OPTIONAL_STAGES.contains(s)) {
        let why = match s {
            Stage::Depth | Stage::KeyframeEdit => {
                "generation needs both the depth video and the edited keyframe"
            }
            _ => "only DEDUP, MOTION_FILTER and ENHANCE can be disabled",
        };
        return Err(PipelineError::InvalidConfig(format!(
            "cannot disable {s}: {why}"
        )));
    }

    let mut parents: BTreeMap<Stage, BTreeSet<Stage>> = Stage::ALL
        .iter()
        .map(|&s| (s, BTreeSet::new()))
        .collect();
    for (a, b) in EDGES {
        parents.get_mut(&b).expect("known stage").insert(a);
    }
    for s in &disabled {
        let ps = parents.remove(s).expect("known stage");
        for set in parents.values_mut() {
            if set.remove(s) {
                set.extend(ps.iter().copied());
            }
        }
    }

    // Kahn's algorithm, always taking the smallest ready stage.
    let mut indegree: BTreeMap<Stage, usize> = parents.iter().map(|(&s, p)| (s, p.len())).collect();
    let mut ready: BTreeSet<Stage> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&s, _)| s)
        .collect();
    let mut order = Vec::with_capacity(parents.len());
    while let Some(s) = ready.pop_first() {
        order.push(s);
        for (&child, ps) in &parents {
            if ps.contains(&s) {
                let d = indegree.get_mut(&child).expect("known");
                *d -= 1;
                if *d == 0 {
                    ready.insert(child);
                }
            }
        }
    }
    let plan = StagePlan { parents, order };
    debug_assert_eq!(plan.order.len(), plan.parents.len(), "stage graph is acyclic");
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_without(stages: &[Stage]) -> Result<StagePlan, PipelineError> {
        let mut c = PipelineConfig::default();
        c.stages.disabled = stages.to_vec();
        build_plan(&c)
    }

    #[test]
    fn default_plan() {
        let p = plan_without(&[]).unwrap();
        assert_eq!(p.order(), &Stage::ALL);
        let gen: Vec<Stage> = p.parents(Stage::Generate).collect();
        assert_eq!(gen, [Stage::KeyframeEdit, Stage::Depth]);
        assert_eq!(p.descendants(Stage::Ingest).len(), 11);
        assert_eq!(p.edges().count(), EDGES.len());
    }

    #[test]
    fn contraction() {
        let p = plan_without(&[Stage::Enhance]).unwrap();
        assert!(!p.contains(Stage::Enhance));
        assert_eq!(p.parents(Stage::Publish).collect::<Vec<_>>(), [Stage::Curate]);

        let p = plan_without(&[Stage::Dedup, Stage::MotionFilter]).unwrap();
        assert_eq!(p.parents(Stage::Standardize).collect::<Vec<_>>(), [Stage::Ingest]);
        assert_eq!(p.order().len(), 10);
    }

    #[test]
    fn scaffold_stages_are_mandatory() {
        assert!(plan_without(&[Stage::Depth]).is_err());
        assert!(plan_without(&[Stage::KeyframeEdit]).is_err());
        assert!(plan_without(&[Stage::Publish]).is_err());
    }
}
