//! In-memory pipeline state as a pure fold over journal records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::{
    AssetPayload, CostPayload, JobStatus, Payload, Record, RejectPayload, StageResultPayload,
    Triplet,
};
use super::ManifestError;
use crate::stage::Stage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssetState {
    pub asset: AssetPayload,
    pub stages: BTreeMap<Stage, StageResultPayload>,
    pub rejected: Option<RejectPayload>,
    pub published: Option<Triplet>,
}

impl AssetState {
    pub fn status(&self, stage: Stage) -> Option<JobStatus> {
        self.stages.get(&stage).map(|r| r.status)
    }

    pub fn is_done(&self, stage: Stage) -> bool {
        self.status(stage) == Some(JobStatus::Done)
    }

    /// Rejected, published, or stopped by a failure.
    pub fn is_terminal(&self) -> bool {
        self.rejected.is_some()
            || self.published.is_some()
            || self
                .stages
                .values()
                .any(|r| r.status != JobStatus::Done)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub asset_id: String,
    pub stage: Stage,
    pub gpu_seconds: f64,
    pub model_id: String,
    pub request_id: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestState {
    /// Sequence number the next record must carry.
    pub next_seq: u64,
    pub assets: BTreeMap<String, AssetState>,
    /// Asset ids in registration order.
    pub order: Vec<String>,
    pub costs: Vec<CostEntry>,
}

impl ManifestState {
    pub fn asset(&self, id: &str) -> Option<&AssetState> {
        self.assets.get(id)
    }

    pub fn assets_in_order(&self) -> impl Iterator<Item = (&str, &AssetState)> {
        self.order
            .iter()
            .map(|id| (id.as_str(), &self.assets[id]))
    }

    /// Published triplets in asset registration order.
    pub fn published(&self) -> impl Iterator<Item = (&str, &Triplet)> {
        self.assets_in_order()
            .filter_map(|(id, a)| a.published.as_ref().map(|t| (id, t)))
    }

    pub fn rejected(&self) -> impl Iterator<Item = (&str, &RejectPayload)> {
        self.assets_in_order()
            .filter_map(|(id, a)| a.rejected.as_ref().map(|r| (id, r)))
    }

    /// Checks `record` against the journal rules without changing the state.
    pub fn check(&self, record: &Record) -> Result<(), ManifestError> {
        if record.seq != self.next_seq {
            return Err(ManifestError::SequenceGap {
                expected: self.next_seq,
                found: record.seq,
            });
        }
        let id = record.asset_id.as_str();
        if let Payload::Asset(_) = record.payload {
            return match self.assets.contains_key(id) {
                true => Err(ManifestError::DuplicateAsset(id.to_string())),
                false => Ok(()),
            };
        }
        let a = self
            .assets
            .get(id)
            .ok_or_else(|| ManifestError::UnknownAsset(id.to_string()))?;
        match &record.payload {
            Payload::Asset(_) => unreachable!("handled above"),
            Payload::StageResult(p) => {
                if a.stages.contains_key(&p.stage) {
                    return Err(ManifestError::DuplicateResult {
                        asset_id: id.to_string(),
                        stage: p.stage,
                    });
                }
                if a.published.is_some() {
                    return Err(ManifestError::AlreadyTerminal(id.to_string()));
                }
            }
            Payload::Cost(p) => {
                if !(p.gpu_seconds.is_finite() && p.gpu_seconds >= 0.0) {
                    return Err(ManifestError::InvalidRecord(format!(
                        "gpu_seconds {} must be finite and >= 0",
                        p.gpu_seconds
                    )));
                }
            }
            Payload::Reject(_) => {
                if a.published.is_some() || a.rejected.is_some() {
                    return Err(ManifestError::AlreadyTerminal(id.to_string()));
                }
            }
            Payload::Publish(_) => {
                if a.published.is_some() {
                    return Err(ManifestError::DuplicatePublish(id.to_string()));
                }
                if a.rejected.is_some() {
                    return Err(ManifestError::AlreadyTerminal(id.to_string()));
                }
            }
        }
        Ok(())
    }

    /// Folds one record in; fails without side effects when `check` fails.
    pub fn apply(&mut self, record: &Record) -> Result<(), ManifestError> {
        self.check(record)?;
        let id = record.asset_id.clone();
        match &record.payload {
            Payload::Asset(p) => {
                self.order.push(id.clone());
                self.assets.insert(
                    id,
                    AssetState {
                        asset: p.clone(),
                        stages: BTreeMap::new(),
                        rejected: None,
                        published: None,
                    },
                );
            }
            Payload::StageResult(p) => {
                self.assets
                    .get_mut(&id)
                    .expect("checked")
                    .stages
                    .insert(p.stage, p.clone());
            }
            Payload::Cost(CostPayload {
                stage,
                gpu_seconds,
                model_id,
                request_id,
            }) => self.costs.push(CostEntry {
                asset_id: id,
                stage: *stage,
                gpu_seconds: *gpu_seconds,
                model_id: model_id.clone(),
                request_id: request_id.clone(),
            }),
            Payload::Reject(p) => {
                self.assets.get_mut(&id).expect("checked").rejected = Some(p.clone());
            }
            Payload::Publish(p) => {
                self.assets.get_mut(&id).expect("checked").published = Some(p.triplet.clone());
            }
        }
        self.next_seq += 1;
        Ok(())
    }
}
