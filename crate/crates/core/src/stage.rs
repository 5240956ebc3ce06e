//! Pipeline stage names shared by the planner, the executor and the journal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Ingest,
    Dedup,
    MotionFilter,
    Standardize,
    Caption,
    Instruct,
    KeyframeEdit,
    Depth,
    Generate,
    Curate,
    Enhance,
    Publish,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::Ingest,
        Stage::Dedup,
        Stage::MotionFilter,
        Stage::Standardize,
        Stage::Caption,
        Stage::Instruct,
        Stage::KeyframeEdit,
        Stage::Depth,
        Stage::Generate,
        Stage::Curate,
        Stage::Enhance,
        Stage::Publish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "INGEST",
            Stage::Dedup => "DEDUP",
            Stage::MotionFilter => "MOTION_FILTER",
            Stage::Standardize => "STANDARDIZE",
            Stage::Caption => "CAPTION",
            Stage::Instruct => "INSTRUCT",
            Stage::KeyframeEdit => "KEYFRAME_EDIT",
            Stage::Depth => "DEPTH",
            Stage::Generate => "GENERATE",
            Stage::Curate => "CURATE",
            Stage::Enhance => "ENHANCE",
            Stage::Publish => "PUBLISH",
        }
    }

    /// Stages that need the whole batch before any asset can move on.
    pub fn is_barrier(self) -> bool {
        matches!(self, Stage::Dedup | Stage::MotionFilter)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stage {0:?}")]
pub struct UnknownStage(pub String);

impl FromStr for Stage {
    type Err = UnknownStage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownStage(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for st in Stage::ALL {
            assert_eq!(st.as_str().parse::<Stage>().unwrap(), st);
            let json = serde_json::to_string(&st).unwrap();
            assert_eq!(json, format!("\"{}\"", st.as_str()));
        }
        assert!("BOGUS".parse::<Stage>().is_err());
    }
}
