//! Journal records and their line encoding.
//!
//! One record per line: `<seq> <KIND> <asset_id> <payload-json> <crc32>\n`, where
//! the checksum is the lowercase 8-digit hex CRC-32 of every byte before the space
//! that precedes it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::protocol::{Category, Criterion, JudgeScores, MediaRef, OutputValue};
use crate::media_io::VideoHeader;
use crate::stage::Stage;

pub const MAX_ASSET_ID_LEN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    Asset,
    StageResult,
    Cost,
    Reject,
    Publish,
}

impl RecordKind {
    pub const ALL: [RecordKind; 5] = [
        RecordKind::Asset,
        RecordKind::StageResult,
        RecordKind::Cost,
        RecordKind::Reject,
        RecordKind::Publish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Asset => "ASSET",
            RecordKind::StageResult => "STAGE_RESULT",
            RecordKind::Cost => "COST",
            RecordKind::Reject => "REJECT",
            RecordKind::Publish => "PUBLISH",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown record kind {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Done,
    Failed,
    Skipped,
}

/// Provenance of one executed stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineageEntry {
    pub stage: Stage,
    pub request_id: String,
    pub model_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetPayload {
    pub ordinal: u64,
    pub source: MediaRef,
    pub header: VideoHeader,
    pub origin: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageResultPayload {
    pub stage: Stage,
    pub status: JobStatus,
    pub attempts: u32,
    pub lineage: Option<LineageEntry>,
    pub outputs: BTreeMap<String, OutputValue>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostPayload {
    pub stage: Stage,
    pub gpu_seconds: f64,
    pub model_id: String,
    pub request_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RejectReason {
    DuplicateOf { asset_id: String, similarity: f64 },
    LowMotion { score: f64 },
    Judge { failed: Vec<Criterion>, scores: JudgeScores },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectPayload {
    pub stage: Stage,
    pub reason: RejectReason,
}

/// A published (source video, instruction, edited video) example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Triplet {
    pub source: MediaRef,
    pub instruction: String,
    pub category: Category,
    pub edited: MediaRef,
    pub edited_format: VideoHeader,
    pub judge_scores: JudgeScores,
    pub lineage: Vec<LineageEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishPayload {
    pub triplet: Triplet,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Asset(AssetPayload),
    StageResult(StageResultPayload),
    Cost(CostPayload),
    Reject(RejectPayload),
    Publish(PublishPayload),
}

impl Payload {
    pub fn kind(&self) -> RecordKind {
        match self {
            Payload::Asset(_) => RecordKind::Asset,
            Payload::StageResult(_) => RecordKind::StageResult,
            Payload::Cost(_) => RecordKind::Cost,
            Payload::Reject(_) => RecordKind::Reject,
            Payload::Publish(_) => RecordKind::Publish,
        }
    }

    pub fn to_json(&self) -> String {
        let r = match self {
            Payload::Asset(p) => serde_json::to_string(p),
            Payload::StageResult(p) => serde_json::to_string(p),
            Payload::Cost(p) => serde_json::to_string(p),
            Payload::Reject(p) => serde_json::to_string(p),
            Payload::Publish(p) => serde_json::to_string(p),
        };
        r.expect("payloads serialize")
    }

    pub fn from_json(kind: RecordKind, text: &str) -> Result<Self, serde_json::Error> {
        Ok(match kind {
            RecordKind::Asset => Payload::Asset(serde_json::from_str(text)?),
            RecordKind::StageResult => Payload::StageResult(serde_json::from_str(text)?),
            RecordKind::Cost => Payload::Cost(serde_json::from_str(text)?),
            RecordKind::Reject => Payload::Reject(serde_json::from_str(text)?),
            RecordKind::Publish => Payload::Publish(serde_json::from_str(text)?),
        })
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Payload::Asset(_) => None,
            Payload::StageResult(p) => Some(p.stage),
            Payload::Cost(p) => Some(p.stage),
            Payload::Reject(p) => Some(p.stage),
            Payload::Publish(_) => Some(Stage::Publish),
        }
    }
}

/// A record before the journal assigns it a sequence number.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub asset_id: String,
    pub payload: Payload,
}

impl Entry {
    pub fn new(asset_id: impl Into<String>, payload: Payload) -> Self {
        Self {
            asset_id: asset_id.into(),
            payload,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub seq: u64,
    pub asset_id: String,
    pub payload: Payload,
}

impl Record {
    pub fn kind(&self) -> RecordKind {
        self.payload.kind()
    }

    /// The full journal line, newline included.
    pub fn encode(&self) -> String {
        let body = format!(
            "{} {} {} {}",
            self.seq,
            self.kind(),
            self.asset_id,
            self.payload.to_json()
        );
        let crc = crc32fast::hash(body.as_bytes());
        format!("{body} {crc:08x}\n")
    }
}

/// Asset ids are single journal tokens: 1 to 128 of `[A-Za-z0-9._-]`.
pub fn validate_asset_id(id: &str) -> Result<(), String> {
    if id.is_empty() || id.len() > MAX_ASSET_ID_LEN {
        return Err(format!("asset id must be 1..={MAX_ASSET_ID_LEN} bytes"));
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')))
    {
        return Err(format!("asset id {id:?} contains {c:?}"));
    }
    Ok(())
}

/// Parses one line without its trailing newline.
pub fn parse_line(line: &[u8]) -> Result<Record, String> {
    let text = std::str::from_utf8(line).map_err(|_| "record is not UTF-8".to_string())?;
    let (body, crc) = text
        .rsplit_once(' ')
        .ok_or_else(|| "record has no checksum".to_string())?;
    if crc.len() != 8 || !crc.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(format!("malformed checksum {crc:?}"));
    }
    let expected = u32::from_str_radix(crc, 16).map_err(|e| e.to_string())?;
    let actual = crc32fast::hash(body.as_bytes());
    if actual != expected {
        return Err(format!("checksum mismatch: stored {expected:08x}, computed {actual:08x}"));
    }

    let mut parts = body.splitn(4, ' ');
    let seq_text = parts.next().unwrap_or_default();
    let kind_text = parts.next().ok_or("missing kind")?;
    let asset_id = parts.next().ok_or("missing asset id")?;
    let payload_text = parts.next().ok_or("missing payload")?;

    if seq_text.is_empty()
        || !seq_text.bytes().all(|b| b.is_ascii_digit())
        || (seq_text.len() > 1 && seq_text.starts_with('0'))
    {
        return Err(format!("malformed sequence number {seq_text:?}"));
    }
    let seq: u64 = seq_text
        .parse()
        .map_err(|_| format!("sequence number {seq_text:?} out of range"))?;
    let kind: RecordKind = kind_text.parse()?;
    validate_asset_id(asset_id)?;
    let payload = Payload::from_json(kind, payload_text).map_err(|e| format!("bad {kind} payload: {e}"))?;
    Ok(Record {
        seq,
        asset_id: asset_id.to_string(),
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::protocol::MediaKind;
    use crate::digest::ContentDigest;

    fn media() -> MediaRef {
        MediaRef {
            digest: ContentDigest::of(b"abc"),
            path: "x.dvf".into(),
            kind: MediaKind::Video,
        }
    }

    fn asset_record() -> Record {
        Record {
            seq: 7,
            asset_id: "asset-0001".into(),
            payload: Payload::Asset(AssetPayload {
                ordinal: 1,
                source: media(),
                header: VideoHeader::new(4, 4, 20, 2).unwrap(),
                origin: "synthetic seed=3".into(),
            }),
        }
    }

    #[test]
    fn line_round_trip() {
        let r = asset_record();
        let line = r.encode();
        assert!(line.starts_with("7 ASSET asset-0001 {"));
        assert!(line.ends_with('\n'));
        let back = parse_line(line.trim_end_matches('\n').as_bytes()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn cost_float_round_trip() {
        let r = Record {
            seq: 0,
            asset_id: "a".into(),
            payload: Payload::Cost(CostPayload {
                stage: Stage::Generate,
                gpu_seconds: 0.1 + 0.2,
                model_id: "m".into(),
                request_id: "GENERATE/a/1".into(),
            }),
        };
        let line = r.encode();
        assert_eq!(parse_line(line.trim_end().as_bytes()).unwrap(), r);
    }

    #[test]
    fn every_byte_flip_is_detected() {
        let line = asset_record().encode();
        let body = line.trim_end_matches('\n').as_bytes().to_vec();
        for i in 0..body.len() {
            let mut b = body.clone();
            b[i] ^= 0x01;
            assert!(parse_line(&b).is_err(), "flip at {i} accepted");
        }
    }

    #[test]
    fn asset_ids_are_single_tokens() {
        assert!(validate_asset_id("asset-0001").is_ok());
        assert!(validate_asset_id("").is_err());
        assert!(validate_asset_id("a b").is_err());
        assert!(validate_asset_id("a/b").is_err());
        assert!(validate_asset_id(&"x".repeat(129)).is_err());
    }

    #[test]
    fn rejects_leading_zero_sequence() {
        let line = asset_record().encode().replacen("7 ", "07 ", 1);
        let body = line.trim_end().rsplit_once(' ').unwrap().0.to_string();
        let fixed = format!("{body} {:08x}", crc32fast::hash(body.as_bytes()));
        assert!(parse_line(fixed.as_bytes()).is_err());
    }
}
