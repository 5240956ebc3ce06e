//! Normative conformance vectors: request bodies paired with the exact response
//! bodies a conforming service answers under the default [`MockConfig`].
//!
//! The vector file ships with its input media. Any implementation of the protocol,
//! in any language, can replay it against a copy of that media directory and diff
//! bytes.
//!
//! [`MockConfig`]: crate::backends::mock::MockConfig

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backends::mock::MockBackend;
use crate::backends::protocol::{BackendKind, BackendRequest, BackendResponse};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformanceVector {
    pub name: String,
    pub endpoint: String,
    /// Exact request body.
    pub request: String,
    /// Exact expected response body.
    pub response: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFile {
    pub version: u32,
    pub vectors: Vec<ConformanceVector>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConformanceError {
    #[error("cannot read vector file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed vector file: {0}")]
    Malformed(String),
}

impl VectorFile {
    pub fn parse(text: &str) -> Result<Self, ConformanceError> {
        let file: VectorFile =
            serde_json::from_str(text).map_err(|e| ConformanceError::Malformed(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(ConformanceError::Malformed(format!(
                "unsupported version {}",
                file.version
            )));
        }
        for v in &file.vectors {
            v.kind()?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ConformanceError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("vector file serializes");
        s.push('\n');
        s
    }
}

impl ConformanceVector {
    pub fn kind(&self) -> Result<BackendKind, ConformanceError> {
        self.endpoint
            .parse()
            .map_err(|e: crate::backends::protocol::ProtocolError| {
                ConformanceError::Malformed(e.to_string())
            })
    }
}

/// How one vector fared.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Parsing and re-serializing a body changed its bytes.
    NotCanonical { which: &'static str },
    /// The implementation answered different bytes.
    Mismatch { actual: String },
    Error(String),
}

/// Checks that both bodies are canonical protocol envelopes.
pub fn check_round_trip(v: &ConformanceVector) -> Outcome {
    let kind = match v.kind() {
        Ok(k) => k,
        Err(e) => return Outcome::Error(e.to_string()),
    };
    match BackendRequest::parse(kind, v.request.as_bytes()) {
        Ok(r) if r.to_body() == v.request => {}
        Ok(_) => return Outcome::NotCanonical { which: "request" },
        Err(e) => return Outcome::Error(e.to_string()),
    }
    match BackendResponse::parse(kind, v.response.as_bytes()) {
        Ok(r) if r.to_body() == v.response => Outcome::Pass,
        Ok(_) => Outcome::NotCanonical { which: "response" },
        Err(e) => Outcome::Error(e.to_string()),
    }
}

/// Replays every vector against the in-process mocks.
pub fn run_in_process(file: &VectorFile, mock: &MockBackend) -> Vec<(String, Outcome)> {
    file.vectors
        .iter()
        .map(|v| {
            let outcome = match check_round_trip(v) {
                Outcome::Pass => match v.kind() {
                    Ok(kind) => match mock.handle_body(kind, v.request.as_bytes()) {
                        Ok(actual) if actual == v.response => Outcome::Pass,
                        Ok(actual) => Outcome::Mismatch { actual },
                        Err(e) => Outcome::Error(e.to_string()),
                    },
                    Err(e) => Outcome::Error(e.to_string()),
                },
                other => other,
            };
            (v.name.clone(), outcome)
        })
        .collect()
}

/// Replays every vector against a running service at `base_url`, comparing raw
/// response bodies.
pub fn run_over_http(file: &VectorFile, base_url: &str, timeout: Duration) -> Vec<(String, Outcome)> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let base = base_url.trim_end_matches('/');
    file.vectors
        .iter()
        .map(|v| {
            let outcome = match v.kind() {
                Ok(kind) => {
                    let sent = agent
                        .post(&format!("{base}{}", kind.path()))
                        .header("content-type", "application/json")
                        .send(v.request.as_str());
                    match sent {
                        Ok(mut resp) if resp.status().as_u16() == 200 => {
                            match resp.body_mut().read_to_string() {
                                Ok(actual) if actual == v.response => Outcome::Pass,
                                Ok(actual) => Outcome::Mismatch { actual },
                                Err(e) => Outcome::Error(e.to_string()),
                            }
                        }
                        Ok(resp) => Outcome::Error(format!("HTTP {}", resp.status())),
                        Err(e) => Outcome::Error(e.to_string()),
                    }
                }
                Err(e) => Outcome::Error(e.to_string()),
            };
            (v.name.clone(), outcome)
        })
        .collect()
}

/// Copies the shipped input media into `dest` so a run cannot touch the originals.
pub fn stage_media(src: &Path, dest: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dest)?;
    for entry in fs::read_dir(src)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            fs::copy(entry.path(), dest.join(entry.file_name()))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_endpoint_and_version() {
        let bad = r#"{"version":1,"vectors":[{"name":"x","endpoint":"train","request":"{}","response":"{}"}]}"#;
        assert!(VectorFile::parse(bad).is_err());
        assert!(VectorFile::parse(r#"{"version":2,"vectors":[]}"#).is_err());
        assert!(VectorFile::parse(r#"{"version":1,"vectors":[]}"#).is_ok());
    }

    #[test]
    fn non_canonical_body_is_flagged() {
        let v = ConformanceVector {
            name: "spaced".into(),
            endpoint: "caption".into(),
            request: r#"{ "request_id":"r","seed":1,"inputs":{"video":{"media":{"digest":"ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad","path":"a.dvf","kind":"VIDEO"}}},"params":{}}"#.into(),
            response: String::new(),
        };
        assert_eq!(check_round_trip(&v), Outcome::NotCanonical { which: "request" });
    }
}
