//! Request/response envelopes for the model services.
//!
//! Every service is reached with `POST /v1/<endpoint>` and a JSON body. The request
//! body has exactly the fields `request_id`, `seed`, `inputs`, `params`; the response
//! body has exactly `request_id`, `status`, `outputs`, `gpu_seconds`, `model_id`.
//! Media travel by reference (digest plus path), never inline.
//!
//! Maps are ordered, so [`BackendRequest::to_body`] and [`BackendResponse::to_body`]
//! are canonical: parsing a canonical body and serializing it again gives back the
//! same bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digest::ContentDigest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BackendKind {
    Caption,
    Instruct,
    EditImage,
    Depth,
    Generate,
    Judge,
    Enhance,
}

impl BackendKind {
    pub const ALL: [BackendKind; 7] = [
        BackendKind::Caption,
        BackendKind::Instruct,
        BackendKind::EditImage,
        BackendKind::Depth,
        BackendKind::Generate,
        BackendKind::Judge,
        BackendKind::Enhance,
    ];

    pub fn endpoint(self) -> &'static str {
        match self {
            BackendKind::Caption => "caption",
            BackendKind::Instruct => "instruct",
            BackendKind::EditImage => "edit_image",
            BackendKind::Depth => "depth",
            BackendKind::Generate => "generate",
            BackendKind::Judge => "judge",
            BackendKind::Enhance => "enhance",
        }
    }

    pub fn path(self) -> String {
        format!("/v1/{}", self.endpoint())
    }

    pub fn from_path(path: &str) -> Option<Self> {
        let ep = path.strip_prefix("/v1/")?;
        Self::ALL.into_iter().find(|k| k.endpoint() == ep)
    }

    /// Inputs a request of this kind must carry, with their expected shape.
    pub fn required_inputs(self) -> &'static [(&'static str, InputShape)] {
        use InputShape::*;
        match self {
            BackendKind::Caption => &[("video", Video)],
            BackendKind::Instruct => &[("video", Video), ("caption", Text)],
            BackendKind::EditImage => &[("frame", Image), ("instruction", Text)],
            BackendKind::Depth => &[("video", Video)],
            BackendKind::Generate => &[
                ("depth_video", Video),
                ("edited_keyframe", Image),
                ("instruction", Text),
            ],
            BackendKind::Judge => &[("source", Video), ("edited", Video), ("instruction", Text)],
            BackendKind::Enhance => &[("video", Video)],
        }
    }

    /// Outputs an OK response of this kind must carry.
    pub fn declared_outputs(self) -> &'static [(&'static str, OutputShape)] {
        use OutputShape::*;
        match self {
            BackendKind::Caption => &[("caption", Text)],
            BackendKind::Instruct => &[("instruction", Text), ("category", Text)],
            BackendKind::EditImage => &[("edited_keyframe", Image)],
            BackendKind::Depth => &[("depth_video", Video)],
            BackendKind::Generate => &[("edited_video", Video)],
            BackendKind::Judge => &[("scores", Scores)],
            BackendKind::Enhance => &[("video", Video), ("provenance", Text)],
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.endpoint())
    }
}

impl FromStr for BackendKind {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.endpoint() == s)
            .ok_or_else(|| ProtocolError::UnknownEndpoint(s.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputShape {
    Video,
    Image,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputShape {
    Video,
    Image,
    Text,
    Scores,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MediaKind {
    Video,
    Image,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaRef {
    pub digest: ContentDigest,
    /// Relative paths resolve against the media root of whoever handles the request.
    pub path: String,
    pub kind: MediaKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputValue {
    Media(MediaRef),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Scalar::Int(i) => Some(i as f64),
            Scalar::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Scalar::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Scalar::Int(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    InstructionFidelity,
    PreservationFidelity,
    VisualQuality,
    Safety,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::InstructionFidelity,
        Criterion::PreservationFidelity,
        Criterion::VisualQuality,
        Criterion::Safety,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::InstructionFidelity => "instruction_fidelity",
            Criterion::PreservationFidelity => "preservation_fidelity",
            Criterion::VisualQuality => "visual_quality",
            Criterion::Safety => "safety",
        }
    }
}

/// Judge scores, one per criterion, each in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeScores {
    pub instruction_fidelity: f64,
    pub preservation_fidelity: f64,
    pub visual_quality: f64,
    pub safety: f64,
}

impl JudgeScores {
    pub fn new(values: [f64; 4]) -> Result<Self, ProtocolError> {
        let s = Self {
            instruction_fidelity: values[0],
            preservation_fidelity: values[1],
            visual_quality: values[2],
            safety: values[3],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::InstructionFidelity => self.instruction_fidelity,
            Criterion::PreservationFidelity => self.preservation_fidelity,
            Criterion::VisualQuality => self.visual_quality,
            Criterion::Safety => self.safety,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        for c in Criterion::ALL {
            let v = self.get(c);
            if !(0.0..=1.0).contains(&v) {
                return Err(ProtocolError::Invalid(format!(
                    "judge score {} = {v} outside [0, 1]",
                    c.as_str()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputValue {
    Media(MediaRef),
    Text(String),
    Scores(JudgeScores),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponseStatus {
    Ok,
    BackendFailure,
}

/// Editing categories; the first two are global edits, the rest local.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    GlobalStyle,
    GlobalEnvironment,
    LocalReplace,
    LocalAdd,
    LocalRemove,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::GlobalStyle,
        Category::GlobalEnvironment,
        Category::LocalReplace,
        Category::LocalAdd,
        Category::LocalRemove,
    ];

    pub fn is_global(self) -> bool {
        matches!(self, Category::GlobalStyle | Category::GlobalEnvironment)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::GlobalStyle => "GLOBAL_STYLE",
            Category::GlobalEnvironment => "GLOBAL_ENVIRONMENT",
            Category::LocalReplace => "LOCAL_REPLACE",
            Category::LocalAdd => "LOCAL_ADD",
            Category::LocalRemove => "LOCAL_REMOVE",
        }
    }
}

impl FromStr for Category {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ProtocolError::Invalid(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed body: {0}")]
    Malformed(String),
    #[error("unknown endpoint {0:?}")]
    UnknownEndpoint(String),
    #[error("{kind} request is missing input {name:?}")]
    MissingInput { kind: BackendKind, name: &'static str },
    #[error("{kind} input {name:?} has the wrong type, expected {expected:?}")]
    WrongInput {
        kind: BackendKind,
        name: &'static str,
        expected: InputShape,
    },
    #[error("{kind} response is missing output {name:?}")]
    MissingOutput { kind: BackendKind, name: &'static str },
    #[error("invalid envelope: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendRequest {
    pub request_id: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, InputValue>,
    pub params: BTreeMap<String, Scalar>,
}

impl BackendRequest {
    pub fn new(request_id: impl Into<String>, seed: u64) -> Self {
        Self {
            request_id: request_id.into(),
            seed,
            inputs: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn media(mut self, name: &str, media: MediaRef) -> Self {
        self.inputs.insert(name.to_owned(), InputValue::Media(media));
        self
    }

    pub fn text(mut self, name: &str, text: impl Into<String>) -> Self {
        self.inputs
            .insert(name.to_owned(), InputValue::Text(text.into()));
        self
    }

    pub fn param(mut self, name: &str, value: Scalar) -> Self {
        self.params.insert(name.to_owned(), value);
        self
    }

    pub fn parse(kind: BackendKind, body: &[u8]) -> Result<Self, ProtocolError> {
        let req: Self =
            serde_json::from_slice(body).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        req.validate(kind)?;
        Ok(req)
    }

    pub fn to_body(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }

    /// Checks that every input the kind requires is present with the right shape.
    pub fn validate(&self, kind: BackendKind) -> Result<(), ProtocolError> {
        if self.request_id.is_empty() {
            return Err(ProtocolError::Invalid("empty request_id".into()));
        }
        for &(name, shape) in kind.required_inputs() {
            let value = self
                .inputs
                .get(name)
                .ok_or(ProtocolError::MissingInput { kind, name })?;
            let ok = match (shape, value) {
                (InputShape::Video, InputValue::Media(m)) => {
                    m.kind == MediaKind::Video && !m.path.is_empty()
                }
                (InputShape::Image, InputValue::Media(m)) => {
                    m.kind == MediaKind::Image && !m.path.is_empty()
                }
                (InputShape::Text, InputValue::Text(t)) => !t.is_empty(),
                _ => false,
            };
            if !ok {
                return Err(ProtocolError::WrongInput {
                    kind,
                    name,
                    expected: shape,
                });
            }
        }
        Ok(())
    }

    pub fn media_input(&self, name: &str) -> Option<&MediaRef> {
        match self.inputs.get(name)? {
            InputValue::Media(m) => Some(m),
            InputValue::Text(_) => None,
        }
    }

    pub fn text_input(&self, name: &str) -> Option<&str> {
        match self.inputs.get(name)? {
            InputValue::Text(t) => Some(t),
            InputValue::Media(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendResponse {
    pub request_id: String,
    pub status: ResponseStatus,
    pub outputs: BTreeMap<String, OutputValue>,
    pub gpu_seconds: f64,
    pub model_id: String,
}

impl BackendResponse {
    pub fn ok(request_id: &str, model_id: &str, gpu_seconds: f64) -> Self {
        Self {
            request_id: request_id.to_owned(),
            status: ResponseStatus::Ok,
            outputs: BTreeMap::new(),
            gpu_seconds,
            model_id: model_id.to_owned(),
        }
    }

    pub fn failure(request_id: &str, model_id: &str, message: &str) -> Self {
        let mut outputs = BTreeMap::new();
        outputs.insert("error".to_owned(), OutputValue::Text(message.to_owned()));
        Self {
            request_id: request_id.to_owned(),
            status: ResponseStatus::BackendFailure,
            outputs,
            gpu_seconds: 0.0,
            model_id: model_id.to_owned(),
        }
    }

    pub fn output(mut self, name: &str, value: OutputValue) -> Self {
        self.outputs.insert(name.to_owned(), value);
        self
    }

    pub fn parse(kind: BackendKind, body: &[u8]) -> Result<Self, ProtocolError> {
        let resp: Self =
            serde_json::from_slice(body).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        resp.validate(kind)?;
        Ok(resp)
    }

    pub fn to_body(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }

    pub fn validate(&self, kind: BackendKind) -> Result<(), ProtocolError> {
        if !self.gpu_seconds.is_finite() || self.gpu_seconds < 0.0 {
            return Err(ProtocolError::Invalid(format!(
                "gpu_seconds {} is not a finite nonnegative number",
                self.gpu_seconds
            )));
        }
        if self.status == ResponseStatus::BackendFailure {
            return Ok(());
        }
        for &(name, shape) in kind.declared_outputs() {
            let value = self
                .outputs
                .get(name)
                .ok_or(ProtocolError::MissingOutput { kind, name })?;
            let ok = match (shape, value) {
                (OutputShape::Video, OutputValue::Media(m)) => m.kind == MediaKind::Video,
                (OutputShape::Image, OutputValue::Media(m)) => m.kind == MediaKind::Image,
                (OutputShape::Text, OutputValue::Text(_)) => true,
                (OutputShape::Scores, OutputValue::Scores(s)) => s.validate().is_ok(),
                _ => false,
            };
            if !ok {
                return Err(ProtocolError::Invalid(format!(
                    "{kind} output {name:?} has the wrong type"
                )));
            }
        }
        if kind == BackendKind::Instruct {
            if let Some(OutputValue::Text(c)) = self.outputs.get("category") {
                c.parse::<Category>()?;
            }
        }
        Ok(())
    }

    pub fn media_output(&self, name: &str) -> Option<&MediaRef> {
        match self.outputs.get(name)? {
            OutputValue::Media(m) => Some(m),
            _ => None,
        }
    }

    pub fn text_output(&self, name: &str) -> Option<&str> {
        match self.outputs.get(name)? {
            OutputValue::Text(t) => Some(t),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn media(kind: MediaKind) -> MediaRef {
        MediaRef {
            digest: ContentDigest::of(b"x"),
            path: "x.dvf".into(),
            kind,
        }
    }

    #[test]
    fn request_body_field_order() {
        let req = BackendRequest::new("r1", 7)
            .media("video", media(MediaKind::Video))
            .param("global_weight", Scalar::Float(0.7));
        let body = req.to_body();
        let keys: Vec<&str> = ["\"request_id\"", "\"seed\"", "\"inputs\"", "\"params\""]
            .into_iter()
            .collect();
        let mut last = 0;
        for k in keys {
            let at = body.find(k).unwrap();
            assert!(at >= last);
            last = at;
        }
        assert_eq!(BackendRequest::parse(BackendKind::Caption, body.as_bytes()).unwrap(), req);
    }

    #[test]
    fn unknown_fields_rejected() {
        let body = br#"{"request_id":"r","seed":1,"inputs":{},"params":{},"extra":1}"#;
        assert!(matches!(
            BackendRequest::parse(BackendKind::Depth, body),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[test]
    fn generate_requires_both_scaffolds() {
        let base = BackendRequest::new("g", 1).text("instruction", "make it snow");
        let only_key = base.clone().media("edited_keyframe", media(MediaKind::Image));
        assert!(matches!(
            only_key.validate(BackendKind::Generate),
            Err(ProtocolError::MissingInput { name: "depth_video", .. })
        ));
        let only_depth = base.clone().media("depth_video", media(MediaKind::Video));
        assert!(matches!(
            only_depth.validate(BackendKind::Generate),
            Err(ProtocolError::MissingInput { name: "edited_keyframe", .. })
        ));
        let swapped = base
            .media("depth_video", media(MediaKind::Video))
            .media("edited_keyframe", media(MediaKind::Video));
        assert!(matches!(
            swapped.validate(BackendKind::Generate),
            Err(ProtocolError::WrongInput { name: "edited_keyframe", .. })
        ));
    }

    #[test]
    fn scalar_shapes_survive_round_trip() {
        let req = BackendRequest::new("r", u64::MAX)
            .media("video", media(MediaKind::Video))
            .param("b", Scalar::Bool(true))
            .param("f", Scalar::Float(60.0))
            .param("i", Scalar::Int(4))
            .param("s", Scalar::Text("x".into()));
        let body = req.to_body();
        let back = BackendRequest::parse(BackendKind::Enhance, body.as_bytes()).unwrap();
        assert_eq!(back, req);
        assert_eq!(back.to_body(), body);
    }

    #[test]
    fn response_validation() {
        let ok = BackendResponse::ok("r", "m", 1.5);
        assert!(matches!(
            ok.validate(BackendKind::Caption),
            Err(ProtocolError::MissingOutput { name: "caption", .. })
        ));
        let ok = ok.output("caption", OutputValue::Text("a cat".into()));
        ok.validate(BackendKind::Caption).unwrap();

        let mut neg = ok.clone();
        neg.gpu_seconds = -1.0;
        assert!(neg.validate(BackendKind::Caption).is_err());

        let fail = BackendResponse::failure("r", "m", "boom");
        fail.validate(BackendKind::Generate).unwrap();

        let bad_cat = BackendResponse::ok("r", "m", 0.0)
            .output("instruction", OutputValue::Text("x".into()))
            .output("category", OutputValue::Text("GLOBAL_WEATHER".into()));
        assert!(bad_cat.validate(BackendKind::Instruct).is_err());
    }

    #[test]
    fn judge_scores_range() {
        assert!(JudgeScores::new([0.0, 1.0, 0.5, 0.25]).is_ok());
        assert!(JudgeScores::new([0.0, 1.1, 0.5, 0.25]).is_err());
        assert!(JudgeScores::new([f64::NAN, 1.0, 0.5, 0.25]).is_err());
    }

    #[test]
    fn endpoints_map_to_paths() {
        for k in BackendKind::ALL {
            assert_eq!(BackendKind::from_path(&k.path()), Some(k));
        }
        assert_eq!(BackendKind::from_path("/v1/train"), None);
        assert_eq!(BackendKind::from_path("/v2/caption"), None);
    }
}
