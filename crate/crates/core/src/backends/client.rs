//! Typed client operations over a pluggable transport.

use std::sync::Arc;
use std::time::Duration;

use crate::backends::media::{MediaStore, StoreError};
use crate::backends::mock::{self, MockBackend, MockError};
use crate::backends::protocol::{
    BackendKind, BackendRequest, BackendResponse, Category, JudgeScores, MediaKind, MediaRef,
    OutputValue, ProtocolError, ResponseStatus, Scalar,
};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("request rejected before dispatch: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("media not resolvable: {0}")]
    Unresolvable(#[from] StoreError),
    #[error("{kind} timed out")]
    Timeout { kind: BackendKind },
    #[error("{kind} transport failure: {message}")]
    Transport { kind: BackendKind, message: String },
    #[error("{kind} malformed response: {message}")]
    MalformedResponse { kind: BackendKind, message: String },
    #[error("{kind} backend failure: {message}")]
    Failure { kind: BackendKind, message: String },
    #[error("{kind} rejected the request with status {status}: {body}")]
    Rejected {
        kind: BackendKind,
        status: u16,
        body: String,
    },
}

impl BackendError {
    /// Timeouts, transport errors, malformed responses and BACKEND_FAILURE answers are
    /// worth another attempt; requests the service refused are not.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout { .. }
                | BackendError::Transport { .. }
                | BackendError::MalformedResponse { .. }
                | BackendError::Failure { .. }
        )
    }

    /// True when the service could not be reached at all.
    pub fn is_unreachable(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout { .. } | BackendError::Transport { .. }
        )
    }
}

/// Carries one envelope to a service and brings the answer back.
pub trait Transport: Send + Sync {
    fn send(&self, kind: BackendKind, request: &BackendRequest)
        -> Result<BackendResponse, BackendError>;

    /// Media directory visible to the services, when the client can see it too.
    fn media(&self) -> Option<&MediaStore> {
        None
    }
}

/// Calls the mocks directly, still going through the serialized wire bodies.
pub struct InProcessTransport {
    mock: MockBackend,
}

impl InProcessTransport {
    pub fn new(mock: MockBackend) -> Self {
        Self { mock }
    }
}

impl Transport for InProcessTransport {
    fn send(
        &self,
        kind: BackendKind,
        request: &BackendRequest,
    ) -> Result<BackendResponse, BackendError> {
        let body = request.to_body();
        let answer = self.mock.handle_body(kind, body.as_bytes()).map_err(|e| {
            let status = match e {
                MockError::Store(StoreError::NotFound { .. }) => 404,
                _ => 400,
            };
            BackendError::Rejected {
                kind,
                status,
                body: e.to_string(),
            }
        })?;
        BackendResponse::parse(kind, answer.as_bytes()).map_err(|e| {
            BackendError::MalformedResponse {
                kind,
                message: e.to_string(),
            }
        })
    }

    fn media(&self) -> Option<&MediaStore> {
        Some(self.mock.store())
    }
}

/// POSTs envelopes to `<base>/v1/<endpoint>`. With several base URLs each request
/// goes to one picked by a stable hash of its id.
pub struct HttpTransport {
    agent: ureq::Agent,
    bases: Vec<String>,
    media: Option<MediaStore>,
}

impl HttpTransport {
    pub fn new(bases: Vec<String>, timeout: Duration, media: Option<MediaStore>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let bases = bases
            .into_iter()
            .map(|b| b.trim_end_matches('/').to_owned())
            .collect();
        Self {
            agent,
            bases,
            media,
        }
    }

    fn base_for(&self, request_id: &str) -> &str {
        let h = crc32fast::hash(request_id.as_bytes()) as usize;
        &self.bases[h % self.bases.len()]
    }
}

impl Transport for HttpTransport {
    fn send(
        &self,
        kind: BackendKind,
        request: &BackendRequest,
    ) -> Result<BackendResponse, BackendError> {
        if self.bases.is_empty() {
            return Err(BackendError::Transport {
                kind,
                message: "no backend endpoints configured".into(),
            });
        }
        let url = format!("{}{}", self.base_for(&request.request_id), kind.path());
        let transport_err = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout { kind },
            other => BackendError::Transport {
                kind,
                message: other.to_string(),
            },
        };
        let mut resp = self
            .agent
            .post(&url)
            .header("content-type", "application/json")
            .send(request.to_body())
            .map_err(transport_err)?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(transport_err)?;
        match status {
            200 => BackendResponse::parse(kind, body.as_bytes()).map_err(|e| {
                BackendError::MalformedResponse {
                    kind,
                    message: e.to_string(),
                }
            }),
            400..=499 => Err(BackendError::Rejected { kind, status, body }),
            _ => Err(BackendError::Transport {
                kind,
                message: format!("HTTP {status}: {body}"),
            }),
        }
    }

    fn media(&self) -> Option<&MediaStore> {
        self.media.as_ref()
    }
}

/// A parsed answer plus the accounting fields of its envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct Reply<T> {
    pub value: T,
    pub request_id: String,
    pub model_id: String,
    pub gpu_seconds: f64,
}

/// Inputs to [`BackendClient::generate_video`]. Both scaffolds are optional here so
/// that a missing one is caught by the client, before anything reaches the wire.
#[derive(Clone, Debug)]
pub struct GenerateInputs<'a> {
    pub depth_video: Option<&'a MediaRef>,
    pub edited_keyframe: Option<&'a MediaRef>,
    pub instruction: &'a str,
}

#[derive(Clone)]
pub struct BackendClient {
    transport: Arc<dyn Transport>,
}

impl BackendClient {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Self { transport }
    }

    pub fn in_process(mock: MockBackend) -> Self {
        Self::new(Arc::new(InProcessTransport::new(mock)))
    }

    fn check_media(&self, media: &MediaRef, kind: MediaKind) -> Result<(), BackendError> {
        if media.path.is_empty() {
            return Err(BackendError::InvalidRequest("empty media path".into()));
        }
        if media.kind != kind {
            return Err(BackendError::InvalidRequest(format!(
                "{} is {:?}, expected {:?}",
                media.path, media.kind, kind
            )));
        }
        if let Some(store) = self.transport.media() {
            store.existing(media)?;
        }
        Ok(())
    }

    /// Sends a validated request and unwraps a successful envelope.
    pub fn call(
        &self,
        kind: BackendKind,
        request: &BackendRequest,
    ) -> Result<BackendResponse, BackendError> {
        request.validate(kind)?;
        let resp = self.transport.send(kind, request)?;
        if resp.request_id != request.request_id {
            return Err(BackendError::MalformedResponse {
                kind,
                message: format!(
                    "response for {:?} answered request {:?}",
                    resp.request_id, request.request_id
                ),
            });
        }
        if resp.status == ResponseStatus::BackendFailure {
            let message = resp.text_output("error").unwrap_or("unspecified").to_owned();
            return Err(BackendError::Failure { kind, message });
        }
        Ok(resp)
    }

    fn reply<T>(resp: BackendResponse, value: T) -> Reply<T> {
        Reply {
            value,
            request_id: resp.request_id,
            model_id: resp.model_id,
            gpu_seconds: resp.gpu_seconds,
        }
    }

    fn media_out(kind: BackendKind, resp: &BackendResponse, name: &str) -> Result<MediaRef, BackendError> {
        resp.media_output(name)
            .cloned()
            .ok_or_else(|| BackendError::MalformedResponse {
                kind,
                message: format!("missing media output {name:?}"),
            })
    }

    fn text_out(kind: BackendKind, resp: &BackendResponse, name: &str) -> Result<String, BackendError> {
        resp.text_output(name)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::MalformedResponse {
                kind,
                message: format!("missing text output {name:?}"),
            })
    }

    pub fn caption(&self, request_id: &str, video: &MediaRef, seed: u64) -> Result<Reply<String>, BackendError> {
        self.check_media(video, MediaKind::Video)?;
        let req = BackendRequest::new(request_id, seed).media("video", video.clone());
        let resp = self.call(BackendKind::Caption, &req)?;
        let caption = Self::text_out(BackendKind::Caption, &resp, "caption")?;
        Ok(Self::reply(resp, caption))
    }

    pub fn instruct(
        &self,
        request_id: &str,
        video: &MediaRef,
        caption: &str,
        seed: u64,
        global_weight: f64,
    ) -> Result<Reply<(String, Category)>, BackendError> {
        self.check_media(video, MediaKind::Video)?;
        if caption.is_empty() {
            return Err(BackendError::InvalidRequest("empty caption".into()));
        }
        let req = BackendRequest::new(request_id, seed)
            .media("video", video.clone())
            .text("caption", caption)
            .param("global_weight", Scalar::Float(global_weight));
        let resp = self.call(BackendKind::Instruct, &req)?;
        let text = Self::text_out(BackendKind::Instruct, &resp, "instruction")?;
        let category: Category = Self::text_out(BackendKind::Instruct, &resp, "category")?.parse()?;
        Ok(Self::reply(resp, (text, category)))
    }

    pub fn edit_image(
        &self,
        request_id: &str,
        frame: &MediaRef,
        instruction: &str,
        seed: u64,
    ) -> Result<Reply<MediaRef>, BackendError> {
        self.check_media(frame, MediaKind::Image)?;
        let req = BackendRequest::new(request_id, seed)
            .media("frame", frame.clone())
            .text("instruction", instruction);
        let resp = self.call(BackendKind::EditImage, &req)?;
        let out = Self::media_out(BackendKind::EditImage, &resp, "edited_keyframe")?;
        Ok(Self::reply(resp, out))
    }

    pub fn predict_depth(&self, request_id: &str, video: &MediaRef, seed: u64) -> Result<Reply<MediaRef>, BackendError> {
        self.check_media(video, MediaKind::Video)?;
        let req = BackendRequest::new(request_id, seed).media("video", video.clone());
        let resp = self.call(BackendKind::Depth, &req)?;
        let out = Self::media_out(BackendKind::Depth, &resp, "depth_video")?;
        Ok(Self::reply(resp, out))
    }

    /// Refuses, before dispatch, any request lacking either visual scaffold: depth
    /// alone loses the edit's content and an unedited keyframe reproduces the source.
    pub fn generate_video(
        &self,
        request_id: &str,
        inputs: GenerateInputs<'_>,
        seed: u64,
        distilled: bool,
    ) -> Result<Reply<MediaRef>, BackendError> {
        let depth = inputs.depth_video.ok_or_else(|| {
            BackendError::InvalidRequest("generate needs a depth video".into())
        })?;
        let key = inputs.edited_keyframe.ok_or_else(|| {
            BackendError::InvalidRequest("generate needs an edited keyframe".into())
        })?;
        self.check_media(depth, MediaKind::Video)?;
        self.check_media(key, MediaKind::Image)?;
        let req = BackendRequest::new(request_id, seed)
            .media("depth_video", depth.clone())
            .media("edited_keyframe", key.clone())
            .text("instruction", inputs.instruction)
            .param("distilled", Scalar::Bool(distilled));
        let resp = self.call(BackendKind::Generate, &req)?;
        let out = Self::media_out(BackendKind::Generate, &resp, "edited_video")?;
        Ok(Self::reply(resp, out))
    }

    pub fn judge(
        &self,
        request_id: &str,
        source: &MediaRef,
        edited: &MediaRef,
        instruction: &str,
        seed: u64,
    ) -> Result<Reply<JudgeScores>, BackendError> {
        self.check_media(source, MediaKind::Video)?;
        self.check_media(edited, MediaKind::Video)?;
        let req = BackendRequest::new(request_id, seed)
            .media("source", source.clone())
            .media("edited", edited.clone())
            .text("instruction", instruction);
        let resp = self.call(BackendKind::Judge, &req)?;
        let scores = match resp.outputs.get("scores") {
            Some(OutputValue::Scores(s)) => *s,
            _ => {
                return Err(BackendError::MalformedResponse {
                    kind: BackendKind::Judge,
                    message: "missing scores".into(),
                })
            }
        };
        Ok(Self::reply(resp, scores))
    }

    /// Returns the enhanced video and the provenance tag the enhancer recorded.
    pub fn enhance(
        &self,
        request_id: &str,
        video: &MediaRef,
        noise_sigma: f64,
        steps: i64,
        seed: u64,
    ) -> Result<Reply<(MediaRef, String)>, BackendError> {
        mock::validate_enhance(noise_sigma, steps)?;
        self.check_media(video, MediaKind::Video)?;
        let mut req = BackendRequest::new(request_id, seed).media("video", video.clone());
        for (k, v) in mock::enhance_params(noise_sigma, steps) {
            req = req.param(k, v);
        }
        let resp = self.call(BackendKind::Enhance, &req)?;
        let out = Self::media_out(BackendKind::Enhance, &resp, "video")?;
        let prov = Self::text_out(BackendKind::Enhance, &resp, "provenance")?;
        Ok(Self::reply(resp, (out, prov)))
    }
}
