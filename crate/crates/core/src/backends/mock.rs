//! Deterministic stand-ins for the seven model services.
//!
//! Every mock is a pure function of the request (input digests, texts, seed and
//! params) and the [`MockConfig`]. Randomness comes from domain-separated SHA-256
//! ([`KeyedHash`]), never from an RNG with hidden state, so the in-process mocks, the
//! `mock-serve` service and any conforming adapter answer the same request with the
//! same bytes.
//!
//! Pixel semantics:
//! - `edit_image` applies an instruction-keyed invertible colour transform
//!   ([`ColorTransform`]): a channel permutation followed by a wrapping offset.
//! - `depth` replaces every pixel by its integer luma, replicated to three channels.
//! - `generate` takes per-frame structure from the depth video and colour from the
//!   edited keyframe: output channel `c` is `(depth + key_c - luma(key)) mod 256`.
//!   Channel differences of every output frame therefore equal those of the keyframe.
//! - `enhance` returns its input untouched and records the noise level and step count.

use serde::{Deserialize, Serialize};

use crate::backends::media::{MediaStore, StoreError};
use crate::backends::protocol::{
    BackendKind, BackendRequest, BackendResponse, Category, Criterion, JudgeScores, MediaKind,
    OutputValue, ProtocolError, Scalar,
};
use crate::digest::{unit_interval, KeyedHash};
use crate::media_io::{luma, Video};

/// Share of the teacher's cost a distilled generator spends per sample.
pub const DISTILLED_COST_FACTOR: f64 = 0.20;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;
pub const DEFAULT_ENHANCE_STEPS: i64 = 4;
pub const DEFAULT_GLOBAL_WEIGHT: f64 = 0.7;

/// GPU-seconds each mock reports per successful call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockCosts {
    pub caption: f64,
    pub instruct: f64,
    pub edit_image: f64,
    pub depth: f64,
    /// Undistilled generator cost; 3000 s is 50 GPU-minutes.
    pub generate_base: f64,
    pub judge: f64,
    pub enhance: f64,
}

impl Default for MockCosts {
    fn default() -> Self {
        Self {
            caption: 2.0,
            instruct: 2.0,
            edit_image: 5.0,
            depth: 10.0,
            generate_base: 3000.0,
            judge: 2.0,
            enhance: 60.0,
        }
    }
}

impl MockCosts {
    pub fn for_kind(&self, kind: BackendKind, distilled: bool) -> f64 {
        match kind {
            BackendKind::Caption => self.caption,
            BackendKind::Instruct => self.instruct,
            BackendKind::EditImage => self.edit_image,
            BackendKind::Depth => self.depth,
            BackendKind::Generate => generate_cost(self.generate_base, distilled),
            BackendKind::Judge => self.judge,
            BackendKind::Enhance => self.enhance,
        }
    }
}

pub fn generate_cost(base: f64, distilled: bool) -> f64 {
    base * if distilled { DISTILLED_COST_FACTOR } else { 1.0 }
}

/// Per-criterion judge bias in [0, 1]. A score is `clamp(u + 2 * bias - 1, 0, 1)`
/// with `u` uniform on [0, 1): bias 1 always scores 1, bias 0 always scores 0, bias
/// 0.5 scores `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeBias {
    pub instruction_fidelity: f64,
    pub preservation_fidelity: f64,
    pub visual_quality: f64,
    pub safety: f64,
}

impl Default for JudgeBias {
    fn default() -> Self {
        Self {
            instruction_fidelity: 0.8,
            preservation_fidelity: 0.8,
            visual_quality: 0.8,
            safety: 0.95,
        }
    }
}

impl JudgeBias {
    pub fn uniform(b: f64) -> Self {
        Self {
            instruction_fidelity: b,
            preservation_fidelity: b,
            visual_quality: b,
            safety: b,
        }
    }

    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::InstructionFidelity => self.instruction_fidelity,
            Criterion::PreservationFidelity => self.preservation_fidelity,
            Criterion::VisualQuality => self.visual_quality,
            Criterion::Safety => self.safety,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockConfig {
    pub costs: MockCosts,
    pub judge_bias: JudgeBias,
    /// Probability that a call answers BACKEND_FAILURE, keyed on the request id so a
    /// retry with a fresh id can succeed.
    pub failure_rate: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            costs: MockCosts::default(),
            judge_bias: JudgeBias::default(),
            failure_rate: 0.0,
        }
    }
}

impl MockConfig {
    pub fn validate(&self) -> Result<(), String> {
        let c = &self.costs;
        for (name, v) in [
            ("caption", c.caption),
            ("instruct", c.instruct),
            ("edit_image", c.edit_image),
            ("depth", c.depth),
            ("generate_base", c.generate_base),
            ("judge", c.judge),
            ("enhance", c.enhance),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("mock cost {name} = {v} must be finite and >= 0"));
            }
        }
        for crit in Criterion::ALL {
            let b = self.judge_bias.get(crit);
            if !(0.0..=1.0).contains(&b) {
                return Err(format!("judge bias {} = {b} outside [0, 1]", crit.as_str()));
            }
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err(format!("failure_rate {} outside [0, 1]", self.failure_rate));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Channel permutation followed by a wrapping per-channel offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColorTransform {
    pub permutation: u8,
    pub offset: u8,
}

impl ColorTransform {
    pub const IDENTITY: ColorTransform = ColorTransform {
        permutation: 0,
        offset: 0,
    };

    pub fn from_instruction(instruction: &str) -> Self {
        let h = KeyedHash::new("ditto.mock.edit_image.transform")
            .str(instruction)
            .finish();
        Self {
            permutation: h[0] % 6,
            offset: h[1],
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply(&self, px: [u8; 3]) -> [u8; 3] {
        let p = PERMUTATIONS[self.permutation as usize];
        [0, 1, 2].map(|c| px[p[c]].wrapping_add(self.offset))
    }

    pub fn invert(&self, px: [u8; 3]) -> [u8; 3] {
        let p = PERMUTATIONS[self.permutation as usize];
        let mut out = [0u8; 3];
        for c in 0..3 {
            out[p[c]] = px[c].wrapping_sub(self.offset);
        }
        out
    }

    pub fn apply_video(&self, video: &Video) -> Video {
        let (header, mut data) = video.clone().into_parts();
        for px in data.chunks_exact_mut(3) {
            let out = self.apply([px[0], px[1], px[2]]);
            px.copy_from_slice(&out);
        }
        Video::new(header, data).expect("geometry unchanged")
    }
}

const ADJECTIVES: [&str; 16] = [
    "quiet", "bustling", "sunlit", "misty", "colorful", "ancient", "modern", "rustic",
    "serene", "crowded", "windswept", "snowy", "lush", "dusty", "glowing", "shadowy",
];
const SUBJECTS: [&str; 16] = [
    "dog", "cyclist", "sailboat", "woman", "man", "child", "horse", "car", "train", "cat",
    "dancer", "chef", "bird", "skateboarder", "tram", "fisherman",
];
const ACTIONS: [&str; 16] = [
    "walking", "running", "turning slowly", "drifting", "waving", "jumping", "crossing the frame",
    "resting", "climbing", "spinning", "gliding", "pausing", "racing", "wandering",
    "stretching", "looking around",
];
const SETTINGS: [&str; 16] = [
    "a city street", "a forest trail", "a harbor", "a kitchen", "a mountain pass",
    "a beach", "a market", "a park", "a train station", "a desert road", "a riverside",
    "a courtyard", "a snowfield", "a rooftop", "a meadow", "a library",
];
const STYLES: [&str; 8] = [
    "Van Gogh", "watercolor", "anime", "pixel art", "cyberpunk", "claymation", "ukiyo-e",
    "pencil sketch",
];
const ENVIRONMENTS: [&str; 8] = [
    "a snowy winter evening", "a rainy night", "a sunny beach afternoon", "a foggy morning",
    "the surface of Mars", "an autumn forest", "a neon-lit city at night", "a desert at sunset",
];
const OBJECTS: [&str; 8] = [
    "a red umbrella", "a golden retriever", "a vintage bicycle", "a bouquet of flowers",
    "a robot", "a paper lantern", "a wooden crate", "a blue balloon",
];

fn pick<'a>(list: &[&'a str], word: u64) -> &'a str {
    list[(word % list.len() as u64) as usize]
}

fn param_f64(req: &BackendRequest, name: &str, default: f64) -> Result<f64, ProtocolError> {
    match req.params.get(name) {
        None => Ok(default),
        Some(s) => s
            .as_f64()
            .ok_or_else(|| ProtocolError::Invalid(format!("param {name:?} must be a number"))),
    }
}

fn param_bool(req: &BackendRequest, name: &str, default: bool) -> Result<bool, ProtocolError> {
    match req.params.get(name) {
        None => Ok(default),
        Some(s) => s
            .as_bool()
            .ok_or_else(|| ProtocolError::Invalid(format!("param {name:?} must be a boolean"))),
    }
}

fn param_i64(req: &BackendRequest, name: &str, default: i64) -> Result<i64, ProtocolError> {
    match req.params.get(name) {
        None => Ok(default),
        Some(s) => s
            .as_i64()
            .ok_or_else(|| ProtocolError::Invalid(format!("param {name:?} must be an integer"))),
    }
}

fn required_media<'a>(
    req: &'a BackendRequest,
    name: &str,
) -> Result<&'a crate::backends::protocol::MediaRef, ProtocolError> {
    req.media_input(name)
        .ok_or_else(|| ProtocolError::Invalid(format!("missing media input {name:?}")))
}

fn required_text<'a>(req: &'a BackendRequest, name: &str) -> Result<&'a str, ProtocolError> {
    req.text_input(name)
        .ok_or_else(|| ProtocolError::Invalid(format!("missing text input {name:?}")))
}

/// Caption template used by the mock captioner.
pub fn mock_caption(video_digest: &str, seed: u64) -> String {
    let w = KeyedHash::new("ditto.mock.caption")
        .str(video_digest)
        .u64(seed)
        .words();
    format!(
        "A {} {} {} in {}, filmed in a steady shot.",
        pick(&ADJECTIVES, w[0]),
        pick(&SUBJECTS, w[1]),
        pick(&ACTIONS, w[2]),
        pick(&SETTINGS, w[3])
    )
}

/// Category and instruction drawn by the mock instructor.
pub fn mock_instruction(
    video_digest: &str,
    caption: &str,
    seed: u64,
    global_weight: f64,
) -> (String, Category) {
    let w = KeyedHash::new("ditto.mock.instruct")
        .str(video_digest)
        .str(caption)
        .u64(seed)
        .words();
    let category = if unit_interval(w[0]) < global_weight {
        [Category::GlobalStyle, Category::GlobalEnvironment][(w[1] % 2) as usize]
    } else {
        [
            Category::LocalReplace,
            Category::LocalAdd,
            Category::LocalRemove,
        ][(w[1] % 3) as usize]
    };
    let subject = caption
        .split(|c: char| !c.is_alphanumeric())
        .find(|tok| SUBJECTS.contains(tok))
        .unwrap_or("main subject");
    let text = match category {
        Category::GlobalStyle => format!("Transform the video into {} style", pick(&STYLES, w[2])),
        Category::GlobalEnvironment => {
            format!("Change the scene to {}", pick(&ENVIRONMENTS, w[2]))
        }
        Category::LocalReplace => format!("Replace the {subject} with {}", pick(&OBJECTS, w[2])),
        Category::LocalAdd => format!("Add {} next to the {subject}", pick(&OBJECTS, w[2])),
        Category::LocalRemove => format!("Remove the {subject} from the scene"),
    };
    (text, category)
}

/// Judge scores for a (source, edited, instruction, seed) tuple under `bias`.
pub fn mock_judge_scores(
    source_digest: &str,
    edited_digest: &str,
    instruction: &str,
    seed: u64,
    bias: &JudgeBias,
) -> JudgeScores {
    let w = KeyedHash::new("ditto.mock.judge")
        .str(source_digest)
        .str(edited_digest)
        .str(instruction)
        .u64(seed)
        .words();
    let score = |i: usize, c: Criterion| (unit_interval(w[i]) + 2.0 * bias.get(c) - 1.0).clamp(0.0, 1.0);
    JudgeScores {
        instruction_fidelity: score(0, Criterion::InstructionFidelity),
        preservation_fidelity: score(1, Criterion::PreservationFidelity),
        visual_quality: score(2, Criterion::VisualQuality),
        safety: score(3, Criterion::Safety),
    }
}

/// Replaces each pixel with its luma on all three channels.
pub fn depth_proxy(video: &Video) -> Video {
    let (header, mut data) = video.clone().into_parts();
    for px in data.chunks_exact_mut(3) {
        let y = luma([px[0], px[1], px[2]]);
        px.fill(y);
    }
    Video::new(header, data).expect("geometry unchanged")
}

/// Propagates the keyframe's colour over the depth video's structure.
pub fn propagate_keyframe(depth: &Video, keyframe: &Video) -> Result<Video, ProtocolError> {
    let (dh, kh) = (depth.header(), keyframe.header());
    if dh.width != kh.width || dh.height != kh.height {
        return Err(ProtocolError::Invalid(format!(
            "edited keyframe is {}x{}, depth video is {}x{}",
            kh.width, kh.height, dh.width, dh.height
        )));
    }
    let key = keyframe.frame(0).map_err(|e| ProtocolError::Invalid(e.to_string()))?;
    // Per-pixel chroma offsets of the keyframe relative to its own luma.
    let chroma: Vec<[u8; 3]> = key
        .chunks_exact(3)
        .map(|px| {
            let y = luma([px[0], px[1], px[2]]);
            [px[0].wrapping_sub(y), px[1].wrapping_sub(y), px[2].wrapping_sub(y)]
        })
        .collect();
    let mut data = Vec::with_capacity(dh.payload_len());
    for frame in depth.frames() {
        for (px, ch) in frame.chunks_exact(3).zip(&chroma) {
            let d = px[0];
            data.extend_from_slice(&[
                d.wrapping_add(ch[0]),
                d.wrapping_add(ch[1]),
                d.wrapping_add(ch[2]),
            ]);
        }
    }
    Video::new(*dh, data).map_err(|e| ProtocolError::Invalid(e.to_string()))
}

pub fn model_id(kind: BackendKind, distilled: bool) -> &'static str {
    match kind {
        BackendKind::Caption => "mock-captioner-1",
        BackendKind::Instruct => "mock-instructor-1",
        BackendKind::EditImage => "mock-image-editor-1",
        BackendKind::Depth => "mock-depth-1",
        BackendKind::Generate if distilled => "mock-generator-distilled-1",
        BackendKind::Generate => "mock-generator-1",
        BackendKind::Judge => "mock-judge-1",
        BackendKind::Enhance => "mock-enhancer-1",
    }
}

/// All seven mock services over one media root.
#[derive(Clone, Debug)]
pub struct MockBackend {
    config: MockConfig,
    store: MediaStore,
}

impl MockBackend {
    pub fn new(config: MockConfig, store: MediaStore) -> Self {
        Self { config, store }
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    pub fn store(&self) -> &MediaStore {
        &self.store
    }

    /// Parses a request body, answers it and serializes the response.
    pub fn handle_body(&self, kind: BackendKind, body: &[u8]) -> Result<String, MockError> {
        let req = BackendRequest::parse(kind, body)?;
        Ok(self.handle(kind, &req)?.to_body())
    }

    pub fn handle(
        &self,
        kind: BackendKind,
        req: &BackendRequest,
    ) -> Result<BackendResponse, MockError> {
        req.validate(kind)?;
        let distilled = kind == BackendKind::Generate && param_bool(req, "distilled", false)?;
        let model = model_id(kind, distilled);

        if self.config.failure_rate > 0.0 {
            let u = unit_interval(
                KeyedHash::new("ditto.mock.failure")
                    .str(kind.endpoint())
                    .str(&req.request_id)
                    .words()[0],
            );
            if u < self.config.failure_rate {
                return Ok(BackendResponse::failure(
                    &req.request_id,
                    model,
                    "injected backend failure",
                ));
            }
        }

        let cost = self.config.costs.for_kind(kind, distilled);
        let resp = BackendResponse::ok(&req.request_id, model, cost);
        let resp = match kind {
            BackendKind::Caption => {
                let video = required_media(req, "video")?;
                self.store.existing(video)?;
                resp.output(
                    "caption",
                    OutputValue::Text(mock_caption(video.digest.as_str(), req.seed)),
                )
            }
            BackendKind::Instruct => {
                let video = required_media(req, "video")?;
                self.store.existing(video)?;
                let caption = required_text(req, "caption")?;
                let gw = param_f64(req, "global_weight", DEFAULT_GLOBAL_WEIGHT)?;
                if !(0.0..=1.0).contains(&gw) {
                    return Err(ProtocolError::Invalid(format!(
                        "global_weight {gw} outside [0, 1]"
                    ))
                    .into());
                }
                let (text, category) =
                    mock_instruction(video.digest.as_str(), caption, req.seed, gw);
                resp.output("instruction", OutputValue::Text(text))
                    .output("category", OutputValue::Text(category.as_str().into()))
            }
            BackendKind::EditImage => {
                let frame = self.store.get(required_media(req, "frame")?)?;
                let t = ColorTransform::from_instruction(required_text(req, "instruction")?);
                let edited = self.store.put(&t.apply_video(&frame), MediaKind::Image)?;
                resp.output("edited_keyframe", OutputValue::Media(edited))
            }
            BackendKind::Depth => {
                let video = self.store.get(required_media(req, "video")?)?;
                let depth = self.store.put(&depth_proxy(&video), MediaKind::Video)?;
                resp.output("depth_video", OutputValue::Media(depth))
            }
            BackendKind::Generate => {
                let depth = self.store.get(required_media(req, "depth_video")?)?;
                let key = self.store.get(required_media(req, "edited_keyframe")?)?;
                let out = propagate_keyframe(&depth, &key)?;
                let edited = self.store.put(&out, MediaKind::Video)?;
                resp.output("edited_video", OutputValue::Media(edited))
            }
            BackendKind::Judge => {
                let source = required_media(req, "source")?;
                let edited = required_media(req, "edited")?;
                self.store.existing(source)?;
                self.store.existing(edited)?;
                let scores = mock_judge_scores(
                    source.digest.as_str(),
                    edited.digest.as_str(),
                    required_text(req, "instruction")?,
                    req.seed,
                    &self.config.judge_bias,
                );
                resp.output("scores", OutputValue::Scores(scores))
            }
            BackendKind::Enhance => {
                let video = required_media(req, "video")?;
                self.store.existing(video)?;
                let sigma = param_f64(req, "noise_sigma", DEFAULT_NOISE_SIGMA)?;
                let steps = param_i64(req, "steps", DEFAULT_ENHANCE_STEPS)?;
                validate_enhance(sigma, steps)?;
                resp.output("video", OutputValue::Media(video.clone())).output(
                    "provenance",
                    OutputValue::Text(format!("enhance noise_sigma={sigma} steps={steps}")),
                )
            }
        };
        debug_assert!(resp.validate(kind).is_ok());
        Ok(resp)
    }
}

pub fn validate_enhance(noise_sigma: f64, steps: i64) -> Result<(), ProtocolError> {
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(ProtocolError::Invalid(format!(
            "noise_sigma {noise_sigma} must be finite and >= 0"
        )));
    }
    if steps < 1 {
        return Err(ProtocolError::Invalid(format!("steps {steps} must be >= 1")));
    }
    Ok(())
}

/// Parameters the pipeline attaches to an enhance request.
pub fn enhance_params(noise_sigma: f64, steps: i64) -> [(&'static str, Scalar); 2] {
    [
        ("noise_sigma", Scalar::Float(noise_sigma)),
        ("steps", Scalar::Int(steps)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media_io::VideoHeader;

    fn textured(w: u32, h: u32, n: u32) -> Video {
        let header = VideoHeader::new(w, h, 20, n).unwrap();
        let data = (0..header.payload_len())
            .map(|i| ((i * 37 + i / 7) % 256) as u8)
            .collect();
        Video::new(header, data).unwrap()
    }

    #[test]
    fn transform_round_trips() {
        let t = ColorTransform::from_instruction("Make it snow");
        for px in [[0u8, 0, 0], [255, 1, 128], [12, 200, 99]] {
            assert_eq!(t.invert(t.apply(px)), px);
        }
        for perm in 0..6 {
            for offset in [0u8, 1, 255] {
                let t = ColorTransform { permutation: perm, offset };
                let px = [3, 141, 250];
                assert_eq!(t.invert(t.apply(px)), px);
            }
        }
    }

    #[test]
    fn identity_class_leaves_pixels() {
        // Search the instruction space for a text keyed to the identity transform.
        let text = (0..200_000)
            .map(|i| format!("make it snow {i}"))
            .find(|t| ColorTransform::from_instruction(t).is_identity())
            .expect("identity class is reachable");
        let v = textured(3, 2, 1);
        let t = ColorTransform::from_instruction(&text);
        assert_eq!(t.apply_video(&v), v);
    }

    #[test]
    fn caption_determinism_and_seed_sensitivity() {
        let d = "ab".repeat(32);
        assert_eq!(mock_caption(&d, 1), mock_caption(&d, 1));
        // Four independent picks from 16-word lists collide with probability 16^-4.
        let distinct: std::collections::BTreeSet<String> =
            (0..50).map(|s| mock_caption(&d, s)).collect();
        assert!(distinct.len() >= 49);
    }

    #[test]
    fn instruct_weights() {
        let d = "cd".repeat(32);
        let all_global = (0..500)
            .all(|s| mock_instruction(&d, "A dog running", s, 1.0).1.is_global());
        assert!(all_global);
        let no_global = (0..500)
            .all(|s| !mock_instruction(&d, "A dog running", s, 0.0).1.is_global());
        assert!(no_global);
        assert_eq!(
            mock_instruction(&d, "A dog running", 9, 0.7),
            mock_instruction(&d, "A dog running", 9, 0.7)
        );
    }

    #[test]
    fn local_instructions_name_caption_subject() {
        let d = "ef".repeat(32);
        let (text, _) = (0..200)
            .map(|s| mock_instruction(&d, "A quiet horse walking in a park", s, 0.0))
            .find(|(_, c)| *c == Category::LocalRemove)
            .unwrap();
        assert_eq!(text, "Remove the horse from the scene");
    }

    #[test]
    fn depth_luma_by_hand() {
        let h = VideoHeader::new(1, 1, 20, 1).unwrap();
        let v = Video::new(h, vec![200, 100, 50]).unwrap();
        // round(59.8 + 58.7 + 5.7) = round(124.2) = 124
        assert_eq!(depth_proxy(&v).data(), &[124, 124, 124]);
        let solid = Video::solid(VideoHeader::new(3, 2, 20, 4).unwrap(), [10, 20, 30]).unwrap();
        let d = depth_proxy(&solid);
        assert_eq!(d.header(), solid.header());
        assert!(d.data().iter().all(|&b| b == d.data()[0]));
    }

    #[test]
    fn generated_frames_share_keyframe_chroma() {
        let src = textured(5, 4, 6);
        let key = ColorTransform::from_instruction("Turn it into anime")
            .apply_video(&src.extract_frame(0).unwrap());
        let out = propagate_keyframe(&depth_proxy(&src), &key).unwrap();
        assert_eq!(out.header(), src.header());
        for f in 0..6 {
            for (o, k) in out.frame(f).unwrap().chunks_exact(3).zip(key.data().chunks_exact(3)) {
                assert_eq!(o[0].wrapping_sub(o[1]), k[0].wrapping_sub(k[1]));
                assert_eq!(o[2].wrapping_sub(o[1]), k[2].wrapping_sub(k[1]));
            }
        }
        let wrong = textured(4, 4, 1);
        assert!(propagate_keyframe(&depth_proxy(&src), &wrong).is_err());
    }

    #[test]
    fn judge_bias_extremes() {
        let (a, b) = ("a".repeat(64), "b".repeat(64));
        for seed in 0..100 {
            let one = mock_judge_scores(&a, &b, "x", seed, &JudgeBias::uniform(1.0));
            let zero = mock_judge_scores(&a, &b, "x", seed, &JudgeBias::uniform(0.0));
            for c in Criterion::ALL {
                assert_eq!(one.get(c), 1.0);
                assert_eq!(zero.get(c), 0.0);
            }
        }
    }

    #[test]
    fn distilled_cost_is_a_fifth() {
        assert_eq!(generate_cost(3000.0, true), 600.0);
        assert_eq!(generate_cost(3000.0, false), 3000.0);
        // 50 GPU-minutes distilled is 10 GPU-minutes.
        assert_eq!(generate_cost(50.0, true), 10.0);
    }

    #[test]
    fn enhance_validation() {
        assert!(validate_enhance(-0.1, 4).is_err());
        assert!(validate_enhance(f64::NAN, 4).is_err());
        assert!(validate_enhance(0.0, 0).is_err());
        assert!(validate_enhance(0.1, 4).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(MockConfig::default().validate().is_ok());
        let mut c = MockConfig::default();
        c.judge_bias.safety = 1.5;
        assert!(c.validate().is_err());
        let mut c = MockConfig::default();
        c.costs.depth = -1.0;
        assert!(c.validate().is_err());
    }
}
