//! Regenerates the conformance vector file and its input media.
//!
//! Usage: `cargo run -p ditto-core --example gen_conformance -- <out-dir>`

use std::path::PathBuf;

use ditto_core::backends::conformance::{ConformanceVector, VectorFile, FORMAT_VERSION};
use ditto_core::backends::media::MediaStore;
use ditto_core::backends::mock::{depth_proxy, enhance_params, MockBackend, MockConfig};
use ditto_core::backends::protocol::{BackendKind, BackendRequest, MediaKind, MediaRef, Scalar};
use ditto_core::media_io::{Video, VideoHeader};

fn clip(w: u32, h: u32, n: u32, shift: u32) -> Video {
    let header = VideoHeader::new(w, h, 10, n).unwrap();
    let mut data = Vec::with_capacity(header.payload_len());
    for k in 0..n {
        for y in 0..h {
            for x in 0..w {
                let v = ((x + k + shift) * 37 + y * 11) % 256;
                data.extend_from_slice(&[v as u8, (255 - v) as u8, ((x * y + shift) % 256) as u8]);
            }
        }
    }
    Video::new(header, data).unwrap()
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "conformance".into()));
    let media_dir = out.join("media");
    let inputs = MediaStore::open(&media_dir).unwrap();

    let source = clip(16, 12, 6, 0);
    let other = clip(16, 12, 6, 5);
    let src = inputs.put(&source, MediaKind::Video).unwrap();
    let edited = inputs.put(&other, MediaKind::Video).unwrap();
    let frame = inputs.put(&source.extract_frame(0).unwrap(), MediaKind::Image).unwrap();
    let depth = inputs.put(&depth_proxy(&source), MediaKind::Video).unwrap();
    let key = inputs.put(&other.extract_frame(0).unwrap(), MediaKind::Image).unwrap();

    let req = |id: &str, seed: u64| BackendRequest::new(id, seed);
    let media = |r: &MediaRef| r.clone();
    let mut cases: Vec<(&str, BackendKind, BackendRequest)> = vec![
        ("caption", BackendKind::Caption, req("caption-1", 1).media("video", media(&src))),
        ("caption-other-seed", BackendKind::Caption, req("caption-2", 2).media("video", media(&src))),
        (
            "instruct",
            BackendKind::Instruct,
            req("instruct-1", 3)
                .media("video", media(&src))
                .text("caption", "A dog runs across a park")
                .param("global_weight", Scalar::Float(0.7)),
        ),
        (
            "instruct-local-only",
            BackendKind::Instruct,
            req("instruct-2", 3)
                .media("video", media(&src))
                .text("caption", "A dog runs across a park")
                .param("global_weight", Scalar::Float(0.0)),
        ),
        (
            "edit-image",
            BackendKind::EditImage,
            req("edit-1", 4)
                .media("frame", media(&frame))
                .text("instruction", "Make it snow"),
        ),
        ("depth", BackendKind::Depth, req("depth-1", 5).media("video", media(&src))),
    ];
    for (name, distilled) in [("generate-distilled", true), ("generate-base", false)] {
        cases.push((
            name,
            BackendKind::Generate,
            req(&format!("{name}-1"), 6)
                .media("depth_video", media(&depth))
                .media("edited_keyframe", media(&key))
                .text("instruction", "Make it snow")
                .param("distilled", Scalar::Bool(distilled)),
        ));
    }
    cases.push((
        "judge",
        BackendKind::Judge,
        req("judge-1", 7)
            .media("source", media(&src))
            .media("edited", media(&edited))
            .text("instruction", "Make it snow"),
    ));
    let mut enhance = req("enhance-1", 8).media("video", media(&edited));
    for (k, v) in enhance_params(0.1, 4) {
        enhance = enhance.param(k, v);
    }
    cases.push(("enhance", BackendKind::Enhance, enhance));

    // Answer from a scratch copy so the shipped directory holds inputs only.
    let scratch = tempfile::tempdir().unwrap();
    ditto_core::backends::conformance::stage_media(&media_dir, scratch.path()).unwrap();
    let mock = MockBackend::new(MockConfig::default(), MediaStore::open(scratch.path()).unwrap());
    let vectors = cases
        .into_iter()
        .map(|(name, kind, r)| {
            let request = r.to_body();
            let response = mock.handle_body(kind, request.as_bytes()).unwrap();
            ConformanceVector {
                name: name.into(),
                endpoint: kind.endpoint().into(),
                request,
                response,
            }
        })
        .collect();
    let file = VectorFile {
        version: FORMAT_VERSION,
        vectors,
    };
    std::fs::write(out.join("vectors.json"), file.to_pretty_json()).unwrap();
    println!("wrote {} vectors to {}", file.vectors.len(), out.display());
}
