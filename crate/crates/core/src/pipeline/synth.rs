//! Source assets: seeded synthetic clips, or container files from a directory.
//!
//! A synthetic clip pans a random texture tile by a fixed velocity. Some clips are
//! static and some copy an earlier clip's texture and velocity with one level of
//! pixel noise, so both filters have work to do.

use std::path::Path;

use crate::backends::media::MediaStore;
use crate::backends::protocol::{MediaKind, MediaRef};
use crate::digest::{unit_interval, KeyedHash};
use crate::media_io::{read_video, Video, VideoHeader};

use super::config::AssetConfig;
use super::PipelineError;

const TILE: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct SourceAsset {
    pub asset_id: String,
    pub source: MediaRef,
    pub header: VideoHeader,
    pub origin: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipKind {
    Moving { vx: i64, vy: i64 },
    Static,
    NearDuplicate { of: usize },
}

pub fn asset_id(ordinal: usize) -> String {
    format!("asset-{ordinal:04}")
}

fn draw(seed: u64, index: usize, what: &str) -> u64 {
    KeyedHash::new("ditto.synth")
        .u64(seed)
        .u64(index as u64)
        .str(what)
        .words()[0]
}

/// What the `index`-th synthetic clip looks like.
pub fn clip_kind(cfg: &AssetConfig, index: usize) -> ClipKind {
    let u = unit_interval(draw(cfg.seed, index, "kind"));
    if u < cfg.static_fraction {
        return ClipKind::Static;
    }
    if index > 0 && u < cfg.static_fraction + cfg.duplicate_fraction {
        return ClipKind::NearDuplicate {
            of: (draw(cfg.seed, index, "of") % index as u64) as usize,
        };
    }
    // Velocities in [-2, 2]^2 minus the origin.
    let v = draw(cfg.seed, index, "velocity") % 24;
    let v = if v >= 12 { v + 1 } else { v };
    ClipKind::Moving {
        vx: (v % 5) as i64 - 2,
        vy: (v / 5) as i64 - 2,
    }
}

fn byte_stream(seed: u64, index: usize, what: &str, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut block = 0u64;
    while out.len() < len {
        out.extend_from_slice(
            &KeyedHash::new("ditto.synth.bytes")
                .u64(seed)
                .u64(index as u64)
                .str(what)
                .u64(block)
                .finish(),
        );
        block += 1;
    }
    out.truncate(len);
    out
}

fn render(cfg: &AssetConfig, texture_index: usize, vx: i64, vy: i64) -> Result<Video, PipelineError> {
    let header = VideoHeader::new(cfg.width, cfg.height, cfg.fps, cfg.frames)
        .map_err(|e| PipelineError::InvalidConfig(format!("assets: {e}")))?;
    let tile = byte_stream(cfg.seed, texture_index, "tile", TILE * TILE * 3);
    let mut data = Vec::with_capacity(header.payload_len());
    for k in 0..cfg.frames as i64 {
        for y in 0..cfg.height as i64 {
            let ty = (y + vy * k).rem_euclid(TILE as i64) as usize;
            for x in 0..cfg.width as i64 {
                let tx = (x + vx * k).rem_euclid(TILE as i64) as usize;
                let o = (ty * TILE + tx) * 3;
                data.extend_from_slice(&tile[o..o + 3]);
            }
        }
    }
    Ok(Video::new(header, data)?)
}

/// Renders the `index`-th synthetic clip.
pub fn synth_clip(cfg: &AssetConfig, index: usize) -> Result<(Video, String), PipelineError> {
    let mut base = index;
    let mut kind = clip_kind(cfg, index);
    while let ClipKind::NearDuplicate { of } = kind {
        base = of;
        kind = clip_kind(cfg, of);
    }
    let (vx, vy) = match kind {
        ClipKind::Moving { vx, vy } => (vx, vy),
        _ => (0, 0),
    };
    let mut video = render(cfg, base, vx, vy)?;
    let origin = if base != index {
        let noise = byte_stream(cfg.seed, index, "noise", video.data().len());
        let (header, mut data) = video.into_parts();
        for (p, n) in data.iter_mut().zip(noise) {
            *p = match n % 3 {
                0 => p.saturating_sub(1),
                1 => *p,
                _ => p.saturating_add(1),
            };
        }
        video = Video::new(header, data)?;
        format!(
            "synthetic seed={} index={index} near-duplicate of {}",
            cfg.seed,
            asset_id(base)
        )
    } else {
        format!("synthetic seed={} index={index} velocity=({vx},{vy})", cfg.seed)
    };
    Ok((video, origin))
}

/// Stores the configured source clips and returns them in ingestion order.
pub fn load_assets(cfg: &AssetConfig, store: &MediaStore) -> Result<Vec<SourceAsset>, PipelineError> {
    match &cfg.source_dir {
        Some(dir) => load_dir(dir, store),
        None => (0..cfg.count)
            .map(|i| {
                let (video, origin) = synth_clip(cfg, i)?;
                let source = store.put(&video, MediaKind::Video)?;
                Ok(SourceAsset {
                    asset_id: asset_id(i),
                    source,
                    header: *video.header(),
                    origin,
                })
            })
            .collect(),
    }
}

fn load_dir(dir: &Path, store: &MediaStore) -> Result<Vec<SourceAsset>, PipelineError> {
    let io = |e| PipelineError::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "dvf"))
        .collect();
    files.sort();
    files
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let video = read_video(path)?;
            let source = store.put(&video, MediaKind::Video)?;
            Ok(SourceAsset {
                asset_id: asset_id(i),
                source,
                header: *video.header(),
                origin: format!(
                    "file {}",
                    path.file_name().unwrap_or_default().to_string_lossy()
                ),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_follow_fractions() {
        let cfg = AssetConfig {
            count: 2000,
            ..AssetConfig::default()
        };
        let kinds: Vec<ClipKind> = (0..cfg.count).map(|i| clip_kind(&cfg, i)).collect();
        let stat = kinds.iter().filter(|k| **k == ClipKind::Static).count();
        let dup = kinds
            .iter()
            .filter(|k| matches!(k, ClipKind::NearDuplicate { .. }))
            .count();
        assert!((150..250).contains(&stat), "{stat}");
        assert!((150..250).contains(&dup), "{dup}");
        for (i, k) in kinds.iter().enumerate() {
            match *k {
                ClipKind::NearDuplicate { of } => assert!(of < i),
                ClipKind::Moving { vx, vy } => {
                    assert!((vx, vy) != (0, 0) && vx.abs() <= 2 && vy.abs() <= 2)
                }
                ClipKind::Static => {}
            }
        }
    }

    #[test]
    fn clips_are_deterministic() {
        let cfg = AssetConfig::default();
        let (a, oa) = synth_clip(&cfg, 1).unwrap();
        let (b, ob) = synth_clip(&cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        assert_eq!(a.header().frame_count, cfg.frames);
    }
}
