//! Desk-scale video container and the deterministic media transforms applied before
//! and during synthesis.
//!
//! A container is a single ASCII header line followed by raw RGB8 frames:
//!
//! ```text
//! DVF1 <width> <height> <fps> <frame_count> RGB8\n<frame bytes...>
//! ```
//!
//! Frames are stored frame-major, rows top to bottom, pixels left to right, three
//! bytes per pixel. The content digest of a video is the SHA-256 of the whole file.

use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::digest::ContentDigest;

pub const MAGIC: &str = "DVF1";
/// Longest header line accepted, newline included. Five u32 fields plus the
/// fixed tokens fit comfortably.
pub const MAX_HEADER_LEN: usize = 80;

pub const DEFAULT_WIDTH: u32 = 1280;
pub const DEFAULT_HEIGHT: u32 = 720;
pub const DEFAULT_FPS: u32 = 20;
pub const DEFAULT_FRAME_CAP: u32 = 101;

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("invalid video header: {0}")]
    InvalidHeader(String),
    #[error("frame index {index} out of range for {frame_count} frames")]
    FrameOutOfRange { index: u32, frame_count: u32 },
    #[error("grid {rows}x{cols} does not fit a {width}x{height} image")]
    GridTooDense {
        rows: u32,
        cols: u32,
        width: u32,
        height: u32,
    },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl MediaError {
    fn io(path: &Path, source: io::Error) -> Self {
        MediaError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelFormat {
    #[serde(rename = "RGB8")]
    Rgb8,
}

impl PixelFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            PixelFormat::Rgb8 => "RGB8",
        }
    }

    pub fn bytes_per_pixel(self) -> usize {
        match self {
            PixelFormat::Rgb8 => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VideoHeader {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub frame_count: u32,
    pub pixel_format: PixelFormat,
}

impl VideoHeader {
    pub fn new(width: u32, height: u32, fps: u32, frame_count: u32) -> Result<Self, MediaError> {
        let h = Self {
            width,
            height,
            fps,
            frame_count,
            pixel_format: PixelFormat::Rgb8,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), MediaError> {
        for (name, v) in [
            ("width", self.width),
            ("height", self.height),
            ("fps", self.fps),
            ("frame_count", self.frame_count),
        ] {
            if v == 0 {
                return Err(MediaError::InvalidHeader(format!("{name} must be positive")));
            }
        }
        if self.checked_payload_len().is_none() {
            return Err(MediaError::InvalidHeader(
                "payload length overflows the address space".into(),
            ));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize * self.pixel_format.bytes_per_pixel()
    }

    pub fn payload_len(&self) -> usize {
        self.frame_len() * self.frame_count as usize
    }

    fn checked_payload_len(&self) -> Option<usize> {
        let len = (self.width as u64)
            .checked_mul(self.height as u64)?
            .checked_mul(self.pixel_format.bytes_per_pixel() as u64)?
            .checked_mul(self.frame_count as u64)?;
        usize::try_from(len).ok()
    }

    /// The exact header line, newline included.
    pub fn header_line(&self) -> String {
        format!(
            "{MAGIC} {} {} {} {} {}\n",
            self.width,
            self.height,
            self.fps,
            self.frame_count,
            self.pixel_format.as_str()
        )
    }

    pub fn with_frame_count(mut self, frame_count: u32) -> Self {
        self.frame_count = frame_count;
        self
    }
}

/// A decoded video: header plus frame-major RGB8 payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Video {
    header: VideoHeader,
    data: Vec<u8>,
}

impl Video {
    pub fn new(header: VideoHeader, data: Vec<u8>) -> Result<Self, MediaError> {
        header.validate()?;
        if data.len() != header.payload_len() {
            return Err(MediaError::MalformedContainer(format!(
                "payload is {} bytes, header requires {}",
                data.len(),
                header.payload_len()
            )));
        }
        Ok(Self { header, data })
    }

    /// A video whose every pixel is `rgb`.
    pub fn solid(header: VideoHeader, rgb: [u8; 3]) -> Result<Self, MediaError> {
        header.validate()?;
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(header.payload_len())
            .collect();
        Ok(Self { header, data })
    }

    pub fn header(&self) -> &VideoHeader {
        &self.header
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_parts(self) -> (VideoHeader, Vec<u8>) {
        (self.header, self.data)
    }

    pub fn frame(&self, index: u32) -> Result<&[u8], MediaError> {
        if index >= self.header.frame_count {
            return Err(MediaError::FrameOutOfRange {
                index,
                frame_count: self.header.frame_count,
            });
        }
        let len = self.header.frame_len();
        let start = index as usize * len;
        Ok(&self.data[start..start + len])
    }

    pub fn frames(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.header.frame_len())
    }

    pub fn pixel(&self, frame: u32, x: u32, y: u32) -> [u8; 3] {
        let off = frame as usize * self.header.frame_len()
            + (y as usize * self.header.width as usize + x as usize) * 3;
        [self.data[off], self.data[off + 1], self.data[off + 2]]
    }

    /// Encodes the container byte stream.
    pub fn encode(&self) -> Vec<u8> {
        let line = self.header.header_line();
        let mut out = Vec::with_capacity(line.len() + self.data.len());
        out.extend_from_slice(line.as_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    /// Digest of the encoded container, computed without materializing it.
    pub fn digest(&self) -> ContentDigest {
        let mut hasher = Sha256::new();
        hasher.update(self.header.header_line().as_bytes());
        hasher.update(&self.data);
        ContentDigest::from_hasher(hasher)
    }

    /// Copies one frame out as a single-frame video (an image).
    pub fn extract_frame(&self, index: u32) -> Result<Video, MediaError> {
        let frame = self.frame(index)?.to_vec();
        Video::new(self.header.with_frame_count(1), frame)
    }
}

fn parse_dimension(field: &str, name: &str) -> Result<u32, MediaError> {
    let canonical = !field.is_empty()
        && field.bytes().all(|b| b.is_ascii_digit())
        && !(field.len() > 1 && field.starts_with('0'));
    if !canonical {
        return Err(MediaError::MalformedContainer(format!(
            "{name} field {field:?} is not a canonical decimal"
        )));
    }
    field
        .parse::<u32>()
        .map_err(|_| MediaError::MalformedContainer(format!("{name} field {field:?} overflows")))
}

/// Parses a header line (without its newline).
pub fn parse_header_line(line: &[u8]) -> Result<VideoHeader, MediaError> {
    let line = std::str::from_utf8(line)
        .map_err(|_| MediaError::MalformedContainer("header is not ASCII".into()))?;
    let fields: Vec<&str> = line.split(' ').collect();
    if fields.len() != 6 {
        return Err(MediaError::MalformedContainer(format!(
            "header has {} fields, expected 6",
            fields.len()
        )));
    }
    if fields[0] != MAGIC {
        return Err(MediaError::MalformedContainer(format!(
            "bad magic {:?}",
            fields[0]
        )));
    }
    if fields[5] != PixelFormat::Rgb8.as_str() {
        return Err(MediaError::MalformedContainer(format!(
            "unsupported pixel format {:?}",
            fields[5]
        )));
    }
    let header = VideoHeader {
        width: parse_dimension(fields[1], "width")?,
        height: parse_dimension(fields[2], "height")?,
        fps: parse_dimension(fields[3], "fps")?,
        frame_count: parse_dimension(fields[4], "frame_count")?,
        pixel_format: PixelFormat::Rgb8,
    };
    header
        .validate()
        .map_err(|e| MediaError::MalformedContainer(e.to_string()))?;
    Ok(header)
}

/// Splits a buffer into its header and the offset where frame bytes begin.
pub fn split_header(bytes: &[u8]) -> Result<(VideoHeader, usize), MediaError> {
    let window = &bytes[..bytes.len().min(MAX_HEADER_LEN)];
    let nl = window
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| MediaError::MalformedContainer("missing header line".into()))?;
    Ok((parse_header_line(&bytes[..nl])?, nl + 1))
}

/// Decodes a full container from memory.
pub fn decode_container(bytes: &[u8]) -> Result<Video, MediaError> {
    let (header, offset) = split_header(bytes)?;
    let payload = &bytes[offset..];
    if payload.len() != header.payload_len() {
        return Err(MediaError::MalformedContainer(format!(
            "payload is {} bytes, header requires {}",
            payload.len(),
            header.payload_len()
        )));
    }
    Ok(Video {
        header,
        data: payload.to_vec(),
    })
}

/// Reads only the header of a container file.
pub fn read_header(path: &Path) -> Result<VideoHeader, MediaError> {
    let mut file = File::open(path).map_err(|e| MediaError::io(path, e))?;
    let mut buf = Vec::with_capacity(MAX_HEADER_LEN);
    (&mut file)
        .take(MAX_HEADER_LEN as u64)
        .read_to_end(&mut buf)
        .map_err(|e| MediaError::io(path, e))?;
    Ok(split_header(&buf)?.0)
}

pub fn read_video(path: &Path) -> Result<Video, MediaError> {
    let mut file = File::open(path).map_err(|e| MediaError::io(path, e))?;
    let file_len = file.metadata().map_err(|e| MediaError::io(path, e))?.len();

    let mut head = Vec::with_capacity(MAX_HEADER_LEN);
    (&mut file)
        .take(MAX_HEADER_LEN as u64)
        .read_to_end(&mut head)
        .map_err(|e| MediaError::io(path, e))?;
    let (header, offset) = split_header(&head)?;

    // Check the size before allocating so a lying header cannot balloon memory.
    let expected = offset as u64 + header.payload_len() as u64;
    if file_len != expected {
        return Err(MediaError::MalformedContainer(format!(
            "file is {file_len} bytes, header requires {expected}"
        )));
    }
    let mut data = Vec::with_capacity(header.payload_len());
    data.extend_from_slice(&head[offset..]);
    file.read_to_end(&mut data)
        .map_err(|e| MediaError::io(path, e))?;
    Video::new(header, data)
}

/// Writes the container and returns the SHA-256 of the bytes written.
///
/// The file is written next to its destination and renamed into place, so readers
/// never observe a partial container.
pub fn write_video(video: &Video, path: &Path) -> Result<ContentDigest, MediaError> {
    video.header.validate()?;
    let tmp = tmp_sibling(path);
    let result = (|| {
        let mut file = File::create(&tmp)?;
        let line = video.header.header_line();
        file.write_all(line.as_bytes())?;
        file.write_all(&video.data)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(MediaError::io(path, e));
    }
    Ok(video.digest())
}

fn tmp_sibling(path: &Path) -> std::path::PathBuf {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.{n}.tmp", std::process::id()))
}

/// Output format for [`standardize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StandardizeTarget {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub frame_cap: u32,
}

impl Default for StandardizeTarget {
    fn default() -> Self {
        Self {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            fps: DEFAULT_FPS,
            frame_cap: DEFAULT_FRAME_CAP,
        }
    }
}

impl StandardizeTarget {
    pub fn validate(&self) -> Result<(), MediaError> {
        if self.width == 0 || self.height == 0 || self.fps == 0 || self.frame_cap == 0 {
            return Err(MediaError::InvalidHeader(
                "standardize target fields must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Frame count [`standardize`] produces for a source of `frames` at `fps`.
    pub fn output_frames(&self, frames: u32, fps: u32) -> u32 {
        let resampled = round_div(frames as u64 * self.fps as u64, fps as u64);
        // A very short clip at a high source rate can round to zero; keep one frame.
        resampled.clamp(1, self.frame_cap as u64) as u32
    }
}

/// round(num / den) with halves rounded up, den > 0.
fn round_div(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Nearest-neighbour spatial resample plus nearest-frame temporal resample.
///
/// Output frame `i` samples source frame `round(i * fps_src / fps_tgt)`, clamped to the
/// last source frame. Output pixel `(x, y)` samples `(floor(x * w_src / w_tgt),
/// floor(y * h_src / h_tgt))`.
pub fn standardize(video: &Video, target: &StandardizeTarget) -> Result<Video, MediaError> {
    target.validate()?;
    let src = video.header;
    let frames = target.output_frames(src.frame_count, src.fps);
    let header = VideoHeader::new(target.width, target.height, target.fps, frames)?;

    if header == src {
        return Ok(video.clone());
    }

    let x_map: Vec<usize> = (0..target.width as u64)
        .map(|x| (x * src.width as u64 / target.width as u64) as usize)
        .collect();
    let y_map: Vec<usize> = (0..target.height as u64)
        .map(|y| (y * src.height as u64 / target.height as u64) as usize)
        .collect();

    let src_row = src.width as usize * 3;
    let out_row = target.width as usize * 3;
    let mut data = Vec::with_capacity(header.payload_len());
    let mut row = vec![0u8; out_row];
    for i in 0..frames as u64 {
        let j = round_div(i * src.fps as u64, target.fps as u64).min(src.frame_count as u64 - 1);
        let frame = video.frame(j as u32)?;
        let mut last_src_y = usize::MAX;
        for &sy in &y_map {
            if sy != last_src_y {
                let line = &frame[sy * src_row..(sy + 1) * src_row];
                for (dst, &sx) in row.chunks_exact_mut(3).zip(&x_map) {
                    dst.copy_from_slice(&line[sx * 3..sx * 3 + 3]);
                }
                last_src_y = sy;
            }
            data.extend_from_slice(&row);
        }
    }
    Video::new(header, data)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyframePolicy {
    #[default]
    First,
    Middle,
}

pub fn select_keyframe(frame_count: u32, policy: KeyframePolicy) -> u32 {
    match policy {
        KeyframePolicy::First => 0,
        KeyframePolicy::Middle => frame_count / 2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { rows: 16, cols: 16 }
    }
}

/// Cell-centre lattice in row-major order: `x_j = (j + 0.5) * width / cols`,
/// `y_i = (i + 0.5) * height / rows`.
pub fn grid_points(width: u32, height: u32, spec: GridSpec) -> Result<Vec<(f64, f64)>, MediaError> {
    if spec.rows == 0 || spec.cols == 0 || width < spec.cols || height < spec.rows {
        return Err(MediaError::GridTooDense {
            rows: spec.rows,
            cols: spec.cols,
            width,
            height,
        });
    }
    let (w, h) = (width as f64, height as f64);
    let (rows, cols) = (spec.rows as f64, spec.cols as f64);
    let mut pts = Vec::with_capacity((spec.rows * spec.cols) as usize);
    for i in 0..spec.rows {
        for j in 0..spec.cols {
            pts.push(((j as f64 + 0.5) * w / cols, (i as f64 + 0.5) * h / rows));
        }
    }
    Ok(pts)
}

/// Integer luma `round(0.299 R + 0.587 G + 0.114 B)`, halves rounded up.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let s = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((s + 500) / 1000) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(header: VideoHeader) -> Video {
        let data = (0..header.payload_len()).map(|i| (i * 7 % 251) as u8).collect();
        Video::new(header, data).unwrap()
    }

    #[test]
    fn header_line_layout() {
        let h = VideoHeader::new(4, 4, 20, 2).unwrap();
        assert_eq!(h.header_line(), "DVF1 4 4 20 2 RGB8\n");
    }

    #[test]
    fn round_trip_small_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.dvf");
        let v = ramp(VideoHeader::new(4, 4, 20, 2).unwrap());
        let digest = write_video(&v, &path).unwrap();
        assert_eq!(read_video(&path).unwrap(), v);
        assert_eq!(digest, ContentDigest::of(&fs::read(&path).unwrap()));
    }

    #[test]
    fn truncated_payload_is_malformed() {
        let v = ramp(VideoHeader::new(4, 4, 20, 2).unwrap());
        let mut bytes = v.encode();
        bytes.pop();
        assert!(matches!(
            decode_container(&bytes),
            Err(MediaError::MalformedContainer(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.dvf");
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_video(&path),
            Err(MediaError::MalformedContainer(_))
        ));
    }

    #[test]
    fn bad_headers_rejected() {
        for bad in [
            &b"DVF2 4 4 20 2 RGB8\n"[..],
            b"DVF1 4 4 20 RGB8\n",
            b"DVF1 04 4 20 2 RGB8\n",
            b"DVF1 4 4 20 0 RGB8\n",
            b"DVF1 4 4 20 2 RGBA\n",
            b"DVF1 -4 4 20 2 RGB8\n",
            b"DVF1 4  4 20 2 RGB8\n",
            b"DVF1 4 4 20 2 RGB8",
            b"DVF1 99999999999 4 20 2 RGB8\n",
        ] {
            assert!(decode_container(bad).is_err(), "{:?}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn full_size_frame_offset_is_header_length() {
        let h = VideoHeader::new(1280, 720, 20, 101).unwrap();
        let line = h.header_line();
        assert_eq!(line, "DVF1 1280 720 20 101 RGB8\n");
        let mut bytes = line.clone().into_bytes();
        bytes.resize(line.len() + h.payload_len(), 9);
        let (parsed, offset) = split_header(&bytes).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(offset, line.len());
        assert_eq!(decode_container(&bytes).unwrap().frame(0).unwrap()[0], 9);
    }

    #[test]
    fn digest_tracks_content() {
        let v = ramp(VideoHeader::new(4, 4, 20, 2).unwrap());
        assert_eq!(v.digest(), v.clone().digest());
        let (h, mut data) = v.clone().into_parts();
        data[17] ^= 1;
        assert_ne!(Video::new(h, data).unwrap().digest(), v.digest());
    }

    #[test]
    fn zero_frames_rejected_before_write() {
        assert!(VideoHeader::new(4, 4, 20, 0).is_err());
        let h = VideoHeader {
            width: 4,
            height: 4,
            fps: 20,
            frame_count: 0,
            pixel_format: PixelFormat::Rgb8,
        };
        assert!(Video::new(h, vec![]).is_err());
    }

    #[test]
    fn standardize_resampling_arithmetic() {
        let v = ramp(VideoHeader::new(640, 360, 8, 10).unwrap());
        let out = standardize(&v, &StandardizeTarget::default()).unwrap();
        assert_eq!(*out.header(), VideoHeader::new(1280, 720, 20, 25).unwrap());
        // Output frame 3 samples round(3 * 8 / 20) = round(1.2) = 1; pixel (5, 7) samples (2, 3).
        assert_eq!(out.pixel(3, 5, 7), v.pixel(1, 2, 3));
        // Output frame 24 samples round(9.6) = 10, clamped to 9.
        assert_eq!(out.pixel(24, 0, 0), v.pixel(9, 0, 0));
    }

    #[test]
    fn standardize_identity_on_target_format() {
        let v = ramp(VideoHeader::new(32, 18, 20, 101).unwrap());
        let target = StandardizeTarget {
            width: 32,
            height: 18,
            ..StandardizeTarget::default()
        };
        assert_eq!(standardize(&v, &target).unwrap(), v);
    }

    #[test]
    fn defaults_match_dataset_format() {
        let t = StandardizeTarget::default();
        assert_eq!((t.width, t.height, t.fps, t.frame_cap), (1280, 720, 20, 101));
        // A long 30 fps clip lands on the capped dataset shape.
        assert_eq!(t.output_frames(300, 30), 101);
    }

    #[test]
    fn short_high_rate_clip_keeps_one_frame() {
        let t = StandardizeTarget::default();
        assert_eq!(t.output_frames(1, 60), 1);
    }

    #[test]
    fn keyframe_policies() {
        assert_eq!(select_keyframe(101, KeyframePolicy::First), 0);
        assert_eq!(select_keyframe(101, KeyframePolicy::Middle), 50);
        assert_eq!(select_keyframe(1, KeyframePolicy::First), 0);
        assert_eq!(select_keyframe(1, KeyframePolicy::Middle), 0);
    }

    #[test]
    fn grid_cell_centres() {
        let pts = grid_points(4, 4, GridSpec { rows: 2, cols: 2 }).unwrap();
        assert_eq!(pts, vec![(1.0, 1.0), (3.0, 1.0), (1.0, 3.0), (3.0, 3.0)]);
        assert_eq!(
            grid_points(9, 5, GridSpec { rows: 1, cols: 1 }).unwrap(),
            vec![(4.5, 2.5)]
        );
        assert!(grid_points(3, 8, GridSpec { rows: 2, cols: 4 }).is_err());
    }

    #[test]
    fn luma_by_hand() {
        // 0.299*200 + 0.587*100 + 0.114*50 = 59.8 + 58.7 + 5.7 = 124.2
        assert_eq!(luma([200, 100, 50]), 124);
        assert_eq!(luma([255, 255, 255]), 255);
        assert_eq!(luma([0, 0, 0]), 0);
    }

    fn small_header() -> impl Strategy<Value = VideoHeader> {
        (1u32..6, 1u32..6, 1u32..31, 1u32..8)
            .prop_map(|(w, h, fps, n)| VideoHeader::new(w, h, fps, n).unwrap())
    }

    fn small_video() -> impl Strategy<Value = Video> {
        small_header().prop_flat_map(|h| {
            proptest::collection::vec(any::<u8>(), h.payload_len())
                .prop_map(move |data| Video::new(h, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn container_round_trip(v in small_video()) {
            prop_assert_eq!(decode_container(&v.encode()).unwrap(), v.clone());
            prop_assert_eq!(ContentDigest::of(&v.encode()), v.digest());
        }

        #[test]
        fn standardize_is_idempotent(
            v in small_video(),
            w in 1u32..9, h in 1u32..9, fps in 1u32..31, cap in 1u32..12,
        ) {
            let t = StandardizeTarget { width: w, height: h, fps, frame_cap: cap };
            let once = standardize(&v, &t).unwrap();
            let twice = standardize(&once, &t).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn grid_points_distinct_and_inside(w in 1u32..200, h in 1u32..200, r in 1u32..20, c in 1u32..20) {
            prop_assume!(w >= c && h >= r);
            let pts = grid_points(w, h, GridSpec { rows: r, cols: c }).unwrap();
            prop_assert_eq!(pts.len(), (r * c) as usize);
            for &(x, y) in &pts {
                prop_assert!(x > 0.0 && x < w as f64 && y > 0.0 && y < h as f64);
            }
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    prop_assert!(pts[i] != pts[j]);
                }
            }
        }
    }
}
