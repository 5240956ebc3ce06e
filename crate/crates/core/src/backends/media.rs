//! Content-addressed media directory shared by the pipeline and the mocks.

use std::fs;
use std::path::{Component, Path, PathBuf};

use crate::backends::protocol::{MediaKind, MediaRef};
use crate::digest::ContentDigest;
use crate::media_io::{self, MediaError, Video, VideoHeader};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error("media {path} not found under {root}")]
    NotFound { path: String, root: String },
    #[error("digest mismatch for {path}: reference says {expected}, file hashes to {actual}")]
    DigestMismatch {
        path: String,
        expected: ContentDigest,
        actual: ContentDigest,
    },
    #[error("media path {0:?} escapes the media root")]
    UnsafePath(String),
    #[error("{path} is a {actual:?}, expected {expected:?}")]
    WrongKind {
        path: String,
        expected: MediaKind,
        actual: MediaKind,
    },
}

/// Files are named `<digest>.dvf`; writing the same content twice is a no-op.
#[derive(Clone, Debug)]
pub struct MediaStore {
    root: PathBuf,
}

impl MediaStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| MediaError::Io {
            path: root.display().to_string(),
            source: e,
        })?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file_name(digest: &ContentDigest) -> String {
        format!("{digest}.dvf")
    }

    /// Resolves a reference path against the root. Absolute paths are taken as is;
    /// relative paths may not climb out of the root.
    pub fn locate(&self, media: &MediaRef) -> Result<PathBuf, StoreError> {
        let p = Path::new(&media.path);
        if p.is_absolute() {
            return Ok(p.to_path_buf());
        }
        if p
            .components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
        {
            return Err(StoreError::UnsafePath(media.path.clone()));
        }
        Ok(self.root.join(p))
    }

    pub fn put(&self, video: &Video, kind: MediaKind) -> Result<MediaRef, StoreError> {
        let digest = video.digest();
        let name = Self::file_name(&digest);
        let path = self.root.join(&name);
        if !path.exists() {
            media_io::write_video(video, &path)?;
        }
        Ok(MediaRef {
            digest,
            path: name,
            kind,
        })
    }

    /// Loads and verifies a referenced video: the file must hash to the digest in the
    /// reference.
    pub fn get(&self, media: &MediaRef) -> Result<Video, StoreError> {
        let path = self.existing(media)?;
        let video = media_io::read_video(&path)?;
        let actual = video.digest();
        if actual != media.digest {
            return Err(StoreError::DigestMismatch {
                path: media.path.clone(),
                expected: media.digest.clone(),
                actual,
            });
        }
        if media.kind == MediaKind::Image && video.header().frame_count != 1 {
            return Err(StoreError::WrongKind {
                path: media.path.clone(),
                expected: MediaKind::Image,
                actual: MediaKind::Video,
            });
        }
        Ok(video)
    }

    /// Header only, without hashing the payload.
    pub fn header(&self, media: &MediaRef) -> Result<VideoHeader, StoreError> {
        Ok(media_io::read_header(&self.existing(media)?)?)
    }

    /// Checks that the reference points at a file, without reading it.
    pub fn existing(&self, media: &MediaRef) -> Result<PathBuf, StoreError> {
        let path = self.locate(media)?;
        if !path.is_file() {
            return Err(StoreError::NotFound {
                path: media.path.clone(),
                root: self.root.display().to_string(),
            });
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_is_content_addressed_and_verified() {
        let dir = tempfile::tempdir().unwrap();
        let store = MediaStore::open(dir.path()).unwrap();
        let v = Video::solid(VideoHeader::new(2, 2, 20, 3).unwrap(), [1, 2, 3]).unwrap();
        let a = store.put(&v, MediaKind::Video).unwrap();
        let b = store.put(&v, MediaKind::Video).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.path, format!("{}.dvf", v.digest()));
        assert_eq!(store.get(&a).unwrap(), v);

        let mut lying = a.clone();
        lying.digest = ContentDigest::of(b"other");
        assert!(matches!(store.get(&lying), Err(StoreError::DigestMismatch { .. })));

        let mut as_image = a.clone();
        as_image.kind = MediaKind::Image;
        assert!(matches!(store.get(&as_image), Err(StoreError::WrongKind { .. })));
    }

    #[test]
    fn rejects_escaping_paths() {
        let dir = tempfile::tempdir().unwrap();
        let store = MediaStore::open(dir.path()).unwrap();
        let r = MediaRef {
            digest: ContentDigest::of(b""),
            path: "../etc/passwd".into(),
            kind: MediaKind::Video,
        };
        assert!(matches!(store.get(&r), Err(StoreError::UnsafePath(_))));
        let missing = MediaRef {
            path: "nope.dvf".into(),
            ..r
        };
        assert!(matches!(store.get(&missing), Err(StoreError::NotFound { .. })));
    }
}
