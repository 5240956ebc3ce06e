//! The single-writer journal file, replay and snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::record::{parse_line, validate_asset_id, Entry, Record};
use super::state::ManifestState;
use super::ManifestError;
use crate::digest::ContentDigest;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Folds records from `reader` onto `state`. `base_offset` is the byte offset of
/// the reader's first byte within the journal, used for error positions. Returns
/// the offset just past the last record.
pub fn replay_onto<R: BufRead>(
    mut reader: R,
    state: &mut ManifestState,
    base_offset: u64,
) -> Result<u64, ManifestError> {
    let mut offset = base_offset;
    let mut line = Vec::new();
    loop {
        line.clear();
        let n = reader
            .read_until(b'\n', &mut line)
            .map_err(|e| ManifestError::CorruptJournal {
                offset,
                reason: format!("read failed: {e}"),
            })?;
        if n == 0 {
            return Ok(offset);
        }
        let corrupt = |reason: String| ManifestError::CorruptJournal { offset, reason };
        if line.last() != Some(&b'\n') {
            return Err(corrupt("truncated record (no trailing newline)".into()));
        }
        let record = parse_line(&line[..n - 1]).map_err(corrupt)?;
        state
            .apply(&record)
            .map_err(|e| ManifestError::CorruptJournal {
                offset,
                reason: e.to_string(),
            })?;
        offset += n as u64;
    }
}

pub fn replay_reader<R: BufRead>(reader: R) -> Result<ManifestState, ManifestError> {
    let mut state = ManifestState::default();
    replay_onto(reader, &mut state, 0)?;
    Ok(state)
}

/// Replays a journal file; a missing file is an error.
pub fn replay(path: &Path) -> Result<ManifestState, ManifestError> {
    let file = File::open(path).map_err(io_err(path))?;
    replay_reader(BufReader::new(file))
}

/// SHA-256 of the journal bytes.
pub fn manifest_digest(path: &Path) -> Result<ContentDigest, ManifestError> {
    let mut file = File::open(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(ContentDigest::from_hasher(hasher))
}

/// Append handle. Every append is durable (written and fsynced) before it returns.
pub struct Journal {
    path: PathBuf,
    file: File,
    state: ManifestState,
    len: u64,
    poisoned: bool,
}

impl std::fmt::Debug for Journal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Journal")
            .field("path", &self.path)
            .field("next_seq", &self.state.next_seq)
            .field("len", &self.len)
            .finish()
    }
}

impl Journal {
    /// Opens `path`, creating it if absent and replaying it otherwise.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ManifestError> {
        let path = path.into();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut state = ManifestState::default();
        let len = replay_onto(BufReader::new(&mut file), &mut state, 0)?;
        Ok(Self {
            path,
            file,
            state,
            len,
            poisoned: false,
        })
    }

    /// Opens a journal whose first `snapshot.journal_offset` bytes are summarized
    /// by `snapshot`; only the suffix is replayed.
    pub fn open_from_snapshot(path: impl Into<PathBuf>, snapshot: Snapshot) -> Result<Self, ManifestError> {
        let path = path.into();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut state = snapshot.state;
        file.seek(SeekFrom::Start(snapshot.journal_offset))
            .map_err(io_err(&path))?;
        let len = replay_onto(BufReader::new(&mut file), &mut state, snapshot.journal_offset)?;
        Ok(Self {
            path,
            file,
            state,
            len,
            poisoned: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn state(&self) -> &ManifestState {
        &self.state
    }

    pub fn len_bytes(&self) -> u64 {
        self.len
    }

    pub fn append(&mut self, entry: Entry) -> Result<u64, ManifestError> {
        Ok(self.append_batch(vec![entry])?[0])
    }

    /// Appends all entries with one write and one fsync; either every entry is
    /// accepted or none is.
    pub fn append_batch(&mut self, entries: Vec<Entry>) -> Result<Vec<u64>, ManifestError> {
        if self.poisoned {
            return Err(ManifestError::Poisoned);
        }
        let mut next = self.state.clone();
        let mut buf = String::new();
        let mut seqs = Vec::with_capacity(entries.len());
        let mut records = Vec::with_capacity(entries.len());
        for e in entries {
            validate_asset_id(&e.asset_id).map_err(ManifestError::InvalidRecord)?;
            let record = Record {
                seq: next.next_seq,
                asset_id: e.asset_id,
                payload: e.payload,
            };
            next.apply(&record)?;
            buf.push_str(&record.encode());
            seqs.push(record.seq);
            records.push(record);
        }
        if records.is_empty() {
            return Ok(seqs);
        }
        let written = self
            .file
            .write_all(buf.as_bytes())
            .and_then(|_| self.file.sync_data());
        if let Err(e) = written {
            self.poisoned = true;
            return Err(io_err(&self.path)(e));
        }
        self.len += buf.len() as u64;
        self.state = next;
        Ok(seqs)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            high_water: self.state.next_seq,
            journal_offset: self.len,
            state: self.state.clone(),
        }
    }

    pub fn digest(&self) -> Result<ContentDigest, ManifestError> {
        manifest_digest(&self.path)
    }

    pub fn into_state(self) -> ManifestState {
        self.state
    }
}

/// State as of sequence number `high_water` (exclusive) together with the journal
/// byte offset where the remaining records start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub high_water: u64,
    pub journal_offset: u64,
    pub state: ManifestState,
}

pub fn write_snapshot(snapshot: &Snapshot, path: &Path) -> Result<(), ManifestError> {
    let text = serde_json::to_string_pretty(snapshot)
        .map_err(|e| ManifestError::Snapshot(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(io_err(path))
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot, ManifestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let s: Snapshot =
        serde_json::from_str(&text).map_err(|e| ManifestError::Snapshot(e.to_string()))?;
    if s.high_water != s.state.next_seq {
        return Err(ManifestError::Snapshot(format!(
            "high-water mark {} disagrees with state at {}",
            s.high_water, s.state.next_seq
        )));
    }
    Ok(s)
}

/// Replays only the journal suffix after `snapshot`.
pub fn replay_with_snapshot(journal: &Path, snapshot: &Snapshot) -> Result<ManifestState, ManifestError> {
    let mut file = File::open(journal).map_err(io_err(journal))?;
    file.seek(SeekFrom::Start(snapshot.journal_offset))
        .map_err(io_err(journal))?;
    let mut state = snapshot.state.clone();
    replay_onto(BufReader::new(file), &mut state, snapshot.journal_offset)?;
    Ok(state)
}
