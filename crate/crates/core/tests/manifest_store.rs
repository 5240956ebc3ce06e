mod common;

use std::io::{BufReader, Read};

use ditto_core::backends::protocol::{Category, JudgeScores, MediaKind, MediaRef};
use ditto_core::manifest_store::{
    load_snapshot, replay, replay_reader, replay_with_snapshot, write_snapshot, AssetPayload,
    Entry, Journal, ManifestError, ManifestState, Payload, PublishPayload, Triplet,
};
use ditto_core::media_io::VideoHeader;
use ditto_core::pipeline::{start_run, ExecOptions, Home};
use ditto_core::ContentDigest;

fn media(tag: &str) -> MediaRef {
    let digest = ContentDigest::of(tag.as_bytes());
    MediaRef {
        path: format!("{digest}.dvf"),
        digest,
        kind: MediaKind::Video,
    }
}

fn asset(id: &str, ordinal: u64) -> Entry {
    Entry::new(
        id,
        Payload::Asset(AssetPayload {
            ordinal,
            source: media(id),
            header: VideoHeader::new(4, 4, 10, 2).unwrap(),
            origin: "test".into(),
        }),
    )
}

fn publish(id: &str) -> Entry {
    Entry::new(
        id,
        Payload::Publish(PublishPayload {
            triplet: Triplet {
                source: media(id),
                instruction: "make it snow".into(),
                category: Category::GlobalEnvironment,
                edited: media("edited"),
                edited_format: VideoHeader::new(4, 4, 10, 2).unwrap(),
                judge_scores: JudgeScores::new([1.0, 1.0, 1.0, 1.0]).unwrap(),
                lineage: vec![],
            },
        }),
    )
}

/// Journal bytes of a small finished pipeline run.
fn run_journal() -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let home = Home::new(dir.path());
    let (id, _) = start_run(&home, common::small_config(4, 8), ExecOptions::default()).unwrap();
    std::fs::read(home.journal_path(&id)).unwrap()
}

#[test]
fn appends_are_dense_and_empty_journal_is_empty_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.log");
    let mut j = Journal::open(&path).unwrap();
    assert_eq!(j.state(), &ManifestState::default());
    assert_eq!(j.append(asset("a", 0)).unwrap(), 0);
    assert_eq!(j.append(asset("b", 1)).unwrap(), 1);
    assert_eq!(j.append_batch(vec![asset("c", 2), asset("d", 3)]).unwrap(), [2, 3]);
    drop(j);
    let mut j = Journal::open(&path).unwrap();
    assert_eq!(j.state().next_seq, 4);
    assert_eq!(j.append_batch(vec![]).unwrap(), Vec::<u64>::new());
}

#[test]
fn second_publish_is_refused_and_not_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.log");
    let mut j = Journal::open(&path).unwrap();
    j.append(asset("a", 0)).unwrap();
    j.append(publish("a")).unwrap();
    let before = std::fs::read(&path).unwrap();
    assert!(matches!(j.append(publish("a")), Err(ManifestError::DuplicatePublish(_))));
    assert_eq!(std::fs::read(&path).unwrap(), before);
    assert_eq!(j.append(asset("b", 1)).unwrap(), 2);
}

#[test]
fn failing_batch_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.log");
    let mut j = Journal::open(&path).unwrap();
    j.append(asset("a", 0)).unwrap();
    assert!(j.append_batch(vec![asset("b", 1), asset("a", 2)]).is_err());
    assert_eq!(j.state().next_seq, 1);
    assert_eq!(replay(&path).unwrap(), *j.state());
}

#[test]
fn every_flipped_byte_in_a_run_journal_is_detected() {
    let bytes = run_journal();
    let clean = replay_reader(&bytes[..]).unwrap();
    assert!(clean.published().count() > 0);
    // Every byte of the first, a middle and the last record.
    let starts: Vec<usize> = std::iter::once(0)
        .chain(bytes.iter().enumerate().filter(|(_, &b)| b == b'\n').map(|(i, _)| i + 1))
        .collect();
    let n = starts.len() - 1;
    for k in [0, n / 2, n - 1] {
        for i in starts[k]..starts[k + 1] {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            match replay_reader(&bad[..]) {
                Err(ManifestError::CorruptJournal { offset, .. }) => {
                    assert!(offset as usize <= starts[k], "byte {i}")
                }
                Ok(s) => panic!("flip at {i} went unnoticed ({} records)", s.next_seq),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn truncated_final_record_reports_its_offset() {
    let bytes = run_journal();
    let last_start = bytes[..bytes.len() - 1]
        .iter()
        .rposition(|&b| b == b'\n')
        .unwrap()
        + 1;
    for cut in [last_start + 1, last_start + 10, bytes.len() - 1] {
        match replay_reader(&bytes[..cut]) {
            Err(ManifestError::CorruptJournal { offset, .. }) => {
                assert_eq!(offset, last_start as u64)
            }
            other => panic!("{other:?}"),
        }
    }
    let prior = replay_reader(&bytes[..last_start]).unwrap();
    let full = replay_reader(&bytes[..]).unwrap();
    assert_eq!(prior.next_seq + 1, full.next_seq);
}

/// Reader that hands out at most `chunk` bytes per call.
struct Chunked<'a> {
    data: &'a [u8],
    chunk: usize,
}

impl Read for Chunked<'_> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.chunk.min(buf.len()).min(self.data.len());
        buf[..n].copy_from_slice(&self.data[..n]);
        self.data = &self.data[n..];
        Ok(n)
    }
}

#[test]
fn replay_is_independent_of_read_chunking() {
    let bytes = run_journal();
    let whole = replay_reader(&bytes[..]).unwrap();
    for chunk in [1, 7, 4096] {
        let r = BufReader::with_capacity(chunk, Chunked { data: &bytes, chunk });
        assert_eq!(replay_reader(r).unwrap(), whole, "chunk {chunk}");
    }
}

#[test]
fn snapshot_plus_suffix_equals_full_replay() {
    let bytes = run_journal();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.log");
    let lines: Vec<&[u8]> = bytes.split_inclusive(|&b| b == b'\n').collect();
    let full = replay_reader(&bytes[..]).unwrap();
    for cut in [0, 1, lines.len() / 3, lines.len() - 1, lines.len()] {
        std::fs::write(&path, lines[..cut].concat()).unwrap();
        let snap = Journal::open(&path).unwrap().snapshot();
        let snap_path = dir.path().join("snap.json");
        write_snapshot(&snap, &snap_path).unwrap();
        let loaded = load_snapshot(&snap_path).unwrap();
        assert_eq!(loaded, snap);
        std::fs::write(&path, &bytes).unwrap();
        assert_eq!(replay_with_snapshot(&path, &loaded).unwrap(), full, "cut {cut}");
        let j = Journal::open_from_snapshot(&path, loaded).unwrap();
        assert_eq!(j.state(), &full);
    }
    assert!(load_snapshot(&dir.path().join("missing.json")).is_err());
}

#[test]
fn snapshot_with_inconsistent_high_water_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.log");
    let mut j = Journal::open(&path).unwrap();
    j.append(asset("a", 0)).unwrap();
    let mut snap = j.snapshot();
    snap.high_water = 5;
    let sp = dir.path().join("s.json");
    write_snapshot(&snap, &sp).unwrap();
    assert!(matches!(load_snapshot(&sp), Err(ManifestError::Snapshot(_))));
}
