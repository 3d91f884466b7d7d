//! Snapshot persistence for crash recovery.
//!
//! A snapshot is a self-contained directory `snapshot_<seq>` holding
//! `meta.txt` (kernel identity, shard count, sequence number), one
//! `worker_<i>.state` file per worker (`vid \t value \t delta` lines),
//! and one `worker_<i>.pending` file per worker with the messages that
//! were in flight across the consistent cut (`vid \t value` lines).
//!
//! Writers stage everything under a dot-prefixed directory and the
//! coordinator renames it into place after writing `meta.txt` last, so
//! a directory named `snapshot_*` with a readable meta file is complete
//! by construction; partial snapshots are never visible under that
//! name.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::state::StateEntry;
use crate::engine::EngineError;
use crate::graph::VertexId;
use crate::kernel::Value;
use crate::transport::DeltaMessage;

pub(crate) fn staging_dir(root: &Path, seq: u64) -> PathBuf {
    root.join(format!(".staging_{seq}"))
}

pub(crate) fn snapshot_dir(root: &Path, seq: u64) -> PathBuf {
    root.join(format!("snapshot_{seq}"))
}

pub(crate) fn write_state<V: Value>(
    dir: &Path,
    worker: usize,
    entries: &[StateEntry<V>],
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(format!("worker_{worker}.state")))?);
    for e in entries {
        writeln!(w, "{}\t{}\t{}", e.vid, e.value.render(), e.delta.render())?;
    }
    w.flush()
}

/// Incremental writer for the in-flight messages captured after the
/// local state was recorded.
pub(crate) struct PendingWriter {
    w: BufWriter<File>,
}

impl PendingWriter {
    pub(crate) fn create(dir: &Path, worker: usize) -> std::io::Result<Self> {
        let file = File::create(dir.join(format!("worker_{worker}.pending")))?;
        Ok(PendingWriter { w: BufWriter::new(file) })
    }

    pub(crate) fn append<V: Value>(&mut self, msg: &DeltaMessage<V>) -> std::io::Result<()> {
        writeln!(self.w, "{}\t{}", msg.dest, msg.value.render())
    }

    pub(crate) fn finish(mut self) -> std::io::Result<()> {
        self.w.flush()
    }
}

pub(crate) fn write_meta(
    dir: &Path,
    seq: u64,
    kernel: &str,
    shards: usize,
    vertices: usize,
) -> std::io::Result<()> {
    let text = format!("seq={seq}\nkernel={kernel}\nshards={shards}\nvertices={vertices}\n");
    fs::write(dir.join("meta.txt"), text)
}

/// A fully loaded snapshot ready to seed a resumed run.
#[derive(Debug)]
pub struct SnapshotData<V> {
    pub seq: u64,
    pub shards: usize,
    /// `(vid, value, delta)` for every vertex, unordered.
    pub entries: Vec<(VertexId, V, V)>,
    /// Messages that were in flight across the cut.
    pub pending: Vec<DeltaMessage<V>>,
}

fn corrupt(msg: impl Into<String>) -> EngineError {
    EngineError::Recover(msg.into())
}

fn parse_meta(dir: &Path) -> Result<(u64, String, usize, usize), EngineError> {
    let path = dir.join("meta.txt");
    let text = fs::read_to_string(&path)
        .map_err(|e| corrupt(format!("cannot read {}: {e}", path.display())))?;
    let mut seq = None;
    let mut kernel = None;
    let mut shards = None;
    let mut vertices = None;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else { continue };
        match key {
            "seq" => seq = value.parse::<u64>().ok(),
            "kernel" => kernel = Some(value.to_string()),
            "shards" => shards = value.parse::<usize>().ok(),
            "vertices" => vertices = value.parse::<usize>().ok(),
            _ => {}
        }
    }
    match (seq, kernel, shards, vertices) {
        (Some(s), Some(k), Some(w), Some(v)) => Ok((s, k, w, v)),
        _ => Err(corrupt(format!("incomplete meta in {}", dir.display()))),
    }
}

/// Loads one snapshot directory, validating it against the kernel it
/// will resume.
pub fn load_snapshot<V: Value>(dir: &Path, kernel_name: &str) -> Result<SnapshotData<V>, EngineError> {
    let (seq, kernel, shards, vertices) = parse_meta(dir)?;
    if kernel != kernel_name {
        return Err(corrupt(format!(
            "snapshot was taken for kernel {kernel:?}, not {kernel_name:?}"
        )));
    }
    let mut entries = Vec::with_capacity(vertices);
    let mut pending = Vec::new();
    for worker in 0..shards {
        let path = dir.join(format!("worker_{worker}.state"));
        let text = fs::read_to_string(&path)
            .map_err(|e| corrupt(format!("cannot read {}: {e}", path.display())))?;
        for (no, line) in text.lines().enumerate() {
            let mut fields = line.split('\t');
            let bad = || corrupt(format!("{}:{}: malformed entry", path.display(), no + 1));
            let vid = fields.next().and_then(|f| f.parse::<u64>().ok()).ok_or_else(bad)?;
            let value = fields.next().and_then(|f| V::parse_text(f).ok()).ok_or_else(bad)?;
            let delta = fields.next().and_then(|f| V::parse_text(f).ok()).ok_or_else(bad)?;
            entries.push((VertexId(vid), value, delta));
        }

        let path = dir.join(format!("worker_{worker}.pending"));
        let text = fs::read_to_string(&path)
            .map_err(|e| corrupt(format!("cannot read {}: {e}", path.display())))?;
        for (no, line) in text.lines().enumerate() {
            let bad = || corrupt(format!("{}:{}: malformed message", path.display(), no + 1));
            let (vid, value) = line.split_once('\t').ok_or_else(bad)?;
            let dest = vid.parse::<u64>().map(VertexId).map_err(|_| bad())?;
            let value = V::parse_text(value).map_err(|_| bad())?;
            pending.push(DeltaMessage { dest, value });
        }
    }
    if entries.len() != vertices {
        return Err(corrupt(format!(
            "snapshot holds {} entries but meta declares {vertices}",
            entries.len()
        )));
    }
    Ok(SnapshotData { seq, shards, entries, pending })
}

/// Finds and loads the snapshot with the highest sequence number under
/// `root`. Fails if none is present; never falls back to a fresh start.
pub fn load_latest<V: Value>(root: &Path, kernel_name: &str) -> Result<SnapshotData<V>, EngineError> {
    let mut best: Option<(u64, PathBuf)> = None;
    let iter = fs::read_dir(root)
        .map_err(|e| corrupt(format!("cannot list {}: {e}", root.display())))?;
    for entry in iter.flatten() {
        let name = entry.file_name();
        let Some(seq) = name.to_str().and_then(|n| n.strip_prefix("snapshot_")) else {
            continue;
        };
        let Ok(seq) = seq.parse::<u64>() else { continue };
        if best.as_ref().is_none_or(|(b, _)| seq > *b) {
            best = Some((seq, entry.path()));
        }
    }
    match best {
        Some((_, dir)) => load_snapshot(&dir, kernel_name),
        None => Err(corrupt(format!("no snapshot under {}", root.display()))),
    }
}
