//! Per-worker vertex state and the two operations driving every mode.
//!
//! Each vertex is one [`StateEntry`]: its id, current value, pending
//! delta, scheduling priority, and static payload. [`receive`] folds an
//! incoming message into the pending delta; [`update`] snapshots and
//! resets the delta, folds it into the value, and emits the per-edge
//! images of the snapshot. Both maintain the invariant that `priority`
//! always equals the kernel's priority of `(value, delta)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use crate::graph::{Graph, VertexId};
use crate::kernel::{EdgeContext, Kernel, Value, VertexData};
use crate::transport::DeltaMessage;

/// One vertex record: the five fields every mode operates on.
#[derive(Debug, Clone)]
pub struct StateEntry<V> {
    pub vid: VertexId,
    pub value: V,
    pub delta: V,
    pub priority: f64,
    pub data: VertexData,
}

/// The vertices owned by one worker, ascending by vid. A table holds
/// exactly the vids that hash to its worker index.
#[derive(Debug)]
pub struct StateTable<V> {
    worker: usize,
    shards: usize,
    entries: Vec<StateEntry<V>>,
    index: HashMap<u64, usize>,
}

impl<V: Value> StateTable<V> {
    pub fn new(worker: usize, shards: usize) -> Self {
        assert!(shards >= 1 && worker < shards);
        StateTable { worker, shards, entries: Vec::new(), index: HashMap::new() }
    }

    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn shards(&self) -> usize {
        self.shards
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends an entry. Entries must arrive in ascending vid order and
    /// belong to this worker's partition.
    pub fn push(&mut self, entry: StateEntry<V>) {
        assert_eq!(
            (entry.vid.0 % self.shards as u64) as usize,
            self.worker,
            "vertex {} does not belong to worker {}",
            entry.vid,
            self.worker
        );
        if let Some(last) = self.entries.last() {
            assert!(last.vid < entry.vid, "entries must be inserted in ascending vid order");
        }
        self.index.insert(entry.vid.0, self.entries.len());
        self.entries.push(entry);
    }

    pub fn get(&self, vid: VertexId) -> Option<&StateEntry<V>> {
        self.index.get(&vid.0).map(|&i| &self.entries[i])
    }

    pub fn index_of(&self, vid: VertexId) -> Option<usize> {
        self.index.get(&vid.0).copied()
    }

    pub fn get_mut(&mut self, vid: VertexId) -> Option<&mut StateEntry<V>> {
        match self.index.get(&vid.0) {
            Some(&i) => Some(&mut self.entries[i]),
            None => None,
        }
    }

    pub fn entries(&self) -> &[StateEntry<V>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [StateEntry<V>] {
        &mut self.entries
    }
}

/// Builds the per-worker tables for a fresh run: every vertex gets its
/// initial `(value, delta)` from the kernel and the priority field is
/// initialised from them.
pub fn build_tables<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    workers: usize,
) -> Vec<StateTable<V>> {
    let mut tables: Vec<StateTable<V>> =
        (0..workers).map(|w| StateTable::new(w, workers)).collect();
    for &vid in graph.vertices() {
        let data = VertexData { out_edges: graph.out_edges(vid).to_vec() };
        let (value, delta) = kernel.init_vertex(vid, &data);
        let priority = kernel.priority_of(&value, &delta);
        let w = (vid.0 % workers as u64) as usize;
        tables[w].push(StateEntry { vid, value, delta, priority, data });
    }
    tables
}

/// Folds a received message into the entry's pending delta and
/// refreshes the priority. The value field is untouched.
pub fn receive<V: Value>(entry: &mut StateEntry<V>, message: V, kernel: &Kernel<V>) {
    entry.delta = kernel.accumulate(&entry.delta, &message);
    entry.priority = kernel.priority_of(&entry.value, &entry.delta);
}

/// Performs one update: atomically snapshots the delta and resets it to
/// the identity, folds the snapshot into the value, and appends the
/// non-identity per-edge images of the snapshot to `out`. Returns
/// whether the value changed.
///
/// Updating an entry whose delta is the identity is a legal no-op. For
/// idempotent kernels a delta that leaves the value unchanged is
/// absorbed without emitting messages (every image it could produce is
/// dominated by what the current value already propagated).
pub fn update_into<V: Value>(
    entry: &mut StateEntry<V>,
    kernel: &Kernel<V>,
    out: &mut Vec<DeltaMessage<V>>,
) -> bool {
    if entry.delta == *kernel.zero() {
        return false;
    }
    let snapshot = std::mem::replace(&mut entry.delta, kernel.zero().clone());
    entry.priority = 0.0;
    let new_value = kernel.accumulate(&entry.value, &snapshot);
    if kernel.is_idempotent() && new_value == entry.value {
        return false;
    }
    let changed = new_value != entry.value;
    entry.value = new_value;
    for &(target, weight) in &entry.data.out_edges {
        let ctx =
            EdgeContext { source: entry.vid, target, weight, source_data: &entry.data };
        let message = kernel.edge_message(&ctx, &snapshot);
        if message != *kernel.zero() {
            out.push(DeltaMessage { dest: target, value: message });
        }
    }
    changed
}

/// [`update_into`] with a fresh output buffer.
pub fn update<V: Value>(entry: &mut StateEntry<V>, kernel: &Kernel<V>) -> Vec<DeltaMessage<V>> {
    let mut out = Vec::new();
    update_into(entry, kernel, &mut out);
    out
}

/// Picks the batch of vids to update next under priority scheduling:
/// approximately the top `queue_fraction` of the table by priority,
/// determined by a sampled quantile threshold in O(n) rather than a
/// full sort. The result is ordered by priority descending, ties by
/// lower vid first.
pub fn extract_priority_batch<V: Value>(
    table: &StateTable<V>,
    queue_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<VertexId> {
    assert!(queue_fraction > 0.0 && queue_fraction <= 1.0, "queue fraction in (0, 1]");
    let n = table.len();
    if n == 0 {
        return Vec::new();
    }
    if queue_fraction >= 1.0 {
        let mut picked: Vec<(f64, VertexId)> =
            table.entries().iter().map(|e| (e.priority, e.vid)).collect();
        picked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        return picked.into_iter().map(|(_, vid)| vid).collect();
    }

    const SAMPLE_CAP: usize = 1024;
    let mut sample: Vec<f64> = if n <= SAMPLE_CAP {
        table.entries().iter().map(|e| e.priority).collect()
    } else {
        (0..SAMPLE_CAP)
            .map(|_| table.entries()[rng.random_range(0..n)].priority)
            .collect()
    };
    sample.sort_by(f64::total_cmp);
    let idx = ((1.0 - queue_fraction) * (sample.len() - 1) as f64).ceil() as usize;
    let threshold = sample[idx.min(sample.len() - 1)];

    let mut picked: Vec<(f64, VertexId)> = table
        .entries()
        .iter()
        .filter(|e| e.priority >= threshold)
        .map(|e| (e.priority, e.vid))
        .collect();
    picked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    picked.into_iter().map(|(_, vid)| vid).collect()
}
