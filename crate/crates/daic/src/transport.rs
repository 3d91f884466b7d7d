//! Outgoing message buffering with early aggregation.
//!
//! Each producer keeps one [`MsgTable`] per remote destination worker.
//! Messages addressed to the same vertex are folded together with the
//! kernel's accumulation operator before they ever reach a channel,
//! which is sound because delivering the aggregate has the same effect
//! on the receiver as delivering the parts in any order. Tables are
//! emptied either when a flush timeout elapses or when they grow past a
//! size cap, and always emit in ascending vertex order so single-worker
//! runs stay bit-reproducible.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::graph::VertexId;
use crate::kernel::{Kernel, Value};

/// One unit of inter-worker communication. Senders filter out values
/// equal to the kernel's identity before constructing a message.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMessage<V> {
    pub dest: VertexId,
    pub value: V,
}

/// Destination worker of a message: the same hash placement that
/// assigns vertices to workers.
pub fn route<V>(msg: &DeltaMessage<V>, shards: usize) -> usize {
    debug_assert!(shards >= 1);
    (msg.dest.0 % shards as u64) as usize
}

/// Per-destination-worker aggregation buffer.
#[derive(Debug)]
pub struct MsgTable<V> {
    dest_worker: usize,
    entries: BTreeMap<u64, V>,
    last_flush: Instant,
    size_cap: usize,
    /// Messages folded into an existing entry instead of being sent.
    pub aggregated_away: u64,
}

pub const DEFAULT_SIZE_CAP: usize = 65_536;

impl<V: Value> MsgTable<V> {
    pub fn new(dest_worker: usize, size_cap: usize, now: Instant) -> Self {
        MsgTable { dest_worker, entries: BTreeMap::new(), last_flush: now, size_cap, aggregated_away: 0 }
    }

    pub fn dest_worker(&self) -> usize {
        self.dest_worker
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Folds `msg` into the buffer: an existing entry for the same
    /// destination absorbs it, otherwise it is inserted.
    pub fn buffer(&mut self, msg: DeltaMessage<V>, kernel: &Kernel<V>) {
        debug_assert!(msg.value != *kernel.zero(), "identity-valued messages are never buffered");
        match self.entries.entry(msg.dest.0) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() = kernel.accumulate(e.get(), &msg.value);
                self.aggregated_away += 1;
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(msg.value);
            }
        }
    }

    /// Emits and clears the whole buffer (ascending destination vid) if
    /// the timeout has elapsed since the last flush or the size cap is
    /// exceeded; otherwise emits nothing.
    pub fn flush(&mut self, now: Instant, timeout: Duration) -> Vec<DeltaMessage<V>> {
        if self.entries.is_empty() {
            // Nothing buffered; keep the stamp fresh so the next burst
            // gets a full timeout window.
            if now.duration_since(self.last_flush) >= timeout {
                self.last_flush = now;
            }
            return Vec::new();
        }
        if now.duration_since(self.last_flush) >= timeout || self.entries.len() >= self.size_cap {
            self.force_flush(now)
        } else {
            Vec::new()
        }
    }

    /// Unconditional drain, ascending destination vid.
    pub fn force_flush(&mut self, now: Instant) -> Vec<DeltaMessage<V>> {
        self.last_flush = now;
        std::mem::take(&mut self.entries)
            .into_iter()
            .map(|(dest, value)| DeltaMessage { dest: VertexId(dest), value })
            .collect()
    }
}
