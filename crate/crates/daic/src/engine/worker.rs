//! Worker threads: each owns one state table exclusively and runs the
//! receive and update roles as one interleaved loop. All cross-worker
//! effects travel as messages; there is no shared mutable state beyond
//! a few monotone counters.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{self, PendingWriter};
use super::state::{extract_priority_batch, receive, update_into, StateTable};
use super::Mode;
use crate::graph::VertexId;
use crate::kernel::{Kernel, Value};
use crate::transport::{route, DeltaMessage, MsgTable};

/// Messages a worker can receive, from peers or from the coordinator.
#[derive(Debug)]
pub(crate) enum ToWorker<V> {
    Deltas { from: usize, batch: Vec<DeltaMessage<V>> },
    /// Sync mode: perform one superstep.
    RunStep,
    /// Sync mode: `from` has sent `count` messages this superstep.
    EndOfStep { from: usize, count: u64 },
    ProgressProbe { id: u64 },
    SnapshotBegin { seq: u64 },
    /// Everything `from` sent before this marker belongs below the cut.
    Marker { seq: u64, from: usize },
    /// Stop updating; keep applying received messages.
    StopUpdates,
    /// Return the table (clean shutdown).
    Finish,
    /// Simulated crash: return immediately, dropping in-flight work.
    Halt,
}

/// Worker-to-coordinator replies.
#[derive(Debug)]
pub(crate) enum ToCoord {
    ProbeReply {
        worker: usize,
        id: u64,
        progress: f64,
        contributing: u64,
        nonzero: u64,
        buffered: u64,
    },
    StepDone {
        worker: usize,
        progress: f64,
        contributing: u64,
        nonzero: u64,
        changed: bool,
        sent: u64,
    },
    /// Unsolicited progress report emitted every `term_quantum` local
    /// updates; `seq` counts the worker's own quantum boundaries.
    QuantumSample {
        worker: usize,
        seq: u64,
        progress: f64,
        contributing: u64,
        nonzero: u64,
        buffered: u64,
    },
    SnapshotDone { worker: usize, seq: u64, ok: bool },
    Stopped { worker: usize },
}

/// Monotone counters shared between workers and coordinator.
#[derive(Debug, Default)]
pub(crate) struct Shared {
    pub sent: AtomicU64,
    pub delivered: AtomicU64,
    pub updates: AtomicU64,
    pub routing_errors: AtomicU64,
}

#[derive(Debug, Default, Clone)]
pub(crate) struct WorkerStats {
    pub updates: u64,
    pub messages_sent: u64,
    pub messages_local: u64,
    pub aggregated_away: u64,
    pub routing_errors: u64,
}

/// Immutable per-worker configuration.
pub(crate) struct WorkerRuntime<V: Value> {
    pub id: usize,
    pub workers: usize,
    pub mode: Mode,
    pub kernel: Kernel<V>,
    pub queue_fraction: f64,
    pub flush_timeout: Duration,
    pub size_cap: usize,
    pub checkpoint_root: Option<PathBuf>,
    pub seed: u64,
    /// Emit a progress sample every this many local updates.
    pub term_quantum: Option<u64>,
}

/// How many vertices the update role examines between inbox drains.
const CHUNK: usize = 512;

struct SnapProgress {
    seq: u64,
    awaiting: Vec<bool>,
    awaiting_count: usize,
    pending: Option<PendingWriter>,
    ok: bool,
}

enum Flow {
    Continue,
    Exit,
}

pub(crate) fn worker_main<V: Value>(
    rt: WorkerRuntime<V>,
    table: StateTable<V>,
    rx: Receiver<ToWorker<V>>,
    peers: Vec<Sender<ToWorker<V>>>,
    coord: Sender<ToCoord>,
    shared: Arc<Shared>,
) -> (StateTable<V>, WorkerStats) {
    let nonzero = table.entries().iter().filter(|e| e.delta != *rt.kernel.zero()).count();
    let now = Instant::now();
    let msg_tables = (0..rt.workers).map(|w| MsgTable::new(w, rt.size_cap, now)).collect();
    let rng = ChaCha8Rng::seed_from_u64(rt.seed ^ (rt.id as u64).wrapping_mul(0x9e37_79b9));
    let mode = rt.mode;
    let worker = Worker {
        rt,
        table,
        rx,
        peers,
        coord,
        shared,
        msg_tables,
        rng,
        nonzero,
        batch: std::collections::VecDeque::new(),
        cursor: 0,
        out_buf: Vec::new(),
        snap: None,
        stats: WorkerStats::default(),
        stopping: false,
        carry: std::collections::VecDeque::new(),
        quantum_seq: 0,
        next_quantum_mark: rt.term_quantum.unwrap_or(u64::MAX),
    };
    match mode {
        Mode::Sync => worker.run_sync(),
        Mode::AsyncRoundRobin | Mode::AsyncPriority => worker.run_async(),
    }
}

struct Worker<V: Value> {
    rt: WorkerRuntime<V>,
    table: StateTable<V>,
    rx: Receiver<ToWorker<V>>,
    peers: Vec<Sender<ToWorker<V>>>,
    coord: Sender<ToCoord>,
    shared: Arc<Shared>,
    msg_tables: Vec<MsgTable<V>>,
    rng: ChaCha8Rng,
    /// Entries whose delta is currently non-identity.
    nonzero: usize,
    batch: std::collections::VecDeque<VertexId>,
    cursor: usize,
    out_buf: Vec<DeltaMessage<V>>,
    snap: Option<SnapProgress>,
    stats: WorkerStats,
    stopping: bool,
    /// Sync mode: peer traffic that arrived ahead of our own RunStep.
    carry: std::collections::VecDeque<ToWorker<V>>,
    quantum_seq: u64,
    next_quantum_mark: u64,
}

impl<V: Value> Worker<V> {
    fn finish(mut self) -> (StateTable<V>, WorkerStats) {
        for t in &self.msg_tables {
            self.stats.aggregated_away += t.aggregated_away;
        }
        (self.table, self.stats)
    }

    // ----- asynchronous modes -------------------------------------------

    fn run_async(mut self) -> (StateTable<V>, WorkerStats) {
        loop {
            loop {
                match self.rx.try_recv() {
                    Ok(msg) => {
                        if matches!(self.handle(msg), Flow::Exit) {
                            return self.finish();
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => return self.finish(),
                }
            }
            if self.stopping {
                // Receive role only: drain until the coordinator says
                // the system is quiet.
                match self.rx.recv() {
                    Ok(msg) => {
                        if matches!(self.handle(msg), Flow::Exit) {
                            return self.finish();
                        }
                    }
                    Err(_) => return self.finish(),
                }
                continue;
            }

            let worked = self.update_chunk();
            self.emit_quantum_samples();
            let now = Instant::now();
            for w in 0..self.rt.workers {
                if w != self.rt.id {
                    self.send_flush(w, now, false);
                }
            }
            if !worked {
                match self.rx.recv_timeout(self.rt.flush_timeout) {
                    Ok(msg) => {
                        if matches!(self.handle(msg), Flow::Exit) {
                            return self.finish();
                        }
                    }
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => return self.finish(),
                }
            }
        }
    }

    fn handle(&mut self, msg: ToWorker<V>) -> Flow {
        match msg {
            ToWorker::Deltas { from, batch } => {
                if let Some(snap) = &mut self.snap {
                    // Channel state capture: messages from peers whose
                    // marker has not arrived were sent below the cut.
                    if snap.awaiting[from] {
                        if let Some(writer) = &mut snap.pending {
                            for m in &batch {
                                if writer.append(m).is_err() {
                                    snap.ok = false;
                                    snap.pending = None;
                                    break;
                                }
                            }
                        }
                    }
                }
                for m in batch {
                    self.shared.delivered.fetch_add(1, Ordering::Relaxed);
                    self.deliver_local(m);
                }
                Flow::Continue
            }
            ToWorker::ProgressProbe { id } => {
                let (progress, contributing) = self.local_progress();
                let buffered: u64 = self.msg_tables.iter().map(|t| t.len() as u64).sum();
                let _ = self.coord.send(ToCoord::ProbeReply {
                    worker: self.rt.id,
                    id,
                    progress,
                    contributing,
                    nonzero: self.nonzero as u64,
                    buffered,
                });
                Flow::Continue
            }
            ToWorker::SnapshotBegin { seq } => {
                self.begin_snapshot(seq);
                Flow::Continue
            }
            ToWorker::Marker { seq, from } => {
                self.on_marker(seq, from);
                Flow::Continue
            }
            ToWorker::StopUpdates => {
                let now = Instant::now();
                for w in 0..self.rt.workers {
                    if w != self.rt.id {
                        self.send_flush(w, now, true);
                    }
                }
                self.stopping = true;
                let _ = self.coord.send(ToCoord::Stopped { worker: self.rt.id });
                Flow::Continue
            }
            ToWorker::Finish | ToWorker::Halt => Flow::Exit,
            ToWorker::RunStep | ToWorker::EndOfStep { .. } => Flow::Continue,
        }
    }

    fn update_chunk(&mut self) -> bool {
        if self.nonzero == 0 {
            return false;
        }
        let mut performed = 0u64;
        match self.rt.mode {
            Mode::AsyncRoundRobin => {
                let len = self.table.len();
                for _ in 0..len.min(CHUNK) {
                    let i = self.cursor;
                    self.cursor = (self.cursor + 1) % len;
                    if self.update_index(i) {
                        performed += 1;
                    }
                }
            }
            Mode::AsyncPriority => {
                if self.batch.is_empty() {
                    self.batch =
                        extract_priority_batch(&self.table, self.rt.queue_fraction, &mut self.rng)
                            .into();
                }
                for _ in 0..CHUNK {
                    let Some(vid) = self.batch.pop_front() else { break };
                    if let Some(i) = self.table.index_of(vid) {
                        if self.update_index(i) {
                            performed += 1;
                        }
                    }
                }
            }
            Mode::Sync => unreachable!("sync mode does not run the async loop"),
        }
        performed > 0
    }

    /// Updates the entry at table position `i` if its delta is pending.
    /// Returns whether an update was performed.
    fn update_index(&mut self, i: usize) -> bool {
        let kernel = &self.rt.kernel;
        let entry = &mut self.table.entries_mut()[i];
        if entry.delta == *kernel.zero() {
            return false;
        }
        let mut msgs = std::mem::take(&mut self.out_buf);
        msgs.clear();
        update_into(entry, kernel, &mut msgs);
        self.nonzero -= 1;
        self.stats.updates += 1;
        self.shared.updates.fetch_add(1, Ordering::Relaxed);
        for m in msgs.drain(..) {
            self.route_message(m, false);
        }
        self.out_buf = msgs;
        true
    }

    /// Sends a message towards its owner: short-circuit into the local
    /// table, or buffer for the destination worker. In sync mode even
    /// local messages are buffered so they only land after the barrier.
    fn route_message(&mut self, m: DeltaMessage<V>, buffer_local: bool) {
        let w = route(&m, self.rt.workers);
        if w == self.rt.id && !buffer_local {
            self.stats.messages_local += 1;
            self.deliver_local(m);
        } else {
            self.msg_tables[w].buffer(m, &self.rt.kernel);
            if self.msg_tables[w].len() >= self.rt.size_cap && w != self.rt.id {
                self.send_flush(w, Instant::now(), true);
            }
        }
    }

    fn deliver_local(&mut self, m: DeltaMessage<V>) {
        let kernel = &self.rt.kernel;
        match self.table.get_mut(m.dest) {
            None => {
                self.stats.routing_errors += 1;
                self.shared.routing_errors.fetch_add(1, Ordering::Relaxed);
            }
            Some(entry) => {
                let was = entry.delta != *kernel.zero();
                receive(entry, m.value, kernel);
                let now_nonzero = entry.delta != *kernel.zero();
                match (was, now_nonzero) {
                    (false, true) => self.nonzero += 1,
                    (true, false) => self.nonzero -= 1,
                    _ => {}
                }
            }
        }
    }

    fn send_flush(&mut self, w: usize, now: Instant, force: bool) {
        let out = if force {
            self.msg_tables[w].force_flush(now)
        } else {
            self.msg_tables[w].flush(now, self.rt.flush_timeout)
        };
        if out.is_empty() {
            return;
        }
        self.shared.sent.fetch_add(out.len() as u64, Ordering::Relaxed);
        self.stats.messages_sent += out.len() as u64;
        let _ = self.peers[w].send(ToWorker::Deltas { from: self.rt.id, batch: out });
    }

    /// Pushes one progress sample per crossed quantum boundary, so
    /// termination checks line up with update counts instead of wall
    /// clock.
    fn emit_quantum_samples(&mut self) {
        let Some(quantum) = self.rt.term_quantum else { return };
        while self.stats.updates >= self.next_quantum_mark {
            self.quantum_seq += 1;
            self.next_quantum_mark = self.next_quantum_mark.saturating_add(quantum);
            let (progress, contributing) = self.local_progress();
            let buffered: u64 = self.msg_tables.iter().map(|t| t.len() as u64).sum();
            let _ = self.coord.send(ToCoord::QuantumSample {
                worker: self.rt.id,
                seq: self.quantum_seq,
                progress,
                contributing,
                nonzero: self.nonzero as u64,
                buffered,
            });
        }
    }

    fn local_progress(&self) -> (f64, u64) {
        let kernel = &self.rt.kernel;
        let mut sum = 0.0;
        let mut contributing = 0u64;
        for e in self.table.entries() {
            let p = kernel.progress_of(&kernel.accumulate(&e.value, &e.delta));
            if p != 0.0 {
                contributing += 1;
            }
            sum += p;
        }
        (sum, contributing)
    }

    // ----- snapshots ----------------------------------------------------

    fn begin_snapshot(&mut self, seq: u64) {
        if self.snap.as_ref().is_some_and(|s| s.seq >= seq) {
            return;
        }
        let Some(root) = self.rt.checkpoint_root.clone() else {
            let _ = self.coord.send(ToCoord::SnapshotDone { worker: self.rt.id, seq, ok: false });
            return;
        };
        let dir = checkpoint::staging_dir(&root, seq);
        // First push everything buffered onto the channels, then mark
        // the cut: per-sender FIFO guarantees peers see our below-cut
        // messages before our marker.
        let now = Instant::now();
        for w in 0..self.rt.workers {
            if w != self.rt.id {
                self.send_flush(w, now, true);
            }
        }
        for (w, peer) in self.peers.iter().enumerate() {
            if w != self.rt.id {
                let _ = peer.send(ToWorker::Marker { seq, from: self.rt.id });
            }
        }
        let mut ok = true;
        if let Err(e) = checkpoint::write_state(&dir, self.rt.id, self.table.entries()) {
            log::warn!("worker {}: snapshot state write failed: {e}", self.rt.id);
            ok = false;
        }
        let pending = match PendingWriter::create(&dir, self.rt.id) {
            Ok(w) => Some(w),
            Err(e) => {
                log::warn!("worker {}: snapshot pending file failed: {e}", self.rt.id);
                ok = false;
                None
            }
        };
        let mut awaiting = vec![true; self.rt.workers];
        awaiting[self.rt.id] = false;
        let awaiting_count = self.rt.workers - 1;
        self.snap = Some(SnapProgress { seq, awaiting, awaiting_count, pending, ok });
        self.maybe_finish_snapshot();
    }

    fn on_marker(&mut self, seq: u64, from: usize) {
        // A marker can overtake the coordinator's own snapshot request;
        // the first sign of a snapshot triggers the local cut, and the
        // channel from that peer is then empty above the cut.
        if self.snap.as_ref().map_or(true, |s| s.seq < seq) {
            self.begin_snapshot(seq);
        }
        if let Some(snap) = &mut self.snap {
            if snap.seq == seq && snap.awaiting[from] {
                snap.awaiting[from] = false;
                snap.awaiting_count -= 1;
            }
        }
        self.maybe_finish_snapshot();
    }

    fn maybe_finish_snapshot(&mut self) {
        if self.snap.as_ref().is_some_and(|s| s.awaiting_count == 0) {
            let snap = self.snap.take().expect("snapshot in progress");
            let ok = snap.ok
                && match snap.pending {
                    Some(writer) => writer.finish().is_ok(),
                    None => false,
                };
            let _ = self.coord.send(ToCoord::SnapshotDone { worker: self.rt.id, seq: snap.seq, ok });
        }
    }

    // ----- synchronous mode ----------------------------------------------

    fn run_sync(mut self) -> (StateTable<V>, WorkerStats) {
        loop {
            match self.rx.recv() {
                Ok(ToWorker::RunStep) => {
                    if matches!(self.run_superstep(), Flow::Exit) {
                        return self.finish();
                    }
                }
                Ok(ToWorker::Finish) | Ok(ToWorker::Halt) => return self.finish(),
                // A fast peer can finish its whole superstep before our
                // RunStep for the same step arrives (broadcasts are not
                // ordered across senders). Its traffic belongs to the
                // upcoming drain; it must neither be dropped nor applied
                // before our own update pass.
                Ok(msg @ ToWorker::Deltas { .. }) | Ok(msg @ ToWorker::EndOfStep { .. }) => {
                    self.carry.push_back(msg)
                }
                Ok(_) => {}
                Err(_) => return self.finish(),
            }
        }
    }

    fn run_superstep(&mut self) -> Flow {
        let zero = self.rt.kernel.zero().clone();
        let mut changed_any = false;
        // Update pass over the whole partition in vid order; messages
        // are buffered (including our own) so none lands mid-pass.
        for i in 0..self.table.len() {
            if self.table.entries()[i].delta == zero {
                continue;
            }
            let kernel = &self.rt.kernel;
            let entry = &mut self.table.entries_mut()[i];
            let mut msgs = std::mem::take(&mut self.out_buf);
            msgs.clear();
            changed_any |= update_into(entry, kernel, &mut msgs);
            self.nonzero -= 1;
            self.stats.updates += 1;
            self.shared.updates.fetch_add(1, Ordering::Relaxed);
            for m in msgs.drain(..) {
                self.route_message(m, true);
            }
            self.out_buf = msgs;
        }

        // Delivery phase: local messages apply now, remote ones go out
        // followed by per-peer message counts.
        let now = Instant::now();
        let own = self.msg_tables[self.rt.id].force_flush(now);
        for m in own {
            self.stats.messages_local += 1;
            self.deliver_local(m);
        }
        let mut sent_total = 0u64;
        for w in 0..self.rt.workers {
            if w == self.rt.id {
                continue;
            }
            let out = self.msg_tables[w].force_flush(now);
            let count = out.len() as u64;
            sent_total += count;
            if !out.is_empty() {
                self.shared.sent.fetch_add(count, Ordering::Relaxed);
                self.stats.messages_sent += count;
                let _ = self.peers[w].send(ToWorker::Deltas { from: self.rt.id, batch: out });
            }
            let _ = self.peers[w].send(ToWorker::EndOfStep { from: self.rt.id, count });
        }

        // Barrier: consume exactly what every peer sent this superstep.
        let mut expected: Vec<Option<u64>> = vec![None; self.rt.workers];
        expected[self.rt.id] = Some(0);
        let mut received = vec![0u64; self.rt.workers];
        loop {
            let done = expected
                .iter()
                .enumerate()
                .all(|(w, e)| e.is_some_and(|count| received[w] >= count));
            if done {
                break;
            }
            let msg = match self.carry.pop_front() {
                Some(msg) => msg,
                None => match self.rx.recv() {
                    Ok(msg) => msg,
                    Err(_) => return Flow::Exit,
                },
            };
            match msg {
                ToWorker::Deltas { from, batch } => {
                    received[from] += batch.len() as u64;
                    for m in batch {
                        self.shared.delivered.fetch_add(1, Ordering::Relaxed);
                        self.deliver_local(m);
                    }
                }
                ToWorker::EndOfStep { from, count } => {
                    expected[from] = Some(count);
                }
                ToWorker::Finish | ToWorker::Halt => return Flow::Exit,
                _ => {}
            }
        }

        let (progress, contributing) = self.local_progress();
        let _ = self.coord.send(ToCoord::StepDone {
            worker: self.rt.id,
            progress,
            contributing,
            nonzero: self.nonzero as u64,
            changed: changed_any,
            sent: sent_total,
        });
        Flow::Continue
    }
}
