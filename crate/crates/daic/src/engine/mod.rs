//! The parallel runtime: one coordinator plus a set of workers, each
//! owning a disjoint partition of the vertex state.
//!
//! Three execution modes share the same kernels and transport:
//!
//! - `Sync`: lock-step supersteps with a global barrier and complete
//!   message delivery between them.
//! - `AsyncRoundRobin`: every worker loops over its own partition and
//!   applies incoming deltas whenever they arrive; no barriers.
//! - `AsyncPriority`: like round-robin, but each worker repeatedly
//!   extracts the locally highest-priority batch of vertices and
//!   updates those first.
//!
//! Termination is coordinator-driven. Workers never block on the
//! decision: they answer progress probes and keep computing. For
//! kernels that quiesce exactly (min/max, counters) the coordinator
//! instead detects global quiescence from matching sent/delivered
//! counters observed stable across two probe rounds.

pub mod checkpoint;
pub mod state;
mod worker;

use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use state::{
    build_tables, extract_priority_batch, receive, update, update_into, StateEntry, StateTable,
};

use crate::graph::{Graph, VertexId};
use crate::kernel::{Direction, Kernel, Value};
use crate::transport::DEFAULT_SIZE_CAP;
use worker::{Shared, ToCoord, ToWorker, WorkerRuntime, WorkerStats};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error("update guard tripped after {updates} updates (diverging computation?)")]
    UpdateGuard { updates: u64 },
    #[error("recovery failed: {0}")]
    Recover(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sync,
    AsyncRoundRobin,
    AsyncPriority,
}

impl Mode {
    pub fn is_async(&self) -> bool {
        !matches!(self, Mode::Sync)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Sync => "sync",
            Mode::AsyncRoundRobin => "async_rr",
            Mode::AsyncPriority => "async_pri",
        }
    }
}

/// When to stop.
#[derive(Debug, Clone, Copy)]
pub enum TermPolicy {
    /// Stop when the global progress metric moved less than the
    /// threshold between two consecutive checks.
    ProgressDelta(f64),
    /// Stop at exact quiescence: no pending deltas anywhere and every
    /// sent message delivered. For kernels that reach their fixed point
    /// exactly.
    Quiescence,
}

#[derive(Debug, Clone)]
pub struct CheckpointConfig {
    pub dir: PathBuf,
    pub interval: Duration,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub mode: Mode,
    pub workers: usize,
    /// Fraction of the local table extracted per priority batch.
    pub queue_fraction: f64,
    pub flush_timeout: Duration,
    /// Wall-clock cadence of async termination checks.
    pub term_check_interval: Duration,
    /// Additionally check after this many updates (async modes). Makes
    /// update counts comparable across machines.
    pub term_check_updates: Option<u64>,
    pub termination: TermPolicy,
    pub checkpoint: Option<CheckpointConfig>,
    /// Abort the run after this many updates; `None` means `1e4 * |V|`.
    pub max_updates: Option<u64>,
    pub seed: u64,
    /// Test hook: simulate a crash right after this many snapshots have
    /// been sealed.
    pub halt_after_snapshots: Option<u32>,
}

impl EngineConfig {
    pub fn new(mode: Mode) -> Self {
        EngineConfig {
            mode,
            workers: 1,
            queue_fraction: 0.01,
            flush_timeout: Duration::from_millis(5),
            term_check_interval: Duration::from_millis(100),
            term_check_updates: None,
            termination: TermPolicy::ProgressDelta(1e-9),
            checkpoint: None,
            max_updates: None,
            seed: 0,
            halt_after_snapshots: None,
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        if self.workers < 1 {
            return Err(EngineError::Config("workers must be >= 1".into()));
        }
        if !(self.queue_fraction > 0.0 && self.queue_fraction <= 1.0) {
            return Err(EngineError::Config("queue_fraction must be in (0, 1]".into()));
        }
        if let TermPolicy::ProgressDelta(t) = self.termination {
            if !(t > 0.0) {
                return Err(EngineError::Config("progress threshold must be > 0".into()));
            }
        }
        if self.checkpoint.is_some() && !self.mode.is_async() {
            return Err(EngineError::Config(
                "checkpointing requires an asynchronous mode".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the stats stream: `elapsed_ms,updates,messages,progress`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressSample {
    pub elapsed_ms: u64,
    pub updates: u64,
    pub messages: u64,
    pub progress: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub wall_time: Duration,
    pub total_updates: u64,
    /// Cross-worker messages, counted after aggregation.
    pub messages_sent: u64,
    /// Messages short-circuited into the sender's own table.
    pub messages_local: u64,
    /// Messages folded away by sender-side aggregation.
    pub messages_aggregated_away: u64,
    pub routing_errors: u64,
    pub snapshots_taken: u32,
    pub converged: bool,
    /// True when the run was cut short by the crash-simulation hook.
    pub halted: bool,
    /// Progress samples that moved against the kernel's direction.
    pub monotonicity_violations: u64,
    pub final_progress: f64,
    pub samples: Vec<ProgressSample>,
}

/// Final tables plus run statistics.
#[derive(Debug)]
pub struct RunOutcome<V> {
    pub tables: Vec<StateTable<V>>,
    pub stats: RunStats,
}

impl<V: Value> RunOutcome<V> {
    /// The result vector, ascending by vid. Every vertex reports the
    /// value an update would produce now (`value + pending delta`), so
    /// deltas drained after the stop decision are not lost.
    pub fn final_values(&self, kernel: &Kernel<V>) -> Vec<(VertexId, V)> {
        let mut all: Vec<(VertexId, V)> = self
            .tables
            .iter()
            .flat_map(|t| {
                t.entries().iter().map(|e| (e.vid, kernel.accumulate(&e.value, &e.delta)))
            })
            .collect();
        all.sort_by_key(|&(vid, _)| vid);
        all
    }
}

/// The pure termination rule: sums the per-worker progress reports and
/// stops when the global metric moved less than `threshold` since the
/// previous check.
pub fn check_termination(
    local_progress: &[f64],
    previous_global: f64,
    threshold: f64,
) -> (f64, bool) {
    let global: f64 = local_progress.iter().sum();
    (global, (global - previous_global).abs() < threshold)
}

/// Runs `kernel` over `graph` under `config`.
pub fn run<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    config: &EngineConfig,
) -> Result<RunOutcome<V>, EngineError> {
    run_inner(graph, kernel, config, None)
}

/// Resumes from the most recent snapshot under `root`: state tables and
/// the messages captured in flight are reloaded, then the computation
/// continues asynchronously. Corrupt or absent snapshots are errors; a
/// recovery never silently restarts from scratch.
pub fn recover<V: Value>(
    root: &Path,
    graph: &Graph,
    kernel: &Kernel<V>,
    config: &EngineConfig,
) -> Result<RunOutcome<V>, EngineError> {
    let snap = checkpoint::load_latest::<V>(root, kernel.name())?;
    if snap.entries.len() != graph.vertex_count() {
        return Err(EngineError::Recover(format!(
            "snapshot holds {} vertices, graph has {}",
            snap.entries.len(),
            graph.vertex_count()
        )));
    }
    let mut entries = snap.entries;
    entries.sort_by_key(|&(vid, _, _)| vid);
    let mut tables: Vec<StateTable<V>> =
        (0..config.workers).map(|w| StateTable::new(w, config.workers)).collect();
    let mut last: Option<VertexId> = None;
    for (vid, value, delta) in entries {
        if !graph.contains(vid) {
            return Err(EngineError::Recover(format!("snapshot vertex {vid} not in graph")));
        }
        if last == Some(vid) {
            return Err(EngineError::Recover(format!("duplicate snapshot vertex {vid}")));
        }
        last = Some(vid);
        let data = crate::kernel::VertexData { out_edges: graph.out_edges(vid).to_vec() };
        let priority = kernel.priority_of(&value, &delta);
        let w = (vid.0 % config.workers as u64) as usize;
        tables[w].push(StateEntry { vid, value, delta, priority, data });
    }
    // Re-inject the channel state captured across the cut.
    for m in snap.pending {
        let w = (m.dest.0 % config.workers as u64) as usize;
        match tables[w].get_mut(m.dest) {
            Some(entry) => receive(entry, m.value, kernel),
            None => {
                return Err(EngineError::Recover(format!(
                    "pending message for unknown vertex {}",
                    m.dest
                )))
            }
        }
    }
    run_inner(graph, kernel, config, Some((tables, snap.seq)))
}

enum CoordEnd {
    Finished { converged: bool },
    Halted,
    GuardTripped,
}

struct CoordResult {
    end: CoordEnd,
    samples: Vec<ProgressSample>,
    violations: u64,
    snapshots: u32,
}

fn run_inner<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    config: &EngineConfig,
    preloaded: Option<(Vec<StateTable<V>>, u64)>,
) -> Result<RunOutcome<V>, EngineError> {
    config.validate()?;
    let workers = config.workers;
    let (tables, start_seq) = match preloaded {
        Some((t, seq)) => (t, seq),
        None => (build_tables(graph, kernel, workers), 0),
    };
    let max_updates = config
        .max_updates
        .unwrap_or_else(|| 10_000u64.saturating_mul(graph.vertex_count() as u64))
        .max(1);

    let shared = Arc::new(Shared::default());
    let (coord_tx, coord_rx) = mpsc::channel::<ToCoord>();
    let mut worker_txs = Vec::with_capacity(workers);
    let mut worker_rxs = Vec::with_capacity(workers);
    for _ in 0..workers {
        let (tx, rx) = mpsc::channel::<ToWorker<V>>();
        worker_txs.push(tx);
        worker_rxs.push(rx);
    }

    let start = Instant::now();
    let (result, tables, wstats) = std::thread::scope(|s| {
        let handles: Vec<_> = tables
            .into_iter()
            .zip(worker_rxs)
            .enumerate()
            .map(|(id, (table, rx))| {
                let rt = WorkerRuntime {
                    id,
                    workers,
                    mode: config.mode,
                    kernel: kernel.clone(),
                    queue_fraction: config.queue_fraction,
                    flush_timeout: config.flush_timeout,
                    size_cap: DEFAULT_SIZE_CAP,
                    checkpoint_root: config.checkpoint.as_ref().map(|c| c.dir.clone()),
                    seed: config.seed,
                };
                let peers = worker_txs.clone();
                let coord = coord_tx.clone();
                let shared = Arc::clone(&shared);
                s.spawn(move || worker::worker_main(rt, table, rx, peers, coord, shared))
            })
            .collect();

        let coordinator = Coordinator {
            config,
            direction: kernel.direction(),
            monotone: kernel.has_monotone_progress(),
            kernel_name: kernel.name(),
            vertex_total: graph.vertex_count(),
            workers,
            max_updates,
            shared: &shared,
            coord_rx: &coord_rx,
            worker_txs: &worker_txs,
            start,
            start_seq,
        };
        let result = coordinator.run();
        drop(worker_txs);

        let mut tables = Vec::with_capacity(workers);
        let mut wstats = WorkerStats::default();
        for h in handles {
            let (table, ws) = h.join().expect("worker thread panicked");
            wstats.updates += ws.updates;
            wstats.messages_sent += ws.messages_sent;
            wstats.messages_local += ws.messages_local;
            wstats.aggregated_away += ws.aggregated_away;
            wstats.routing_errors += ws.routing_errors;
            tables.push(table);
        }
        (result, tables, wstats)
    });

    if matches!(result.end, CoordEnd::GuardTripped) {
        return Err(EngineError::UpdateGuard { updates: shared.updates.load(Ordering::Relaxed) });
    }

    let final_progress: f64 = tables
        .iter()
        .flat_map(|t: &StateTable<V>| t.entries())
        .map(|e| kernel.progress_of(&kernel.accumulate(&e.value, &e.delta)))
        .sum();
    let mut samples = result.samples;
    samples.push(ProgressSample {
        elapsed_ms: start.elapsed().as_millis() as u64,
        updates: wstats.updates,
        messages: wstats.messages_sent,
        progress: final_progress,
    });

    let stats = RunStats {
        wall_time: start.elapsed(),
        total_updates: wstats.updates,
        messages_sent: wstats.messages_sent,
        messages_local: wstats.messages_local,
        messages_aggregated_away: wstats.aggregated_away,
        routing_errors: wstats.routing_errors,
        snapshots_taken: result.snapshots,
        converged: matches!(result.end, CoordEnd::Finished { converged: true }),
        halted: matches!(result.end, CoordEnd::Halted),
        monotonicity_violations: result.violations,
        final_progress,
        samples,
    };
    Ok(RunOutcome { tables, stats })
}

struct Coordinator<'a, V> {
    config: &'a EngineConfig,
    direction: Direction,
    monotone: bool,
    kernel_name: &'a str,
    vertex_total: usize,
    workers: usize,
    max_updates: u64,
    shared: &'a Shared,
    coord_rx: &'a mpsc::Receiver<ToCoord>,
    worker_txs: &'a [mpsc::Sender<ToWorker<V>>],
    start: Instant,
    start_seq: u64,
}

struct ProbeAgg {
    id: u64,
    pending: usize,
    progress: f64,
    contributing: u64,
    nonzero: u64,
    buffered: u64,
}

impl<V: Value> Coordinator<'_, V> {
    fn broadcast(&self, f: impl Fn() -> ToWorker<V>) {
        for tx in self.worker_txs {
            let _ = tx.send(f());
        }
    }

    fn run(self) -> CoordResult {
        match self.config.mode {
            Mode::Sync => self.run_sync(),
            _ => self.run_async(),
        }
    }

    /// Records a sample and checks directional monotonicity against the
    /// previous one. Returns the updated `(progress, contributing)`
    /// memo.
    #[allow(clippy::too_many_arguments)]
    fn sample(
        &self,
        samples: &mut Vec<ProgressSample>,
        violations: &mut u64,
        prev: &mut Option<(f64, u64)>,
        progress: f64,
        contributing: u64,
    ) {
        samples.push(ProgressSample {
            elapsed_ms: self.start.elapsed().as_millis() as u64,
            updates: self.shared.updates.load(Ordering::Relaxed),
            messages: self.shared.sent.load(Ordering::Relaxed),
            progress,
        });
        if self.monotone {
            if let Some((p, c)) = *prev {
                let tol = 1e-9 * 1f64.max(p.abs());
                let bad = match self.direction {
                    Direction::Increasing => progress < p - tol,
                    // The metric may only rise while new vertices start
                    // contributing (e.g. first finite distances).
                    Direction::Decreasing => progress > p + tol && contributing <= c,
                };
                if bad {
                    *violations += 1;
                }
            }
        }
        *prev = Some((progress, contributing));
    }

    fn run_sync(self) -> CoordResult {
        let mut samples = Vec::new();
        let mut violations = 0u64;
        let mut prev_sample = None;
        let mut prev_global = f64::INFINITY;
        let end = loop {
            if self.shared.updates.load(Ordering::Relaxed) >= self.max_updates {
                self.broadcast(|| ToWorker::Halt);
                break CoordEnd::GuardTripped;
            }
            self.broadcast(|| ToWorker::RunStep);
            let mut got = 0;
            let mut progress = 0.0;
            let mut contributing = 0u64;
            let mut nonzero = 0u64;
            let mut changed_any = false;
            let mut sent_total = 0u64;
            let mut locals = vec![0.0; self.workers];
            while got < self.workers {
                match self.coord_rx.recv() {
                    Ok(ToCoord::StepDone {
                        worker,
                        progress: p,
                        contributing: c,
                        nonzero: nz,
                        changed,
                        sent,
                    }) => {
                        got += 1;
                        locals[worker] = p;
                        progress += p;
                        contributing += c;
                        nonzero += nz;
                        changed_any |= changed;
                        sent_total += sent;
                    }
                    Ok(_) => {}
                    Err(_) => break,
                }
            }
            self.sample(&mut samples, &mut violations, &mut prev_sample, progress, contributing);
            match self.config.termination {
                TermPolicy::ProgressDelta(threshold) => {
                    let (global, stop) = check_termination(&locals, prev_global, threshold);
                    prev_global = global;
                    if stop {
                        break CoordEnd::Finished { converged: true };
                    }
                }
                TermPolicy::Quiescence => {
                    if sent_total == 0 && !changed_any && nonzero == 0 {
                        break CoordEnd::Finished { converged: true };
                    }
                }
            }
        };
        self.broadcast(|| ToWorker::Finish);
        CoordResult { end, samples, violations, snapshots: 0 }
    }

    fn run_async(self) -> CoordResult {
        let mut samples = Vec::new();
        let mut violations = 0u64;
        let mut prev_sample: Option<(f64, u64)> = None;
        let mut prev_global = f64::INFINITY;
        let mut prev_updates = 0u64;
        let mut probe: Option<ProbeAgg> = None;
        let mut probe_id = 0u64;
        let mut next_probe = self.start;
        let mut updates_at_probe = 0u64;
        let mut quiesce_mark: Option<(u64, u64)> = None;

        let mut snapshots = 0u32;
        let mut seq = self.start_seq;
        let mut snap_pending: Option<(u64, usize, bool)> = None;
        let mut next_snapshot =
            self.config.checkpoint.as_ref().map(|c| self.start + c.interval);

        let end = 'outer: loop {
            let now = Instant::now();
            if self.shared.updates.load(Ordering::Relaxed) >= self.max_updates {
                self.broadcast(|| ToWorker::Halt);
                break CoordEnd::GuardTripped;
            }

            // Launch a probe round by time or by update quantum.
            if probe.is_none() {
                let updates_now = self.shared.updates.load(Ordering::Relaxed);
                let due_time = now >= next_probe;
                let due_units = self
                    .config
                    .term_check_updates
                    .is_some_and(|q| updates_now.saturating_sub(updates_at_probe) >= q);
                if due_time || due_units {
                    probe_id += 1;
                    probe = Some(ProbeAgg {
                        id: probe_id,
                        pending: self.workers,
                        progress: 0.0,
                        contributing: 0,
                        nonzero: 0,
                        buffered: 0,
                    });
                    updates_at_probe = updates_now;
                    self.broadcast(|| ToWorker::ProgressProbe { id: probe_id });
                }
            }

            // Start a snapshot when due and none is in flight.
            if let (Some(cfg), Some(due)) = (&self.config.checkpoint, next_snapshot) {
                if now >= due && snap_pending.is_none() {
                    seq += 1;
                    let staging = checkpoint::staging_dir(&cfg.dir, seq);
                    match std::fs::create_dir_all(&staging) {
                        Ok(()) => {
                            snap_pending = Some((seq, self.workers, true));
                            self.broadcast(|| ToWorker::SnapshotBegin { seq });
                        }
                        Err(e) => {
                            log::warn!("cannot stage snapshot {seq}: {e}");
                        }
                    }
                    next_snapshot = Some(now + cfg.interval);
                }
            }

            // With a work quantum configured the next probe is due
            // after a counter crossing, not a timer; poll finely so the
            // window does not silently grow by a full poll interval of
            // work.
            let poll = if probe.is_none() && self.config.term_check_updates.is_some() {
                Duration::from_micros(100)
            } else {
                Duration::from_millis(1)
            };
            match self.coord_rx.recv_timeout(poll) {
                Ok(ToCoord::ProbeReply {
                    id,
                    progress,
                    contributing,
                    nonzero,
                    buffered,
                    ..
                }) => {
                    let Some(agg) = &mut probe else { continue };
                    if agg.id != id {
                        continue;
                    }
                    agg.pending -= 1;
                    agg.progress += progress;
                    agg.contributing += contributing;
                    agg.nonzero += nonzero;
                    agg.buffered += buffered;
                    if agg.pending > 0 {
                        continue;
                    }
                    let agg = probe.take().expect("probe in flight");
                    self.sample(
                        &mut samples,
                        &mut violations,
                        &mut prev_sample,
                        agg.progress,
                        agg.contributing,
                    );
                    match self.config.termination {
                        TermPolicy::ProgressDelta(threshold) => {
                            let updates_now = self.shared.updates.load(Ordering::Relaxed);
                            let worked = updates_now.saturating_sub(prev_updates);
                            let (global, mut stop) =
                                check_termination(&[agg.progress], prev_global, threshold);
                            // Probe windows are paced by wall clock and
                            // probe latency, so the raw delta depends on
                            // how much work the window happened to hold.
                            // With a work quantum configured, judge the
                            // progress rate per quantum instead.
                            if let Some(q) = self.config.term_check_updates {
                                if worked > 0 {
                                    let rate = (global - prev_global).abs()
                                        * (q as f64 / worked as f64);
                                    stop = prev_global.is_finite() && rate < threshold;
                                }
                            }
                            // A starved window (no updates at all) says
                            // nothing about convergence unless the
                            // system is drained.
                            let quiet = agg.nonzero == 0 && agg.buffered == 0;
                            if worked == 0 && !quiet {
                                stop = false;
                            }
                            prev_global = global;
                            prev_updates = updates_now;
                            if stop {
                                break CoordEnd::Finished { converged: true };
                            }
                            next_probe = Instant::now() + self.config.term_check_interval;
                        }
                        TermPolicy::Quiescence => {
                            let sent = self.shared.sent.load(Ordering::Relaxed);
                            let delivered = self.shared.delivered.load(Ordering::Relaxed);
                            let quiet =
                                agg.nonzero == 0 && agg.buffered == 0 && sent == delivered;
                            if quiet {
                                // Confirm with a second probe round: if
                                // the counters did not move while every
                                // worker passed a loop boundary, nothing
                                // is in flight anywhere.
                                if quiesce_mark == Some((sent, delivered)) {
                                    break CoordEnd::Finished { converged: true };
                                }
                                quiesce_mark = Some((sent, delivered));
                                next_probe = Instant::now();
                            } else {
                                quiesce_mark = None;
                                next_probe = Instant::now() + self.config.term_check_interval;
                            }
                        }
                    }
                }
                Ok(ToCoord::SnapshotDone { seq: done_seq, ok, .. }) => {
                    let Some((cur, remaining, all_ok)) = &mut snap_pending else { continue };
                    if *cur != done_seq {
                        continue;
                    }
                    *remaining -= 1;
                    *all_ok &= ok;
                    if *remaining > 0 {
                        continue;
                    }
                    let (done_seq, _, all_ok) = snap_pending.take().expect("snapshot in flight");
                    let cfg = self.config.checkpoint.as_ref().expect("checkpoint configured");
                    let staging = checkpoint::staging_dir(&cfg.dir, done_seq);
                    if all_ok {
                        let target = checkpoint::snapshot_dir(&cfg.dir, done_seq);
                        let sealed = checkpoint::write_meta(
                            &staging,
                            done_seq,
                            self.kernel_name,
                            self.workers,
                            self.vertex_total,
                        )
                        .and_then(|()| std::fs::rename(&staging, &target));
                        match sealed {
                            Ok(()) => {
                                snapshots += 1;
                                log::info!("snapshot {done_seq} sealed");
                                if self
                                    .config
                                    .halt_after_snapshots
                                    .is_some_and(|n| snapshots >= n)
                                {
                                    self.broadcast(|| ToWorker::Halt);
                                    break 'outer CoordEnd::Halted;
                                }
                            }
                            Err(e) => {
                                log::warn!("sealing snapshot {done_seq} failed: {e}");
                                let _ = std::fs::remove_dir_all(&staging);
                            }
                        }
                    } else {
                        log::warn!("snapshot {done_seq} aborted");
                        let _ = std::fs::remove_dir_all(&staging);
                    }
                }
                Ok(_) => {}
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    break CoordEnd::Finished { converged: false };
                }
            }
        };

        match end {
            CoordEnd::Finished { .. } => {
                // Stop updating, drain in-flight messages into the
                // tables, then release the workers.
                self.broadcast(|| ToWorker::StopUpdates);
                let mut stopped = 0;
                while stopped < self.workers {
                    match self.coord_rx.recv() {
                        Ok(ToCoord::Stopped { .. }) => stopped += 1,
                        Ok(_) => {}
                        Err(_) => break,
                    }
                }
                let drain_deadline = Instant::now() + Duration::from_secs(10);
                while self.shared.sent.load(Ordering::Relaxed)
                    != self.shared.delivered.load(Ordering::Relaxed)
                    && Instant::now() < drain_deadline
                {
                    std::thread::sleep(Duration::from_micros(200));
                }
                self.broadcast(|| ToWorker::Finish);
            }
            CoordEnd::Halted | CoordEnd::GuardTripped => {}
        }
        CoordResult { end, samples, violations, snapshots }
    }

}
