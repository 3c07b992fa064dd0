//! In-process rank runtime with an MPI-like communication contract.
//!
//! Every rank runs on its own worker thread and talks to the others only
//! through [`RankCtx`]: non-blocking tagged sends, blocking tagged receives
//! and a small set of collectives built on top of them. Messages between a
//! pair of ranks are delivered in send order. Collectives must be entered by
//! all ranks in the same program order; reductions always combine rank
//! contributions in ascending rank order, so results are bitwise reproducible
//! for a fixed rank count.
//!
//! A receive that waits longer than the configured timeout reports a
//! deadlock naming every rank blocked at that moment.

mod partition;

pub use partition::Partition;

use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RuntimeError};

pub type Tag = u64;

/// Tags at or above this value are reserved for collectives.
pub const COLLECTIVE_TAG_BASE: Tag = 1 << 62;

const POLL_INTERVAL: Duration = Duration::from_millis(10);

/// Message body: an index array and a value array, either of which may be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Payload {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Payload {
    pub fn from_indices(indices: Vec<usize>) -> Self {
        Self {
            indices,
            values: Vec::new(),
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            indices: Vec::new(),
            values,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty() && self.values.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        ((self.indices.len() + self.values.len()) * 8) as u64
    }
}

struct Envelope {
    source: usize,
    tag: Tag,
    payload: Payload,
}

/// Per-rank communication counters. Self-addressed data never counts as a message.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    pub messages: u64,
    pub bytes: u64,
    pub collectives: u64,
    pub allreduces: u64,
}

impl CommStats {
    pub fn since(&self, earlier: &CommStats) -> CommStats {
        CommStats {
            messages: self.messages - earlier.messages,
            bytes: self.bytes - earlier.bytes,
            collectives: self.collectives - earlier.collectives,
            allreduces: self.allreduces - earlier.allreduces,
        }
    }

    pub fn merged(&self, other: &CommStats) -> CommStats {
        CommStats {
            messages: self.messages + other.messages,
            bytes: self.bytes + other.bytes,
            collectives: self.collectives + other.collectives,
            allreduces: self.allreduces + other.allreduces,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    /// How long a receive may block before it is reported as a deadlock.
    pub timeout: Duration,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
        }
    }
}

struct Shared {
    abort: AtomicBool,
    blocked: Mutex<Vec<bool>>,
    timeout: Duration,
}

/// A rank's handle on the runtime.
pub struct RankCtx {
    rank: usize,
    nranks: usize,
    outboxes: Vec<Sender<Envelope>>,
    inbox: Receiver<Envelope>,
    pending: RefCell<VecDeque<Envelope>>,
    coll_seq: Cell<u64>,
    stats: Cell<CommStats>,
    shared: Arc<Shared>,
}

/// A collective exchange whose sends are in flight.
#[must_use = "a started exchange must be completed on every rank"]
pub struct PendingAlltoallv {
    tag: Tag,
    own: Option<Payload>,
}

impl PendingAlltoallv {
    /// Blocks until every rank's chunk for this rank has arrived; chunk `s`
    /// of the result came from rank `s`.
    pub fn complete(mut self, ctx: &RankCtx) -> Result<Vec<Payload>> {
        let mut out = Vec::with_capacity(ctx.nranks);
        for s in 0..ctx.nranks {
            if s == ctx.rank {
                out.push(self.own.take().unwrap_or_default());
            } else {
                out.push(ctx.recv_raw(s, self.tag)?);
            }
        }
        Ok(out)
    }
}

impl RankCtx {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nranks(&self) -> usize {
        self.nranks
    }

    /// Snapshot of this rank's counters.
    pub fn stats(&self) -> CommStats {
        self.stats.get()
    }

    fn bump(&self, f: impl FnOnce(&mut CommStats)) {
        let mut s = self.stats.get();
        f(&mut s);
        self.stats.set(s);
    }

    fn check_peer(&self, peer: usize) -> Result<()> {
        if peer >= self.nranks {
            return Err(Error::DimensionMismatch {
                op: "rank index",
                expected: self.nranks,
                got: peer,
            });
        }
        Ok(())
    }

    fn send_raw(&self, dest: usize, tag: Tag, payload: Payload) -> Result<()> {
        if dest == self.rank {
            self.pending.borrow_mut().push_back(Envelope {
                source: self.rank,
                tag,
                payload,
            });
            return Ok(());
        }
        let bytes = payload.bytes();
        self.outboxes[dest]
            .send(Envelope {
                source: self.rank,
                tag,
                payload,
            })
            .map_err(|_| RuntimeError::Disconnected {
                rank: self.rank,
                peer: dest,
            })?;
        self.bump(|s| {
            s.messages += 1;
            s.bytes += bytes;
        });
        Ok(())
    }

    fn set_blocked(&self, flag: bool) {
        if let Ok(mut b) = self.shared.blocked.lock() {
            b[self.rank] = flag;
        }
    }

    fn recv_raw(&self, source: usize, tag: Tag) -> Result<Payload> {
        {
            let mut pending = self.pending.borrow_mut();
            if let Some(pos) = pending.iter().position(|e| e.source == source && e.tag == tag) {
                return Ok(pending.remove(pos).expect("position is valid").payload);
            }
        }
        let start = Instant::now();
        self.set_blocked(true);
        let result = loop {
            if self.shared.abort.load(Ordering::SeqCst) {
                break Err(RuntimeError::Aborted { rank: self.rank }.into());
            }
            match self.inbox.recv_timeout(POLL_INTERVAL) {
                Ok(env) if env.source == source && env.tag == tag => break Ok(env.payload),
                Ok(env) => self.pending.borrow_mut().push_back(env),
                Err(RecvTimeoutError::Timeout) => {
                    if start.elapsed() >= self.shared.timeout {
                        let ranks = self
                            .shared
                            .blocked
                            .lock()
                            .map(|b| (0..b.len()).filter(|&r| b[r]).collect())
                            .unwrap_or_else(|_| vec![self.rank]);
                        self.shared.abort.store(true, Ordering::SeqCst);
                        break Err(RuntimeError::Deadlock { ranks }.into());
                    }
                }
                Err(RecvTimeoutError::Disconnected) => {
                    break Err(RuntimeError::Disconnected {
                        rank: self.rank,
                        peer: source,
                    }
                    .into())
                }
            }
        };
        self.set_blocked(false);
        result
    }

    /// Non-blocking point-to-point send.
    pub fn send(&self, dest: usize, tag: Tag, payload: Payload) -> Result<()> {
        assert!(tag < COLLECTIVE_TAG_BASE, "tag {tag} is reserved for collectives");
        self.check_peer(dest)?;
        self.send_raw(dest, tag, payload)
    }

    /// Blocking receive of the oldest message from `source` carrying `tag`.
    pub fn recv(&self, source: usize, tag: Tag) -> Result<Payload> {
        assert!(tag < COLLECTIVE_TAG_BASE, "tag {tag} is reserved for collectives");
        self.check_peer(source)?;
        self.recv_raw(source, tag)
    }

    /// Sends every `(dest, payload)` pair, then receives one message from each
    /// rank in `sources` (in that order).
    pub fn p2p_exchange(
        &self,
        tag: Tag,
        sends: Vec<(usize, Payload)>,
        sources: &[usize],
    ) -> Result<Vec<Payload>> {
        for (dest, payload) in sends {
            self.send(dest, tag, payload)?;
        }
        sources.iter().map(|&s| self.recv(s, tag)).collect()
    }

    fn next_collective_tag(&self) -> Tag {
        let seq = self.coll_seq.get();
        self.coll_seq.set(seq + 1);
        self.bump(|s| s.collectives += 1);
        COLLECTIVE_TAG_BASE + seq
    }

    /// Every rank contributes one payload; all ranks receive all payloads in rank order.
    pub fn allgather(&self, local: Payload) -> Result<Vec<Payload>> {
        let tag = self.next_collective_tag();
        for dest in (0..self.nranks).filter(|&d| d != self.rank) {
            self.send_raw(dest, tag, local.clone())?;
        }
        let mut own = Some(local);
        (0..self.nranks)
            .map(|s| {
                if s == self.rank {
                    Ok(own.take().expect("own chunk used once"))
                } else {
                    self.recv_raw(s, tag)
                }
            })
            .collect()
    }

    pub fn allgather_f64(&self, local: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .allgather(Payload::from_values(local.to_vec()))?
            .into_iter()
            .flat_map(|p| p.values)
            .collect())
    }

    pub fn allgather_usize(&self, local: &[usize]) -> Result<Vec<usize>> {
        Ok(self
            .allgather(Payload::from_indices(local.to_vec()))?
            .into_iter()
            .flat_map(|p| p.indices)
            .collect())
    }

    /// Starts an all-to-all exchange: chunk `r` of `chunks` goes to rank `r`.
    pub fn start_alltoallv(&self, chunks: Vec<Payload>) -> Result<PendingAlltoallv> {
        if chunks.len() != self.nranks {
            return Err(Error::DimensionMismatch {
                op: "alltoallv chunks",
                expected: self.nranks,
                got: chunks.len(),
            });
        }
        let tag = self.next_collective_tag();
        let mut own = None;
        for (dest, chunk) in chunks.into_iter().enumerate() {
            if dest == self.rank {
                own = Some(chunk);
            } else {
                self.send_raw(dest, tag, chunk)?;
            }
        }
        Ok(PendingAlltoallv { tag, own })
    }

    /// Chunk `r` of rank `s` arrives as chunk `s` on rank `r`.
    pub fn alltoallv(&self, chunks: Vec<Payload>) -> Result<Vec<Payload>> {
        self.start_alltoallv(chunks)?.complete(self)
    }

    /// One count to and from every rank.
    pub fn alltoall_usize(&self, counts: &[usize]) -> Result<Vec<usize>> {
        let chunks = counts.iter().map(|&c| Payload::from_indices(vec![c])).collect();
        self.alltoallv(chunks)?
            .into_iter()
            .enumerate()
            .map(|(s, p)| match p.indices.as_slice() {
                [c] => Ok(*c),
                other => Err(RuntimeError::PayloadSize {
                    peer: s,
                    expected: 1,
                    got: other.len(),
                }
                .into()),
            })
            .collect()
    }

    /// Element-wise global sum, combined in ascending rank order on every rank.
    pub fn allreduce_sum_slice(&self, local: &[f64]) -> Result<Vec<f64>> {
        let parts = self.allgather(Payload::from_values(local.to_vec()))?;
        self.bump(|s| s.allreduces += 1);
        let mut out = parts[0].values.clone();
        for (s, p) in parts.iter().enumerate().skip(1) {
            if p.values.len() != out.len() {
                return Err(RuntimeError::PayloadSize {
                    peer: s,
                    expected: out.len(),
                    got: p.values.len(),
                }
                .into());
            }
            for (o, v) in out.iter_mut().zip(&p.values) {
                *o += v;
            }
        }
        Ok(out)
    }

    pub fn allreduce_sum(&self, x: f64) -> Result<f64> {
        Ok(self.allreduce_sum_slice(&[x])?[0])
    }

    pub fn allreduce_sum_usize(&self, x: usize) -> Result<usize> {
        let parts = self.allgather_usize(&[x])?;
        self.bump(|s| s.allreduces += 1);
        Ok(parts.iter().sum())
    }

    pub fn allreduce_max(&self, x: f64) -> Result<f64> {
        let parts = self.allgather_f64(&[x])?;
        self.bump(|s| s.allreduces += 1);
        Ok(parts.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn barrier(&self) -> Result<()> {
        self.allgather(Payload::default()).map(|_| ())
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs `program` on `nranks` workers and returns the per-rank results in rank order.
///
/// When any rank fails, the remaining ranks are released from blocking
/// receives and the first failure (by rank) is returned. Deadlocks are
/// reported with the set of ranks that were blocked.
pub fn spawn_ranks<T, F>(nranks: usize, cfg: &RuntimeConfig, program: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RankCtx) -> Result<T> + Sync,
{
    if nranks == 0 {
        return Err(RuntimeError::InvalidRankCount(nranks).into());
    }
    let shared = Arc::new(Shared {
        abort: AtomicBool::new(false),
        blocked: Mutex::new(vec![false; nranks]),
        timeout: cfg.timeout,
    });
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..nranks).map(|_| channel::<Envelope>()).unzip();
    let ctxs: Vec<RankCtx> = receivers
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| RankCtx {
            rank,
            nranks,
            outboxes: senders.clone(),
            inbox,
            pending: RefCell::new(VecDeque::new()),
            coll_seq: Cell::new(0),
            stats: Cell::new(CommStats::default()),
            shared: Arc::clone(&shared),
        })
        .collect();
    drop(senders);

    let program = &program;
    let results: Vec<Result<T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ctxs
            .into_iter()
            .map(|ctx| {
                let shared = Arc::clone(&shared);
                scope.spawn(move || {
                    let rank = ctx.rank;
                    let out = match catch_unwind(AssertUnwindSafe(|| program(&ctx))) {
                        Ok(r) => r,
                        Err(p) => Err(RuntimeError::WorkerPanicked {
                            rank,
                            message: panic_message(p.as_ref()),
                        }
                        .into()),
                    };
                    if out.is_err() {
                        shared.abort.store(true, Ordering::SeqCst);
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(rank, h)| {
                h.join().unwrap_or_else(|_| {
                    Err(RuntimeError::WorkerPanicked {
                        rank,
                        message: "worker thread died".into(),
                    }
                    .into())
                })
            })
            .collect()
    });

    if results.iter().all(|r| r.is_ok()) {
        return Ok(results.into_iter().map(|r| r.ok().unwrap()).collect());
    }
    let mut deadlocked: Vec<usize> = Vec::new();
    let mut first = None;
    let mut aborted = None;
    for r in results {
        match r {
            Ok(_) => {}
            Err(Error::Runtime(RuntimeError::Deadlock { ranks })) => deadlocked.extend(ranks),
            Err(e @ Error::Runtime(RuntimeError::Aborted { .. })) => {
                aborted.get_or_insert(e);
            }
            Err(e) => {
                first.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first {
        return Err(e);
    }
    if !deadlocked.is_empty() {
        deadlocked.sort_unstable();
        deadlocked.dedup();
        return Err(RuntimeError::Deadlock { ranks: deadlocked }.into());
    }
    Err(aborted.expect("at least one rank failed"))
}
