//! Simulated multi-rank PGAS runtime.
//!
//! A [`World`] owns the partitioned global memory (the backing stores of all
//! distributed objects) and executes a program once per rank, each rank on
//! its own OS thread. Ranks interact only through runtime operations:
//!
//! - **one-sided puts** — the sender deposits a message addressed to the
//!   destination's copy of an object; the value is visible no later than the
//!   next collective.
//! - **asynchronous sends** — payloads are staged in per-(object,
//!   destination) coalescing buffers and leave as one batch message when the
//!   buffer reaches its capacity, or when a collective flushes it.
//! - **`sync`** — flushes every buffer, delivers and applies every in-flight
//!   message, then releases all ranks together (a barrier).
//! - **`allreduce`** — blocking reduction of one value per rank; also a
//!   delivery point.
//!
//! Under [`Scheduler::Deterministic`], messages are applied at collectives in
//! a canonical order (queue pushes per source in send order, array puts by
//! index/value), so two runs of the same program produce identical counters
//! and identical per-rank states, independent of thread interleaving. Under
//! [`Scheduler::Free`], queue pushes are applied eagerly by the sending
//! thread and array puts are applied at the next collective in arrival order
//! — any point between send and the next sync, as the contract allows.
//!
//! Payloads use a fixed little-endian encoding and every batch carries its
//! element count: array entries are 16 bytes (u64 index, i64 value), queue
//! elements are 24 bytes (id, owner, local index as u64 each).
//!
//! [`MessageCounters`] track payload point-to-point traffic (messages,
//! elements, bytes, buffer flushes). Collective control traffic is not
//! counted, which keeps the one-sided vs async comparison exact: a one-sided
//! remote write is always one message per element, a coalesced batch is one
//! message per flush.

use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typechain::{CommMode, ResolvedAttributes, DEFAULT_ASYNC_CAPACITY};

/// How rank execution and message application are ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheduler {
    /// Reproducible: delivery happens at collectives in a canonical order.
    #[serde(rename = "det")]
    Deterministic,
    /// Delivery may happen at any point between send and the next sync.
    #[serde(rename = "free")]
    Free,
}

impl std::fmt::Display for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheduler::Deterministic => "det",
            Scheduler::Free => "free",
        })
    }
}

impl std::str::FromStr for Scheduler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(Scheduler::Deterministic),
            "free" => Ok(Scheduler::Free),
            other => Err(Error::Config(format!("unknown scheduler `{other}` (use det|free)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RuntimeConfig {
    pub num_ranks: usize,
    pub scheduler: Scheduler,
    /// Coalescing capacity used when a chain says `async` without an
    /// argument.
    pub default_async_capacity: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            num_ranks: 1,
            scheduler: Scheduler::Deterministic,
            default_async_capacity: DEFAULT_ASYNC_CAPACITY,
        }
    }
}

impl RuntimeConfig {
    pub fn new(num_ranks: usize, scheduler: Scheduler) -> Self {
        RuntimeConfig { num_ranks, scheduler, ..Default::default() }
    }
}

/// Communication behavior of one variable, extracted from its resolved
/// chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CommSpec {
    pub mode: CommMode,
    pub capacity: usize,
}

impl CommSpec {
    pub fn one_sided() -> Self {
        CommSpec { mode: CommMode::OneSided, capacity: DEFAULT_ASYNC_CAPACITY }
    }

    pub fn buffered(capacity: usize) -> Self {
        CommSpec { mode: CommMode::Async, capacity }
    }

    pub fn from_resolved(resolved: &ResolvedAttributes) -> Self {
        CommSpec { mode: resolved.comm_mode, capacity: resolved.async_capacity }
    }
}

/// Payload traffic sent by one rank (or aggregated over all ranks).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounters {
    pub messages_sent: u64,
    pub elements_sent: u64,
    pub bytes_sent: u64,
    /// Coalescing-buffer flushes (capacity-triggered and collective-forced).
    pub flushes: u64,
}

impl MessageCounters {
    fn absorb(&mut self, other: &MessageCounters) {
        self.messages_sent += other.messages_sent;
        self.elements_sent += other.elements_sent;
        self.bytes_sent += other.bytes_sent;
        self.flushes += other.flushes;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankCounters {
    pub rank: usize,
    #[serde(flatten)]
    pub counters: MessageCounters,
}

/// Aggregated outcome of one `World::run`, serializable to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ranks: usize,
    /// Caller-provided label ("onesided", "p2p", ...).
    pub mode: String,
    pub messages_sent: u64,
    pub elements_sent: u64,
    pub bytes_sent: u64,
    pub flushes: u64,
    pub wall_time_seconds: f64,
    pub per_rank: Vec<RankCounters>,
}

impl RunReport {
    /// Copy with wall-time zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> RunReport {
        RunReport { wall_time_seconds: 0.0, ..self.clone() }
    }
}

/// Transported message kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MessageKind {
    /// A single remotely written element.
    OneSidedPut,
    /// A flushed coalescing buffer: `count` elements in one message.
    CoalescedBatch,
    /// Reserved for reduction contributions; allreduce values currently
    /// travel through the collective state and are not counted as traffic.
    ReduceContrib,
}

/// Handle to a distributed object registered in a `World`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(usize);

/// Queue elements travel as fixed 24-byte triples (3 x u64 little-endian).
pub(crate) type QueueElem = [u64; 3];

const ARRAY_ENTRY_BYTES: usize = 16; // u64 index + i64 value, little-endian
const QUEUE_ELEM_BYTES: usize = 24;

/// Reductions supported by `allreduce`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
}

/// Cumulative per-queue accounting used by conservation checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueueConservation {
    pub pushed: u64,
    pub popped: u64,
    pub cleared: u64,
    pub remaining: u64,
}

impl QueueConservation {
    /// pushed - popped - cleared == remaining
    pub fn balanced(&self) -> bool {
        self.pushed == self.popped + self.cleared + self.remaining
    }
}

// ---------------------------------------------------------------------------
// internal state

#[derive(Clone, Copy, Debug, Default)]
struct QueueTotals {
    pushed: u64,
    popped: u64,
    cleared: u64,
}

enum Store {
    Array { parts: Vec<Mutex<Vec<i64>>> },
    Queue { fifos: Vec<Mutex<VecDeque<QueueElem>>>, totals: Mutex<QueueTotals> },
}

struct Envelope {
    src: usize,
    seq: u64,
    object: ObjectId,
    #[allow(dead_code)] // kept for parity with the message model; decoding keys off the store
    kind: MessageKind,
    payload: Vec<u8>,
    count: usize,
}

/// A put whose target is the sending rank itself but whose visibility is
/// deferred to the next collective (epoch semantics). Not a transported
/// message; not counted.
struct DeferredPut {
    object: ObjectId,
    seq: u64,
    index: usize,
    value: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CollectiveKind {
    Sync,
    Allreduce(ReduceOp),
}

impl std::fmt::Display for CollectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CollectiveKind::Sync => f.write_str("sync"),
            CollectiveKind::Allreduce(ReduceOp::Sum) => f.write_str("allreduce[sum]"),
        }
    }
}

struct CollectiveCore {
    generation: u64,
    arrived: usize,
    arrived_mask: Vec<bool>,
    kind: Option<CollectiveKind>,
    acc: i64,
    result: i64,
    finished: Vec<bool>,
    finished_count: usize,
    poison: Option<Error>,
}

impl CollectiveCore {
    fn new(num_ranks: usize) -> Self {
        CollectiveCore {
            generation: 0,
            arrived: 0,
            arrived_mask: vec![false; num_ranks],
            kind: None,
            acc: 0,
            result: 0,
            finished: vec![false; num_ranks],
            finished_count: 0,
            poison: None,
        }
    }

    fn waiting_ranks(&self) -> Vec<usize> {
        (0..self.arrived_mask.len()).filter(|&r| self.arrived_mask[r]).collect()
    }

    fn finished_ranks(&self) -> Vec<usize> {
        (0..self.finished.len()).filter(|&r| self.finished[r]).collect()
    }
}

struct WorldInner {
    config: RuntimeConfig,
    stores: RwLock<Vec<Store>>,
    mailboxes: Vec<Mutex<Vec<Envelope>>>,
    deferred: Vec<Mutex<Vec<DeferredPut>>>,
    coll: Mutex<CollectiveCore>,
    coll_cvar: Condvar,
    received_elements: AtomicU64,
}

/// A simulated multi-rank world: global memory plus the machinery to run a
/// program on every rank.
pub struct World {
    inner: WorldInner,
}

impl World {
    pub fn new(config: RuntimeConfig) -> Self {
        assert!(config.num_ranks >= 1, "a world needs at least one rank");
        let n = config.num_ranks;
        World {
            inner: WorldInner {
                config,
                stores: RwLock::new(Vec::new()),
                mailboxes: (0..n).map(|_| Mutex::new(Vec::new())).collect(),
                deferred: (0..n).map(|_| Mutex::new(Vec::new())).collect(),
                coll: Mutex::new(CollectiveCore::new(n)),
                coll_cvar: Condvar::new(),
                received_elements: AtomicU64::new(0),
            },
        }
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.inner.config
    }

    pub fn num_ranks(&self) -> usize {
        self.inner.config.num_ranks
    }

    /// Registers a distributed i64 array with the given per-rank partition
    /// lengths. Elements start at 0.
    pub fn alloc_array(&self, part_lens: &[usize]) -> ObjectId {
        assert_eq!(part_lens.len(), self.num_ranks(), "one partition per rank");
        let mut stores = self.inner.stores.write();
        let id = ObjectId(stores.len());
        stores.push(Store::Array {
            parts: part_lens.iter().map(|&l| Mutex::new(vec![0; l])).collect(),
        });
        id
    }

    /// Registers a per-rank queue (every rank holds its own FIFO).
    pub fn alloc_queue(&self) -> ObjectId {
        let mut stores = self.inner.stores.write();
        let id = ObjectId(stores.len());
        stores.push(Store::Queue {
            fifos: (0..self.num_ranks()).map(|_| Mutex::new(VecDeque::new())).collect(),
            totals: Mutex::new(QueueTotals::default()),
        });
        id
    }

    /// Overwrites every element of an array, on every rank.
    pub fn fill_array(&self, object: ObjectId, value: i64) {
        let stores = self.inner.stores.read();
        if let Store::Array { parts } = &stores[object.0] {
            for p in parts {
                p.lock().fill(value);
            }
        }
    }

    /// Snapshot of an array's per-rank partitions.
    pub fn read_array_parts(&self, object: ObjectId) -> Vec<Vec<i64>> {
        let stores = self.inner.stores.read();
        match &stores[object.0] {
            Store::Array { parts } => parts.iter().map(|p| p.lock().clone()).collect(),
            _ => panic!("object {object:?} is not an array"),
        }
    }

    /// Cumulative push/pop/clear accounting for a queue, all ranks.
    pub fn queue_conservation(&self, object: ObjectId) -> QueueConservation {
        let stores = self.inner.stores.read();
        match &stores[object.0] {
            Store::Queue { fifos, totals } => {
                let t = *totals.lock();
                let remaining: usize = fifos.iter().map(|f| f.lock().len()).sum();
                QueueConservation {
                    pushed: t.pushed,
                    popped: t.popped,
                    cleared: t.cleared,
                    remaining: remaining as u64,
                }
            }
            _ => panic!("object {object:?} is not a queue"),
        }
    }

    /// Elements applied from transported messages in the current run.
    pub fn elements_received(&self) -> u64 {
        self.inner.received_elements.load(Ordering::Relaxed)
    }

    /// Executes `program` once per rank and returns the aggregated report
    /// plus the per-rank results in rank order.
    pub fn run<T, F>(&self, program: F) -> Result<(RunReport, Vec<T>)>
    where
        T: Send,
        F: Fn(&mut RankCtx<'_>) -> Result<T> + Sync,
    {
        let inner = &self.inner;
        inner.reset_run_state();
        let n = inner.config.num_ranks;
        let start = Instant::now();

        let outcomes: Vec<(MessageCounters, Result<T>)> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .map(|rank| {
                    let program = &program;
                    s.spawn(move || {
                        let mut ctx = RankCtx::new(rank, inner);
                        let res = match catch_unwind(AssertUnwindSafe(|| program(&mut ctx))) {
                            Ok(r) => r,
                            Err(payload) => Err(Error::RankPanic {
                                rank,
                                message: panic_message(payload),
                            }),
                        };
                        inner.rank_done(rank, res.as_ref().err());
                        (ctx.counters, res)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("rank thread is panic-safe")).collect()
        });

        let wall_time_seconds = start.elapsed().as_secs_f64();

        let mut results = Vec::with_capacity(n);
        let mut deadlock: Option<Error> = None;
        let mut root_cause: Option<Error> = None;
        let mut total = MessageCounters::default();
        let mut per_rank = Vec::with_capacity(n);
        for (rank, (counters, res)) in outcomes.into_iter().enumerate() {
            total.absorb(&counters);
            per_rank.push(RankCounters { rank, counters });
            match res {
                Ok(v) => results.push(v),
                Err(e @ Error::Deadlock { .. }) => {
                    deadlock.get_or_insert(e);
                }
                Err(e) => {
                    root_cause.get_or_insert(e);
                }
            }
        }
        if let Some(e) = root_cause {
            return Err(e);
        }
        if let Some(e) = deadlock {
            return Err(e);
        }

        Ok((
            RunReport {
                ranks: n,
                mode: "unspecified".to_owned(),
                messages_sent: total.messages_sent,
                elements_sent: total.elements_sent,
                bytes_sent: total.bytes_sent,
                flushes: total.flushes,
                wall_time_seconds,
                per_rank,
            },
            results,
        ))
    }
}

/// One-shot convenience: build a world and run a program on it.
pub fn spawn<T, F>(config: RuntimeConfig, program: F) -> Result<(RunReport, Vec<T>)>
where
    T: Send,
    F: Fn(&mut RankCtx<'_>) -> Result<T> + Sync,
{
    World::new(config).run(program)
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-string payload".to_owned()
    }
}

// ---------------------------------------------------------------------------
// per-rank context

struct CoalesceBuf {
    payload: Vec<u8>,
    count: usize,
    capacity: usize,
}

/// Execution context of one rank inside `World::run`. All cross-rank
/// interaction goes through these methods.
pub struct RankCtx<'w> {
    rank: usize,
    world: &'w WorldInner,
    send_seq: u64,
    bufs: BTreeMap<(ObjectId, usize), CoalesceBuf>,
    counters: MessageCounters,
}

impl<'w> RankCtx<'w> {
    fn new(rank: usize, world: &'w WorldInner) -> Self {
        RankCtx {
            rank,
            world,
            send_seq: 0,
            bufs: BTreeMap::new(),
            counters: MessageCounters::default(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_ranks(&self) -> usize {
        self.world.config.num_ranks
    }

    pub fn scheduler(&self) -> Scheduler {
        self.world.config.scheduler
    }

    /// Traffic this rank has sent so far.
    pub fn counters(&self) -> MessageCounters {
        self.counters
    }

    fn next_seq(&mut self) -> u64 {
        self.send_seq += 1;
        self.send_seq
    }

    // -- array ops ----------------------------------------------------------

    /// One-sided/async write of `value` into `object[index]` on `dst`.
    /// Local destinations are applied directly, with no message.
    pub(crate) fn array_put(
        &mut self,
        object: ObjectId,
        dst: usize,
        index: usize,
        value: i64,
        comm: CommSpec,
    ) -> Result<()> {
        if dst == self.rank {
            return self.world.array_write(object, dst, index, value);
        }
        self.array_put_remote(object, dst, index, value, comm)
    }

    /// Like `array_put`, but with epoch visibility: even a rank-local write
    /// is deferred to the next collective. Used where one-sided/async
    /// semantics must not expose the value mid-epoch.
    pub(crate) fn array_put_epoch(
        &mut self,
        object: ObjectId,
        dst: usize,
        index: usize,
        value: i64,
        comm: CommSpec,
    ) -> Result<()> {
        if dst == self.rank {
            self.world.check_array_addr(object, dst, index)?;
            let seq = self.next_seq();
            self.world.deferred[self.rank].lock().push(DeferredPut { object, seq, index, value });
            return Ok(());
        }
        self.array_put_remote(object, dst, index, value, comm)
    }

    fn array_put_remote(
        &mut self,
        object: ObjectId,
        dst: usize,
        index: usize,
        value: i64,
        comm: CommSpec,
    ) -> Result<()> {
        if dst >= self.num_ranks() {
            return Err(Error::BadAddress { dst, object: object.raw(), index });
        }
        self.world.check_array_addr(object, dst, index)?;
        let mut entry = [0u8; ARRAY_ENTRY_BYTES];
        entry[..8].copy_from_slice(&(index as u64).to_le_bytes());
        entry[8..].copy_from_slice(&value.to_le_bytes());
        match comm.mode {
            CommMode::OneSided => {
                let seq = self.next_seq();
                self.send(
                    Envelope {
                        src: self.rank,
                        seq,
                        object,
                        kind: MessageKind::OneSidedPut,
                        payload: entry.to_vec(),
                        count: 1,
                    },
                    dst,
                );
            }
            CommMode::Async => self.buffer(object, dst, &entry, comm.capacity),
        }
        Ok(())
    }

    /// Reads `object[index]` on `dst`. Remote reads see the committed value
    /// (delivered no later than the previous collective) and count as one
    /// message carrying one element.
    pub(crate) fn array_get(&mut self, object: ObjectId, dst: usize, index: usize) -> Result<i64> {
        if dst == self.rank {
            return self.world.array_read(object, dst, index);
        }
        let value = self.world.array_read(object, dst, index)?;
        self.counters.messages_sent += 1;
        self.counters.elements_sent += 1;
        self.counters.bytes_sent += 8;
        self.world.received_elements.fetch_add(1, Ordering::Relaxed);
        Ok(value)
    }

    // -- queue ops ----------------------------------------------------------

    /// Enqueues into `dst`'s copy of the queue, through the comm mode of the
    /// queue's chain: one message per element when one-sided, coalesced when
    /// async. Pushing to the own rank is local and free.
    pub(crate) fn queue_push(
        &mut self,
        object: ObjectId,
        dst: usize,
        elem: QueueElem,
        comm: CommSpec,
    ) -> Result<()> {
        if dst >= self.num_ranks() {
            return Err(Error::BadAddress { dst, object: object.raw(), index: 0 });
        }
        if dst == self.rank {
            self.world.queue_append(object, dst, elem, false);
            return Ok(());
        }
        let mut entry = [0u8; QUEUE_ELEM_BYTES];
        entry[..8].copy_from_slice(&elem[0].to_le_bytes());
        entry[8..16].copy_from_slice(&elem[1].to_le_bytes());
        entry[16..].copy_from_slice(&elem[2].to_le_bytes());
        match comm.mode {
            CommMode::OneSided => {
                let seq = self.next_seq();
                self.send(
                    Envelope {
                        src: self.rank,
                        seq,
                        object,
                        kind: MessageKind::OneSidedPut,
                        payload: entry.to_vec(),
                        count: 1,
                    },
                    dst,
                );
            }
            CommMode::Async => self.buffer(object, dst, &entry, comm.capacity),
        }
        Ok(())
    }

    pub(crate) fn queue_pop(&mut self, object: ObjectId) -> Option<QueueElem> {
        self.world.queue_pop(object, self.rank)
    }

    pub(crate) fn queue_len(&self, object: ObjectId) -> usize {
        self.world.queue_len(object, self.rank)
    }

    pub(crate) fn queue_clear(&mut self, object: ObjectId) {
        self.world.queue_clear(object, self.rank);
    }

    /// Replaces the local FIFO of `dst_object` with a copy of
    /// `src_object`'s local contents. No communication.
    pub(crate) fn queue_move_assign(&mut self, dst_object: ObjectId, src_object: ObjectId) {
        self.world.queue_move_assign(dst_object, src_object, self.rank);
    }

    // -- collectives --------------------------------------------------------

    /// Flushes all coalescing buffers, waits for every in-flight message to
    /// be delivered and applied, then releases all ranks together.
    pub fn sync(&mut self) -> Result<()> {
        self.flush_all();
        self.world.enter_collective(self.rank, CollectiveKind::Sync, 0).map(|_| ())
    }

    /// Blocking reduction of `value` across all ranks; every rank receives
    /// the combined result. Also a delivery point for pending messages.
    pub fn allreduce(&mut self, op: ReduceOp, value: i64) -> Result<i64> {
        self.flush_all();
        self.world.enter_collective(self.rank, CollectiveKind::Allreduce(op), value)
    }

    // -- internals ----------------------------------------------------------

    fn send(&mut self, env: Envelope, dst: usize) {
        self.counters.messages_sent += 1;
        self.counters.elements_sent += env.count as u64;
        self.counters.bytes_sent += env.payload.len() as u64;
        if self.world.config.scheduler == Scheduler::Free && self.world.is_queue(env.object) {
            self.world.apply_queue_envelope(&env, dst);
        } else {
            self.world.mailboxes[dst].lock().push(env);
        }
    }

    fn buffer(&mut self, object: ObjectId, dst: usize, entry: &[u8], capacity: usize) {
        let capacity = capacity.max(1);
        let buf = self.bufs.entry((object, dst)).or_insert_with(|| CoalesceBuf {
            payload: Vec::with_capacity(capacity * entry.len()),
            count: 0,
            capacity,
        });
        buf.payload.extend_from_slice(entry);
        buf.count += 1;
        if buf.count >= buf.capacity {
            self.flush_one(object, dst);
        }
    }

    fn flush_one(&mut self, object: ObjectId, dst: usize) {
        if let Some(buf) = self.bufs.get_mut(&(object, dst)) {
            if buf.count == 0 {
                return;
            }
            let payload = std::mem::take(&mut buf.payload);
            let count = std::mem::replace(&mut buf.count, 0);
            self.counters.flushes += 1;
            let seq = self.next_seq();
            self.send(
                Envelope {
                    src: self.rank,
                    seq,
                    object,
                    kind: MessageKind::CoalescedBatch,
                    payload,
                    count,
                },
                dst,
            );
        }
    }

    fn flush_all(&mut self) {
        let keys: Vec<(ObjectId, usize)> =
            self.bufs.iter().filter(|(_, b)| b.count > 0).map(|(k, _)| *k).collect();
        for (object, dst) in keys {
            self.flush_one(object, dst);
        }
    }
}

impl ObjectId {
    fn raw(self) -> usize {
        self.0
    }
}

// ---------------------------------------------------------------------------
// world internals

impl WorldInner {
    fn reset_run_state(&self) {
        for m in &self.mailboxes {
            m.lock().clear();
        }
        for d in &self.deferred {
            d.lock().clear();
        }
        *self.coll.lock() = CollectiveCore::new(self.config.num_ranks);
        self.received_elements.store(0, Ordering::Relaxed);
    }

    fn check_array_addr(&self, object: ObjectId, dst: usize, index: usize) -> Result<()> {
        let stores = self.stores.read();
        match stores.get(object.raw()) {
            Some(Store::Array { parts }) if index < parts[dst].lock().len() => Ok(()),
            _ => Err(Error::BadAddress { dst, object: object.raw(), index }),
        }
    }

    fn array_read(&self, object: ObjectId, rank: usize, index: usize) -> Result<i64> {
        let stores = self.stores.read();
        match stores.get(object.raw()) {
            Some(Store::Array { parts }) => {
                let part = parts[rank].lock();
                part.get(index).copied().ok_or(Error::BadAddress {
                    dst: rank,
                    object: object.raw(),
                    index,
                })
            }
            _ => Err(Error::BadAddress { dst: rank, object: object.raw(), index }),
        }
    }

    fn array_write(&self, object: ObjectId, rank: usize, index: usize, value: i64) -> Result<()> {
        let stores = self.stores.read();
        match stores.get(object.raw()) {
            Some(Store::Array { parts }) => {
                let mut part = parts[rank].lock();
                match part.get_mut(index) {
                    Some(slot) => {
                        *slot = value;
                        Ok(())
                    }
                    None => Err(Error::BadAddress { dst: rank, object: object.raw(), index }),
                }
            }
            _ => Err(Error::BadAddress { dst: rank, object: object.raw(), index }),
        }
    }

    fn is_queue(&self, object: ObjectId) -> bool {
        matches!(self.stores.read().get(object.raw()), Some(Store::Queue { .. }))
    }

    fn queue_append(&self, object: ObjectId, rank: usize, elem: QueueElem, transported: bool) {
        let stores = self.stores.read();
        if let Some(Store::Queue { fifos, totals }) = stores.get(object.raw()) {
            fifos[rank].lock().push_back(elem);
            totals.lock().pushed += 1;
            if transported {
                self.received_elements.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    fn queue_pop(&self, object: ObjectId, rank: usize) -> Option<QueueElem> {
        let stores = self.stores.read();
        if let Some(Store::Queue { fifos, totals }) = stores.get(object.raw()) {
            let popped = fifos[rank].lock().pop_front();
            if popped.is_some() {
                totals.lock().popped += 1;
            }
            popped
        } else {
            None
        }
    }

    fn queue_len(&self, object: ObjectId, rank: usize) -> usize {
        let stores = self.stores.read();
        match stores.get(object.raw()) {
            Some(Store::Queue { fifos, .. }) => fifos[rank].lock().len(),
            _ => 0,
        }
    }

    fn queue_clear(&self, object: ObjectId, rank: usize) {
        let stores = self.stores.read();
        if let Some(Store::Queue { fifos, totals }) = stores.get(object.raw()) {
            let mut fifo = fifos[rank].lock();
            totals.lock().cleared += fifo.len() as u64;
            fifo.clear();
        }
    }

    fn queue_move_assign(&self, dst_object: ObjectId, src_object: ObjectId, rank: usize) {
        let stores = self.stores.read();
        let copied: VecDeque<QueueElem> = match stores.get(src_object.raw()) {
            Some(Store::Queue { fifos, .. }) => fifos[rank].lock().clone(),
            _ => return,
        };
        if let Some(Store::Queue { fifos, totals }) = stores.get(dst_object.raw()) {
            let mut fifo = fifos[rank].lock();
            let mut t = totals.lock();
            t.cleared += fifo.len() as u64;
            t.pushed += copied.len() as u64;
            *fifo = copied;
        }
    }

    fn apply_queue_envelope(&self, env: &Envelope, dst: usize) {
        for chunk in env.payload.chunks_exact(QUEUE_ELEM_BYTES) {
            let elem = [
                u64::from_le_bytes(chunk[..8].try_into().unwrap()),
                u64::from_le_bytes(chunk[8..16].try_into().unwrap()),
                u64::from_le_bytes(chunk[16..].try_into().unwrap()),
            ];
            self.queue_append(env.object, dst, elem, true);
        }
    }

    fn rank_done(&self, rank: usize, error: Option<&Error>) {
        let mut c = self.coll.lock();
        if !c.finished[rank] {
            c.finished[rank] = true;
            c.finished_count += 1;
        }
        if c.poison.is_none() {
            if let Some(e) = error {
                c.poison = Some(e.clone());
            } else if c.arrived > 0 {
                c.poison = Some(Error::Deadlock {
                    waiting: c.waiting_ranks(),
                    missing: c.finished_ranks(),
                });
            }
        }
        self.coll_cvar.notify_all();
    }

    fn enter_collective(&self, rank: usize, kind: CollectiveKind, contrib: i64) -> Result<i64> {
        let mut c = self.coll.lock();
        if let Some(e) = &c.poison {
            return Err(e.clone());
        }
        if c.finished_count > 0 {
            let mut waiting = c.waiting_ranks();
            waiting.push(rank);
            let e = Error::Deadlock { waiting, missing: c.finished_ranks() };
            c.poison = Some(e.clone());
            self.coll_cvar.notify_all();
            return Err(e);
        }
        match &c.kind {
            None => c.kind = Some(kind),
            Some(k) if *k != kind => {
                let e = Error::MismatchedCollective {
                    expected: k.to_string(),
                    found: kind.to_string(),
                    rank,
                };
                c.poison = Some(e.clone());
                self.coll_cvar.notify_all();
                return Err(e);
            }
            Some(_) => {}
        }
        c.arrived += 1;
        c.arrived_mask[rank] = true;
        c.acc += contrib;

        if c.arrived == self.config.num_ranks {
            self.apply_pending();
            c.result = c.acc;
            c.generation += 1;
            c.arrived = 0;
            c.acc = 0;
            c.kind = None;
            c.arrived_mask.fill(false);
            self.coll_cvar.notify_all();
            Ok(c.result)
        } else {
            let my_gen = c.generation;
            while c.generation == my_gen && c.poison.is_none() {
                self.coll_cvar.wait(&mut c);
            }
            if let Some(e) = &c.poison {
                return Err(e.clone());
            }
            Ok(c.result)
        }
    }

    /// Applies every pending message and deferred put. Runs on the last
    /// rank to arrive at a collective, while every other rank waits inside
    /// the collective.
    fn apply_pending(&self) {
        let deterministic = self.config.scheduler == Scheduler::Deterministic;
        for dst in 0..self.config.num_ranks {
            let envs: Vec<Envelope> = std::mem::take(&mut *self.mailboxes[dst].lock());
            let defs: Vec<DeferredPut> = std::mem::take(&mut *self.deferred[dst].lock());

            // (object, index, value, src, seq)
            let mut array_entries: Vec<(ObjectId, usize, i64, usize, u64)> = Vec::new();
            // (object, src, seq, position-in-batch, element)
            let mut queue_entries: Vec<(ObjectId, usize, u64, usize, QueueElem)> = Vec::new();

            for env in &envs {
                if self.is_queue(env.object) {
                    for (pos, chunk) in env.payload.chunks_exact(QUEUE_ELEM_BYTES).enumerate() {
                        let elem = [
                            u64::from_le_bytes(chunk[..8].try_into().unwrap()),
                            u64::from_le_bytes(chunk[8..16].try_into().unwrap()),
                            u64::from_le_bytes(chunk[16..].try_into().unwrap()),
                        ];
                        queue_entries.push((env.object, env.src, env.seq, pos, elem));
                    }
                } else {
                    for chunk in env.payload.chunks_exact(ARRAY_ENTRY_BYTES) {
                        let index = u64::from_le_bytes(chunk[..8].try_into().unwrap()) as usize;
                        let value = i64::from_le_bytes(chunk[8..].try_into().unwrap());
                        array_entries.push((env.object, index, value, env.src, env.seq));
                    }
                }
            }
            let transported =
                (array_entries.len() + queue_entries.len()) as u64;
            for d in &defs {
                array_entries.push((d.object, d.index, d.value, dst, d.seq));
            }

            if deterministic {
                // canonical order: final array values are independent of rank
                // count and comm mode; queue order is FIFO per source
                array_entries.sort_unstable();
                queue_entries.sort_unstable_by_key(|&(obj, src, seq, pos, _)| (obj, src, seq, pos));
            }

            for (object, index, value, _, _) in array_entries {
                let _ = self.array_write(object, dst, index, value);
            }
            for (object, _, _, _, elem) in queue_entries {
                self.queue_append(object, dst, elem, false);
            }
            self.received_elements.fetch_add(transported, Ordering::Relaxed);
        }
    }
}
