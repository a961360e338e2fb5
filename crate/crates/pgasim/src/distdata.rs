//! Distributed collections whose behavior is dictated by their type chain.
//!
//! [`DistArray`] is a globally addressable fixed-length array of `Long`
//! (i64) values, block-partitioned across ranks; its chain must resolve to a
//! single partitioned allocation with `evendist` distribution, and the
//! chain's communication mode decides how remote writes travel. [`DistQueue`]
//! holds one FIFO per rank (a `multiple` allocation); remote enqueues go
//! through the runtime in the queue chain's mode. [`GlobalRef`] points at a
//! vertex record wherever it lives; asking which rank holds it (`.on()`) is
//! a local operation that moves no data.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::runtime::{CommSpec, ObjectId, QueueElem, RankCtx, World};
use crate::typechain::{Allocation, Arg, Distribution, Kind, Mutability, TypeChain};

/// Block distribution of `global_length` elements over `num_ranks` ranks:
/// contiguous (start, length) spans, remainder spread to the lowest ranks,
/// so any two spans differ in length by at most one.
pub fn partition_map(global_length: usize, num_ranks: usize) -> Vec<(usize, usize)> {
    assert!(num_ranks >= 1, "need at least one rank");
    let base = global_length / num_ranks;
    let rem = global_length % num_ranks;
    let mut out = Vec::with_capacity(num_ranks);
    let mut start = 0;
    for rank in 0..num_ranks {
        let len = base + usize::from(rank < rem);
        out.push((start, len));
        start += len;
    }
    out
}

/// The unique (rank, local index) a global index maps to under
/// [`partition_map`], computed arithmetically.
pub fn owner_of(global_length: usize, num_ranks: usize, index: usize) -> Result<(usize, usize)> {
    if index >= global_length {
        return Err(Error::OutOfBounds { index, len: global_length });
    }
    let base = global_length / num_ranks;
    let rem = global_length % num_ranks;
    let boundary = rem * (base + 1);
    if index < boundary {
        Ok((index / (base + 1), index % (base + 1)))
    } else {
        let off = index - boundary;
        Ok((rem + off / base, off % base))
    }
}

/// Cross-rank reference to a record: which rank owns it and where in that
/// rank's partition it lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GlobalRef {
    pub owner: usize,
    pub local_index: usize,
}

impl GlobalRef {
    pub fn new(owner: usize, local_index: usize) -> Self {
        GlobalRef { owner, local_index }
    }

    /// The rank holding the referenced data. Purely local: reads the
    /// reference itself, never the network.
    pub fn on(&self) -> usize {
        self.owner
    }
}

/// A vertex identity as it travels between ranks: global id plus its
/// location. Serialized as an (id, owner, local_index) triple — children are
/// never shipped, the owner already has them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VertexRef {
    pub id: u64,
    pub location: GlobalRef,
}

impl VertexRef {
    pub fn new(id: u64, location: GlobalRef) -> Self {
        VertexRef { id, location }
    }

    /// The rank holding the vertex record.
    pub fn on(&self) -> usize {
        self.location.on()
    }

    pub(crate) fn to_wire(self) -> QueueElem {
        [self.id, self.location.owner as u64, self.location.local_index as u64]
    }

    pub(crate) fn from_wire(w: QueueElem) -> Self {
        VertexRef { id: w[0], location: GlobalRef::new(w[1] as usize, w[2] as usize) }
    }
}

/// A materialized vertex record: id plus references to its children, which
/// may live on any rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphVertex {
    pub id: u64,
    pub children: Vec<GlobalRef>,
}

impl GraphVertex {
    pub fn num_children(&self) -> usize {
        self.children.len()
    }
}

/// Globally addressable `array[Long,n]`, block-partitioned per its chain.
#[derive(Clone)]
pub struct DistArray {
    chain: TypeChain,
    object: ObjectId,
    global_len: usize,
    partition: Arc<Vec<(usize, usize)>>,
    comm: CommSpec,
    read_only: bool,
}

impl std::fmt::Debug for DistArray {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {:?}", self.chain, self.partition)
    }
}

impl DistArray {
    /// Allocates storage for `chain` in `world`. The chain must be an
    /// `array[Long,n]` with a `partitioned[num_ranks]::single[evendist]`
    /// allocation.
    pub fn allocate(world: &World, chain: TypeChain) -> Result<DistArray> {
        let resolved = chain.resolve();
        if chain.head().kind() != &Kind::Array {
            return Err(Error::Config(format!("`{chain}` is not an array chain")));
        }
        let global_len = match chain.head().args().get(1) {
            Some(Arg::Int(n)) => *n as usize,
            _ => {
                return Err(Error::Config(format!(
                    "`{chain}` has no length; a distributed array needs one"
                )))
            }
        };
        if resolved.allocation != Allocation::SinglePartitioned {
            return Err(Error::Config(format!(
                "`{chain}` is not allocated[partitioned[..]::single[..]]"
            )));
        }
        if resolved.partitions != Some(world.num_ranks()) {
            return Err(Error::Config(format!(
                "`{chain}` wants {:?} partitions but the world has {} ranks",
                resolved.partitions,
                world.num_ranks()
            )));
        }
        if resolved.distribution != Distribution::Evendist {
            return Err(Error::Config(format!("`{chain}` is not evenly distributed")));
        }
        let partition = partition_map(global_len, world.num_ranks());
        let lens: Vec<usize> = partition.iter().map(|&(_, l)| l).collect();
        let object = world.alloc_array(&lens);
        Ok(DistArray {
            comm: CommSpec::from_resolved(&resolved),
            read_only: resolved.mutability == Mutability::ReadOnly,
            chain,
            object,
            global_len,
            partition: Arc::new(partition),
        })
    }

    pub fn chain(&self) -> &TypeChain {
        &self.chain
    }

    pub fn global_len(&self) -> usize {
        self.global_len
    }

    pub fn partition(&self) -> &[(usize, usize)] {
        &self.partition
    }

    /// (rank, local index) owning `global_index`.
    pub fn owner_of(&self, global_index: usize) -> Result<(usize, usize)> {
        owner_of(self.global_len, self.partition.len(), global_index)
    }

    /// Reads `array[global_index]`: locally owned indexes read the local
    /// store directly, remote indexes are a counted runtime round-trip that
    /// observes the committed (post-collective) value.
    pub fn get(&self, ctx: &mut RankCtx<'_>, global_index: usize) -> Result<i64> {
        let (rank, local) = self.owner_of(global_index)?;
        ctx.array_get(self.object, rank, local)
    }

    /// Writes `array[global_index] := value`: direct store access when the
    /// index is locally owned, otherwise routed through the runtime in the
    /// chain's communication mode (visible no later than the next
    /// collective).
    pub fn set(&self, ctx: &mut RankCtx<'_>, global_index: usize, value: i64) -> Result<()> {
        self.check_writable()?;
        let (rank, local) = self.owner_of(global_index)?;
        ctx.array_put(self.object, rank, local, value, self.comm)
    }

    /// Writes with epoch visibility: the value becomes visible at the next
    /// collective even when the target index is locally owned. This is the
    /// write the BFS kernel uses for children_parents, whose one-sided/async
    /// semantics must not expose values mid-level.
    pub fn set_epoch(&self, ctx: &mut RankCtx<'_>, global_index: usize, value: i64) -> Result<()> {
        self.check_writable()?;
        let (rank, local) = self.owner_of(global_index)?;
        ctx.array_put_epoch(self.object, rank, local, value, self.comm)
    }

    fn check_writable(&self) -> Result<()> {
        if self.read_only {
            return Err(Error::Config(format!("`{}` resolves to read only", self.chain)));
        }
        Ok(())
    }

    /// Controlling-context initialization of every element.
    pub fn fill(&self, world: &World, value: i64) {
        world.fill_array(self.object, value);
    }

    /// Gathers the whole array to the controlling context, in global index
    /// order.
    pub fn read_all(&self, world: &World) -> Vec<i64> {
        let parts = world.read_array_parts(self.object);
        let mut out = Vec::with_capacity(self.global_len);
        for part in parts {
            out.extend(part);
        }
        out
    }
}

/// `queue[GraphVertex]::allocated[multiple]`: one FIFO per rank. Pops are
/// always local; pushes may target any rank's copy.
#[derive(Clone)]
pub struct DistQueue {
    chain: TypeChain,
    object: ObjectId,
    comm: CommSpec,
}

impl std::fmt::Debug for DistQueue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.chain)
    }
}

impl DistQueue {
    /// Allocates per-rank FIFOs for `chain`, which must resolve to a
    /// `multiple` allocation.
    pub fn allocate(world: &World, chain: TypeChain) -> Result<DistQueue> {
        let resolved = chain.resolve();
        if chain.head().kind() != &Kind::Queue {
            return Err(Error::Config(format!("`{chain}` is not a queue chain")));
        }
        if resolved.allocation != Allocation::MultiplePerRank {
            return Err(Error::Config(format!("`{chain}` is not allocated[multiple]")));
        }
        let object = world.alloc_queue();
        Ok(DistQueue { comm: CommSpec::from_resolved(&resolved), chain, object })
    }

    pub fn chain(&self) -> &TypeChain {
        &self.chain
    }

    /// Appends to the calling rank's own FIFO.
    pub fn push_local(&self, ctx: &mut RankCtx<'_>, v: VertexRef) {
        let rank = ctx.rank();
        let _ = ctx.queue_push(self.object, rank, v.to_wire(), self.comm);
    }

    /// Enqueues `v` into `dst`'s copy — the `.on[dst] :=` operation. One
    /// message per element in one-sided mode, coalesced in async mode; a
    /// push to the own rank is local and free. FIFO order is preserved per
    /// (source, destination) pair.
    pub fn push_remote(&self, ctx: &mut RankCtx<'_>, dst: usize, v: VertexRef) -> Result<()> {
        ctx.queue_push(self.object, dst, v.to_wire(), self.comm)
    }

    /// Pops the local FIFO's head.
    pub fn pop(&self, ctx: &mut RankCtx<'_>) -> Result<VertexRef> {
        ctx.queue_pop(self.object)
            .map(VertexRef::from_wire)
            .ok_or(Error::EmptyQueue { rank: ctx.rank() })
    }

    pub fn len_local(&self, ctx: &RankCtx<'_>) -> usize {
        ctx.queue_len(self.object)
    }

    pub fn is_empty(&self, ctx: &RankCtx<'_>) -> bool {
        self.len_local(ctx) == 0
    }

    /// Empties the local FIFO.
    pub fn clear(&self, ctx: &mut RankCtx<'_>) {
        ctx.queue_clear(self.object);
    }

    /// `self := src` on the calling rank: replaces the local FIFO with a
    /// copy of `src`'s local contents. No communication.
    pub fn assign_from(&self, ctx: &mut RankCtx<'_>, src: &DistQueue) {
        ctx.queue_move_assign(self.object, src.object);
    }

    /// Cumulative push/pop/clear accounting over all ranks.
    pub fn conservation(&self, world: &World) -> crate::runtime::QueueConservation {
        world.queue_conservation(self.object)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{RuntimeConfig, Scheduler, World};
    use crate::typechain::TypeDescriptor;

    fn det(n: usize) -> RuntimeConfig {
        RuntimeConfig::new(n, Scheduler::Deterministic)
    }

    fn array_chain(len: u64, parts: u64) -> TypeChain {
        TypeChain::parse(&format!(
            "array[Long,{len}]::allocated[partitioned[{parts}]::single[evendist]]"
        ))
        .unwrap()
    }

    fn queue_chain() -> TypeChain {
        TypeChain::parse("queue[GraphVertex]::allocated[multiple]").unwrap()
    }

    fn vref(id: u64) -> VertexRef {
        VertexRef::new(id, GlobalRef::new(0, id as usize))
    }

    #[test]
    fn partition_map_examples() {
        assert_eq!(partition_map(9, 3), vec![(0, 3), (3, 3), (6, 3)]);
        assert_eq!(partition_map(10, 3), vec![(0, 4), (4, 3), (7, 3)]);
        assert_eq!(partition_map(0, 4), vec![(0, 0), (0, 0), (0, 0), (0, 0)]);
    }

    #[test]
    fn owner_of_agrees_with_named_examples() {
        assert_eq!(owner_of(10, 3, 0).unwrap(), (0, 0));
        assert_eq!(owner_of(10, 3, 4).unwrap(), (1, 0));
        assert_eq!(owner_of(10, 3, 9).unwrap(), (2, 2));
        assert!(matches!(owner_of(10, 3, 10), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn owner_of_agrees_with_partition_map_densely() {
        let mut lens: Vec<usize> = (0..=100).collect();
        lens.extend([1000, 9999, 10000]);
        for &len in &lens {
            for ranks in 1..=64 {
                let map = partition_map(len, ranks);
                assert_eq!(map.iter().map(|&(_, l)| l).sum::<usize>(), len);
                let mut expected_rank = 0;
                for idx in 0..len {
                    while idx >= map[expected_rank].0 + map[expected_rank].1 {
                        expected_rank += 1;
                    }
                    let (r, l) = owner_of(len, ranks, idx).unwrap();
                    assert_eq!(r, expected_rank, "len {len} ranks {ranks} idx {idx}");
                    assert_eq!(l, idx - map[r].0, "len {len} ranks {ranks} idx {idx}");
                }
                // lengths differ by at most one and starts are contiguous
                let min = map.iter().map(|&(_, l)| l).min().unwrap();
                let max = map.iter().map(|&(_, l)| l).max().unwrap();
                assert!(max - min <= 1);
            }
        }
    }

    #[test]
    fn arrays_of_equal_shape_share_the_partition_map() {
        let world = World::new(det(3));
        let a = DistArray::allocate(&world, array_chain(10, 3)).unwrap();
        let b = DistArray::allocate(&world, array_chain(10, 3)).unwrap();
        assert_eq!(a.partition(), b.partition());
    }

    #[test]
    fn allocate_rejects_mismatched_chains() {
        let world = World::new(det(3));
        // partition count disagrees with the world
        assert!(DistArray::allocate(&world, array_chain(10, 4)).is_err());
        // not an array
        assert!(DistArray::allocate(&world, queue_chain()).is_err());
        // no length
        let unsized_chain = TypeChain::new(TypeDescriptor::array_unsized(
            TypeChain::new(TypeDescriptor::long()).unwrap(),
        ))
        .unwrap()
        .compose(TypeDescriptor::allocated_block(3))
        .unwrap();
        assert!(DistArray::allocate(&world, unsized_chain).is_err());
        // queues must be multiple-allocated
        let single_queue = TypeChain::parse(
            "queue[GraphVertex]::allocated[partitioned[3]::single[evendist]]",
        )
        .unwrap();
        assert!(DistQueue::allocate(&world, single_queue).is_err());
    }

    #[test]
    fn local_set_then_get_round_trips() {
        let world = World::new(det(2));
        let arr = DistArray::allocate(&world, array_chain(4, 2)).unwrap();
        let (_, vals) = world
            .run(|ctx| {
                let mine = if ctx.rank() == 0 { 0 } else { 2 };
                arr.set(ctx, mine, 7 + ctx.rank() as i64)?;
                arr.get(ctx, mine)
            })
            .unwrap();
        assert_eq!(vals, vec![7, 8]);
    }

    #[test]
    fn remote_one_sided_set_visible_after_sync() {
        let world = World::new(det(2));
        let arr = DistArray::allocate(&world, array_chain(4, 2)).unwrap();
        let (report, vals) = world
            .run(|ctx| {
                if ctx.rank() == 0 {
                    arr.set(ctx, 3, 99)?; // owned by rank 1
                }
                ctx.sync()?;
                arr.get(ctx, 3)
            })
            .unwrap();
        assert_eq!(vals, vec![99, 99]);
        // one put message, plus rank 0's remote get after the sync
        assert_eq!(report.messages_sent, 2);
    }

    #[test]
    fn async_set_is_invisible_before_sync_and_visible_after() {
        let world = World::new(det(2));
        let chain = array_chain(4, 2).compose(TypeDescriptor::asynchronous(Some(16))).unwrap();
        let arr = DistArray::allocate(&world, chain).unwrap();
        arr.fill(&world, -1);
        let (_, pairs) = world
            .run(|ctx| {
                if ctx.rank() == 0 {
                    arr.set(ctx, 3, 5)?; // owned by rank 1, buffered
                }
                let before = if ctx.rank() == 1 { arr.get(ctx, 3)? } else { 0 };
                ctx.sync()?;
                let after = if ctx.rank() == 1 { arr.get(ctx, 3)? } else { 0 };
                Ok((before, after))
            })
            .unwrap();
        assert_eq!(pairs[1], (-1, 5));
    }

    #[test]
    fn debug_rendering_shows_chain_and_partition() {
        let world = World::new(det(3));
        let arr = DistArray::allocate(&world, array_chain(10, 3)).unwrap();
        let text = format!("{arr:?}");
        assert!(text.contains("array[Long,10]::allocated[partitioned[3]::single[evendist]]"));
        assert!(text.contains("(0, 4)"), "{text}");
    }

    #[test]
    fn const_chain_rejects_writes() {
        let world = World::new(det(2));
        let chain = array_chain(4, 2).compose(TypeDescriptor::constant()).unwrap();
        let arr = DistArray::allocate(&world, chain).unwrap();
        let err = world
            .run(|ctx| {
                if ctx.rank() == 0 {
                    arr.set(ctx, 0, 1)?;
                }
                ctx.sync()
            })
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn ref_on_moves_no_data() {
        let world = World::new(det(2));
        let (report, owners) = world
            .run(|ctx| {
                let refs: Vec<GlobalRef> = (0..1000).map(|i| GlobalRef::new(i % 2, i)).collect();
                let before = ctx.counters();
                let mut acc = 0usize;
                for _ in 0..1000 {
                    for r in &refs {
                        acc += r.on();
                    }
                }
                assert_eq!(ctx.counters(), before);
                ctx.sync()?;
                Ok(acc)
            })
            .unwrap();
        assert_eq!(report.messages_sent, 0);
        assert_eq!(owners, vec![500_000, 500_000]);
    }

    #[test]
    fn queue_push_then_pop_is_fifo() {
        let world = World::new(det(1));
        let q = DistQueue::allocate(&world, queue_chain()).unwrap();
        world
            .run(|ctx| {
                q.push_local(ctx, vref(1));
                q.push_local(ctx, vref(2));
                assert_eq!(q.len_local(ctx), 2);
                assert_eq!(q.pop(ctx)?.id, 1);
                assert_eq!(q.pop(ctx)?.id, 2);
                assert!(matches!(q.pop(ctx), Err(Error::EmptyQueue { rank: 0 })));
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn push_remote_to_self_is_free() {
        let world = World::new(det(2));
        let q = DistQueue::allocate(&world, queue_chain()).unwrap();
        let (report, _) = world
            .run(|ctx| {
                let me = ctx.rank();
                q.push_remote(ctx, me, vref(me as u64))?;
                assert_eq!(q.len_local(ctx), 1);
                ctx.sync()
            })
            .unwrap();
        assert_eq!(report.messages_sent, 0);
    }

    #[test]
    fn async_128_push_remote_coalesces() {
        let world = World::new(det(2));
        let chain = queue_chain().compose(TypeDescriptor::asynchronous(Some(128))).unwrap();
        let q = DistQueue::allocate(&world, chain).unwrap();
        let (report, before) = world
            .run(|ctx| {
                let mut snapshot = crate::runtime::MessageCounters::default();
                if ctx.rank() == 0 {
                    for i in 0..300u64 {
                        q.push_remote(ctx, 1, vref(i))?;
                    }
                    snapshot = ctx.counters();
                }
                ctx.sync()?;
                Ok(snapshot)
            })
            .unwrap();
        assert_eq!(before[0].messages_sent, 2); // two full batches before the sync
        assert_eq!(report.messages_sent, 3); // remainder flushed at sync
        assert_eq!(report.elements_sent, 300);
        assert_eq!(q.conservation(&world).remaining, 300);
    }

    #[test]
    fn move_assign_copies_then_clear_empties_source() {
        let world = World::new(det(1));
        let a = DistQueue::allocate(&world, queue_chain()).unwrap();
        let b = DistQueue::allocate(&world, queue_chain()).unwrap();
        world
            .run(|ctx| {
                b.push_local(ctx, vref(5));
                b.push_local(ctx, vref(6));
                a.assign_from(ctx, &b);
                b.clear(ctx);
                assert_eq!(a.len_local(ctx), 2);
                assert!(b.is_empty(ctx));
                assert_eq!(a.pop(ctx)?.id, 5);
                assert_eq!(a.pop(ctx)?.id, 6);
                Ok(())
            })
            .unwrap();
        assert!(a.conservation(&world).balanced());
        assert!(b.conservation(&world).balanced());
    }

    #[test]
    fn move_assign_from_empty_leaves_dst_empty() {
        let world = World::new(det(1));
        let a = DistQueue::allocate(&world, queue_chain()).unwrap();
        let b = DistQueue::allocate(&world, queue_chain()).unwrap();
        world
            .run(|ctx| {
                a.push_local(ctx, vref(1));
                a.assign_from(ctx, &b);
                assert!(a.is_empty(ctx));
                Ok(())
            })
            .unwrap();
        assert!(a.conservation(&world).balanced());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_is_total_and_disjoint(len in 0usize..4096, ranks in 1usize..64) {
                let map = partition_map(len, ranks);
                prop_assert_eq!(map.iter().map(|&(_, l)| l).sum::<usize>(), len);
                let mut cursor = 0;
                for &(start, plen) in &map {
                    prop_assert_eq!(start, cursor);
                    cursor += plen;
                }
            }

            #[test]
            fn queue_conservation_over_random_programs(
                ops in proptest::collection::vec(0u8..4, 1..120),
                scheduler_free in proptest::bool::ANY,
            ) {
                let scheduler =
                    if scheduler_free { Scheduler::Free } else { Scheduler::Deterministic };
                let world = World::new(RuntimeConfig::new(3, scheduler));
                let q = DistQueue::allocate(&world, queue_chain()).unwrap();
                let ops = &ops;
                let (report, _) = world
                    .run(|ctx| {
                        let me = ctx.rank();
                        for (i, op) in ops.iter().enumerate() {
                            match op {
                                0 => q.push_local(ctx, vref(i as u64)),
                                1 => q.push_remote(ctx, (me + 1) % 3, vref(i as u64))?,
                                2 => {
                                    let _ = q.pop(ctx);
                                }
                                _ => {
                                    if i % 5 == 0 {
                                        q.clear(ctx);
                                    }
                                }
                            }
                        }
                        ctx.sync()?;
                        Ok(())
                    })
                    .unwrap();
                prop_assert!(q.conservation(&world).balanced());
                prop_assert_eq!(report.elements_sent, world.elements_received());
            }
        }
    }
}
