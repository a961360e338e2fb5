//! Level-synchronized BFS over a distributed CSR graph, plus validation.
//!
//! The kernel is the same in both communication modes; only the type chains
//! of `children_parents` and the two vertex queues change. In one-sided mode
//! remote writes travel one message per element; appending `async[capacity]`
//! to those chains switches every remote write to coalesced point-to-point
//! batches. Each level ends with a collective `sync` — the epoch close that
//! makes the level's writes and enqueues visible before the queues swap —
//! followed by the type-overridden reduction
//! `global_next::allreduce["sum"] := vertex_queue.size`, which terminates
//! the loop when no rank has frontier vertices left.

use std::collections::VecDeque;

use crate::distdata::{DistArray, DistQueue, VertexRef};
use crate::error::{Error, Result};
use crate::graph::CsrGraph;
use crate::runtime::{
    QueueConservation, RankCtx, ReduceOp, RunReport, RuntimeConfig, Scheduler, World,
};
use crate::typechain::{
    AliasTable, Reduction, TypeChain, TypeDescriptor, DEFAULT_ASYNC_CAPACITY,
};

/// Which communication behavior the kernel's variables are typed with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// The default: every remote write is a one-sided message.
    OneSided,
    /// Asynchronous point-to-point with a coalescing buffer per
    /// (object, destination).
    Async { capacity: usize },
}

impl Mode {
    pub fn async_default() -> Mode {
        Mode::Async { capacity: DEFAULT_ASYNC_CAPACITY }
    }

    /// Report/CLI label.
    pub fn label(&self) -> &'static str {
        match self {
            Mode::OneSided => "onesided",
            Mode::Async { .. } => "p2p",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Search tree, levels, and traversal statistics of one BFS run.
#[derive(Clone, Debug)]
pub struct BfsResult {
    /// Parent id per vertex; the root is its own parent, -1 is unreached.
    pub parents: Vec<i64>,
    /// BFS level per vertex; level\[root\] = 0, -1 is unreached.
    pub levels: Vec<i64>,
    /// Directed adjacency scans of newly visited vertices (the TEPS
    /// numerator): the degree sum of all tree-reached vertices.
    pub edges_traversed: u64,
    pub elapsed_seconds: f64,
    pub report: RunReport,
}

struct KernelVars {
    search_tree: DistArray,
    children_parents: DistArray,
    vertex_queue: DistQueue,
    vertex_queue_next: DistQueue,
    global_next_chain: TypeChain,
}

/// Declares the kernel's variables: their chains are the only thing the
/// communication mode changes.
fn declare_vars(world: &World, nvertices: usize, mode: Mode) -> Result<KernelVars> {
    let ranks = world.num_ranks() as u64;
    let long = TypeChain::new(TypeDescriptor::long())?;
    let vertex = TypeChain::new(TypeDescriptor::custom("GraphVertex"))?;

    let mut aliases = AliasTable::new();
    aliases.define(
        "GraphVertex",
        TypeDescriptor::reference_record(vec![
            ("children".into(), TypeChain::new(TypeDescriptor::array_unsized(vertex.clone()))?),
            ("numChildren".into(), long.clone()),
            ("id".into(), long.clone()),
        ]),
    )?;

    let block_array = TypeChain::new(TypeDescriptor::array(long, nvertices as u64))?
        .compose(TypeDescriptor::allocated_block(ranks))?;
    let queue = TypeChain::new(TypeDescriptor::queue(vertex))?
        .compose(TypeDescriptor::allocated_multiple())?;

    let search_tree = block_array.clone();
    let mut children_parents = block_array;
    let mut vertex_queue = queue.clone();
    let mut vertex_queue_next = queue;
    if let Mode::Async { capacity } = mode {
        let tune = || TypeDescriptor::asynchronous(Some(capacity as u64));
        children_parents = children_parents.compose(tune())?;
        vertex_queue = vertex_queue.compose(tune())?;
        vertex_queue_next = vertex_queue_next.compose(tune())?;
    }

    let search_tree = DistArray::allocate(world, search_tree)?;
    let children_parents = DistArray::allocate(world, children_parents)?;
    let vertex_queue = DistQueue::allocate(world, aliases.expand(&vertex_queue)?)?;
    let vertex_queue_next = DistQueue::allocate(world, aliases.expand(&vertex_queue_next)?)?;
    search_tree.fill(world, -1);
    children_parents.fill(world, -1);

    Ok(KernelVars {
        search_tree,
        children_parents,
        vertex_queue,
        vertex_queue_next,
        global_next_chain: TypeChain::new(TypeDescriptor::int())?,
    })
}

/// `target::allreduce["sum"] := value` — the per-expression type override:
/// resolving the augmented chain decides that this assignment issues a
/// blocking allreduce.
fn assign_with_reduction(ctx: &mut RankCtx<'_>, base: &TypeChain, value: i64) -> Result<i64> {
    let resolved = base.override_for_expression(&[TypeDescriptor::allreduce_sum()])?;
    match resolved.reduction {
        Reduction::Sum => ctx.allreduce(ReduceOp::Sum, value),
        Reduction::None => Ok(value),
    }
}

/// A BFS outcome plus runtime-level conservation diagnostics.
#[derive(Clone, Debug)]
pub struct InstrumentedRun {
    pub result: BfsResult,
    /// Elements applied from transported messages during the run; equals
    /// the report's elements_sent when nothing was lost.
    pub elements_received: u64,
    /// Push/pop/clear accounting of the two kernel queues.
    pub queues: [QueueConservation; 2],
}

/// Runs the level-synchronized BFS from `root` with the given mode and
/// scheduler; one simulated rank per CSR block.
pub fn bfs_run(graph: &CsrGraph, root: u64, mode: Mode, scheduler: Scheduler) -> Result<BfsResult> {
    bfs_run_instrumented(graph, root, mode, scheduler).map(|r| r.result)
}

/// [`bfs_run`] with conservation diagnostics attached.
pub fn bfs_run_instrumented(
    graph: &CsrGraph,
    root: u64,
    mode: Mode,
    scheduler: Scheduler,
) -> Result<InstrumentedRun> {
    let n = graph.nvertices() as usize;
    if root >= graph.nvertices() {
        return Err(Error::OutOfBounds { index: root as usize, len: n });
    }
    if graph.degree(root) == 0 && n > 1 {
        return Err(Error::IsolatedRoot { root });
    }

    let world = World::new(RuntimeConfig::new(graph.num_ranks(), scheduler));
    let vars = declare_vars(&world, n, mode)?;
    let v = &vars;

    let (mut report, per_rank) = world.run(|ctx| -> Result<u64> {
        let me = ctx.rank();
        let root_ref = graph.vertex_ref(root);
        if root_ref.on() == me {
            v.vertex_queue.push_local(ctx, root_ref);
            v.children_parents.set(ctx, root as usize, root as i64)?;
        }

        let mut edges_scanned = 0u64;
        let mut global_next: i64 = 1;
        while global_next > 0 {
            while !v.vertex_queue.is_empty(ctx) {
                let vertex = v.vertex_queue.pop(ctx)?;
                if v.search_tree.get(ctx, vertex.id as usize)? == -1 {
                    let parent = v.children_parents.get(ctx, vertex.id as usize)?;
                    v.search_tree.set(ctx, vertex.id as usize, parent)?;
                    let record = graph.vertex(vertex);
                    edges_scanned += record.num_children() as u64;
                    for child_ref in &record.children {
                        let child = VertexRef::new(graph.id_of(*child_ref), *child_ref);
                        v.children_parents.set_epoch(ctx, child.id as usize, vertex.id as i64)?;
                        v.vertex_queue_next.push_remote(ctx, child.on(), child)?;
                    }
                }
            }
            // epoch close: every write and enqueue of this level lands now
            ctx.sync()?;
            v.vertex_queue.assign_from(ctx, &v.vertex_queue_next);
            v.vertex_queue_next.clear(ctx);
            global_next = assign_with_reduction(
                ctx,
                &v.global_next_chain,
                v.vertex_queue.len_local(ctx) as i64,
            )?;
        }
        Ok(edges_scanned)
    })?;
    report.mode = mode.label().to_owned();

    let parents = vars.search_tree.read_all(&world);
    let levels = levels_from_parents(&parents, root)?;
    Ok(InstrumentedRun {
        elements_received: world.elements_received(),
        queues: [
            vars.vertex_queue.conservation(&world),
            vars.vertex_queue_next.conservation(&world),
        ],
        result: BfsResult {
            parents,
            levels,
            edges_traversed: per_rank.iter().sum(),
            elapsed_seconds: report.wall_time_seconds,
            report,
        },
    })
}

/// Levels implied by a parent tree: level(root) = 0, level(v) =
/// level(parent(v)) + 1. Fails if a parent chain never reaches the root.
pub fn levels_from_parents(parents: &[i64], root: u64) -> Result<Vec<i64>> {
    let n = parents.len();
    let root = root as usize;
    if root >= n || parents[root] != root as i64 {
        return Err(Error::ValidationFailure {
            rule: 1,
            witness: root as u64,
            detail: "root is not its own parent".into(),
        });
    }
    let mut levels = vec![-1i64; n];
    levels[root] = 0;
    for start in 0..n {
        if parents[start] < 0 || levels[start] != -1 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while levels[v] == -1 {
            path.push(v);
            let p = parents[v];
            if p < 0 || p as usize >= n {
                return Err(Error::ValidationFailure {
                    rule: 3,
                    witness: v as u64,
                    detail: format!("parent {p} of a reached vertex is not a reached vertex"),
                });
            }
            let p = p as usize;
            if p == v || path.len() > n {
                return Err(Error::ValidationFailure {
                    rule: 3,
                    witness: v as u64,
                    detail: "parent chain does not reach the root".into(),
                });
            }
            v = p;
        }
        let mut level = levels[v];
        for &u in path.iter().rev() {
            level += 1;
            levels[u] = level;
        }
    }
    Ok(levels)
}

/// Sequential BFS distances from `root` — the independent oracle the
/// validation phase compares against. Shares nothing with the distributed
/// kernel beyond the CSR adjacency.
pub fn sequential_bfs(graph: &CsrGraph, root: u64) -> Vec<i64> {
    let n = graph.nvertices() as usize;
    let mut dist = vec![-1i64; n];
    let mut frontier = VecDeque::new();
    dist[root as usize] = 0;
    frontier.push_back(root);
    while let Some(u) = frontier.pop_front() {
        let du = dist[u as usize];
        for r in graph.neighbors(u) {
            let v = graph.id_of(*r);
            if dist[v as usize] == -1 {
                dist[v as usize] = du + 1;
                frontier.push_back(v);
            }
        }
    }
    dist
}

/// Checks a BFS result against the five validation rules:
/// 1. the root is its own parent;
/// 2. every reached vertex is joined to its parent by a graph edge;
/// 3. levels grow by exactly one along tree edges;
/// 4. a vertex is reached iff the sequential oracle reaches it;
/// 5. levels equal the oracle's distances.
pub fn validate_tree(graph: &CsrGraph, root: u64, result: &BfsResult) -> Result<()> {
    let n = graph.nvertices() as usize;
    if result.parents.len() != n || result.levels.len() != n {
        return Err(Error::Config(format!(
            "result arrays have {} / {} entries for {n} vertices",
            result.parents.len(),
            result.levels.len()
        )));
    }
    let fail = |rule: u8, witness: u64, detail: String| -> Result<()> {
        Err(Error::ValidationFailure { rule, witness, detail })
    };

    // rule 1
    if result.parents[root as usize] != root as i64 {
        return fail(1, root, format!("parents[root] = {}", result.parents[root as usize]));
    }
    if result.levels[root as usize] != 0 {
        return fail(3, root, format!("levels[root] = {}", result.levels[root as usize]));
    }

    for v in 0..n as u64 {
        let p = result.parents[v as usize];
        if p < 0 || v == root {
            continue;
        }
        let p = p as u64;
        // rule 2: {v, parent(v)} must be a real edge
        if !graph.neighbors(v).iter().any(|&r| graph.id_of(r) == p) {
            return fail(2, v, format!("tree edge {v}-{p} is not a graph edge"));
        }
        // rule 3: one level apart
        if result.levels[v as usize] != result.levels[p as usize] + 1 {
            return fail(
                3,
                v,
                format!(
                    "levels[{v}] = {} but levels[parent {p}] = {}",
                    result.levels[v as usize], result.levels[p as usize]
                ),
            );
        }
    }

    let oracle = sequential_bfs(graph, root);
    for (v, &dist) in oracle.iter().enumerate() {
        let reached = result.parents[v] >= 0;
        let oracle_reached = dist >= 0;
        // rule 4: reach-set equality with the oracle
        if reached != oracle_reached || (result.levels[v] >= 0) != oracle_reached {
            return fail(
                4,
                v as u64,
                format!(
                    "reachability mismatch: parents[{v}] = {}, levels[{v}] = {}, oracle = {dist}",
                    result.parents[v], result.levels[v]
                ),
            );
        }
        // rule 5: exact distances
        if result.levels[v] != dist {
            return fail(
                5,
                v as u64,
                format!("levels[{v}] = {} but true distance is {dist}", result.levels[v]),
            );
        }
    }
    Ok(())
}
