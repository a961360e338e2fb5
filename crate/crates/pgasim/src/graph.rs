//! Kronecker (R-MAT) edge generation, CSR construction, and distribution of
//! vertex records across ranks.
//!
//! A graph has `2^scale` vertices and `2^scale * edgefactor` generated edge
//! pairs. Construction symmetrizes the pairs, drops self-loops and
//! duplicates, block-distributes the vertices with [`partition_map`], and
//! stores each rank's rows in CSR form with [`GlobalRef`] adjacency targets.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distdata::{owner_of, partition_map, GlobalRef, GraphVertex, VertexRef};
use crate::error::{Error, Result};

/// Initiator probabilities used when none are configured.
pub const DEFAULT_INITIATOR: (f64, f64, f64, f64) = (0.57, 0.19, 0.19, 0.05);

/// Largest scale the generator accepts; this is a desk-scale simulator.
pub const MAX_SCALE: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphConfig {
    /// log2 of the vertex count.
    pub scale: u32,
    /// Ratio of generated edge pairs to vertices.
    pub edgefactor: u32,
    pub seed: u64,
    /// Quadrant probabilities (a, b, c, d); must sum to 1.
    pub initiator: (f64, f64, f64, f64),
}

impl GraphConfig {
    pub fn new(scale: u32, edgefactor: u32, seed: u64) -> Self {
        GraphConfig { scale, edgefactor, seed, initiator: DEFAULT_INITIATOR }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale > MAX_SCALE {
            return Err(Error::Config(format!("scale {} exceeds {MAX_SCALE}", self.scale)));
        }
        let (a, b, c, d) = self.initiator;
        if [a, b, c, d].iter().any(|p| *p < 0.0) {
            return Err(Error::Config("initiator probabilities must be non-negative".into()));
        }
        if (a + b + c + d - 1.0).abs() > 1e-12 {
            return Err(Error::Config("initiator probabilities must sum to 1".into()));
        }
        Ok(())
    }

    pub fn nvertices(&self) -> u64 {
        1u64 << self.scale
    }

    pub fn npairs(&self) -> u64 {
        self.nvertices() * self.edgefactor as u64
    }
}

/// Generated vertex-id pairs, before symmetrization and cleanup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeList {
    pub nvertices: u64,
    pub edges: Vec<(u64, u64)>,
}

/// Generates exactly `2^scale * edgefactor` pairs by recursive quadrant
/// selection with the configured initiator probabilities. Same seed, same
/// list.
pub fn generate_edges(config: &GraphConfig) -> Result<EdgeList> {
    config.validate()?;
    let (a, b, c) = (config.initiator.0, config.initiator.1, config.initiator.2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.npairs();
    let mut edges = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let mut u = 0u64;
        let mut v = 0u64;
        for level in 0..config.scale {
            let bit = 1u64 << level;
            let r: f64 = rng.gen();
            if r < a {
                // top-left quadrant: bit set in neither endpoint
            } else if r < a + b {
                v |= bit;
            } else if r < a + b + c {
                u |= bit;
            } else {
                u |= bit;
                v |= bit;
            }
        }
        edges.push((u, v));
    }
    Ok(EdgeList { nvertices: config.nvertices(), edges })
}

/// Per-rank compressed sparse rows: `offsets` spans the rank's local
/// vertices, `adjacency` holds references to target records wherever they
/// live.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankCsr {
    pub offsets: Vec<usize>,
    pub adjacency: Vec<GlobalRef>,
}

/// A block-distributed undirected graph in CSR form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsrGraph {
    nvertices: u64,
    partition: Vec<(usize, usize)>,
    ranks: Vec<RankCsr>,
}

/// Symmetrizes the pairs (both directions inserted), drops self-loops and
/// duplicates, and builds one CSR block per rank.
pub fn build_csr(list: &EdgeList, num_ranks: usize) -> CsrGraph {
    let n = list.nvertices as usize;
    let mut directed: Vec<(u64, u64)> = Vec::with_capacity(list.edges.len() * 2);
    for &(u, v) in &list.edges {
        if u != v {
            directed.push((u, v));
            directed.push((v, u));
        }
    }
    directed.sort_unstable();
    directed.dedup();

    let partition = partition_map(n, num_ranks);
    let mut ranks = Vec::with_capacity(num_ranks);
    let mut cursor = 0usize;
    for &(start, len) in &partition {
        let mut offsets = Vec::with_capacity(len + 1);
        let mut adjacency = Vec::new();
        offsets.push(0);
        for local in 0..len {
            let vertex = (start + local) as u64;
            while cursor < directed.len() && directed[cursor].0 == vertex {
                let (owner, local_index) =
                    owner_of(n, num_ranks, directed[cursor].1 as usize).expect("target in range");
                adjacency.push(GlobalRef::new(owner, local_index));
                cursor += 1;
            }
            offsets.push(adjacency.len());
        }
        ranks.push(RankCsr { offsets, adjacency });
    }
    CsrGraph { nvertices: list.nvertices, partition, ranks }
}

impl CsrGraph {
    pub fn nvertices(&self) -> u64 {
        self.nvertices
    }

    pub fn num_ranks(&self) -> usize {
        self.ranks.len()
    }

    pub fn partition(&self) -> &[(usize, usize)] {
        &self.partition
    }

    pub fn rank_csr(&self, rank: usize) -> &RankCsr {
        &self.ranks[rank]
    }

    /// Reference to the record of global vertex `id`.
    pub fn ref_of(&self, id: u64) -> GlobalRef {
        let (owner, local_index) =
            owner_of(self.nvertices as usize, self.num_ranks(), id as usize)
                .expect("vertex id in range");
        GlobalRef::new(owner, local_index)
    }

    /// Global id of the record a reference points at.
    pub fn id_of(&self, r: GlobalRef) -> u64 {
        (self.partition[r.owner].0 + r.local_index) as u64
    }

    pub fn vertex_ref(&self, id: u64) -> VertexRef {
        VertexRef::new(id, self.ref_of(id))
    }

    /// Adjacency of a locally stored vertex.
    pub fn local_neighbors(&self, rank: usize, local_index: usize) -> &[GlobalRef] {
        let csr = &self.ranks[rank];
        &csr.adjacency[csr.offsets[local_index]..csr.offsets[local_index + 1]]
    }

    /// Adjacency of a global vertex id (reads the owning rank's block).
    pub fn neighbors(&self, id: u64) -> &[GlobalRef] {
        let r = self.ref_of(id);
        self.local_neighbors(r.owner, r.local_index)
    }

    pub fn degree(&self, id: u64) -> usize {
        self.neighbors(id).len()
    }

    /// Sum of all local adjacency lengths = twice the unique undirected
    /// non-loop edge count.
    pub fn degree_sum(&self) -> usize {
        self.ranks.iter().map(|r| r.adjacency.len()).sum()
    }

    /// Materialized record of the vertex behind `vref`.
    pub fn vertex(&self, vref: VertexRef) -> GraphVertex {
        GraphVertex {
            id: vref.id,
            children: self.local_neighbors(vref.location.owner, vref.location.local_index).to_vec(),
        }
    }
}

/// Deterministically samples `count` distinct vertices with degree >= 1.
pub fn pick_search_keys(graph: &CsrGraph, count: usize, seed: u64) -> Result<Vec<u64>> {
    let n = graph.nvertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut keys = Vec::with_capacity(count);
    let mut chosen = std::collections::BTreeSet::new();
    let mut attempts = 0usize;
    while keys.len() < count && attempts < count.saturating_mul(64).max(64) {
        attempts += 1;
        let candidate = rng.gen_range(0..n);
        if graph.degree(candidate) >= 1 && chosen.insert(candidate) {
            keys.push(candidate);
        }
    }
    if keys.len() < count {
        // deterministic fallback scan for sparse graphs
        for candidate in 0..n {
            if keys.len() == count {
                break;
            }
            if graph.degree(candidate) >= 1 && chosen.insert(candidate) {
                keys.push(candidate);
            }
        }
    }
    if keys.len() < count {
        return Err(Error::NotEnoughKeys { requested: count, available: keys.len() });
    }
    Ok(keys)
}

/// Writes one `u v` pair per line, decimal, newline-delimited.
pub fn dump_edges(list: &EdgeList, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::EdgeFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for &(u, v) in &list.edges {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::EdgeFile { path: path.display().to_string(), reason: e.to_string() })
}

/// Reads an edge file produced by [`dump_edges`]. Vertex ids must be below
/// `nvertices`.
pub fn load_edges(path: &Path, nvertices: u64) -> Result<EdgeList> {
    let fail = |reason: String| Error::EdgeFile { path: path.display().to_string(), reason };
    let file = std::fs::File::open(path).map_err(|e| fail(e.to_string()))?;
    let mut edges = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| fail(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64> {
            tok.ok_or_else(|| fail(format!("line {}: expected `u v`", lineno + 1)))?
                .parse::<u64>()
                .map_err(|e| fail(format!("line {}: {e}", lineno + 1)))
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(fail(format!("line {}: trailing fields", lineno + 1)));
        }
        if u >= nvertices || v >= nvertices {
            return Err(fail(format!(
                "line {}: vertex id out of range for {nvertices} vertices",
                lineno + 1
            )));
        }
        edges.push((u, v));
    }
    Ok(EdgeList { nvertices, edges })
}
