//! pgasim is a simulated multi-rank PGAS (Partitioned Global Address Space)
//! runtime in which all parallel behavior of a variable — where it is
//! allocated, how it is distributed, and how it communicates — is selected by
//! the *type chain* attached to it, plus a Graph500-style breadth-first-search
//! benchmark built on top.
//!
//! # Type chains
//!
//! A type chain is an ordered composition of type descriptors joined by `::`,
//! e.g.
//!
//! ```text
//! array[Long,1024]::allocated[partitioned[4]::single[evendist]]
//! queue[GraphVertex]::allocated[multiple]::async[128]
//! ```
//!
//! Attribute precedence is right to left: the rightmost descriptor that
//! defines an attribute wins. Undeclared attributes take documented defaults
//! (read-write, one-sided communication, 256-element coalescing buffers, no
//! reduction). Composition is checked: meaningless coercions such as
//! `Int::Char` are rejected. See [`typechain`].
//!
//! # Runtime
//!
//! [`runtime::World`] runs one OS thread per simulated rank. Global memory is
//! partitioned and each block has affinity with one rank; remote access moves
//! through the runtime as one-sided puts or as asynchronous sends staged in
//! per-destination coalescing buffers, according to the owning variable's
//! chain. `sync` flushes and delivers everything and acts as a barrier;
//! `allreduce` combines a value across ranks. Message, element, and byte
//! counters make the communication cost of each mode observable.
//!
//! # Benchmark
//!
//! [`graph`] generates Kronecker (R-MAT) edge lists and builds a
//! block-distributed CSR graph; [`bfs`] runs the level-synchronized BFS kernel
//! in either communication mode and validates the search tree against a
//! sequential oracle; [`mod@bench`] sweeps modes, rank counts, and roots,
//! reports TEPS, and serializes machine-readable reports.
//!
//! # Example
//!
//! ```
//! use pgasim::distdata::DistArray;
//! use pgasim::runtime::{RuntimeConfig, Scheduler, World};
//! use pgasim::typechain::TypeChain;
//!
//! let world = World::new(RuntimeConfig::new(4, Scheduler::Deterministic));
//! let chain = TypeChain::parse(
//!     "array[Long,16]::allocated[partitioned[4]::single[evendist]]",
//! )?;
//! let array = DistArray::allocate(&world, chain)?;
//!
//! let (report, _) = world.run(|ctx| {
//!     // every rank writes the first element of its own block
//!     array.set(ctx, ctx.rank() * 4, ctx.rank() as i64)?;
//!     ctx.sync()
//! })?;
//! assert_eq!(report.messages_sent, 0); // all writes were rank-local
//! assert_eq!(array.read_all(&world)[4], 1);
//! # Ok::<(), pgasim::Error>(())
//! ```

pub mod bench;
pub mod bfs;
pub mod distdata;
mod error;
pub mod graph;
pub mod runtime;
pub mod typechain;

pub use error::{Error, Result};
