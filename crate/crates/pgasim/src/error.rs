//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong, from type-chain validation to a failed
/// benchmark run.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Two types were combined that cannot legally be coerced,
    /// e.g. `Int::Char`.
    #[error("illegal type coercion {left}::{right}")]
    IllegalCoercion { left: String, right: String },

    /// A chain is structurally broken: wrong descriptor arguments,
    /// an attribute in leading position, and so on.
    #[error("invalid type chain: {reason}")]
    InvalidChain { reason: String },

    /// Failed to parse the text rendering of a type chain.
    #[error("cannot parse type chain at byte {at}: {reason}")]
    ChainParse { at: usize, reason: String },

    /// A remote address (object id, index) did not resolve on the
    /// destination rank.
    #[error("bad address on rank {dst}: object {object}, index {index}")]
    BadAddress { dst: usize, object: usize, index: usize },

    /// Some ranks waited at a collective that the named ranks can never
    /// reach because their programs already returned.
    #[error("deadlock: rank(s) {missing:?} finished without reaching the collective that rank(s) {waiting:?} entered")]
    Deadlock { waiting: Vec<usize>, missing: Vec<usize> },

    /// Ranks disagreed on which collective (or which reduction op) they
    /// were performing.
    #[error("mismatched collective: expected {expected}, rank {rank} called {found}")]
    MismatchedCollective { expected: String, found: String, rank: usize },

    /// A rank's program panicked.
    #[error("rank {rank} panicked: {message}")]
    RankPanic { rank: usize, message: String },

    /// Index outside a distributed collection's global bounds.
    #[error("index {index} out of bounds (length {len})")]
    OutOfBounds { index: usize, len: usize },

    /// Pop from an empty local queue.
    #[error("pop from empty queue on rank {rank}")]
    EmptyQueue { rank: usize },

    /// The graph does not contain enough non-isolated vertices to pick
    /// the requested number of search keys.
    #[error("only {available} non-isolated vertices available, {requested} search keys requested")]
    NotEnoughKeys { requested: usize, available: usize },

    /// BFS was asked to start from a vertex with no edges.
    #[error("root vertex {root} is isolated")]
    IsolatedRoot { root: u64 },

    /// A BFS result failed one of the five validation rules.
    #[error("validation rule {rule} failed at vertex {witness}: {detail}")]
    ValidationFailure { rule: u8, witness: u64, detail: String },

    /// Invalid configuration (bad chain for an allocation, bad CLI
    /// values, inconsistent benchmark settings...).
    #[error("configuration error: {0}")]
    Config(String),

    /// compare_modes was asked to pair runs that one mode is missing.
    #[error("no matching run for mode {mode} at ranks={ranks} root={root}")]
    MissingPair { mode: String, ranks: usize, root: u64 },

    /// Failure reading or writing an edge-list file.
    #[error("edge file {path}: {reason}")]
    EdgeFile { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid_chain(reason: impl Into<String>) -> Self {
        Error::InvalidChain { reason: reason.into() }
    }

    pub(crate) fn coercion(left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::IllegalCoercion { left: left.into(), right: right.into() }
    }
}
