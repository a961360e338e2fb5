//! Benchmark harness: multi-root BFS runs swept over rank counts and
//! communication modes, TEPS statistics, and machine-readable reports.
//!
//! Every run is validated before it is reported; a validation failure aborts
//! the whole report. TEPS = edges_traversed / elapsed, aggregated per
//! (mode, ranks) group as arithmetic and harmonic means (the harmonic mean
//! is the headline number).

use serde::{Deserialize, Serialize};

use crate::bfs::{bfs_run, validate_tree, Mode};
use crate::error::{Error, Result};
use crate::graph::{build_csr, generate_edges, pick_search_keys, EdgeList, GraphConfig, MAX_SCALE};
use crate::runtime::{RunReport, Scheduler};
use crate::typechain::DEFAULT_ASYNC_CAPACITY;

/// Which communication modes a sweep covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeSelection {
    #[serde(rename = "onesided")]
    OneSided,
    #[serde(rename = "p2p")]
    P2p,
    #[serde(rename = "both")]
    Both,
}

impl std::str::FromStr for ModeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onesided" => Ok(ModeSelection::OneSided),
            "p2p" => Ok(ModeSelection::P2p),
            "both" => Ok(ModeSelection::Both),
            other => {
                Err(Error::Config(format!("unknown mode `{other}` (use onesided|p2p|both)")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    #[serde(rename = "json")]
    Json,
    #[serde(rename = "csv")]
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!("unknown output `{other}` (use json|csv)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub scale: u32,
    pub edgefactor: u32,
    pub seed: u64,
    pub num_roots: usize,
    pub ranks: Vec<usize>,
    pub mode: ModeSelection,
    pub async_capacity: usize,
    pub scheduler: Scheduler,
    pub output: OutputFormat,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scale: 8,
            edgefactor: 16,
            seed: 1,
            num_roots: 16,
            ranks: vec![1, 2, 4, 8],
            mode: ModeSelection::Both,
            async_capacity: DEFAULT_ASYNC_CAPACITY,
            scheduler: Scheduler::Deterministic,
            output: OutputFormat::Json,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale > MAX_SCALE {
            return Err(Error::Config(format!("scale {} exceeds {MAX_SCALE}", self.scale)));
        }
        if self.edgefactor == 0 {
            return Err(Error::Config("edgefactor must be positive".into()));
        }
        if self.num_roots == 0 {
            return Err(Error::Config("need at least one search root".into()));
        }
        if self.ranks.is_empty() || self.ranks.contains(&0) {
            return Err(Error::Config("rank counts must be positive and non-empty".into()));
        }
        if self.async_capacity == 0 {
            return Err(Error::Config("coalescing capacity must be positive".into()));
        }
        Ok(())
    }

    /// The concrete modes this configuration sweeps.
    pub fn modes(&self) -> Vec<Mode> {
        let p2p = Mode::Async { capacity: self.async_capacity };
        match self.mode {
            ModeSelection::OneSided => vec![Mode::OneSided],
            ModeSelection::P2p => vec![p2p],
            ModeSelection::Both => vec![Mode::OneSided, p2p],
        }
    }
}

/// The configuration a report was produced with, echoed into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub scale: u32,
    pub edgefactor: u32,
    pub seed: u64,
    pub num_roots: usize,
    pub ranks: Vec<usize>,
    pub modes: Vec<String>,
    pub async_capacity: usize,
    pub scheduler: Scheduler,
}

/// One validated BFS run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub mode: String,
    pub ranks: usize,
    pub root: u64,
    pub edges_traversed: u64,
    pub elapsed_seconds: f64,
    pub teps: f64,
    pub validated: bool,
    pub counters: RunReport,
}

/// TEPS summary over one (mode, ranks) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mode: String,
    pub ranks: usize,
    pub mean_teps: f64,
    pub harmonic_mean_teps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ConfigEcho,
    pub runs: Vec<RunRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Traversed edges per second. Elapsed time is floored at one nanosecond so
/// degenerate timings cannot produce non-finite values.
pub fn teps(edges_traversed: u64, elapsed_seconds: f64) -> f64 {
    edges_traversed as f64 / elapsed_seconds.max(1e-9)
}

/// Generates the graph for `config` and runs the whole sweep.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let edges = generate_edges(&GraphConfig::new(config.scale, config.edgefactor, config.seed))?;
    run_bench_with_edges(config, &edges)
}

/// Runs the sweep on an already built edge list (e.g. one loaded from a
/// file): every (ranks, mode, root) combination is run, validated, and
/// reported. The first validation failure aborts the report.
pub fn run_bench_with_edges(config: &BenchConfig, edges: &EdgeList) -> Result<BenchReport> {
    config.validate()?;
    let modes = config.modes();
    let mut runs = Vec::with_capacity(config.ranks.len() * modes.len() * config.num_roots);
    let mut keys: Option<Vec<u64>> = None;

    for &ranks in &config.ranks {
        let graph = build_csr(edges, ranks);
        // search keys depend only on degrees, which every partitioning
        // shares, so the same roots serve every rank count
        let keys = match &keys {
            Some(k) => k.clone(),
            None => {
                let k = pick_search_keys(&graph, config.num_roots, config.seed)?;
                keys = Some(k.clone());
                k
            }
        };
        for &mode in &modes {
            for &root in &keys {
                let result = bfs_run(&graph, root, mode, config.scheduler)?;
                validate_tree(&graph, root, &result).map_err(|e| match e {
                    Error::ValidationFailure { rule, witness, detail } => {
                        Error::ValidationFailure {
                            rule,
                            witness,
                            detail: format!(
                                "{detail} (mode {mode}, ranks {ranks}, root {root})"
                            ),
                        }
                    }
                    other => other,
                })?;
                runs.push(RunRow {
                    mode: mode.label().to_owned(),
                    ranks,
                    root,
                    edges_traversed: result.edges_traversed,
                    elapsed_seconds: result.elapsed_seconds,
                    teps: teps(result.edges_traversed, result.elapsed_seconds),
                    validated: true,
                    counters: result.report,
                });
            }
        }
    }

    let mut aggregates = Vec::new();
    for &ranks in &config.ranks {
        for &mode in &modes {
            let group: Vec<f64> = runs
                .iter()
                .filter(|r| r.ranks == ranks && r.mode == mode.label())
                .map(|r| r.teps)
                .collect();
            if group.is_empty() {
                continue;
            }
            let mean = group.iter().sum::<f64>() / group.len() as f64;
            let harmonic = group.len() as f64 / group.iter().map(|t| 1.0 / t).sum::<f64>();
            aggregates.push(Aggregate {
                mode: mode.label().to_owned(),
                ranks,
                mean_teps: mean,
                harmonic_mean_teps: harmonic,
            });
        }
    }

    Ok(BenchReport {
        config: ConfigEcho {
            scale: config.scale,
            edgefactor: config.edgefactor,
            seed: config.seed,
            num_roots: config.num_roots,
            ranks: config.ranks.clone(),
            modes: modes.iter().map(|m| m.label().to_owned()).collect(),
            async_capacity: config.async_capacity,
            scheduler: config.scheduler,
        },
        runs,
        aggregates,
    })
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<BenchReport> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad report JSON: {e}")))
    }

    /// Per-run rows as CSV (aggregates are JSON-only).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "mode,ranks,root,edges_traversed,elapsed_seconds,teps,validated,\
             messages_sent,elements_sent,bytes_sent,flushes\n",
        );
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.mode,
                r.ranks,
                r.root,
                r.edges_traversed,
                r.elapsed_seconds,
                r.teps,
                r.validated,
                r.counters.messages_sent,
                r.counters.elements_sent,
                r.counters.bytes_sent,
                r.counters.flushes,
            ));
        }
        out
    }

    /// Copy with every wall-time-derived field zeroed, for determinism
    /// comparisons: two runs with the same config and seed must be
    /// byte-identical after this.
    pub fn without_timing(&self) -> BenchReport {
        let mut out = self.clone();
        for r in &mut out.runs {
            r.elapsed_seconds = 0.0;
            r.teps = 0.0;
            r.counters = r.counters.without_timing();
        }
        for a in &mut out.aggregates {
            a.mean_teps = 0.0;
            a.harmonic_mean_teps = 0.0;
        }
        out
    }
}

/// Ratios of one-sided cost over p2p cost for one (ranks, root) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairComparison {
    pub ranks: usize,
    pub root: u64,
    /// one-sided messages / p2p messages; 1 when neither mode sent any.
    pub message_ratio: f64,
    pub element_ratio: f64,
    pub wall_time_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeComparison {
    pub pairs: Vec<PairComparison>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if a == 0 && b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// Pairs every one-sided run with the p2p run of the same (ranks, root) and
/// reports message, element, and wall-time ratios.
pub fn compare_modes(report: &BenchReport) -> Result<ModeComparison> {
    let one_sided: Vec<&RunRow> = report.runs.iter().filter(|r| r.mode == "onesided").collect();
    let p2p: Vec<&RunRow> = report.runs.iter().filter(|r| r.mode == "p2p").collect();
    if one_sided.is_empty() {
        return Err(Error::MissingPair { mode: "onesided".into(), ranks: 0, root: 0 });
    }
    let mut pairs = Vec::with_capacity(one_sided.len());
    for os in &one_sided {
        let partner = p2p
            .iter()
            .find(|r| r.ranks == os.ranks && r.root == os.root)
            .ok_or(Error::MissingPair { mode: "p2p".into(), ranks: os.ranks, root: os.root })?;
        pairs.push(PairComparison {
            ranks: os.ranks,
            root: os.root,
            message_ratio: ratio(os.counters.messages_sent, partner.counters.messages_sent),
            element_ratio: ratio(os.counters.elements_sent, partner.counters.elements_sent),
            wall_time_ratio: os.elapsed_seconds.max(1e-9) / partner.elapsed_seconds.max(1e-9),
        });
    }
    for p in &p2p {
        if !one_sided.iter().any(|r| r.ranks == p.ranks && r.root == p.root) {
            return Err(Error::MissingPair { mode: "onesided".into(), ranks: p.ranks, root: p.root });
        }
    }
    Ok(ModeComparison { pairs })
}
