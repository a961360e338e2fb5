//! Command line front end for the pgasim benchmark.
//!
//! Exit codes: 0 when every run validated, 2 on a validation failure, 1 on
//! configuration errors.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use pgasim::bench::{run_bench_with_edges, BenchConfig, OutputFormat};
use pgasim::graph::{dump_edges, generate_edges, load_edges, GraphConfig};
use pgasim::Error;

/// Graph500-style BFS benchmark on a simulated multi-rank PGAS runtime,
/// with communication behavior selected by type chains.
#[derive(Parser, Debug)]
#[command(name = "pgasim", version)]
struct Args {
    /// log2 of the vertex count
    #[arg(long, default_value_t = 8)]
    scale: u32,

    /// Generated edge pairs per vertex
    #[arg(long, default_value_t = 16)]
    edgefactor: u32,

    /// Seed for graph generation and root sampling
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Comma-separated simulated rank counts to sweep
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    ranks: Vec<usize>,

    /// Communication mode: onesided|p2p|both
    #[arg(long, default_value = "both")]
    mode: String,

    /// Coalescing buffer capacity in elements for p2p mode
    #[arg(long, default_value_t = 256)]
    buffer: usize,

    /// BFS roots sampled per configuration
    #[arg(long, default_value_t = 16)]
    roots: usize,

    /// Scheduler: det|free
    #[arg(long, default_value = "det")]
    scheduler: String,

    /// Report format: json|csv
    #[arg(long, default_value = "json")]
    output: String,

    /// Write the edge list to this file, one "u v" pair per line
    #[arg(long, value_name = "PATH")]
    dump_edges: Option<PathBuf>,

    /// Read the edge list from this file instead of generating it
    #[arg(long, value_name = "PATH")]
    load_edges: Option<PathBuf>,
}

fn main() {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    let code = match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ValidationFailure { .. } => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}

fn run(args: Args) -> pgasim::Result<()> {
    let config = BenchConfig {
        scale: args.scale,
        edgefactor: args.edgefactor,
        seed: args.seed,
        num_roots: args.roots,
        ranks: args.ranks,
        mode: args.mode.parse()?,
        async_capacity: args.buffer,
        scheduler: args.scheduler.parse()?,
        output: args.output.parse()?,
    };
    config.validate()?;

    let edges = match &args.load_edges {
        Some(path) => load_edges(path, 1u64 << config.scale)?,
        None => generate_edges(&GraphConfig::new(config.scale, config.edgefactor, config.seed))?,
    };
    if let Some(path) = &args.dump_edges {
        dump_edges(&edges, path)?;
    }

    let report = run_bench_with_edges(&config, &edges)?;
    match config.output {
        OutputFormat::Json => println!("{}", report.to_json()),
        OutputFormat::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}
