use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hyplab::harness::{self, RunOptions, COMMANDS};
use hyplab::{Error, Result};

/// Spectral experiments on hyperbolic surfaces assembled from pants.
#[derive(Parser, Debug)]
#[command(name = "hyplab", version)]
struct Cli {
    /// Surface spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// One of build, spectrum, heat-trace, extremal, graph, verify, sweep.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(COMMANDS))]
    command: String,
    /// Output directory; defaults to `outputs.dir` in the spec, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Single-threaded kernels for bitwise reproducible output.
    #[arg(long, num_args = 0..=1, default_value = "false", default_missing_value = "true")]
    deterministic: bool,
    /// Overrides `mesh_h`.
    #[arg(long)]
    h: Option<f64>,
    /// Edge list for the `graph` command.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Number of disc pairs for `extremal` and `verify`.
    #[arg(long)]
    samples: Option<usize>,
}

fn threads(deterministic: bool) -> Option<usize> {
    if deterministic {
        return Some(1);
    }
    std::env::var("HYPLAB_THREADS").ok().and_then(|s| s.parse().ok())
}

fn execute(cli: &Cli) -> Result<serde_json::Value> {
    if let Some(n) = threads(cli.deterministic) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Command(e.to_string()))?;
    }
    if cli.deterministic {
        faer::set_global_parallelism(faer::Par::Seq);
    }
    let text = std::fs::read_to_string(&cli.spec)?;
    let spec = harness::parse_spec(&text)?;
    let out = cli
        .out
        .clone()
        .or_else(|| spec.outputs.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions {
        out,
        seed: cli.seed,
        h: cli.h,
        graph: cli.graph.clone(),
        samples: cli.samples,
    };
    let r = harness::run(&spec, &cli.command, &opts)?;
    Ok(serde_json::json!({
        "status": "ok",
        "command": cli.command,
        "artifacts": r.artifacts,
        "summary": r.summary,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&harness::error_json(&e)).unwrap());
            ExitCode::FAILURE
        }
    }
}
