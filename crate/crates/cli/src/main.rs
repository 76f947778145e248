use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dynamatch::engine::{Backend, EngineParams};
use dynamatch::graph::{parse_stream, write_stream};
use dynamatch::harness::{
    gen_stream, run, run_stream, verify_matching_log, write_matching_log, write_metrics, AuditLevel, RunConfig,
    StreamModel, StreamSpec,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "dynamatch", version, about = "Fully dynamic maximal matching driver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Det,
    Rand,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditArg {
    Off,
    Sampled,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Random,
    Decremental,
    Adaptive,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the engine over a stream file or a generated stream.
    Run {
        /// Stream file, or `random|decremental|adaptive[:key=value...]`
        /// with keys `len`, `p` (insert probability) and `density`.
        #[arg(long)]
        stream: String,
        /// Vertex count for generated streams.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "B")]
        b: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value = "det")]
        backend: BackendArg,
        #[arg(long, value_enum, default_value = "sampled")]
        audit: AuditArg,
        /// Audit period for `sampled`, validator period for `full`.
        #[arg(long, default_value_t = 100)]
        audit_every: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Load the leading insertions in bulk before measuring.
        #[arg(long)]
        bulk_load: bool,
        #[arg(long, default_value_t = 1000)]
        window: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the matching after every update as JSON lines.
        #[arg(long)]
        matching_log: Option<PathBuf>,
        /// Write the stream actually played (useful for adaptive streams).
        #[arg(long)]
        save_stream: Option<PathBuf>,
    },
    /// Generate a stream file.
    Gen {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.6)]
        p: f64,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a matching log against a stream.
    Verify {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        matching_log: PathBuf,
    },
}

fn model(kind: ModelArg, p: f64, density: f64) -> StreamModel {
    match kind {
        ModelArg::Random => StreamModel::RandomInsertDelete { p_insert: p },
        ModelArg::Decremental => StreamModel::DecrementalFromDense { density },
        ModelArg::Adaptive => StreamModel::AdaptiveMatchedEdgeDeleter { density, p_insert: p },
    }
}

fn parse_spec(text: &str, n: Option<usize>, seed: u64) -> Result<StreamSpec> {
    let mut parts = text.split(':');
    let kind = match parts.next().unwrap_or("") {
        "random" => ModelArg::Random,
        "decremental" => ModelArg::Decremental,
        "adaptive" => ModelArg::Adaptive,
        other => bail!("unknown stream model `{other}` and no such file"),
    };
    let (mut len, mut p, mut density) = (10_000usize, 0.6, 0.3);
    for kv in parts {
        let (k, v) = kv.split_once('=').with_context(|| format!("expected key=value, got `{kv}`"))?;
        match k {
            "len" => len = v.parse()?,
            "p" => p = v.parse()?,
            "density" => density = v.parse()?,
            _ => bail!("unknown stream key `{k}`"),
        }
    }
    let n = n.context("--n is required for generated streams")?;
    Ok(StreamSpec { n, length: len, model: model(kind, p, density), seed })
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run {
            stream,
            n,
            b,
            eps,
            backend,
            audit,
            audit_every,
            seed,
            bulk_load,
            window,
            out,
            matching_log,
            save_stream,
        } => {
            let backend = match backend {
                BackendArg::Det => Backend::Deterministic,
                BackendArg::Rand => Backend::Randomized,
            };
            let mut params = EngineParams::new(b, eps, backend);
            params.seed = seed;
            let mut cfg = RunConfig::new(params);
            cfg.audit = match audit {
                AuditArg::Off => AuditLevel::Off,
                AuditArg::Sampled => AuditLevel::Sampled { every: audit_every },
                AuditArg::Full => AuditLevel::Full { validate_every: audit_every },
            };
            cfg.bulk_load = bulk_load;
            cfg.window = window;
            cfg.log_matchings = matching_log.is_some();
            let outcome = if Path::new(&stream).is_file() {
                let s = parse_stream(&std::fs::read_to_string(&stream)?)?;
                if let Some(n) = n {
                    if n != s.n {
                        bail!("--n {n} disagrees with the stream header n {}", s.n);
                    }
                }
                run_stream(&cfg, &s)?
            } else {
                run(&cfg, &parse_spec(&stream, n, seed)?)?
            };
            let metrics = write_metrics(&outcome.records);
            match out {
                Some(path) => std::fs::write(&path, metrics).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{metrics}"),
            }
            if let Some(path) = matching_log {
                std::fs::write(path, write_matching_log(&outcome.matchings))?;
            }
            if let Some(path) = save_stream {
                std::fs::write(path, write_stream(&outcome.stream))?;
            }
            let s = &outcome.summary;
            eprintln!(
                "{} updates, {:.1} work/update (baseline {}), max recourse {}, final matching {}",
                s.updates, s.avg_work, s.n, s.max_recourse, s.final_matching_size
            );
        }
        Cmd::Gen { model: kind, n, len, seed, p, density, out } => {
            let s = gen_stream(&StreamSpec { n, length: len, model: model(kind, p, density), seed })?;
            std::fs::write(&out, write_stream(&s))?;
            eprintln!("{} events written to {}", s.events.len(), out.display());
        }
        Cmd::Verify { stream, matching_log } => {
            let s = parse_stream(&std::fs::read_to_string(&stream)?)?;
            let log = std::fs::read_to_string(&matching_log)?;
            let checked = verify_matching_log(&s, &log)?;
            println!("ok: {checked} matchings verified");
        }
    }
    Ok(())
}
