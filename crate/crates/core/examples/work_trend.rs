//! Average work per update on dense decremental streams.
//!
//! `cargo run --release --example work_trend -- det 512 1024 2048 4096`

use dynamatch::engine::{Backend, EngineParams};
use dynamatch::harness::{run, AuditLevel, RunConfig, StreamModel, StreamSpec};

/// `(B, ε)` for the deterministic (`δ ∝ n^{-1/9}`, `B = n^{2/9}`) or the
/// randomized (`δ ∝ n^{-1/4}`, `B = n^{1/2}`) scaling, with `ε = δ/100`.
pub fn scaling(backend: Backend, n: usize) -> (usize, f64) {
    let nf = n as f64;
    let (delta, b) = match backend {
        Backend::Deterministic => (0.25 * nf.powf(-1.0 / 9.0), nf.powf(2.0 / 9.0)),
        Backend::Randomized => (0.5 * nf.powf(-0.25), nf.sqrt()),
    };
    (b.round().max(2.0) as usize, delta / 100.0)
}

fn main() {
    let mut args = std::env::args().skip(1);
    let backend = match args.next().as_deref() {
        Some("rand") => Backend::Randomized,
        _ => Backend::Deterministic,
    };
    let ns: Vec<usize> = args.map(|a| a.parse().expect("vertex count")).collect();
    for n in ns {
        let (b, eps) = scaling(backend, n);
        let mut cfg = RunConfig::new(EngineParams::new(b, eps, backend));
        cfg.audit = AuditLevel::Off;
        cfg.bulk_load = true;
        let density = (4.0 / (n as f64).sqrt()).min(1.0);
        let spec = StreamSpec { n, length: 4 * n, model: StreamModel::DecrementalFromDense { density }, seed: 1 };
        let out = run(&cfg, &spec).expect("run");
        let s = out.summary;
        println!(
            "n={n} B={b} eps={eps:.5} m0={} updates={} avg_work={:.1} phases={} wall={:.1}s",
            s.initial_edges, s.updates, s.avg_work, s.phases, s.wall_secs
        );
        if std::env::var_os("BREAKDOWN").is_some() {
            println!("  {:?}", s.breakdown);
        }
    }
}
