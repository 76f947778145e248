//! Stream generation, oracle verification and instrumented runs.

use crate::engine::{Engine, EngineError, EngineParams, Fault};
use crate::graph::{norm, parse_stream, CoreError, DynGraph, Edge, Matching, Stream, UpdateEvent, UpdateKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("audit failed at update {index}: {invariant}")]
    AuditFailure { index: u64, invariant: String },
    #[error("bad metrics record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid stream spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum StreamModel {
    /// Starts empty; inserts a uniform non-edge with probability `p_insert`,
    /// otherwise deletes a uniform edge.
    RandomInsertDelete { p_insert: f64 },
    /// Inserts `G(n, density)`, then deletes its edges in uniform order.
    DecrementalFromDense { density: f64 },
    /// Inserts `G(n, density)`, then deletes a uniformly chosen edge of the
    /// target's current matching, or inserts a uniform non-edge with
    /// probability `p_insert` or when the matching is empty.
    AdaptiveMatchedEdgeDeleter { density: f64, p_insert: f64 },
    FromFile(PathBuf),
}

impl StreamModel {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, StreamModel::AdaptiveMatchedEdgeDeleter { .. })
    }
}

/// `length` counts events after the initial insertion prefix; the
/// decremental model stops early once the graph is empty.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StreamSpec {
    pub n: usize,
    pub length: usize,
    pub model: StreamModel,
    pub seed: u64,
}

/// Edge set with O(1) uniform sampling.
#[derive(Debug, Clone, Default)]
struct EdgePool {
    edges: Vec<Edge>,
    pos: HashMap<Edge, usize>,
}

impl EdgePool {
    fn insert(&mut self, e: Edge) {
        self.pos.insert(e, self.edges.len());
        self.edges.push(e);
    }

    fn remove(&mut self, e: Edge) {
        let i = self.pos.remove(&e).expect("edge in pool");
        self.edges.swap_remove(i);
        if i < self.edges.len() {
            self.pos.insert(self.edges[i], i);
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<Edge> {
        (!self.edges.is_empty()).then(|| self.edges[rng.gen_range(0..self.edges.len())])
    }
}

/// Update source that tracks the graph it has produced so far.
pub struct Adversary {
    spec: StreamSpec,
    rng: ChaCha8Rng,
    g: DynGraph,
    pool: EdgePool,
    prefix: Vec<UpdateEvent>,
    emitted: usize,
}

impl Adversary {
    pub fn new(spec: &StreamSpec) -> Result<Self, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n = spec.n;
        let mut prefix = Vec::new();
        let density = match spec.model {
            StreamModel::RandomInsertDelete { p_insert } => {
                check_prob(p_insert)?;
                0.0
            }
            StreamModel::DecrementalFromDense { density } => density,
            StreamModel::AdaptiveMatchedEdgeDeleter { density, p_insert } => {
                check_prob(p_insert)?;
                density
            }
            StreamModel::FromFile(_) => return Err(HarnessError::InvalidSpec("file streams are read, not generated".into())),
        };
        check_prob(density)?;
        if density > 0.0 {
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(density) {
                        prefix.push(UpdateEvent::insert(u, v));
                    }
                }
            }
        }
        if let StreamModel::DecrementalFromDense { .. } = spec.model {
            let mut dels: Vec<UpdateEvent> = prefix.iter().map(|e| UpdateEvent::delete(e.u, e.v)).collect();
            for i in (1..dels.len()).rev() {
                dels.swap(i, rng.gen_range(0..=i));
            }
            dels.truncate(spec.length);
            prefix.extend(dels);
        }
        Ok(Adversary { spec: spec.clone(), rng, g: DynGraph::new(n), pool: EdgePool::default(), prefix, emitted: 0 })
    }

    /// Events fixed before the target is consulted.
    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    /// Next event given the target's current matching, or `None` at the end.
    pub fn next(&mut self, matching: &[Edge]) -> Option<UpdateEvent> {
        let ev = if self.emitted < self.prefix.len() {
            self.prefix[self.emitted]
        } else {
            let i = self.emitted - self.prefix.len();
            match self.spec.model {
                StreamModel::DecrementalFromDense { .. } => return None,
                _ if i >= self.spec.length => return None,
                StreamModel::RandomInsertDelete { p_insert } => {
                    let insert = self.rng.gen_bool(p_insert);
                    self.random_update(insert)
                }
                StreamModel::AdaptiveMatchedEdgeDeleter { p_insert, .. } => {
                    if !matching.is_empty() && !self.rng.gen_bool(p_insert) {
                        let (u, v) = matching[self.rng.gen_range(0..matching.len())];
                        UpdateEvent::delete(u, v)
                    } else {
                        self.random_update(true)
                    }
                }
                StreamModel::FromFile(_) => unreachable!(),
            }
        };
        self.emitted += 1;
        self.g.apply_update(&ev).expect("adversary emits valid events");
        match ev.kind {
            UpdateKind::Insert => self.pool.insert(ev.edge()),
            UpdateKind::Delete => self.pool.remove(ev.edge()),
        }
        Some(ev)
    }

    /// Inserts a uniform non-edge (or deletes a uniform edge); falls back to
    /// the other kind when the graph is complete or empty.
    fn random_update(&mut self, insert: bool) -> UpdateEvent {
        let n = self.spec.n;
        let full = self.g.m() == n * (n - 1) / 2;
        if (insert && !full) || self.pool.edges.is_empty() {
            if 2 * self.g.m() < n * (n - 1) / 2 {
                loop {
                    let u = self.rng.gen_range(0..n);
                    let v = self.rng.gen_range(0..n);
                    if u != v && !self.g.has_edge(u, v) {
                        let (a, b) = norm(u, v);
                        return UpdateEvent::insert(a, b);
                    }
                }
            }
            let missing: Vec<Edge> =
                (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|&(u, v)| !self.g.has_edge(u, v)).collect();
            let (a, b) = missing[self.rng.gen_range(0..missing.len())];
            UpdateEvent::insert(a, b)
        } else {
            let (a, b) = self.pool.sample(&mut self.rng).expect("nonempty");
            UpdateEvent::delete(a, b)
        }
    }
}

fn check_prob(p: f64) -> Result<(), HarnessError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(HarnessError::InvalidSpec(format!("probability {p} not in [0, 1]")))
    }
}

/// Maximal matching repaired by scanning both endpoints' neighbourhoods.
#[derive(Debug, Clone)]
pub struct NaiveMaximal {
    g: DynGraph,
    m: Matching,
    pub work: u64,
}

impl NaiveMaximal {
    pub fn new(n: usize) -> Self {
        NaiveMaximal { g: DynGraph::new(n), m: Matching::new(n), work: 0 }
    }

    pub fn matching(&self) -> &Matching {
        &self.m
    }

    pub fn apply(&mut self, e: &UpdateEvent) -> Result<(), CoreError> {
        self.g.apply_update(e)?;
        self.work += 1;
        let (u, v) = e.edge();
        match e.kind {
            UpdateKind::Insert => {
                if !self.m.is_matched(u) && !self.m.is_matched(v) {
                    self.m.add(u, v);
                }
            }
            UpdateKind::Delete => {
                if self.m.remove(u, v) {
                    self.rematch(u);
                    self.rematch(v);
                }
            }
        }
        Ok(())
    }

    fn rematch(&mut self, x: usize) {
        for &y in self.g.neighbors(x) {
            self.work += 1;
            if !self.m.is_matched(y) {
                self.m.add(x, y);
                return;
            }
        }
    }
}

/// Materializes the stream. Adaptive models play against [`NaiveMaximal`];
/// [`run`] instead plays them against the engine under test.
pub fn gen_stream(spec: &StreamSpec) -> Result<Stream, HarnessError> {
    if let StreamModel::FromFile(path) = &spec.model {
        let text = std::fs::read_to_string(path)?;
        let mut s = parse_stream(&text)?;
        s.events.truncate(spec.length);
        return Ok(s);
    }
    let mut adv = Adversary::new(spec)?;
    let mut target = NaiveMaximal::new(spec.n);
    let mut events = Vec::new();
    while let Some(e) = adv.next(&target.matching().edges()) {
        target.apply(&e)?;
        events.push(e);
    }
    Ok(Stream { n: spec.n, events })
}

/// First edge of `g` with both endpoints free in `m`, if any.
pub fn oracle_verify(g: &DynGraph, m: &Matching) -> Result<(), Edge> {
    match m.first_uncovered(g) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AuditLevel {
    Off,
    /// Oracle and validators every `every` updates.
    Sampled { every: u64 },
    /// Oracle after every update, validators every `validate_every` updates.
    Full { validate_every: u64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub engine: EngineParams,
    pub audit: AuditLevel,
    /// Load the leading insertions in bulk and exclude them from the metrics.
    pub bulk_load: bool,
    /// Updates per window record.
    pub window: u64,
    #[serde(skip)]
    pub fault: Option<Fault>,
    /// Keep `M_final` after every update.
    pub log_matchings: bool,
}

impl RunConfig {
    pub fn new(engine: EngineParams) -> Self {
        RunConfig {
            engine,
            audit: AuditLevel::Full { validate_every: 1 },
            bulk_load: false,
            window: 1000,
            fault: None,
            log_matchings: false,
        }
    }
}

/// One metrics line. Counters named `total_*` are cumulative over the run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricsRecord {
    Window(WindowRecord),
    Summary(RunSummary),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowRecord {
    pub start: u64,
    pub end: u64,
    pub work: u64,
    pub scans: u64,
    pub es_label_changes: u64,
    pub walk_steps: u64,
    pub edcs_flips: u64,
    pub max_recourse: u64,
    pub total_work: u64,
    pub total_base_changes: u64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub updates: u64,
    pub initial_edges: usize,
    pub total_work: u64,
    pub avg_work: f64,
    /// Work of a trivial `n`-per-update scan over the same updates.
    pub baseline_work: u64,
    pub phases: u64,
    pub max_recourse: u64,
    pub max_med_free: u64,
    pub med_free_bound: f64,
    pub max_damaged: u64,
    /// Largest `deg_{G_adj}(v) / (δn + B + n/B)` seen by the validators.
    pub max_adj_degree_ratio: f64,
    pub enew_rescues: u64,
    pub static_fallbacks: u64,
    pub oracle_checks: u64,
    pub validator_checks: u64,
    pub audit_failures: u64,
    pub final_matching_size: usize,
    pub wall_secs: f64,
    /// Engine counters accumulated after the initial load.
    pub breakdown: crate::engine::EngineMetrics,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<MetricsRecord>,
    pub summary: RunSummary,
    /// The stream actually played, including adaptive choices.
    pub stream: Stream,
    pub matchings: Vec<Vec<Edge>>,
}

/// Drives the engine over the stream described by `spec`. Adaptive models consult the
/// engine itself between updates.
pub fn run(cfg: &RunConfig, spec: &StreamSpec) -> Result<RunOutcome, HarnessError> {
    if spec.model.is_adaptive() {
        let adv = Adversary::new(spec)?;
        run_source(cfg, spec.n, Source::Adaptive(adv))
    } else {
        let s = gen_stream(spec)?;
        run_stream(cfg, &s)
    }
}

pub fn run_stream(cfg: &RunConfig, stream: &Stream) -> Result<RunOutcome, HarnessError> {
    run_source(cfg, stream.n, Source::Fixed(&stream.events))
}

enum Source<'a> {
    Fixed(&'a [UpdateEvent]),
    Adaptive(Adversary),
}

fn run_source(cfg: &RunConfig, n: usize, mut src: Source) -> Result<RunOutcome, HarnessError> {
    let t0 = Instant::now();
    // An adaptive source only has a fixed prefix; later insertions react to
    // the engine and must not be absorbed by the bulk load.
    let bulk_limit = match &src {
        Source::Fixed(_) => usize::MAX,
        Source::Adaptive(a) => a.prefix_len(),
    };
    let mut played = Vec::new();
    let mut cursor = 0usize;
    let mut next = |engine: Option<&Engine>, played: &mut Vec<UpdateEvent>| -> Option<UpdateEvent> {
        let e = match &mut src {
            Source::Fixed(ev) => {
                let e = ev.get(cursor).copied();
                cursor += 1;
                e
            }
            Source::Adaptive(a) => {
                let m = engine.map(|e| e.matching_edges()).unwrap_or_default();
                a.next(&m)
            }
        };
        if let Some(e) = e {
            played.push(e);
        }
        e
    };

    let mut initial = DynGraph::new(n);
    let mut pending = None;
    if cfg.bulk_load {
        while initial.m() < bulk_limit {
            let Some(e) = next(None, &mut played) else { break };
            if e.kind == UpdateKind::Insert && !initial.has_edge(e.u, e.v) {
                initial.insert_edge(e.u, e.v)?;
            } else {
                pending = Some(e);
                break;
            }
        }
    }
    let initial_edges = initial.m();
    let mut engine = Engine::from_graph(initial, cfg.engine)?;
    if let Some(f) = cfg.fault {
        engine.inject_fault(f);
    }
    let base = engine.metrics();
    let med_free_bound = 22.0 * cfg.engine.delta() * n as f64;

    let mut records = Vec::new();
    let mut matchings = Vec::new();
    let (mut oracle_checks, mut validator_checks) = (0u64, 0u64);
    let mut max_adj_ratio = 0.0f64;
    let mut index = 0u64;
    let window = cfg.window.max(1);
    let mut win_start = (0u64, engine.metrics(), Instant::now(), 0u64);
    loop {
        let ev = match pending.take() {
            Some(e) => e,
            None => match next(Some(&engine), &mut played) {
                Some(e) => e,
                None => break,
            },
        };
        let fail = |invariant: String| HarnessError::AuditFailure { index, invariant };
        match engine.handle_update(&ev) {
            Ok(()) => {}
            Err(EngineError::RecourseExceeded { changes, cap, .. }) => {
                return Err(fail(format!("recourse: {changes} base changes exceed {cap}")))
            }
            Err(e) => return Err(e.into()),
        }
        let m = engine.metrics();
        win_start.3 = win_start.3.max(m.max_recourse);
        let (oracle, validate) = match cfg.audit {
            AuditLevel::Off => (false, false),
            AuditLevel::Sampled { every } => {
                let hit = (index + 1).is_multiple_of(every.max(1));
                (hit, hit)
            }
            AuditLevel::Full { validate_every } => (true, (index + 1).is_multiple_of(validate_every.max(1))),
        };
        if oracle {
            oracle_checks += 1;
            let fm = engine.current_matching();
            fm.validate_against(engine.graph()).map_err(|s| fail(format!("matching: {s}")))?;
            if let Err((a, b)) = oracle_verify(engine.graph(), &fm) {
                return Err(fail(format!("maximality: edge ({a}, {b}) has both endpoints free")));
            }
            let sl = engine.slack();
            if !sl.holds() {
                return Err(fail(format!("slack: {sl:?}")));
            }
        }
        if validate {
            validator_checks += 1;
            max_adj_ratio = max_adj_ratio.max(engine.adj_degree_ratio());
            let rep = engine.edcs().validate(engine.graph());
            if !rep.is_clean() {
                return Err(fail(format!("edcs: {rep:?}")));
            }
            engine.audit().map_err(|s| fail(format!("structure: {s}")))?;
        }
        if cfg.log_matchings {
            matchings.push(engine.matching_edges());
        }
        index += 1;
        if index.is_multiple_of(window) {
            records.push(window_record(&win_start, index, &m, &base));
            win_start = (index, m, Instant::now(), 0);
        }
    }
    let m = engine.metrics();
    if index > win_start.0 {
        records.push(window_record(&win_start, index, &m, &base));
    }
    let total_work = m.total_work() - base.total_work();
    let summary = RunSummary {
        n,
        updates: index,
        initial_edges,
        total_work,
        avg_work: total_work as f64 / index.max(1) as f64,
        baseline_work: n as u64 * index,
        phases: m.phases,
        max_recourse: m.max_recourse,
        max_med_free: m.max_med_free,
        med_free_bound,
        max_damaged: m.max_damaged,
        max_adj_degree_ratio: max_adj_ratio,
        enew_rescues: m.enew_rescues,
        static_fallbacks: m.static_fallbacks,
        oracle_checks,
        validator_checks,
        audit_failures: 0,
        final_matching_size: engine.current_matching().size(),
        wall_secs: t0.elapsed().as_secs_f64(),
        breakdown: m.since(&base),
    };
    records.push(MetricsRecord::Summary(summary.clone()));
    Ok(RunOutcome { records, summary, stream: Stream { n, events: played }, matchings })
}

fn window_record(
    start: &(u64, crate::engine::EngineMetrics, Instant, u64),
    end: u64,
    m: &crate::engine::EngineMetrics,
    base: &crate::engine::EngineMetrics,
) -> MetricsRecord {
    let s = &start.1;
    MetricsRecord::Window(WindowRecord {
        start: start.0,
        end,
        work: m.total_work() - s.total_work(),
        scans: m.scans - s.scans,
        es_label_changes: m.es_label_changes - s.es_label_changes,
        walk_steps: m.walk_steps - s.walk_steps,
        edcs_flips: m.edcs_flips - s.edcs_flips,
        max_recourse: start.3,
        total_work: m.total_work() - base.total_work(),
        total_base_changes: m.base_changes - base.base_changes,
        wall_secs: start.2.elapsed().as_secs_f64(),
    })
}

/// Runs independent configurations on worker threads, one per job.
pub fn run_many(jobs: &[(RunConfig, StreamSpec)]) -> Vec<Result<RunOutcome, HarnessError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|(c, sp)| s.spawn(move || run(c, sp))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    })
}

pub fn write_metrics(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("plain record"));
        out.push('\n');
    }
    out
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>, HarnessError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

/// One line per update: the matching after that update.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MatchingLogEntry {
    pub index: u64,
    pub edges: Vec<Edge>,
}

pub fn write_matching_log(matchings: &[Vec<Edge>]) -> String {
    let mut out = String::new();
    for (i, edges) in matchings.iter().enumerate() {
        let rec = MatchingLogEntry { index: i as u64, edges: edges.clone() };
        out.push_str(&serde_json::to_string(&rec).expect("plain record"));
        out.push('\n');
    }
    out
}

/// Replays `stream` and checks that each logged matching is a maximal
/// matching of the graph after its update. Returns the number of entries.
pub fn verify_matching_log(stream: &Stream, log: &str) -> Result<u64, HarnessError> {
    let mut g = DynGraph::new(stream.n);
    let mut checked = 0u64;
    let mut applied = 0usize;
    for line in log.lines().filter(|l| !l.trim().is_empty()) {
        let rec: MatchingLogEntry = serde_json::from_str(line)?;
        let target = rec.index as usize + 1;
        if target > stream.events.len() || target <= applied {
            return Err(HarnessError::InvalidSpec(format!("log index {} out of order or range", rec.index)));
        }
        while applied < target {
            g.apply_update(&stream.events[applied])?;
            applied += 1;
        }
        let fail = |invariant: String| HarnessError::AuditFailure { index: rec.index, invariant };
        let m = Matching::from_edges(stream.n, rec.edges.iter().copied()).map_err(|e| fail(e.to_string()))?;
        m.validate_against(&g).map_err(|s| fail(format!("matching: {s}")))?;
        if let Err((a, b)) = oracle_verify(&g, &m) {
            return Err(fail(format!("maximality: edge ({a}, {b}) has both endpoints free")));
        }
        checked += 1;
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Backend;

    fn spec(n: usize, length: usize, model: StreamModel, seed: u64) -> StreamSpec {
        StreamSpec { n, length, model, seed }
    }

    fn replay_valid(s: &Stream) {
        let mut g = DynGraph::new(s.n);
        for e in &s.events {
            g.apply_update(e).unwrap();
        }
    }

    #[test]
    fn zero_length_stream_is_empty() {
        let s = gen_stream(&spec(10, 0, StreamModel::RandomInsertDelete { p_insert: 0.5 }, 1)).unwrap();
        assert!(s.events.is_empty());
    }

    #[test]
    fn decremental_k4_deletes_six_edges() {
        let s = gen_stream(&spec(4, 100, StreamModel::DecrementalFromDense { density: 1.0 }, 3)).unwrap();
        let dels: Vec<_> = s.events.iter().filter(|e| e.kind == UpdateKind::Delete).collect();
        assert_eq!(dels.len(), 6);
        assert_eq!(s.events.len(), 12);
        replay_valid(&s);
    }

    #[test]
    fn streams_replay_bit_for_bit() {
        for model in [
            StreamModel::RandomInsertDelete { p_insert: 0.6 },
            StreamModel::DecrementalFromDense { density: 0.3 },
            StreamModel::AdaptiveMatchedEdgeDeleter { density: 0.3, p_insert: 0.2 },
        ] {
            let sp = spec(30, 500, model, 9);
            let a = gen_stream(&sp).unwrap();
            assert_eq!(a, gen_stream(&sp).unwrap());
            replay_valid(&a);
        }
    }

    #[test]
    fn oracle_examples() {
        let g = DynGraph::new(3);
        assert_eq!(oracle_verify(&g, &Matching::new(3)), Ok(()));
        let g = DynGraph::from_edges(3, [(0, 2)]).unwrap();
        assert_eq!(oracle_verify(&g, &Matching::new(3)), Err((0, 2)));
    }

    #[test]
    fn adaptive_star_always_hits_the_matched_edge() {
        // Star centred at 0; the adversary deletes whatever the engine matched.
        let n = 30;
        let mut p = EngineParams::new(4, 0.001, Backend::Deterministic);
        p.seed = 5;
        let mut engine = Engine::from_graph(DynGraph::from_edges(n, (1..n).map(|v| (0, v))).unwrap(), p).unwrap();
        for _ in 1..n {
            let m = engine.matching_edges();
            assert_eq!(m.len(), 1);
            assert_eq!(m[0].0, 0);
            engine.handle_update(&UpdateEvent::delete(m[0].0, m[0].1)).unwrap();
            assert_eq!(oracle_verify(engine.graph(), &engine.current_matching()), Ok(()));
        }
        assert_eq!(engine.graph().m(), 0);
    }

    #[test]
    fn full_audit_run_passes_and_metrics_round_trip() {
        let mut cfg = RunConfig::new(EngineParams::new(8, 0.001, Backend::Deterministic));
        cfg.window = 100;
        for model in [
            StreamModel::RandomInsertDelete { p_insert: 0.6 },
            StreamModel::DecrementalFromDense { density: 0.4 },
            StreamModel::AdaptiveMatchedEdgeDeleter { density: 0.4, p_insert: 0.3 },
        ] {
            let out = run(&cfg, &spec(40, 600, model, 2)).unwrap();
            assert_eq!(out.summary.audit_failures, 0);
            assert_eq!(out.summary.oracle_checks, out.summary.updates);
            let text = write_metrics(&out.records);
            assert_eq!(parse_metrics(&text).unwrap(), out.records);
            let totals: Vec<u64> = out
                .records
                .iter()
                .filter_map(|r| match r {
                    MetricsRecord::Window(w) => Some(w.total_work),
                    _ => None,
                })
                .collect();
            assert!(totals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn injected_fault_is_caught_at_the_uncovered_edge() {
        // After deleting (0, 1), vertex 1 must rematch with the free vertex 2.
        let s = Stream {
            n: 20,
            events: vec![UpdateEvent::insert(0, 1), UpdateEvent::insert(1, 2), UpdateEvent::delete(0, 1)],
        };
        let mut cfg = RunConfig::new(EngineParams::new(4, 0.002, Backend::Deterministic));
        cfg.fault = Some(Fault::SkipRematch { at_update: 2 });
        match run_stream(&cfg, &s) {
            Err(HarnessError::AuditFailure { index, invariant }) => {
                assert_eq!(index, 2);
                assert!(invariant.starts_with("maximality: edge (1, 2)"), "{invariant}");
            }
            other => panic!("expected audit failure, got {other:?}"),
        }
        cfg.fault = None;
        run_stream(&cfg, &s).unwrap();
    }

    #[test]
    fn matching_log_verifies() {
        let mut cfg = RunConfig::new(EngineParams::new(8, 0.001, Backend::Randomized));
        cfg.log_matchings = true;
        cfg.audit = AuditLevel::Off;
        let out = run(&cfg, &spec(40, 300, StreamModel::RandomInsertDelete { p_insert: 0.7 }, 4)).unwrap();
        let log = write_matching_log(&out.matchings);
        assert_eq!(verify_matching_log(&out.stream, &log).unwrap(), 300);
        let mut bad = out.matchings.clone();
        bad[299].clear();
        assert!(verify_matching_log(&out.stream, &write_matching_log(&bad)).is_err());
    }

    #[test]
    fn bulk_load_excludes_prefix() {
        let mut cfg = RunConfig::new(EngineParams::new(8, 0.001, Backend::Deterministic));
        cfg.bulk_load = true;
        cfg.audit = AuditLevel::Sampled { every: 10 };
        let out = run(&cfg, &spec(40, 200, StreamModel::DecrementalFromDense { density: 0.5 }, 6)).unwrap();
        assert_eq!(out.summary.updates as usize, out.summary.initial_edges.min(200));
        assert_eq!(out.summary.oracle_checks, out.summary.updates / 10);
    }

    #[test]
    fn adaptive_bulk_load_stops_at_prefix() {
        let mut cfg = RunConfig::new(EngineParams::new(8, 0.001, Backend::Deterministic));
        cfg.bulk_load = true;
        let model = StreamModel::AdaptiveMatchedEdgeDeleter { density: 0.3, p_insert: 0.3 };
        let s = spec(60, 300, model, 2);
        let prefix = Adversary::new(&s).unwrap().prefix_len();
        let out = run(&cfg, &s).unwrap();
        assert_eq!(out.summary.initial_edges, prefix);
        assert_eq!(out.summary.updates, 300);
    }

    #[test]
    fn naive_baseline_stays_maximal() {
        let s = gen_stream(&spec(25, 800, StreamModel::RandomInsertDelete { p_insert: 0.55 }, 8)).unwrap();
        let mut nm = NaiveMaximal::new(25);
        let mut g = DynGraph::new(25);
        for e in &s.events {
            nm.apply(e).unwrap();
            g.apply_update(e).unwrap();
            assert_eq!(oracle_verify(&g, nm.matching()), Ok(()));
        }
    }

    #[test]
    fn parallel_runs_match_sequential() {
        let cfg = RunConfig::new(EngineParams::new(8, 0.001, Backend::Deterministic));
        let jobs: Vec<_> =
            (0..3).map(|s| (cfg.clone(), spec(40, 200, StreamModel::RandomInsertDelete { p_insert: 0.6 }, s))).collect();
        let par = run_many(&jobs);
        for ((c, sp), r) in jobs.iter().zip(par) {
            assert_eq!(r.unwrap().summary.total_work, run(c, sp).unwrap().summary.total_work);
        }
    }
}
