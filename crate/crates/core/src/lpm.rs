//! Decremental left-perfect matching on a bipartite graph with a degree gap.
//!
//! The graph `G = (L, R, E)` has a `γ`-degree-gap at `X`: every live left
//! vertex has degree at least `X` and every right vertex has degree at most
//! `(1 - γ) X`. Left vertices whose degree falls below `X` are tombstoned.
//! The structure supports `Init`, `Delete` and `Augment` and keeps every live
//! left vertex matched as long as the caller augments freed left vertices.
//!
//! Two backends:
//! * deterministic: a residual graph toward a sink `t` maintained by a
//!   monotone Even–Shiloach tree and rebuilt every `q_ep` deletions;
//! * randomized: fresh random alternating walks on every `Augment`.

use crate::estree::{EsError, EsTree, EsWork, ResidualGraph, INF};
use crate::graph::{CoreError, DynGraph, Matching, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpmError {
    #[error("invalid initial matching: {0}")]
    InvalidMatching(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("edge ({0}, {1}) not present")]
    MissingEdge(VertexId, VertexId),
    #[error("vertex {0} is not a left vertex")]
    NotLeft(VertexId),
    #[error("augment precondition violated at {0}: vertex must be live, free and of degree >= X")]
    InvalidAugment(VertexId),
    #[error("no augmenting path from {0}")]
    NoAugmentingPath(VertexId),
    #[error("no augmenting path from {u} found in {restarts} walks")]
    Timeout { u: VertexId, restarts: usize },
    #[error("sink weight {weight} exceeds epoch bound {bound:.1}")]
    WeightBound { weight: u64, bound: f64 },
    #[error(transparent)]
    Es(#[from] EsError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Left,
    Right,
    Outside,
}

/// Bipartite graph with tombstones for left vertices below the threshold.
#[derive(Debug, Clone)]
pub struct DegreeGapGraph {
    g: DynGraph,
    side: Vec<Side>,
    x: usize,
    gamma: f64,
}

impl DegreeGapGraph {
    pub fn new(g: DynGraph, side: Vec<Side>, x: usize, gamma: f64) -> Result<Self, LpmError> {
        if side.len() != g.n() {
            return Err(LpmError::InvalidParams(format!("{} sides for {} vertices", side.len(), g.n())));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LpmError::InvalidParams(format!("gamma = {gamma} not in (0, 1)")));
        }
        if x == 0 {
            return Err(LpmError::InvalidParams("X must be positive".into()));
        }
        for (u, v) in g.edges() {
            let ok = matches!((side[u], side[v]), (Side::Left, Side::Right) | (Side::Right, Side::Left));
            if !ok {
                return Err(LpmError::InvalidParams(format!("edge ({u}, {v}) does not cross the bipartition")));
            }
        }
        Ok(DegreeGapGraph { g, side, x, gamma })
    }

    pub fn graph(&self) -> &DynGraph {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn side(&self, v: VertexId) -> Side {
        self.side[v]
    }

    pub fn x(&self) -> usize {
        self.x
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_live_left(&self, v: VertexId) -> bool {
        self.side[v] == Side::Left && !self.g.is_removed(v)
    }

    pub fn left(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.n()).filter(|&v| self.side[v] == Side::Left)
    }

    pub fn right(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.n()).filter(|&v| self.side[v] == Side::Right)
    }

    /// Number of vertices on either side.
    pub fn bipartite_size(&self) -> usize {
        self.side.iter().filter(|&&s| s != Side::Outside).count()
    }

    /// Checks the degree gap on all live vertices.
    pub fn check_gap(&self) -> Result<(), String> {
        let cap = (1.0 - self.gamma) * self.x as f64;
        for v in 0..self.n() {
            let d = self.g.degree(v);
            match self.side[v] {
                Side::Left if !self.g.is_removed(v) && d < self.x => {
                    return Err(format!("left vertex {v} has degree {d} < X = {}", self.x));
                }
                Side::Right if d as f64 > cap + 1e-9 => {
                    return Err(format!("right vertex {v} has degree {d} > (1-γ)X = {cap}"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Random instance with `nl` left vertices of degree exactly `x` and right
/// degrees at most `floor((1 - gamma) x)`. Left ids are `0..nl`.
pub fn random_gap_instance(nl: usize, x: usize, gamma: f64, seed: u64) -> Result<DegreeGapGraph, LpmError> {
    let cap = ((1.0 - gamma) * x as f64 + 1e-9).floor() as usize;
    if cap == 0 {
        return Err(LpmError::InvalidParams(format!("(1-γ)X < 1 for X = {x}, γ = {gamma}")));
    }
    let nr = (nl * x).div_ceil(cap) + x;
    let n = nl + nr;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut room = vec![cap; nr];
    let mut open: Vec<usize> = (0..nr).collect();
    let mut g = DynGraph::new(n);
    for u in 0..nl {
        let picks = rand::seq::index::sample(&mut rng, open.len(), x).into_vec();
        for &i in &picks {
            let r = open[i];
            g.insert_edge(u, nl + r)?;
            room[r] -= 1;
        }
        open.retain(|&r| room[r] > 0);
    }
    let mut side = vec![Side::Left; nl];
    side.resize(n, Side::Right);
    DegreeGapGraph::new(g, side, x, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpmBackend {
    Deterministic,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LpmConfig {
    pub backend: LpmBackend,
    /// Path-length constant in the epoch weight bound.
    pub c_len: f64,
    /// Epoch budget; `ceil(sqrt(n γ))` when unset.
    pub q_ep: Option<usize>,
    /// Walk length `k = ceil(c1 ln n / γ²)`.
    pub c1: f64,
    /// Restarts `K = ceil(c2 ln n / γ)`.
    pub c2: f64,
    pub seed: u64,
}

impl LpmConfig {
    pub fn new(backend: LpmBackend) -> Self {
        LpmConfig { backend, c_len: 4.0, q_ep: None, c1: 100.0, c2: 4.0, seed: 0 }
    }

    pub fn deterministic() -> Self {
        Self::new(LpmBackend::Deterministic)
    }

    pub fn randomized(seed: u64) -> Self {
        LpmConfig { seed, ..Self::new(LpmBackend::Randomized) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LpmStats {
    pub deletions: u64,
    pub augments: u64,
    /// Total number of edges on returned augmenting paths.
    pub path_edges: u64,
    pub tombstones: u64,
    pub resets: u64,
    pub walk_steps: u64,
    pub walks: u64,
    pub max_sink_weight: u64,
    pub weight_checks: u64,
}

/// What a deletion freed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeleteOutcome {
    pub was_matched: bool,
    pub tombstoned: bool,
    /// Live left vertex that lost its mate and must be augmented.
    pub freed_left: Option<VertexId>,
    /// Right vertices that lost their mates.
    pub freed_right: Vec<VertexId>,
}

#[derive(Debug, Clone)]
pub struct LpmDetState {
    tree: EsTree,
    q_ep: usize,
    num_deletions: usize,
    in_aff: Vec<bool>,
    r_aff: Vec<VertexId>,
    epoch_max_weight: u64,
    prior_work: EsWork,
}

impl LpmDetState {
    pub fn tree(&self) -> &EsTree {
        &self.tree
    }

    pub fn q_ep(&self) -> usize {
        self.q_ep
    }

    pub fn num_deletions(&self) -> usize {
        self.num_deletions
    }

    pub fn r_aff(&self) -> &[VertexId] {
        &self.r_aff
    }
}

#[derive(Debug, Clone)]
pub struct LpmRandState {
    rng: ChaCha8Rng,
    k: usize,
    big_k: usize,
}

impl LpmRandState {
    pub fn walk_budget(&self) -> usize {
        self.k
    }

    pub fn restart_budget(&self) -> usize {
        self.big_k
    }
}

#[derive(Debug, Clone)]
pub enum LpmBackendState {
    Det(LpmDetState),
    Rand(LpmRandState),
}

#[derive(Debug, Clone)]
pub struct Lpm {
    gg: DegreeGapGraph,
    m: Matching,
    backend: LpmBackendState,
    cfg: LpmConfig,
    ln_n: f64,
    stats: LpmStats,
}

fn build_residual(gg: &DegreeGapGraph, m: &Matching) -> ResidualGraph {
    let mut gr = ResidualGraph::new(gg.n());
    let t = gr.sink();
    for u in gg.left() {
        for &r in gg.g.neighbors(u) {
            let res = if m.contains(u, r) { gr.add_edge(r, u, 1) } else { gr.add_edge(u, r, 1) };
            res.expect("fresh residual edge");
        }
    }
    for r in gg.right() {
        if !m.is_matched(r) {
            gr.add_edge(r, t, 1).expect("fresh sink edge");
        }
    }
    gr
}

impl Lpm {
    /// Left vertices below `X` are tombstoned immediately, dropping their
    /// matching edges.
    pub fn init(cfg: LpmConfig, mut gg: DegreeGapGraph, m0: &Matching) -> Result<Self, LpmError> {
        if m0.n() != gg.n() {
            return Err(LpmError::InvalidMatching(format!("matching over {} vertices, graph has {}", m0.n(), gg.n())));
        }
        let mut m = Matching::new(gg.n());
        for (a, b) in m0.edges() {
            if !gg.g.has_edge(a, b) {
                return Err(LpmError::InvalidMatching(format!("({a}, {b}) is not an edge")));
            }
            m.add(a, b);
        }
        let mut stats = LpmStats::default();
        let low: Vec<VertexId> = gg.left().filter(|&u| !gg.g.is_removed(u) && gg.g.degree(u) < gg.x).collect();
        for u in low {
            m.unmatch(u);
            gg.g.tombstone(u);
            stats.tombstones += 1;
        }
        let nb = gg.bipartite_size().max(2) as f64;
        let ln_n = nb.ln();
        let backend = match cfg.backend {
            LpmBackend::Deterministic => {
                let q_ep = cfg.q_ep.unwrap_or_else(|| (nb * gg.gamma).sqrt().ceil() as usize).max(1);
                let mut tree = EsTree::build(build_residual(&gg, &m));
                for u in gg.left().filter(|&u| gg.g.is_removed(u)) {
                    tree.remove_vertex(u)?;
                }
                LpmBackendState::Det(LpmDetState {
                    tree,
                    q_ep,
                    num_deletions: 0,
                    in_aff: vec![false; gg.n()],
                    r_aff: Vec::new(),
                    epoch_max_weight: 1,
                    prior_work: EsWork::default(),
                })
            }
            LpmBackend::Randomized => {
                if cfg.c1 <= 0.0 || cfg.c2 <= 0.0 {
                    return Err(LpmError::InvalidParams("walk constants must be positive".into()));
                }
                let g2 = gg.gamma * gg.gamma;
                LpmBackendState::Rand(LpmRandState {
                    rng: ChaCha8Rng::seed_from_u64(cfg.seed),
                    k: (cfg.c1 * ln_n / g2).ceil() as usize,
                    big_k: (cfg.c2 * ln_n / gg.gamma).ceil() as usize,
                })
            }
        };
        Ok(Lpm { gg, m, backend, cfg, ln_n, stats })
    }

    pub fn matching(&self) -> &Matching {
        &self.m
    }

    pub fn gap_graph(&self) -> &DegreeGapGraph {
        &self.gg
    }

    pub fn config(&self) -> &LpmConfig {
        &self.cfg
    }

    pub fn backend(&self) -> &LpmBackendState {
        &self.backend
    }

    pub fn stats(&self) -> LpmStats {
        self.stats
    }

    /// ES work summed over all epochs (zero for the randomized backend).
    pub fn es_work(&self) -> EsWork {
        match &self.backend {
            LpmBackendState::Det(d) => {
                let w = d.tree.work();
                EsWork {
                    scans: d.prior_work.scans + w.scans,
                    label_changes: d.prior_work.label_changes + w.label_changes,
                    updates: d.prior_work.updates + w.updates,
                }
            }
            LpmBackendState::Rand(_) => EsWork::default(),
        }
    }

    /// Work units spent so far: ES scans plus walk steps plus operations.
    pub fn work(&self) -> u64 {
        let w = self.es_work();
        w.scans + w.updates + self.stats.walk_steps + self.stats.deletions + self.stats.augments
    }

    /// Upper bound on sink weights while `|R_aff| = k`.
    pub fn weight_bound(&self, k: usize) -> f64 {
        (k as f64 + 1.0) * self.cfg.c_len * self.ln_n / self.gg.gamma
    }

    pub fn is_live(&self, u: VertexId) -> bool {
        !self.gg.g.is_removed(u)
    }

    /// Live left vertices of degree at least `X` that are unmatched.
    pub fn unmatched_live_left(&self) -> Vec<VertexId> {
        self.gg
            .left()
            .filter(|&u| self.gg.is_live_left(u) && self.gg.g.degree(u) >= self.gg.x && !self.m.is_matched(u))
            .collect()
    }

    pub fn delete(&mut self, u: VertexId, v: VertexId) -> Result<DeleteOutcome, LpmError> {
        if u >= self.gg.n() || self.gg.side[u] != Side::Left {
            return Err(LpmError::NotLeft(u));
        }
        if !self.gg.g.has_edge(u, v) {
            return Err(LpmError::MissingEdge(u, v));
        }
        self.stats.deletions += 1;
        let was_matched = self.m.contains(u, v);
        self.gg.g.delete_edge(u, v)?;
        if was_matched {
            self.m.remove(u, v);
        }
        let tombstoned = self.gg.g.degree(u) < self.gg.x;
        let mut out = DeleteOutcome { was_matched, tombstoned, ..Default::default() };
        if was_matched {
            out.freed_right.push(v);
        }
        let mut orphan = None;
        if tombstoned {
            orphan = self.m.unmatch(u);
            out.freed_right.extend(orphan);
            self.gg.g.tombstone(u);
            self.stats.tombstones += 1;
        } else if was_matched {
            out.freed_left = Some(u);
        }

        let LpmBackendState::Det(d) = &mut self.backend else {
            return Ok(out);
        };
        d.num_deletions += 1;
        if d.num_deletions > d.q_ep {
            self.reset_es()?;
            return Ok(out);
        }
        let mut need_reset = false;
        let t = d.tree.sink();
        // New sink edges carry the current label so no distance decreases.
        let mut sink_edges = Vec::new();
        if was_matched {
            sink_edges.push(v);
        }
        sink_edges.extend(orphan);
        for r in sink_edges {
            let w = d.tree.dist(r);
            if w >= INF {
                need_reset = true;
                continue;
            }
            d.tree.insert(r, t, w)?;
            if !d.in_aff[r] {
                d.in_aff[r] = true;
                d.r_aff.push(r);
            }
            d.epoch_max_weight = d.epoch_max_weight.max(w);
            self.stats.max_sink_weight = self.stats.max_sink_weight.max(w);
        }
        if tombstoned {
            d.tree.remove_vertex(u)?;
        } else if was_matched {
            d.tree.delete(v, u)?;
        } else {
            d.tree.delete(u, v)?;
        }
        if need_reset {
            self.reset_es()?;
            return Ok(out);
        }
        self.check_weight_bound()?;
        Ok(out)
    }

    fn check_weight_bound(&mut self) -> Result<(), LpmError> {
        let LpmBackendState::Det(d) = &self.backend else {
            return Ok(());
        };
        let (weight, k) = (d.epoch_max_weight, d.r_aff.len());
        self.stats.weight_checks += 1;
        let bound = self.weight_bound(k);
        if weight as f64 > bound {
            return Err(LpmError::WeightBound { weight, bound });
        }
        Ok(())
    }

    /// Rebuilds the residual graph with unit weights and starts a new epoch.
    pub fn reset_es(&mut self) -> Result<(), LpmError> {
        let LpmBackendState::Det(d) = &mut self.backend else {
            return Ok(());
        };
        let w = d.tree.work();
        d.prior_work.scans += w.scans;
        d.prior_work.label_changes += w.label_changes;
        d.prior_work.updates += w.updates;
        let mut tree = EsTree::build(build_residual(&self.gg, &self.m));
        for u in self.gg.left().filter(|&u| self.gg.g.is_removed(u)) {
            tree.remove_vertex(u)?;
        }
        d.tree = tree;
        d.num_deletions = 0;
        for &r in &d.r_aff {
            d.in_aff[r] = false;
        }
        d.r_aff.clear();
        d.epoch_max_weight = 1;
        self.stats.resets += 1;
        Ok(())
    }

    /// Matches the free left vertex `u`; returns the augmenting path
    /// `u, r1, l1, ..., rk` in `G`.
    pub fn augment(&mut self, u: VertexId) -> Result<Vec<VertexId>, LpmError> {
        if u >= self.gg.n() || self.gg.side[u] != Side::Left {
            return Err(LpmError::NotLeft(u));
        }
        if self.gg.g.is_removed(u) || self.m.is_matched(u) || self.gg.g.degree(u) < self.gg.x {
            return Err(LpmError::InvalidAugment(u));
        }
        let path = match &self.backend {
            LpmBackendState::Det(_) => self.augment_det(u)?,
            LpmBackendState::Rand(_) => {
                let p = self.random_alternating_walk(u)?;
                self.m.augment_along(&p)?;
                p
            }
        };
        self.stats.augments += 1;
        self.stats.path_edges += (path.len() - 1) as u64;
        Ok(path)
    }

    fn augment_det(&mut self, u: VertexId) -> Result<Vec<VertexId>, LpmError> {
        let LpmBackendState::Det(d) = &mut self.backend else { unreachable!() };
        if d.tree.dist(u) >= INF {
            return Err(LpmError::NoAugmentingPath(u));
        }
        let mut path = d.tree.path_to_sink(u)?;
        path.pop();
        // Validates that the tree path is an alternating path in G.
        self.m.augment_along(&path)?;
        for w in path.windows(2) {
            d.tree.insert(w[1], w[0], 1)?;
        }
        let mut old: Vec<(usize, usize)> = path.windows(2).map(|w| (w[0], w[1])).collect();
        old.push((*path.last().unwrap(), d.tree.sink()));
        d.tree.delete_batch(&old)?;
        Ok(path)
    }

    /// One walk of at most `k` steps; `None` if it does not reach a free
    /// right vertex. Revisited right vertices erase the loop in between, so
    /// the result is a simple alternating path.
    pub fn walk_once(&mut self, u: VertexId) -> Option<Vec<VertexId>> {
        let LpmBackendState::Rand(rs) = &mut self.backend else {
            return None;
        };
        self.stats.walks += 1;
        let g = &self.gg.g;
        let mut path = vec![u];
        let mut pos: HashMap<VertexId, usize> = HashMap::new();
        let mut cur = u;
        for _ in 0..rs.k {
            self.stats.walk_steps += 1;
            let d = g.degree(cur);
            let mate = self.m.mate(cur);
            let choices = d - usize::from(mate.is_some());
            if choices == 0 {
                return None;
            }
            let i = rs.rng.gen_range(0..choices);
            let mut r = g.neighbors(cur)[i];
            if Some(r) == mate {
                r = g.neighbors(cur)[d - 1];
            }
            if let Some(&p) = pos.get(&r) {
                for x in path.drain(p + 1..) {
                    pos.remove(&x);
                }
            } else {
                path.push(r);
                pos.insert(r, path.len() - 1);
            }
            match self.m.mate(r) {
                None => return Some(path),
                Some(l) => {
                    path.push(l);
                    cur = l;
                }
            }
        }
        None
    }

    /// Up to `K` independent walks from `u`.
    pub fn random_alternating_walk(&mut self, u: VertexId) -> Result<Vec<VertexId>, LpmError> {
        let restarts = match &self.backend {
            LpmBackendState::Rand(rs) => rs.big_k,
            LpmBackendState::Det(_) => {
                return Err(LpmError::InvalidParams("walks need the randomized backend".into()));
            }
        };
        for _ in 0..restarts {
            if let Some(p) = self.walk_once(u) {
                return Ok(p);
            }
        }
        Err(LpmError::Timeout { u, restarts })
    }

    /// Compares the residual graph against a fresh encoding of `(G, M)`.
    pub fn check_residual(&self) -> Result<(), String> {
        let LpmBackendState::Det(d) = &self.backend else {
            return Ok(());
        };
        let want = build_residual(&self.gg, &self.m);
        let have = d.tree.graph();
        let t = have.sink();
        for v in 0..have.len() {
            if v != t && self.gg.g.is_removed(v) {
                if !have.out_edges(v).is_empty() || !have.in_edges(v).is_empty() {
                    return Err(format!("removed vertex {v} still has residual edges"));
                }
                continue;
            }
            let a = have.out_edges(v);
            let b = want.out_edges(v);
            if a.len() != b.len() {
                return Err(format!("vertex {v}: {} residual out-edges, expected {}", a.len(), b.len()));
            }
            for (&(h1, w1), &(h2, _)) in a.iter().zip(b) {
                if h1 != h2 {
                    return Err(format!("vertex {v}: residual edge to {h1}, expected {h2}"));
                }
                if w1 != 1 && !(h1 == t && d.in_aff[v]) {
                    return Err(format!("edge ({v} -> {h1}) has weight {w1} outside R_aff"));
                }
            }
        }
        Ok(())
    }

    /// Matching validity in `G`, no matched tombstones, and (deterministic)
    /// residual soundness plus exact labels.
    pub fn check_all(&self) -> Result<(), String> {
        self.m.validate_against(&self.gg.g)?;
        for v in self.m.matched_vertices() {
            if self.gg.g.is_removed(v) {
                return Err(format!("tombstoned vertex {v} is matched"));
            }
        }
        self.check_residual()?;
        if let LpmBackendState::Det(d) = &self.backend {
            d.tree.check_exact()?;
        }
        Ok(())
    }
}

pub fn lpm_init(cfg: LpmConfig, gg: DegreeGapGraph, m0: &Matching) -> Result<Lpm, LpmError> {
    Lpm::init(cfg, gg, m0)
}

pub fn lpm_delete(s: &mut Lpm, u: VertexId, v: VertexId) -> Result<DeleteOutcome, LpmError> {
    s.delete(u, v)
}

pub fn lpm_augment(s: &mut Lpm, u: VertexId) -> Result<Vec<VertexId>, LpmError> {
    s.augment(u)
}

pub fn random_alternating_walk(s: &mut Lpm, u: VertexId) -> Result<Vec<VertexId>, LpmError> {
    s.random_alternating_walk(u)
}

pub fn reset_es(s: &mut Lpm) -> Result<(), LpmError> {
    s.reset_es()
}
