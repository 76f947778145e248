//! Fully dynamic maximal matching in phases of `δn` updates.
//!
//! At the start of a phase the EDCS `H` is frozen as `H_init` and vertices
//! are classified by their `H_init` degree. The output is
//! `M_final = M_base ∪ M_adj`:
//!
//! * `M_base ⊆ H_core = H_init ∩ E_core` matches every safe high vertex and
//!   changes by at most four vertices per update. Its high-to-low part is the
//!   matching of an [`Lpm`] instance over `H_hilo`.
//! * `M_adj` is a maximal matching of the graph induced on the vertices left
//!   free by `M_base`, repaired after each update by structured neighbour
//!   searches.

use crate::edcs::{EdcsError, EdcsState};
use crate::graph::{norm, CoreError, DynGraph, Edge, Matching, UpdateEvent, UpdateKind, VertexId};
use crate::lpm::{DegreeGapGraph, Lpm, LpmBackend, LpmConfig, LpmError, Side};
use crate::staticmatch::{match_most_counted, MatchMode, MatchMostParams, StaticMatchError};
use std::collections::BTreeSet;
use thiserror::Error;

const NIL: usize = usize::MAX;
const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("update {update}: {changes} vertices changed in V(M_base), cap is {cap}")]
    RecourseExceeded { update: u64, changes: usize, cap: usize },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Edcs(#[from] EdcsError),
    #[error(transparent)]
    Lpm(#[from] LpmError),
    #[error(transparent)]
    StaticMatch(#[from] StaticMatchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Backend {
    Deterministic,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EngineParams {
    pub b: usize,
    pub eps: f64,
    pub backend: Backend,
    /// LPM threshold; `ceil((1/2 + δ - 2ε) B)` when unset.
    pub x: Option<usize>,
    /// Degree-gap slack handed to the LPM; `δ/8` when unset.
    pub gamma: Option<f64>,
    /// Use `γ = δ/10^8` instead of the `δ/8` default.
    pub tiny_gamma: bool,
    pub recourse_cap: usize,
    pub seed: u64,
}

impl EngineParams {
    pub fn new(b: usize, eps: f64, backend: Backend) -> Self {
        EngineParams { b, eps, backend, x: None, gamma: None, tiny_gamma: false, recourse_cap: 4, seed: 0 }
    }

    pub fn delta(&self) -> f64 {
        100.0 * self.eps
    }

    pub fn gamma(&self) -> f64 {
        match (self.gamma, self.tiny_gamma) {
            (Some(g), _) => g,
            (None, true) => self.delta() / 1e8,
            (None, false) => self.delta() / 8.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        3.0 * self.delta()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NodeClass {
    Lo,
    Med { almost_low: bool },
    Hi { very_high: bool },
}

impl NodeClass {
    pub fn is_hi(self) -> bool {
        matches!(self, NodeClass::Hi { .. })
    }

    pub fn is_med(self) -> bool {
        matches!(self, NodeClass::Med { .. })
    }

    pub fn is_lo(self) -> bool {
        self == NodeClass::Lo
    }
}

/// Integer degree thresholds of the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Thresholds {
    /// High iff `deg >= hi_min`.
    pub hi_min: usize,
    /// Very high iff `deg >= vhi_min`.
    pub vhi_min: usize,
    /// Almost low iff medium and `deg <= alo_max`.
    pub alo_max: usize,
    /// Low iff `deg <= lo_max`.
    pub lo_max: i64,
    /// Safe iff `deg_{H_core} >= x_safe`.
    pub x_safe: usize,
    /// Degree cap `floor((1/2 + δ) B)` for the static matching.
    pub delta_static: usize,
}

impl Thresholds {
    /// `b_minus` is the EDCS lower bound. Low vertices are additionally capped
    /// at `b_minus - hi_min` so that every low-to-(low or medium) edge of `G`
    /// lies in `H_init`.
    pub fn new(b: usize, eps: f64, delta: f64, b_minus: usize) -> Self {
        let bf = b as f64;
        let hi_min = ((0.5 + delta - eps) * bf - TOL).ceil() as usize;
        let vhi_min = ((0.5 + delta) * bf + TOL).floor() as usize + 1;
        let alo_max = ((0.5 - delta + eps) * bf + TOL).floor() as usize;
        let lo_exact = ((0.5 - delta) * bf - TOL).ceil() as i64 - 1;
        let lo_max = lo_exact.min(b_minus as i64 - hi_min as i64);
        let x_safe = ((0.5 + delta - 2.0 * eps) * bf - TOL).ceil() as usize;
        let delta_static = ((0.5 + delta) * bf + TOL).floor() as usize;
        Thresholds { hi_min, vhi_min, alo_max, lo_max, x_safe, delta_static }
    }

    pub fn classify(&self, deg: usize) -> NodeClass {
        if deg >= self.hi_min {
            NodeClass::Hi { very_high: deg >= self.vhi_min }
        } else if (deg as i64) <= self.lo_max {
            NodeClass::Lo
        } else {
            NodeClass::Med { almost_low: deg <= self.alo_max }
        }
    }
}

/// Cumulative counters. All fields are monotone within a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EngineMetrics {
    pub updates: u64,
    pub phases: u64,
    /// Adjacency entries and list items scanned by the engine itself.
    pub scans: u64,
    pub edcs_flips: u64,
    pub edcs_scans: u64,
    pub es_scans: u64,
    pub es_label_changes: u64,
    pub walk_steps: u64,
    pub lpm_ops: u64,
    pub lpm_resets: u64,
    pub coloring_work: u64,
    pub augments: u64,
    pub damaged: u64,
    pub base_changes: u64,
    pub max_recourse: u64,
    pub adj_matches: u64,
    pub enew_rescues: u64,
    pub static_fallbacks: u64,
    pub max_med_free: u64,
    pub max_damaged: u64,
}

impl EngineMetrics {
    /// Work counters accumulated since `base`; peak fields are kept as is.
    pub fn since(&self, base: &EngineMetrics) -> EngineMetrics {
        EngineMetrics {
            updates: self.updates - base.updates,
            phases: self.phases - base.phases,
            scans: self.scans - base.scans,
            edcs_flips: self.edcs_flips - base.edcs_flips,
            edcs_scans: self.edcs_scans - base.edcs_scans,
            es_scans: self.es_scans - base.es_scans,
            es_label_changes: self.es_label_changes - base.es_label_changes,
            walk_steps: self.walk_steps - base.walk_steps,
            lpm_ops: self.lpm_ops - base.lpm_ops,
            lpm_resets: self.lpm_resets - base.lpm_resets,
            coloring_work: self.coloring_work - base.coloring_work,
            augments: self.augments - base.augments,
            damaged: self.damaged - base.damaged,
            base_changes: self.base_changes - base.base_changes,
            adj_matches: self.adj_matches - base.adj_matches,
            enew_rescues: self.enew_rescues - base.enew_rescues,
            static_fallbacks: self.static_fallbacks - base.static_fallbacks,
            ..*self
        }
    }

    /// Single work figure: every counted elementary step.
    pub fn total_work(&self) -> u64 {
        self.scans
            + self.edcs_flips
            + self.edcs_scans
            + self.es_scans
            + self.es_label_changes
            + self.walk_steps
            + self.lpm_ops
            + self.coloring_work
            + self.updates
    }
}

/// Bound checks reported by [`Engine::slack`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Slack {
    pub med_free: usize,
    pub med_free_bound: f64,
    pub damaged: usize,
    pub damaged_bound: f64,
    pub e_new: usize,
    pub phase_len: usize,
}

impl Slack {
    pub fn holds(&self) -> bool {
        self.med_free as f64 <= self.med_free_bound + TOL
            && self.damaged as f64 <= self.damaged_bound + TOL
            && self.e_new <= self.phase_len
    }
}

/// Test hook: suppress the adjunct repair of one update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    SkipRematch { at_update: u64 },
}

#[derive(Debug, Clone)]
pub struct Engine {
    n: usize,
    params: EngineParams,
    th: Thresholds,
    x: usize,
    phase_len: usize,
    g: DynGraph,
    edcs: EdcsState,

    h_core: DynGraph,
    class: Vec<NodeClass>,
    e_new: DynGraph,
    damaged: Vec<bool>,
    v_dmg: Vec<VertexId>,
    lpm: Option<Lpm>,
    m_base: Matching,
    m_adj: Matching,
    f_adj: Vec<BTreeSet<VertexId>>,
    med_prev: Vec<usize>,
    med_next: Vec<usize>,
    med_head: usize,
    /// Membership in the list of adjunct-free medium vertices.
    in_med_list: Vec<bool>,
    /// `|V_med ∖ V(M_base)|`.
    med_adj: usize,

    touched: Vec<VertexId>,
    /// Matched status in `M_base` before the current update; `None` if untouched.
    prior: Vec<Option<bool>>,
    candidates: Vec<VertexId>,

    update_count: usize,
    fault: Option<Fault>,
    metrics: EngineMetrics,
    lpm_carry: (u64, u64, u64, u64, u64),
}

impl Engine {
    pub fn new(n: usize, params: EngineParams) -> Result<Self, EngineError> {
        Self::from_graph(DynGraph::new(n), params)
    }

    /// Bulk-loads `g` and starts the first phase.
    pub fn from_graph(g: DynGraph, params: EngineParams) -> Result<Self, EngineError> {
        let n = g.n();
        let (eps, delta) = (params.eps, params.delta());
        if !(eps > 0.0 && delta < 1.0 / 3.0) {
            return Err(EngineError::InvalidParams(format!("need 0 < ε and δ = 100ε < 1/3, got ε = {eps}")));
        }
        let phase_len = (delta * n as f64 + TOL).floor() as usize;
        if phase_len == 0 {
            return Err(EngineError::InvalidParams(format!("δn = {} < 1", delta * n as f64)));
        }
        let gamma = params.gamma();
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(EngineError::InvalidParams(format!("γ = {gamma} not in (0, 1)")));
        }
        if params.recourse_cap == 0 {
            return Err(EngineError::InvalidParams("recourse cap must be positive".into()));
        }
        let edcs = EdcsState::init(&g, params.b, eps)?;
        let th = Thresholds::new(params.b, eps, delta, edcs.b_minus());
        let x = params.x.unwrap_or(th.x_safe).max(1);
        let mut e = Engine {
            n,
            params,
            th,
            x,
            phase_len,
            g,
            edcs,
            h_core: DynGraph::new(n),
            class: vec![NodeClass::Lo; n],
            e_new: DynGraph::new(n),
            damaged: vec![false; n],
            v_dmg: Vec::new(),
            lpm: None,
            m_base: Matching::new(n),
            m_adj: Matching::new(n),
            f_adj: vec![BTreeSet::new(); n],
            med_prev: vec![NIL; n],
            med_next: vec![NIL; n],
            med_head: NIL,
            in_med_list: vec![false; n],
            med_adj: 0,
            touched: Vec::new(),
            prior: vec![None; n],
            candidates: Vec::new(),
            update_count: 0,
            fault: None,
            metrics: EngineMetrics::default(),
            lpm_carry: (0, 0, 0, 0, 0),
        };
        e.start_phase()?;
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.th
    }

    pub fn phase_len(&self) -> usize {
        self.phase_len
    }

    pub fn graph(&self) -> &DynGraph {
        &self.g
    }

    pub fn edcs(&self) -> &EdcsState {
        &self.edcs
    }

    pub fn class(&self, v: VertexId) -> NodeClass {
        self.class[v]
    }

    pub fn is_damaged(&self, v: VertexId) -> bool {
        self.damaged[v]
    }

    pub fn is_safe(&self, v: VertexId) -> bool {
        self.class[v].is_hi() && !self.damaged[v]
    }

    pub fn m_base(&self) -> &Matching {
        &self.m_base
    }

    pub fn m_adj(&self) -> &Matching {
        &self.m_adj
    }

    pub fn lpm(&self) -> Option<&Lpm> {
        self.lpm.as_ref()
    }

    pub fn inject_fault(&mut self, f: Fault) {
        self.fault = Some(f);
    }

    pub fn metrics(&self) -> EngineMetrics {
        let mut m = self.metrics;
        let s = self.edcs.stats();
        m.edcs_flips = s.flips;
        m.edcs_scans = s.scans;
        let (es, lc, ws, ops, rs) = self.lpm_totals();
        m.es_scans = es;
        m.es_label_changes = lc;
        m.walk_steps = ws;
        m.lpm_ops = ops;
        m.lpm_resets = rs;
        m
    }

    fn lpm_totals(&self) -> (u64, u64, u64, u64, u64) {
        let mut t = self.lpm_carry;
        if let Some(l) = &self.lpm {
            let w = l.es_work();
            let st = l.stats();
            t.0 += w.scans + w.updates;
            t.1 += w.label_changes;
            t.2 += st.walk_steps;
            t.3 += st.deletions + st.augments + st.path_edges;
            t.4 += st.resets;
        }
        t
    }

    #[inline]
    fn in_adj(&self, v: VertexId) -> bool {
        !self.m_base.is_matched(v)
    }

    #[inline]
    fn adj_free(&self, v: VertexId) -> bool {
        !self.m_base.is_matched(v) && !self.m_adj.is_matched(v)
    }

    /// Mate of `v` in `M_final`.
    pub fn final_mate(&self, v: VertexId) -> Option<VertexId> {
        self.m_base.mate(v).or_else(|| self.m_adj.mate(v))
    }

    /// `M_final = M_base ∪ M_adj`.
    pub fn current_matching(&self) -> Matching {
        let mut m = self.m_base.clone();
        for (u, v) in self.m_adj.edges() {
            m.add(u, v);
        }
        m
    }

    /// `M_final` as an edge list sorted by `(u, v)`.
    pub fn matching_edges(&self) -> Vec<Edge> {
        self.current_matching().edges()
    }

    // ---- phase start -------------------------------------------------

    pub fn start_phase(&mut self) -> Result<(), EngineError> {
        let n = self.n;
        if let Some(l) = self.lpm.take() {
            let w = l.es_work();
            let st = l.stats();
            self.lpm_carry.0 += w.scans + w.updates;
            self.lpm_carry.1 += w.label_changes;
            self.lpm_carry.2 += st.walk_steps;
            self.lpm_carry.3 += st.deletions + st.augments + st.path_edges;
            self.lpm_carry.4 += st.resets;
        }
        self.metrics.phases += 1;
        self.update_count = 0;

        let h_init = self.edcs.h().clone();
        self.metrics.scans += (n + 2 * h_init.m()) as u64;
        for v in 0..n {
            self.class[v] = self.th.classify(h_init.degree(v));
        }
        self.e_new = DynGraph::new(n);
        for &w in &self.v_dmg {
            self.damaged[w] = false;
            self.f_adj[w].clear();
        }
        self.v_dmg.clear();

        // M_most on H'_init: very high vertices trimmed to the degree cap,
        // dropping edges to low vertices first.
        let cap = self.th.delta_static;
        let mut h_trim = h_init.clone();
        for v in 0..n {
            if !matches!(self.class[v], NodeClass::Hi { very_high: true }) {
                continue;
            }
            let mut order: Vec<VertexId> = h_trim.neighbors(v).to_vec();
            self.metrics.scans += order.len() as u64;
            order.sort_by_key(|&u| (!self.class[u].is_lo(), std::cmp::Reverse(u)));
            for u in order {
                if h_trim.degree(v) <= cap {
                    break;
                }
                h_trim.delete_edge(v, u)?;
            }
        }
        let kappa = self.params.kappa();
        let mut mode = match self.params.backend {
            Backend::Deterministic => MatchMode::Deterministic,
            Backend::Randomized => MatchMode::Randomized { seed: self.params.seed ^ self.metrics.phases },
        };
        if matches!(mode, MatchMode::Randomized { .. }) && (cap as f64) < 4.0 / kappa {
            mode = MatchMode::Deterministic;
            self.metrics.static_fallbacks += 1;
        }
        let (m_most, cw) = match_most_counted(&h_trim, &MatchMostParams { delta: cap, kappa, mode })?;
        self.metrics.coloring_work += cw;

        // H_hilo with the safe part of M_most.
        let side: Vec<Side> = self
            .class
            .iter()
            .map(|c| match c {
                NodeClass::Hi { .. } => Side::Left,
                NodeClass::Lo | NodeClass::Med { almost_low: true } => Side::Right,
                NodeClass::Med { almost_low: false } => Side::Outside,
            })
            .collect();
        let hilo = h_init.filter_edges(|u, v| self.class[u].is_hi() || self.class[v].is_hi());
        let gg = DegreeGapGraph::new(hilo, side, self.x, self.params.gamma())?;
        let mut m0 = Matching::new(n);
        for (u, v) in m_most.edges() {
            if self.class[u].is_hi() || self.class[v].is_hi() {
                m0.add(u, v);
            }
        }
        let cfg = match self.params.backend {
            Backend::Deterministic => LpmConfig::new(LpmBackend::Deterministic),
            Backend::Randomized => LpmConfig::randomized(self.params.seed.wrapping_add(self.metrics.phases)),
        };
        self.lpm = Some(Lpm::init(cfg, gg, &m0)?);
        self.h_core = h_init;
        self.m_base = m_most;
        self.m_adj = Matching::new(n);

        // A raised X can leave high vertices below the threshold from the start.
        for v in 0..n {
            if self.class[v].is_hi() && !self.lpm.as_ref().unwrap().is_live(v) {
                self.insert_damaged(v);
            }
        }
        for v in 0..n {
            if self.is_safe(v) && !self.lpm.as_ref().unwrap().matching().is_matched(v) {
                self.match_via_augment(v)?;
            }
        }
        self.touched.iter().for_each(|&v| self.prior[v] = None);
        self.touched.clear();

        // Adjunct side.
        self.candidates.clear();
        self.med_head = NIL;
        self.med_adj = 0;
        for v in 0..n {
            self.in_med_list[v] = false;
            self.med_prev[v] = NIL;
            self.med_next[v] = NIL;
        }
        for v in (0..n).rev() {
            if self.class[v].is_med() && self.in_adj(v) {
                self.med_adj += 1;
                self.med_push(v);
            }
        }
        for v in 0..n {
            if self.adj_free(v) {
                self.try_match(v);
            }
        }
        self.note_slack();
        Ok(())
    }

    fn med_push(&mut self, v: VertexId) {
        debug_assert!(!self.in_med_list[v]);
        self.in_med_list[v] = true;
        self.med_prev[v] = NIL;
        self.med_next[v] = self.med_head;
        if self.med_head != NIL {
            self.med_prev[self.med_head] = v;
        }
        self.med_head = v;
    }

    fn med_unlink(&mut self, v: VertexId) {
        debug_assert!(self.in_med_list[v]);
        self.in_med_list[v] = false;
        let (p, q) = (self.med_prev[v], self.med_next[v]);
        if p != NIL {
            self.med_next[p] = q;
        } else {
            self.med_head = q;
        }
        if q != NIL {
            self.med_prev[q] = p;
        }
        self.med_prev[v] = NIL;
        self.med_next[v] = NIL;
    }

    // ---- M_base bookkeeping ------------------------------------------

    fn touch(&mut self, v: VertexId) {
        if self.prior[v].is_none() {
            self.prior[v] = Some(self.m_base.is_matched(v));
            self.touched.push(v);
        }
    }

    fn base_remove(&mut self, u: VertexId, v: VertexId) {
        self.touch(u);
        self.touch(v);
        let removed = self.m_base.remove(u, v);
        debug_assert!(removed, "({u}, {v}) not in M_base");
    }

    fn base_add(&mut self, u: VertexId, v: VertexId) {
        self.touch(u);
        self.touch(v);
        self.m_base.add(u, v);
    }

    /// Augments the LPM matching at the safe vertex `v` and mirrors the path
    /// into `M_base`.
    pub fn match_via_augment(&mut self, v: VertexId) -> Result<(), EngineError> {
        let path = self.lpm.as_mut().expect("phase started").augment(v)?;
        self.metrics.augments += 1;
        let end = *path.last().unwrap();
        for i in (1..path.len() - 1).step_by(2) {
            self.base_remove(path[i], path[i + 1]);
        }
        if let Some(x) = self.m_base.mate(end) {
            self.base_remove(end, x);
        }
        for i in (0..path.len()).step_by(2) {
            self.base_add(path[i], path[i + 1]);
        }
        Ok(())
    }

    /// Moves `v` from safe to damaged: drops its `M_base` edge and builds
    /// `F_adj(v)` by a full neighbourhood scan.
    pub fn insert_damaged(&mut self, v: VertexId) {
        debug_assert!(self.class[v].is_hi() && !self.damaged[v]);
        self.damaged[v] = true;
        self.v_dmg.push(v);
        self.metrics.damaged += 1;
        if let Some(x) = self.m_base.mate(v) {
            self.base_remove(v, x);
        }
        let nbrs = self.g.neighbors(v);
        self.metrics.scans += nbrs.len() as u64;
        let free: BTreeSet<VertexId> = nbrs.iter().copied().filter(|&u| self.adj_free(u)).collect();
        self.f_adj[v] = free;
        self.candidates.push(v);
    }

    /// Re-evaluates `x` in every `F_adj(w)` and in the free medium list.
    fn notify(&mut self, x: VertexId) {
        let free = self.adj_free(x);
        if self.class[x].is_med() && free != self.in_med_list[x] {
            if free {
                self.med_push(x);
            } else {
                self.med_unlink(x);
            }
        }
        self.metrics.scans += self.v_dmg.len() as u64;
        for i in 0..self.v_dmg.len() {
            let w = self.v_dmg[i];
            if w != x && self.g.has_edge(w, x) {
                if free {
                    self.f_adj[w].insert(x);
                } else {
                    self.f_adj[w].remove(&x);
                }
            }
        }
    }

    /// Applies the net `V(M_base)` changes of this update to the adjunct side.
    /// Returns the number of changed vertices.
    fn sync_base(&mut self) -> usize {
        let touched = std::mem::take(&mut self.touched);
        let mut changes = 0;
        for &x in &touched {
            let before = self.prior[x].take().expect("touched vertex has a prior state");
            let now = self.m_base.is_matched(x);
            if before == now {
                continue;
            }
            changes += 1;
            if now {
                if let Some(y) = self.m_adj.unmatch(x) {
                    self.notify(y);
                    self.candidates.push(y);
                }
                if self.class[x].is_med() {
                    self.med_adj -= 1;
                }
            } else {
                if self.class[x].is_med() {
                    self.med_adj += 1;
                }
                self.candidates.push(x);
            }
            self.notify(x);
        }
        changes
    }

    /// Matches the adjunct-free vertex `w` to a free `G_adj` neighbour, if any.
    fn try_match(&mut self, w: VertexId) -> bool {
        debug_assert!(self.adj_free(w));
        let found = self.find_free_neighbor(w);
        match found {
            Some(u) => {
                self.m_adj.add(w, u);
                self.metrics.adj_matches += 1;
                self.notify(w);
                self.notify(u);
                true
            }
            None => false,
        }
    }

    fn find_free_neighbor(&mut self, w: VertexId) -> Option<VertexId> {
        if self.damaged[w] {
            self.metrics.scans += 1;
            return self.f_adj[w].iter().next().copied();
        }
        // Core edges from a low vertex to low or medium vertices are all in
        // H_core, so only medium vertices need the medium list.
        let mut scanned = 0u64;
        let mut hit = None;
        for &u in self.h_core.neighbors(w) {
            scanned += 1;
            if self.adj_free(u) {
                hit = Some(u);
                break;
            }
        }
        if hit.is_none() && !self.class[w].is_lo() {
            let mut u = self.med_head;
            while u != NIL {
                scanned += 1;
                if u != w && self.adj_free(u) && self.g.has_edge(w, u) {
                    hit = Some(u);
                    break;
                }
                u = self.med_next[u];
            }
        }
        if hit.is_none() {
            for &u in &self.v_dmg {
                scanned += 1;
                if self.adj_free(u) && self.g.has_edge(w, u) {
                    hit = Some(u);
                    break;
                }
            }
        }
        if hit.is_none() {
            for &u in self.e_new.neighbors(w) {
                scanned += 1;
                if self.adj_free(u) {
                    hit = Some(u);
                    break;
                }
            }
        }
        self.metrics.scans += scanned;
        hit
    }

    // ---- updates -----------------------------------------------------

    pub fn handle_update(&mut self, e: &UpdateEvent) -> Result<(), EngineError> {
        if self.update_count >= self.phase_len {
            self.start_phase()?;
        }
        let (u, v) = norm(e.u, e.v);
        self.g.apply_update(e)?;
        self.edcs.on_update(&self.g, e);
        self.metrics.updates += 1;
        self.update_count += 1;
        match e.kind {
            UpdateKind::Insert => self.on_insert(u, v),
            UpdateKind::Delete => self.on_delete(u, v)?,
        }
        let changes = self.sync_base();
        self.metrics.base_changes += changes as u64;
        self.metrics.max_recourse = self.metrics.max_recourse.max(changes as u64);

        let skip = matches!(self.fault, Some(Fault::SkipRematch { at_update }) if at_update + 1 == self.metrics.updates);
        let cands = std::mem::take(&mut self.candidates);
        if !skip {
            for c in cands {
                if self.adj_free(c) {
                    self.try_match(c);
                }
            }
            self.rescan_new_edges();
        }
        self.note_slack();
        if changes > self.params.recourse_cap {
            return Err(EngineError::RecourseExceeded {
                update: self.metrics.updates - 1,
                changes,
                cap: self.params.recourse_cap,
            });
        }
        Ok(())
    }

    fn on_insert(&mut self, u: VertexId, v: VertexId) {
        self.e_new.insert_edge(u, v).expect("fresh edge");
        if self.damaged[u] && self.adj_free(v) {
            self.f_adj[u].insert(v);
        }
        if self.damaged[v] && self.adj_free(u) {
            self.f_adj[v].insert(u);
        }
        if self.adj_free(u) && self.adj_free(v) {
            self.m_adj.add(u, v);
            self.metrics.adj_matches += 1;
            self.notify(u);
            self.notify(v);
        }
    }

    fn on_delete(&mut self, u: VertexId, v: VertexId) -> Result<(), EngineError> {
        if self.damaged[u] {
            self.f_adj[u].remove(&v);
        }
        if self.damaged[v] {
            self.f_adj[v].remove(&u);
        }
        if self.e_new.has_edge(u, v) {
            self.e_new.delete_edge(u, v)?;
        }
        if self.m_adj.remove(u, v) {
            self.notify(u);
            self.notify(v);
            self.candidates.push(u);
            self.candidates.push(v);
        }
        if self.m_base.contains(u, v) {
            self.base_remove(u, v);
        }
        if !self.h_core.has_edge(u, v) {
            return Ok(());
        }
        self.h_core.delete_edge(u, v)?;
        let (hi, lo) = match (self.class[u].is_hi(), self.class[v].is_hi()) {
            (true, false) => (u, v),
            (false, true) => (v, u),
            _ => return Ok(()),
        };
        if self.damaged[hi] {
            return Ok(());
        }
        let out = self.lpm.as_mut().expect("phase started").delete(hi, lo)?;
        if out.tombstoned {
            self.insert_damaged(hi);
        } else if out.freed_left == Some(hi) {
            self.match_via_augment(hi)?;
        }
        Ok(())
    }

    /// Greedy pass over `E_new`; any edge it adds is a repair the structured
    /// search missed and is counted in `enew_rescues`.
    fn rescan_new_edges(&mut self) {
        let edges = self.e_new.edge_vec();
        self.metrics.scans += edges.len() as u64;
        for (a, b) in edges {
            if self.adj_free(a) && self.adj_free(b) {
                self.m_adj.add(a, b);
                self.metrics.enew_rescues += 1;
                self.notify(a);
                self.notify(b);
            }
        }
    }

    fn note_slack(&mut self) {
        self.metrics.max_med_free = self.metrics.max_med_free.max(self.med_adj as u64);
        self.metrics.max_damaged = self.metrics.max_damaged.max(self.v_dmg.len() as u64);
    }

    // ---- audits ------------------------------------------------------

    pub fn slack(&self) -> Slack {
        let dn = self.params.delta() * self.n as f64;
        let bound_factor = if self.update_count == 0 { 18.0 } else { 22.0 };
        Slack {
            med_free: self.med_adj,
            med_free_bound: bound_factor * dn,
            damaged: self.v_dmg.len(),
            damaged_bound: 2.0 * dn / (self.params.eps * self.params.b as f64),
            e_new: self.e_new.m(),
            phase_len: self.phase_len,
        }
    }

    /// Largest `deg_{G_adj}(v) / (δn + B + n/B)` over undamaged adjunct vertices.
    pub fn adj_degree_ratio(&self) -> f64 {
        let b = self.params.b as f64;
        let scale = self.params.delta() * self.n as f64 + b + self.n as f64 / b;
        (0..self.n)
            .filter(|&v| self.in_adj(v) && !self.damaged[v])
            .map(|v| self.g.neighbors(v).iter().filter(|&&u| self.in_adj(u)).count() as f64 / scale)
            .fold(0.0, f64::max)
    }

    /// Full structural audit; `Err` names the first broken invariant.
    pub fn audit(&self) -> Result<(), String> {
        let m = self.current_matching();
        m.validate_against(&self.g)?;
        if let Some((a, b)) = m.first_uncovered(&self.g) {
            return Err(format!("maximality: edge ({a}, {b}) has both endpoints free"));
        }
        for v in 0..self.n {
            if self.is_safe(v) && !self.m_base.is_matched(v) {
                return Err(format!("safe coverage: safe vertex {v} is free in M_base"));
            }
            if self.damaged[v] && self.m_base.is_matched(v) {
                return Err(format!("damaged vertex {v} is matched in M_base"));
            }
        }
        for (a, b) in self.m_base.edges() {
            if !self.h_core.has_edge(a, b) {
                return Err(format!("M_base edge ({a}, {b}) not in H_core"));
            }
        }
        for (a, b) in self.m_adj.edges() {
            if self.m_base.is_matched(a) || self.m_base.is_matched(b) {
                return Err(format!("M_adj edge ({a}, {b}) touches V(M_base)"));
            }
        }
        let lpm = self.lpm.as_ref().ok_or("no phase")?;
        let hilo: Vec<Edge> = lpm.matching().edges();
        let base_sf: Vec<Edge> =
            self.m_base.edges().into_iter().filter(|&(a, b)| self.is_safe(a) || self.is_safe(b)).collect();
        if hilo != base_sf {
            return Err("M_hilo differs from M_base(V_sf)".into());
        }
        for &w in &self.v_dmg {
            let want: BTreeSet<VertexId> =
                self.g.neighbors(w).iter().copied().filter(|&u| self.adj_free(u)).collect();
            if want != self.f_adj[w] {
                return Err(format!("F_adj({w}) is stale"));
            }
        }
        let mut listed = 0;
        let mut u = self.med_head;
        while u != NIL {
            if !self.class[u].is_med() || !self.adj_free(u) {
                return Err(format!("vertex {u} wrongly in the free medium list"));
            }
            listed += 1;
            u = self.med_next[u];
        }
        let want = (0..self.n).filter(|&v| self.class[v].is_med() && self.adj_free(v)).count();
        if listed != want {
            return Err(format!("free medium list has {listed} entries, expected {want}"));
        }
        let med_adj = (0..self.n).filter(|&v| self.class[v].is_med() && self.in_adj(v)).count();
        if med_adj != self.med_adj {
            return Err(format!("|V_med ∖ V(M_base)| is {med_adj}, counter says {}", self.med_adj));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(b: usize, backend: Backend) -> EngineParams {
        EngineParams::new(b, 0.001, backend)
    }

    #[test]
    fn thresholds_reference_values() {
        let th = Thresholds::new(1000, 0.001, 0.1, 999);
        assert_eq!(th.vhi_min, 601);
        assert_eq!(th.hi_min, 599);
        assert_eq!(th.alo_max, 401);
        assert_eq!(th.lo_max, 399);
        assert_eq!(th.x_safe, 598);
        assert_eq!(th.delta_static, 600);
        assert_eq!(th.classify(650), NodeClass::Hi { very_high: true });
        assert_eq!(th.classify(600), NodeClass::Hi { very_high: false });
        assert_eq!(th.classify(450), NodeClass::Med { almost_low: false });
        assert_eq!(th.classify(401), NodeClass::Med { almost_low: true });
        assert_eq!(th.classify(400), NodeClass::Med { almost_low: true });
        assert_eq!(th.classify(399), NodeClass::Lo);
        assert_eq!(th.classify(300), NodeClass::Lo);
    }

    #[test]
    fn path_graph_is_all_low() {
        let g = DynGraph::from_edges(8, (0..7).map(|i| (i, i + 1))).unwrap();
        let e = Engine::from_graph(g, EngineParams::new(8, 0.00125, Backend::Deterministic)).unwrap();
        assert_eq!(e.thresholds().lo_max, 2);
        assert!((0..8).all(|v| e.class(v).is_lo()));
        assert!(e.lpm().unwrap().gap_graph().left().next().is_none());
        e.audit().unwrap();
        assert!(e.current_matching().size() >= 3);
    }

    #[test]
    fn empty_graph_has_empty_matching() {
        let e = Engine::new(16, params(4, Backend::Deterministic)).unwrap();
        assert_eq!(e.current_matching().size(), 0);
        e.audit().unwrap();
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Engine::new(16, EngineParams::new(4, 0.004, Backend::Deterministic)).is_err());
        assert!(Engine::new(4, EngineParams::new(4, 0.001, Backend::Deterministic)).is_err());
    }

    #[test]
    fn delete_adjunct_edge_rematches() {
        // Path 0-1-2-3 with B large enough that nothing is high.
        let g = DynGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut e = Engine::from_graph(g, EngineParams::new(4, 0.0025, Backend::Deterministic)).unwrap();
        let m0 = e.matching_edges();
        assert_eq!(m0, vec![(0, 1), (2, 3)]);
        e.handle_update(&UpdateEvent::delete(0, 1)).unwrap();
        e.audit().unwrap();
        e.handle_update(&UpdateEvent::delete(2, 3)).unwrap();
        assert_eq!(e.matching_edges(), vec![(1, 2)]);
        e.audit().unwrap();
    }

    #[test]
    fn safe_vertices_matched_after_init() {
        // Left vertices 0..8 each joined to 12 of the right vertices 8..32.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = DynGraph::new(64);
        for u in 0..8 {
            let picks = rand::seq::index::sample(&mut rng, 56, 12).into_vec();
            for r in picks {
                g.insert_edge(u, 8 + r).unwrap();
            }
        }
        for backend in [Backend::Deterministic, Backend::Randomized] {
            let e = Engine::from_graph(g.clone(), params(8, backend)).unwrap();
            let hi: Vec<usize> = (0..64).filter(|&v| e.class(v).is_hi()).collect();
            assert!(!hi.is_empty());
            assert!(hi.iter().all(|&v| e.m_base().is_matched(v)));
            e.audit().unwrap();
        }
    }

    /// Hub-and-leaf start (hubs end up high), then a mix of matched-edge deletions, random deletions
    /// and random insertions, auditing after every update.
    fn fuzz(n: usize, b: usize, eps: f64, backend: Backend, seed: u64, steps: usize) -> EngineMetrics {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DynGraph::new(n);
        let hubs = n / 6;
        for u in 0..hubs {
            for r in rand::seq::index::sample(&mut rng, n - hubs, 2 * b) {
                g.insert_edge(u, hubs + r).unwrap();
            }
        }
        for u in hubs..n {
            for v in u + 1..n {
                if rng.gen_bool(0.03) {
                    g.insert_edge(u, v).unwrap();
                }
            }
        }
        let mut p = EngineParams::new(b, eps, backend);
        p.seed = seed;
        let mut e = Engine::from_graph(g, p).unwrap();
        e.audit().unwrap();
        for step in 0..steps {
            let r: f64 = rng.gen();
            let ev = if r < 0.5 {
                let m = e.matching_edges();
                let (a, c) = m[rng.gen_range(0..m.len())];
                UpdateEvent::delete(a, c)
            } else if r < 0.75 {
                let edges = e.graph().edge_vec();
                let (a, c) = edges[rng.gen_range(0..edges.len())];
                UpdateEvent::delete(a, c)
            } else {
                let (a, c) = loop {
                    let a = rng.gen_range(0..n);
                    let c = rng.gen_range(0..n);
                    if a != c && !e.graph().has_edge(a, c) {
                        break (a, c);
                    }
                };
                UpdateEvent::insert(a, c)
            };
            e.handle_update(&ev).unwrap();
            if let Err(msg) = e.audit() {
                panic!("step {step}: {msg}");
            }
            assert!(e.slack().holds(), "{:?}", e.slack());
        }
        let m = e.metrics();
        assert_eq!(m.enew_rescues, 0);
        assert!(m.max_recourse <= 4);
        m
    }

    #[test]
    fn fuzz_deterministic() {
        let m = fuzz(120, 24, 0.0015, Backend::Deterministic, 1, 600);
        assert!(m.augments > 0 && m.damaged > 0 && m.phases > 1, "{m:?}");
    }

    #[test]
    fn fuzz_randomized() {
        let m = fuzz(120, 24, 0.0015, Backend::Randomized, 2, 600);
        assert!(m.augments > 0 && m.walk_steps > 0 && m.phases > 1, "{m:?}");
    }
}
