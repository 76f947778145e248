//! Maintenance of a `(B, B^-)` edge-degree constrained subgraph `H` of a
//! dynamic graph `G`.
//!
//! The edge degree of `(u, v)` is `deg_H(u) + deg_H(v)`. Edges of `H` must
//! have edge degree at most `B`; edges of `G` outside `H` must have edge degree
//! at least `B^-`. Repairs use a FIFO queue of possibly violating edges.
//!
//! `B^-` is the integer `ceil((1 - eps) B)`, clamped to `B - 1`. The clamp
//! only matters when `eps * B < 1`: with integral degrees a `(B, B)` subgraph
//! need not exist (a single edge with `B = 1` has none), while `(B, B - 1)`
//! always exists and local repair terminates for it.

use crate::graph::{norm, CoreError, DynGraph, Edge, UpdateEvent, UpdateKind, VertexId};
use std::collections::{HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdcsError {
    #[error("invalid EDCS parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// One insertion into or removal from `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HChange {
    pub inserted: bool,
    pub edge: Edge,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EdcsStats {
    /// Edges added to or removed from `H`.
    pub flips: u64,
    /// Adjacency entries examined while looking for violations.
    pub scans: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct EdcsReport {
    /// Edges of `H` whose edge degree exceeds `B`.
    pub condition1: Vec<Edge>,
    /// Edges of `G \ H` whose edge degree is below `B^-`.
    pub condition2: Vec<Edge>,
    /// Edges of `H` that are not edges of `G`.
    pub not_in_host: Vec<Edge>,
}

impl EdcsReport {
    pub fn is_clean(&self) -> bool {
        self.condition1.is_empty() && self.condition2.is_empty() && self.not_in_host.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct EdcsState {
    h: DynGraph,
    b: usize,
    eps: f64,
    b_minus: usize,
    dirty: VecDeque<Edge>,
    queued: HashSet<Edge>,
    stats: EdcsStats,
}

/// Integer lower bound used for condition 2.
pub fn lower_bound(b: usize, eps: f64) -> usize {
    let raw = ((1.0 - eps) * b as f64 - 1e-9).ceil().max(0.0) as usize;
    raw.min(b.saturating_sub(1))
}

impl EdcsState {
    /// Builds an EDCS of `g` from scratch.
    pub fn init(g: &DynGraph, b: usize, eps: f64) -> Result<Self, EdcsError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(EdcsError::InvalidParams(format!("eps = {eps} not in (0, 1)")));
        }
        if b > g.n() {
            return Err(EdcsError::InvalidParams(format!("B = {b} exceeds n = {}", g.n())));
        }
        if (1.0 - eps) * (b as f64) < 1.0 - 1e-12 {
            return Err(EdcsError::InvalidParams(format!("(1 - eps) B < 1 for B = {b}, eps = {eps}")));
        }
        let mut s = EdcsState {
            h: DynGraph::new(g.n()),
            b,
            eps,
            b_minus: lower_bound(b, eps),
            dirty: VecDeque::new(),
            queued: HashSet::new(),
            stats: EdcsStats::default(),
        };
        for e in g.edges() {
            s.enqueue(e);
        }
        s.repair(g);
        Ok(s)
    }

    pub fn h(&self) -> &DynGraph {
        &self.h
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn b_minus(&self) -> usize {
        self.b_minus
    }

    pub fn stats(&self) -> EdcsStats {
        self.stats
    }

    #[inline]
    fn edge_degree(&self, u: VertexId, v: VertexId) -> usize {
        self.h.degree(u) + self.h.degree(v)
    }

    fn enqueue(&mut self, e: Edge) {
        if self.queued.insert(e) {
            self.dirty.push_back(e);
        }
    }

    /// Queues non-`H` edges at `x` that now fall below `B^-`.
    fn scan_lower(&mut self, g: &DynGraph, x: VertexId) {
        let dx = self.h.degree(x);
        let nbrs = g.neighbors(x);
        self.stats.scans += nbrs.len() as u64;
        for &w in nbrs {
            if dx + self.h.degree(w) < self.b_minus && !self.h.has_edge(x, w) {
                self.enqueue(norm(x, w));
            }
        }
    }

    /// Queues `H` edges at `x` that now exceed `B`.
    fn scan_upper(&mut self, x: VertexId) {
        let dx = self.h.degree(x);
        let over: Vec<VertexId> =
            self.h.neighbors(x).iter().copied().filter(|&w| dx + self.h.degree(w) > self.b).collect();
        self.stats.scans += self.h.degree(x) as u64;
        for w in over {
            self.enqueue(norm(x, w));
        }
    }

    fn repair(&mut self, g: &DynGraph) -> Vec<HChange> {
        let mut changes = Vec::new();
        while let Some((u, v)) = self.dirty.pop_front() {
            self.queued.remove(&(u, v));
            if !g.has_edge(u, v) {
                continue;
            }
            if self.h.has_edge(u, v) {
                if self.edge_degree(u, v) > self.b {
                    self.h.delete_edge(u, v).expect("edge present in H");
                    self.stats.flips += 1;
                    changes.push(HChange { inserted: false, edge: (u, v) });
                    self.scan_lower(g, u);
                    self.scan_lower(g, v);
                }
            } else if self.edge_degree(u, v) < self.b_minus {
                self.h.insert_edge(u, v).expect("edge absent from H");
                self.stats.flips += 1;
                changes.push(HChange { inserted: true, edge: (u, v) });
                self.scan_upper(u);
                self.scan_upper(v);
            }
        }
        changes
    }

    /// Restores both conditions after `e` has been applied to `g`.
    pub fn on_update(&mut self, g: &DynGraph, e: &UpdateEvent) -> Vec<HChange> {
        let (u, v) = e.edge();
        match e.kind {
            UpdateKind::Insert => {
                if self.edge_degree(u, v) < self.b_minus {
                    self.enqueue((u, v));
                }
                self.repair(g)
            }
            UpdateKind::Delete => {
                let mut pre = Vec::new();
                if self.h.has_edge(u, v) {
                    self.h.delete_edge(u, v).expect("edge present in H");
                    self.stats.flips += 1;
                    pre.push(HChange { inserted: false, edge: (u, v) });
                    self.scan_lower(g, u);
                    self.scan_lower(g, v);
                }
                pre.extend(self.repair(g));
                pre
            }
        }
    }

    /// Exhaustive check of both conditions against `g`.
    pub fn validate(&self, g: &DynGraph) -> EdcsReport {
        let mut r = EdcsReport::default();
        for (u, v) in self.h.edges() {
            if !g.has_edge(u, v) {
                r.not_in_host.push((u, v));
            }
            if self.edge_degree(u, v) > self.b {
                r.condition1.push((u, v));
            }
        }
        for (u, v) in g.edges() {
            if !self.h.has_edge(u, v) && self.edge_degree(u, v) < self.b_minus {
                r.condition2.push((u, v));
            }
        }
        r
    }

    /// Direct mutable access to `H`, for fault-injection tests.
    #[doc(hidden)]
    pub fn h_mut_for_testing(&mut self) -> &mut DynGraph {
        &mut self.h
    }
}

pub fn edcs_init(g: &DynGraph, b: usize, eps: f64) -> Result<EdcsState, EdcsError> {
    EdcsState::init(g, b, eps)
}

pub fn edcs_on_update(s: &mut EdcsState, g: &DynGraph, e: &UpdateEvent) -> Vec<HChange> {
    s.on_update(g, e)
}

pub fn edcs_validate(s: &EdcsState, g: &DynGraph) -> EdcsReport {
    s.validate(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// All edge subsets of `g` that satisfy both conditions.
    fn brute_force_valid(g: &DynGraph, b: usize, eps: f64) -> Vec<Vec<Edge>> {
        let edges = g.edge_vec();
        let lo = lower_bound(b, eps);
        let mut out = Vec::new();
        for mask in 0u32..(1 << edges.len()) {
            let chosen: Vec<Edge> =
                (0..edges.len()).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).collect();
            let h = DynGraph::from_edges(g.n(), chosen.iter().copied()).unwrap();
            let ok = edges.iter().all(|&(u, v)| {
                let d = h.degree(u) + h.degree(v);
                if h.has_edge(u, v) {
                    d <= b
                } else {
                    d >= lo
                }
            });
            if ok {
                out.push(chosen);
            }
        }
        out
    }

    #[test]
    fn single_edge_is_forced() {
        let g = DynGraph::from_edges(2, [(0, 1)]).unwrap();
        let s = edcs_init(&g, 2, 0.5).unwrap();
        assert_eq!(s.h().edge_vec(), vec![(0, 1)]);
        assert_eq!(brute_force_valid(&g, 2, 0.5), vec![vec![(0, 1)]]);
    }

    #[test]
    fn triangle_gets_one_edge() {
        let g = DynGraph::from_edges(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let valid = brute_force_valid(&g, 2, 0.5);
        assert_eq!(valid, vec![vec![(0, 1)], vec![(0, 2)], vec![(1, 2)]]);
        let s = edcs_init(&g, 2, 0.5).unwrap();
        assert!(valid.contains(&s.h().edge_vec()));
    }

    #[test]
    fn empty_graph_gives_empty_h() {
        let g = DynGraph::new(5);
        let s = edcs_init(&g, 3, 0.5).unwrap();
        assert_eq!(s.h().m(), 0);
    }

    #[test]
    fn invalid_params() {
        let g = DynGraph::new(4);
        assert!(edcs_init(&g, 5, 0.5).is_err());
        assert!(edcs_init(&g, 2, 0.0).is_err());
        assert!(edcs_init(&g, 2, 1.0).is_err());
        assert!(edcs_init(&g, 1, 0.5).is_err());
    }

    #[test]
    fn deleting_h_edge_in_triangle_repairs() {
        let mut g = DynGraph::from_edges(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let mut s = edcs_init(&g, 2, 0.5).unwrap();
        let (a, b) = s.h().edge_vec()[0];
        let e = UpdateEvent::delete(a, b);
        g.apply_update(&e).unwrap();
        let ch = edcs_on_update(&mut s, &g, &e);
        assert_eq!(s.h().m(), 1);
        assert!(ch.iter().any(|c| c.inserted));
        assert!(edcs_validate(&s, &g).is_clean());
    }

    #[test]
    fn deleting_non_h_edge_without_violation_is_silent() {
        // Star 0-{1,2,3} plus edge (1, 2); B = 4.
        let mut g = DynGraph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let mut s = edcs_init(&g, 4, 0.5).unwrap();
        let outside: Vec<Edge> = g.edges().filter(|&(u, v)| !s.h().has_edge(u, v)).collect();
        for (u, v) in outside {
            let e = UpdateEvent::delete(u, v);
            g.apply_update(&e).unwrap();
            assert!(edcs_on_update(&mut s, &g, &e).is_empty());
        }
    }

    #[test]
    fn insert_with_high_edge_degree_is_silent() {
        // Two stars sharing nothing; connect the centers.
        let mut g = DynGraph::from_edges(6, [(0, 1), (0, 2), (3, 4), (3, 5)]).unwrap();
        let mut s = edcs_init(&g, 4, 0.5).unwrap();
        assert!(s.h().degree(0) + s.h().degree(3) >= s.b_minus());
        let e = UpdateEvent::insert(0, 3);
        g.apply_update(&e).unwrap();
        assert!(edcs_on_update(&mut s, &g, &e).is_empty());
    }

    #[test]
    fn validate_reports_corruption() {
        let g = DynGraph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let mut s = edcs_init(&g, 2, 0.5).unwrap();
        assert!(s.validate(&g).is_clean());
        // Over-full: put every edge into H.
        for (u, v) in g.edges() {
            let _ = s.h_mut_for_testing().insert_edge(u, v);
        }
        let r = s.validate(&g);
        assert!(r.condition1.contains(&(0, 1)));
        // Missing mandatory edge: empty H.
        let mut s2 = edcs_init(&g, 2, 0.5).unwrap();
        for (u, v) in g.edges() {
            let _ = s2.h_mut_for_testing().delete_edge(u, v);
        }
        let r2 = s2.validate(&g);
        assert_eq!(r2.condition2.len(), g.m());
    }

    #[test]
    fn lower_bound_clamps() {
        assert_eq!(lower_bound(2, 0.5), 1);
        assert_eq!(lower_bound(1000, 0.001), 999);
        assert_eq!(lower_bound(16, 0.001), 15);
        assert_eq!(lower_bound(10, 0.25), 8);
    }
}
