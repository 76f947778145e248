//! Monotone Even–Shiloach tree: shortest-path distances to a sink `t` in a
//! directed graph with positive integer weights, under edge deletions,
//! distance-preserving insertions, and vertex removal.
//!
//! After a deletion the affected vertices (those whose every shortest path
//! used a removed edge) are found in increasing label order and relabelled by
//! a Dijkstra pass seeded from their unaffected out-neighbours. Every
//! affected vertex strictly increases its label and is charged its out-degree.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Distance label of a vertex that cannot reach the sink.
///
/// Larger than any achievable distance: weights are bounded by the number of
/// vertices times a polylogarithmic factor in every caller.
pub const INF: u64 = u64::MAX / 4;

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EsError {
    #[error("edge ({0} -> {1}) not present")]
    MissingEdge(usize, usize),
    #[error("edge ({0} -> {1}) already present")]
    DuplicateEdge(usize, usize),
    #[error("insertion ({u} -> {v}, w = {w}) would decrease dist({u}) = {du} (dist({v}) = {dv})")]
    MonotonicityViolation { u: usize, v: usize, w: u64, du: u64, dv: u64 },
    #[error("the sink cannot be removed")]
    SinkRemoval,
    #[error("vertex {0} cannot reach the sink")]
    Unreachable(usize),
    #[error("invalid weight {w} on edge ({u} -> {v})")]
    InvalidWeight { u: usize, v: usize, w: u64 },
    #[error("vertex {0} has been removed")]
    Removed(usize),
}

/// Directed graph over `0..n` plus the sink `t = n`.
///
/// Only edges into `t` may carry weight above 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResidualGraph {
    out: Vec<Vec<(usize, u64)>>,
    inn: Vec<Vec<usize>>,
}

impl ResidualGraph {
    /// Graph with `n` ordinary vertices and the sink `n`.
    pub fn new(n: usize) -> Self {
        ResidualGraph { out: vec![Vec::new(); n + 1], inn: vec![Vec::new(); n + 1] }
    }

    #[inline]
    pub fn sink(&self) -> usize {
        self.out.len() - 1
    }

    /// Number of vertices including the sink.
    #[inline]
    pub fn len(&self) -> usize {
        self.out.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    #[inline]
    pub fn out_edges(&self, v: usize) -> &[(usize, u64)] {
        &self.out[v]
    }

    #[inline]
    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.inn[v]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<u64> {
        let list = &self.out[u];
        list.binary_search_by_key(&v, |&(h, _)| h).ok().map(|i| list[i].1)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.weight(u, v).is_some()
    }

    pub fn num_edges(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: u64) -> Result<(), EsError> {
        if w == 0 || (w > 1 && v != self.sink()) || u == self.sink() || u == v {
            return Err(EsError::InvalidWeight { u, v, w });
        }
        match self.out[u].binary_search_by_key(&v, |&(h, _)| h) {
            Ok(_) => Err(EsError::DuplicateEdge(u, v)),
            Err(pos) => {
                self.out[u].insert(pos, (v, w));
                let p = self.inn[v].binary_search(&u).unwrap_err();
                self.inn[v].insert(p, u);
                Ok(())
            }
        }
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> Result<u64, EsError> {
        match self.out[u].binary_search_by_key(&v, |&(h, _)| h) {
            Err(_) => Err(EsError::MissingEdge(u, v)),
            Ok(pos) => {
                let (_, w) = self.out[u].remove(pos);
                let p = self.inn[v].binary_search(&u).expect("in/out symmetry");
                self.inn[v].remove(p);
                Ok(w)
            }
        }
    }

    pub fn max_sink_weight(&self) -> u64 {
        let t = self.sink();
        self.inn[t].iter().filter_map(|&u| self.weight(u, t)).max().unwrap_or(0)
    }

    /// Exact distances to the sink by a reverse Dijkstra; `INF` if unreachable.
    pub fn dijkstra_to_sink(&self) -> Vec<u64> {
        let t = self.sink();
        let mut dist = vec![INF; self.len()];
        dist[t] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, t)));
        while let Some(Reverse((d, x))) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &p in &self.inn[x] {
                let w = self.weight(p, x).expect("in/out symmetry");
                let nd = d + w;
                if nd < dist[p] {
                    dist[p] = nd;
                    heap.push(Reverse((nd, p)));
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EsWork {
    /// Out-edge entries examined.
    pub scans: u64,
    /// Number of strict label increases.
    pub label_changes: u64,
    /// Structural operations applied.
    pub updates: u64,
}

#[derive(Debug, Clone)]
pub struct EsTree {
    g: ResidualGraph,
    dist: Vec<u64>,
    parent: Vec<usize>,
    removed: Vec<bool>,
    work: EsWork,
}

impl EsTree {
    pub fn build(g: ResidualGraph) -> Self {
        let dist = g.dijkstra_to_sink();
        let n = g.len();
        let mut tr = EsTree { g, dist, parent: vec![NO_PARENT; n], removed: vec![false; n], work: EsWork::default() };
        tr.work.scans += tr.g.num_edges() as u64;
        for v in 0..n {
            tr.reparent(v);
        }
        tr
    }

    #[inline]
    pub fn graph(&self) -> &ResidualGraph {
        &self.g
    }

    #[inline]
    pub fn sink(&self) -> usize {
        self.g.sink()
    }

    #[inline]
    pub fn dist(&self, v: usize) -> u64 {
        self.dist[v]
    }

    pub fn dists(&self) -> &[u64] {
        &self.dist
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.parent[v] != NO_PARENT).then_some(self.parent[v])
    }

    pub fn is_removed(&self, v: usize) -> bool {
        self.removed[v]
    }

    pub fn work(&self) -> EsWork {
        self.work
    }

    /// Lowest-id tight out-neighbour, or none if `dist(v)` is infinite.
    fn reparent(&mut self, v: usize) {
        if v == self.sink() || self.removed[v] {
            self.parent[v] = NO_PARENT;
            return;
        }
        let dv = self.dist[v];
        self.parent[v] = NO_PARENT;
        if dv >= INF {
            return;
        }
        for &(h, w) in &self.g.out[v] {
            self.work.scans += 1;
            if self.dist[h] < INF && self.dist[h] + w == dv {
                self.parent[v] = h;
                return;
            }
        }
        unreachable!("finite label without a tight out-edge at {v}");
    }

    pub fn delete(&mut self, u: usize, v: usize) -> Result<(), EsError> {
        self.g.remove_edge(u, v)?;
        self.work.updates += 1;
        if self.parent[u] == v {
            self.settle(vec![u]);
        }
        Ok(())
    }

    /// Deletes several edges and then settles labels once.
    pub fn delete_batch(&mut self, edges: &[(usize, usize)]) -> Result<(), EsError> {
        let mut seeds = Vec::new();
        for &(u, v) in edges {
            self.g.remove_edge(u, v)?;
            self.work.updates += 1;
            if self.parent[u] == v {
                seeds.push(u);
            }
        }
        if !seeds.is_empty() {
            self.settle(seeds);
        }
        Ok(())
    }

    pub fn insert(&mut self, u: usize, v: usize, w: u64) -> Result<(), EsError> {
        if self.removed[u] {
            return Err(EsError::Removed(u));
        }
        if self.removed[v] {
            return Err(EsError::Removed(v));
        }
        let (du, dv) = (self.dist[u], self.dist[v]);
        let via = if dv >= INF { INF } else { dv + w };
        if via < du {
            return Err(EsError::MonotonicityViolation { u, v, w, du, dv });
        }
        self.g.add_edge(u, v, w)?;
        self.work.updates += 1;
        if via == du && du < INF && (self.parent[u] == NO_PARENT || v < self.parent[u]) {
            self.parent[u] = v;
        }
        Ok(())
    }

    /// Removes `v` and all its incident edges. Its label is frozen.
    pub fn remove_vertex(&mut self, v: usize) -> Result<(), EsError> {
        if v == self.sink() {
            return Err(EsError::SinkRemoval);
        }
        if self.removed[v] {
            return Ok(());
        }
        self.removed[v] = true;
        self.parent[v] = NO_PARENT;
        let outs: Vec<usize> = self.g.out[v].iter().map(|&(h, _)| h).collect();
        for h in outs {
            self.g.remove_edge(v, h)?;
        }
        let ins: Vec<usize> = self.g.inn[v].clone();
        let mut seeds = Vec::new();
        for p in ins {
            self.g.remove_edge(p, v)?;
            if self.parent[p] == v {
                seeds.push(p);
            }
        }
        self.work.updates += 1;
        if !seeds.is_empty() {
            self.settle(seeds);
        }
        Ok(())
    }

    /// Tree path `v, parent(v), ..., t`.
    pub fn path_to_sink(&self, v: usize) -> Result<Vec<usize>, EsError> {
        if self.removed[v] {
            return Err(EsError::Removed(v));
        }
        if self.dist[v] >= INF {
            return Err(EsError::Unreachable(v));
        }
        let t = self.sink();
        let mut path = vec![v];
        let mut x = v;
        while x != t {
            x = self.parent[x];
            debug_assert!(x != NO_PARENT, "broken parent chain");
            path.push(x);
        }
        Ok(path)
    }

    /// Relabels every vertex whose shortest paths all went through a seed's
    /// lost parent edge.
    fn settle(&mut self, seeds: Vec<usize>) {
        let n = self.g.len();
        let mut affected = vec![false; n];
        let mut order: Vec<usize> = Vec::new();
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
            seeds.into_iter().filter(|&s| self.dist[s] < INF).map(|s| Reverse((self.dist[s], s))).collect();
        let mut pending = vec![false; n];
        for Reverse((_, s)) in heap.iter() {
            pending[*s] = true;
        }

        // Phase 1: classify in increasing label order.
        while let Some(Reverse((d, x))) = heap.pop() {
            if !pending[x] || affected[x] {
                continue;
            }
            pending[x] = false;
            debug_assert_eq!(d, self.dist[x]);
            let mut alt = NO_PARENT;
            for &(h, w) in &self.g.out[x] {
                self.work.scans += 1;
                if !affected[h] && self.dist[h] < INF && self.dist[h] + w == d {
                    alt = h;
                    break;
                }
            }
            if alt != NO_PARENT {
                self.parent[x] = alt;
                continue;
            }
            affected[x] = true;
            order.push(x);
            for i in 0..self.g.inn[x].len() {
                let p = self.g.inn[x][i];
                if self.parent[p] == x && !affected[p] && !pending[p] {
                    pending[p] = true;
                    heap.push(Reverse((self.dist[p], p)));
                }
            }
        }
        if order.is_empty() {
            return;
        }

        // Phase 2: Dijkstra restricted to the affected set.
        let mut nd: Vec<u64> = Vec::with_capacity(order.len());
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
        for &x in &order {
            let mut best = INF;
            for &(h, w) in &self.g.out[x] {
                self.work.scans += 1;
                if !affected[h] && self.dist[h] < INF {
                    best = best.min(self.dist[h] + w);
                }
            }
            nd.push(best);
        }
        for (i, &x) in order.iter().enumerate() {
            self.dist[x] = nd[i];
            if nd[i] < INF {
                heap.push(Reverse((nd[i], x)));
            }
        }
        let mut done = vec![false; n];
        while let Some(Reverse((d, x))) = heap.pop() {
            if done[x] || d > self.dist[x] {
                continue;
            }
            done[x] = true;
            for i in 0..self.g.inn[x].len() {
                let p = self.g.inn[x][i];
                if affected[p] && !done[p] {
                    let w = self.g.weight(p, x).expect("in/out symmetry");
                    self.work.scans += 1;
                    if d + w < self.dist[p] {
                        self.dist[p] = d + w;
                        heap.push(Reverse((d + w, p)));
                    }
                }
            }
        }
        for &x in &order {
            self.work.label_changes += 1;
            self.reparent(x);
        }
    }

    /// Checks labels against a fresh Dijkstra and validates parent pointers.
    pub fn check_exact(&self) -> Result<(), String> {
        let oracle = self.g.dijkstra_to_sink();
        for v in 0..self.g.len() {
            if self.removed[v] {
                continue;
            }
            if oracle[v] != self.dist[v] {
                return Err(format!("dist({v}) = {} but oracle says {}", self.dist[v], oracle[v]));
            }
            if v != self.sink() && self.dist[v] < INF {
                let p = self.parent[v];
                match self.g.weight(v, p) {
                    Some(w) if !self.removed[p] && self.dist[p] + w == self.dist[v] => {}
                    _ => return Err(format!("parent of {v} is not a tight edge")),
                }
            }
        }
        Ok(())
    }
}

pub fn es_build(g: ResidualGraph) -> EsTree {
    EsTree::build(g)
}

pub fn es_delete(tr: &mut EsTree, u: usize, v: usize) -> Result<(), EsError> {
    tr.delete(u, v)
}

pub fn es_insert(tr: &mut EsTree, u: usize, v: usize, w: u64) -> Result<(), EsError> {
    tr.insert(u, v, w)
}

pub fn es_remove_vertex(tr: &mut EsTree, v: usize) -> Result<(), EsError> {
    tr.remove_vertex(v)
}

pub fn es_path_to_sink(tr: &EsTree, v: usize) -> Result<Vec<usize>, EsError> {
    tr.path_to_sink(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    // a = 0, b = 1, c = 2, t = 3 unless stated otherwise.
    fn path_graph() -> ResidualGraph {
        let mut g = ResidualGraph::new(2);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        g
    }

    #[test]
    fn build_on_path() {
        let tr = es_build(path_graph());
        assert_eq!(tr.dists(), &[2, 1, 0]);
        assert_eq!(es_path_to_sink(&tr, 0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn unreachable_vertex() {
        let mut g = ResidualGraph::new(2);
        g.add_edge(1, 2, 1).unwrap();
        let tr = es_build(g);
        assert_eq!(tr.dist(0), INF);
        assert_eq!(tr.parent(0), None);
        assert_eq!(es_path_to_sink(&tr, 0), Err(EsError::Unreachable(0)));
    }

    #[test]
    fn heavy_sink_edge() {
        let mut g = ResidualGraph::new(1);
        g.add_edge(0, 1, 5).unwrap();
        let tr = es_build(g);
        assert_eq!(tr.dist(0), 5);
        assert_eq!(es_path_to_sink(&tr, 0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn only_sink_edges_may_be_heavy() {
        let mut g = ResidualGraph::new(2);
        assert!(g.add_edge(0, 1, 2).is_err());
        assert!(g.add_edge(0, 2, 2).is_ok());
    }

    #[test]
    fn delete_cuts_path() {
        let mut tr = es_build(path_graph());
        es_delete(&mut tr, 1, 2).unwrap();
        assert_eq!((tr.dist(0), tr.dist(1)), (INF, INF));
        assert_eq!(es_delete(&mut tr, 1, 2), Err(EsError::MissingEdge(1, 2)));
    }

    #[test]
    fn diamond_keeps_distance() {
        // a=0 -> {b=1, c=2} -> t=3
        let mut g = ResidualGraph::new(3);
        for (u, v) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            g.add_edge(u, v, 1).unwrap();
        }
        let mut tr = es_build(g);
        assert_eq!(tr.parent(0), Some(1));
        es_delete(&mut tr, 0, 1).unwrap();
        assert_eq!(tr.dist(0), 2);
        assert_eq!(tr.parent(0), Some(2));
        tr.check_exact().unwrap();
    }

    #[test]
    fn reverse_edges_before_delete_keep_labels() {
        // a=0 -> b=1 -> c=2 -> t=3, plus a -> c so reversing the tree path is legal.
        let mut g = ResidualGraph::new(3);
        for (u, v) in [(0, 1), (1, 2), (2, 3), (0, 2)] {
            g.add_edge(u, v, 1).unwrap();
        }
        let mut tr = es_build(g);
        let before = tr.dists().to_vec();
        let path = es_path_to_sink(&tr, 1).unwrap();
        for w in path.windows(2) {
            if w[1] != tr.sink() {
                es_insert(&mut tr, w[1], w[0], 1).unwrap();
            }
        }
        assert_eq!(tr.dists(), &before[..]);
    }

    #[test]
    fn sink_edge_with_current_distance() {
        let mut tr = es_build(path_graph());
        es_insert(&mut tr, 0, 2, 2).unwrap();
        assert_eq!(tr.dists(), &[2, 1, 0]);
        es_delete(&mut tr, 0, 1).unwrap();
        assert_eq!(tr.dist(0), 2);
        tr.check_exact().unwrap();
    }

    #[test]
    fn decreasing_insertion_is_rejected() {
        let mut g = ResidualGraph::new(2);
        g.add_edge(0, 1, 1).unwrap();
        g.add_edge(1, 2, 1).unwrap();
        let mut tr = es_build(g);
        assert!(matches!(es_insert(&mut tr, 0, 2, 1), Err(EsError::MonotonicityViolation { .. })));
    }

    #[test]
    fn remove_leaf_and_middle() {
        // a=0 -> b=1 -> t=3, c=2 -> t
        let mut g = ResidualGraph::new(3);
        for (u, v) in [(0, 1), (1, 3), (2, 3)] {
            g.add_edge(u, v, 1).unwrap();
        }
        let mut tr = es_build(g);
        es_remove_vertex(&mut tr, 2).unwrap();
        assert_eq!((tr.dist(0), tr.dist(1)), (2, 1));
        es_remove_vertex(&mut tr, 1).unwrap();
        assert_eq!(tr.dist(0), INF);
        assert_eq!(es_remove_vertex(&mut tr, 3), Err(EsError::SinkRemoval));
        tr.check_exact().unwrap();
    }

    #[test]
    fn cycle_detached_from_sink_goes_to_infinity() {
        // 0 <-> 1, 1 -> t; delete 1 -> t.
        let mut g = ResidualGraph::new(2);
        for (u, v) in [(0, 1), (1, 0), (1, 2)] {
            g.add_edge(u, v, 1).unwrap();
        }
        let mut tr = es_build(g);
        es_delete(&mut tr, 1, 2).unwrap();
        assert_eq!((tr.dist(0), tr.dist(1)), (INF, INF));
        tr.check_exact().unwrap();
    }
}
