use super::{CoreError, Edge, UpdateEvent, UpdateKind, VertexId};

/// Simple undirected graph with sorted adjacency and tombstones.
///
/// Adjacency lists are kept as sorted vectors: rank selection is O(1),
/// membership is a binary search, and mutation is a single `memmove`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DynGraph {
    adj: Vec<Vec<VertexId>>,
    removed: Vec<bool>,
    m: usize,
}

impl DynGraph {
    pub fn new(n: usize) -> Self {
        DynGraph { adj: vec![Vec::new(); n], removed: vec![false; n], m: 0 }
    }

    pub fn from_edges<I: IntoIterator<Item = (VertexId, VertexId)>>(
        n: usize,
        edges: I,
    ) -> Result<Self, CoreError> {
        let mut g = DynGraph::new(n);
        for (u, v) in edges {
            g.insert_edge(u, v)?;
        }
        Ok(g)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adj.len()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v].len()
    }

    #[inline]
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v]
    }

    #[inline]
    pub fn is_removed(&self, v: VertexId) -> bool {
        self.removed[v]
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    #[inline]
    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        if u >= self.n() || v >= self.n() {
            return false;
        }
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() { (u, v) } else { (v, u) };
        self.adj[a].binary_search(&b).is_ok()
    }

    fn check(&self, u: VertexId, v: VertexId) -> Result<(), CoreError> {
        let n = self.n();
        for x in [u, v] {
            if x >= n {
                return Err(CoreError::VertexOutOfRange { v: x, n });
            }
            if self.removed[x] {
                return Err(CoreError::Tombstoned(x));
            }
        }
        if u == v {
            return Err(CoreError::SelfLoop(u));
        }
        Ok(())
    }

    pub fn insert_edge(&mut self, u: VertexId, v: VertexId) -> Result<(), CoreError> {
        self.check(u, v)?;
        match self.adj[u].binary_search(&v) {
            Ok(_) => Err(CoreError::DuplicateEdge(u, v)),
            Err(pos) => {
                self.adj[u].insert(pos, v);
                let pos_v = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos_v, u);
                self.m += 1;
                Ok(())
            }
        }
    }

    pub fn delete_edge(&mut self, u: VertexId, v: VertexId) -> Result<(), CoreError> {
        let n = self.n();
        if u >= n || v >= n {
            return Err(CoreError::VertexOutOfRange { v: u.max(v), n });
        }
        match self.adj[u].binary_search(&v) {
            Err(_) => Err(CoreError::MissingEdge(u, v)),
            Ok(pos) => {
                self.adj[u].remove(pos);
                let pos_v = self.adj[v].binary_search(&u).expect("adjacency symmetry");
                self.adj[v].remove(pos_v);
                self.m -= 1;
                Ok(())
            }
        }
    }

    pub fn apply_update(&mut self, e: &UpdateEvent) -> Result<(), CoreError> {
        match e.kind {
            UpdateKind::Insert => self.insert_edge(e.u, e.v),
            UpdateKind::Delete => self.delete_edge(e.u, e.v),
        }
    }

    /// The `k`-th smallest neighbor of `v`.
    pub fn kth_neighbor(&self, v: VertexId, k: usize) -> Result<VertexId, CoreError> {
        let list = &self.adj[v];
        list.get(k).copied().ok_or(CoreError::RankOutOfBounds { v, k, degree: list.len() })
    }

    /// Removes every edge at `v` and marks it dead. Returns the former neighbors.
    pub fn tombstone(&mut self, v: VertexId) -> Vec<VertexId> {
        let nbrs = std::mem::take(&mut self.adj[v]);
        for &x in &nbrs {
            let pos = self.adj[x].binary_search(&v).expect("adjacency symmetry");
            self.adj[x].remove(pos);
        }
        self.m -= nbrs.len();
        self.removed[v] = true;
        nbrs
    }

    /// All edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn edge_vec(&self) -> Vec<Edge> {
        self.edges().collect()
    }

    /// Subgraph on the same vertex set containing the edges accepted by `keep`.
    pub fn filter_edges<F: FnMut(VertexId, VertexId) -> bool>(&self, mut keep: F) -> DynGraph {
        let mut h = DynGraph::new(self.n());
        h.removed.clone_from(&self.removed);
        for (u, v) in self.edges() {
            if keep(u, v) {
                h.adj[u].push(v);
                h.adj[v].push(u);
                h.m += 1;
            }
        }
        h
    }

    /// Sum of degrees; equals `2 m` whenever the structure is consistent.
    pub fn degree_sum(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    /// Full structural self-check, used by tests and audits.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (u, list) in self.adj.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("adjacency of {u} not strictly sorted"));
            }
            for &v in list {
                if v == u {
                    return Err(format!("self-loop at {u}"));
                }
                if self.adj[v].binary_search(&u).is_err() {
                    return Err(format!("asymmetric edge ({u}, {v})"));
                }
            }
            if self.removed[u] && !list.is_empty() {
                return Err(format!("tombstoned vertex {u} has edges"));
            }
        }
        if self.degree_sum() != 2 * self.m {
            return Err(format!("degree sum {} != 2m = {}", self.degree_sum(), 2 * self.m));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_and_delete_single_edge() {
        let mut g = DynGraph::new(2);
        g.apply_update(&UpdateEvent::insert(0, 1)).unwrap();
        assert_eq!((g.degree(0), g.degree(1), g.m()), (1, 1, 1));
        g.apply_update(&UpdateEvent::delete(0, 1)).unwrap();
        assert_eq!((g.degree(0), g.degree(1), g.m()), (0, 0, 0));
    }

    #[test]
    fn duplicate_and_missing_edges_are_rejected() {
        let mut g = DynGraph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(g.insert_edge(0, 1), Err(CoreError::DuplicateEdge(0, 1)));
        assert_eq!(g.insert_edge(1, 0), Err(CoreError::DuplicateEdge(1, 0)));
        g.delete_edge(0, 1).unwrap();
        assert_eq!(g.delete_edge(0, 1), Err(CoreError::MissingEdge(0, 1)));
        assert_eq!(g.insert_edge(1, 1), Err(CoreError::SelfLoop(1)));
    }

    #[test]
    fn kth_neighbor_is_ascending() {
        let g = DynGraph::from_edges(4, [(0, 3), (0, 1), (0, 2)]).unwrap();
        assert_eq!(g.kth_neighbor(0, 1), Ok(2));
        assert_eq!(g.kth_neighbor(3, 0), Ok(0));
        assert_eq!(
            g.kth_neighbor(0, 3),
            Err(CoreError::RankOutOfBounds { v: 0, k: 3, degree: 3 })
        );
    }

    #[test]
    fn tombstone_empties_adjacency() {
        let mut g = DynGraph::from_edges(4, [(0, 1), (1, 2), (1, 3), (2, 3)]).unwrap();
        let nb = g.tombstone(1);
        assert_eq!(nb, vec![0, 2, 3]);
        assert_eq!(g.m(), 1);
        assert!(g.is_removed(1));
        assert_eq!(g.insert_edge(0, 1), Err(CoreError::Tombstoned(1)));
        g.check_consistency().unwrap();
    }
}
