use super::{norm, CoreError, DynGraph, Edge, VertexId};

const FREE: VertexId = VertexId::MAX;

/// Symmetric mate map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    mate: Vec<VertexId>,
    size: usize,
}

impl Matching {
    pub fn new(n: usize) -> Self {
        Matching { mate: vec![FREE; n], size: 0 }
    }

    pub fn from_edges<I: IntoIterator<Item = Edge>>(n: usize, edges: I) -> Result<Self, CoreError> {
        let mut m = Matching::new(n);
        for (u, v) in edges {
            if m.is_matched(u) || m.is_matched(v) || u == v {
                return Err(CoreError::NotAlternating(0));
            }
            m.add(u, v);
        }
        Ok(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.mate.len()
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn mate(&self, v: VertexId) -> Option<VertexId> {
        let x = self.mate[v];
        (x != FREE).then_some(x)
    }

    #[inline]
    pub fn is_matched(&self, v: VertexId) -> bool {
        self.mate[v] != FREE
    }

    #[inline]
    pub fn contains(&self, u: VertexId, v: VertexId) -> bool {
        self.mate[u] == v
    }

    /// Adds `(u, v)`. Both endpoints must be free.
    pub fn add(&mut self, u: VertexId, v: VertexId) {
        assert!(u != v, "self-loop in matching");
        assert!(
            self.mate[u] == FREE && self.mate[v] == FREE,
            "matching edge ({u}, {v}) overlaps an existing edge"
        );
        self.mate[u] = v;
        self.mate[v] = u;
        self.size += 1;
    }

    /// Removes `(u, v)` if it is a matching edge; returns whether it was.
    pub fn remove(&mut self, u: VertexId, v: VertexId) -> bool {
        if self.mate[u] != v {
            return false;
        }
        self.mate[u] = FREE;
        self.mate[v] = FREE;
        self.size -= 1;
        true
    }

    /// Unmatches `v`, returning its former mate.
    pub fn unmatch(&mut self, v: VertexId) -> Option<VertexId> {
        let x = self.mate(v)?;
        self.remove(v, x);
        Some(x)
    }

    pub fn clear(&mut self) {
        self.mate.iter_mut().for_each(|x| *x = FREE);
        self.size = 0;
    }

    /// Matching edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        self.mate
            .iter()
            .enumerate()
            .filter(|&(u, &x)| x != FREE && u < x)
            .map(|(u, &x)| (u, x))
            .collect()
    }

    pub fn matched_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.mate.iter().enumerate().filter(|&(_, &x)| x != FREE).map(|(u, _)| u)
    }

    /// Applies `M <- M xor P`.
    ///
    /// `path` must start at a free vertex, alternate unmatched/matched edges
    /// starting with an unmatched one, and end at a free vertex.
    pub fn augment_along(&mut self, path: &[VertexId]) -> Result<(), CoreError> {
        let k = path.len();
        if k < 2 || !k.is_multiple_of(2) {
            return Err(CoreError::NotAlternating(k.saturating_sub(1)));
        }
        if self.is_matched(path[0]) {
            return Err(CoreError::NotAlternating(0));
        }
        if self.is_matched(path[k - 1]) {
            return Err(CoreError::NotAlternating(k - 1));
        }
        for i in 0..k - 1 {
            let (a, b) = (path[i], path[i + 1]);
            let matched = self.mate[a] == b;
            if a == b || matched != (i % 2 == 1) {
                return Err(CoreError::NotAlternating(i));
            }
        }
        let mut seen = path.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoreError::NotAlternating(0));
        }
        for i in (1..k - 1).step_by(2) {
            self.remove(path[i], path[i + 1]);
        }
        for i in (0..k).step_by(2) {
            self.add(path[i], path[i + 1]);
        }
        Ok(())
    }

    /// Checks symmetry, the size counter, and that every pair is an edge of `g`.
    pub fn validate_against(&self, g: &DynGraph) -> Result<(), String> {
        let mut count = 0;
        for (u, &x) in self.mate.iter().enumerate() {
            if x == FREE {
                continue;
            }
            if self.mate[x] != u {
                return Err(format!("asymmetric mate entry at {u}"));
            }
            if !g.has_edge(u, x) {
                return Err(format!("matched pair ({u}, {x}) is not an edge"));
            }
            if u < x {
                count += 1;
            }
        }
        if count != self.size {
            return Err(format!("size counter {} but {} pairs", self.size, count));
        }
        Ok(())
    }

    /// First edge of `g` (in lexicographic order) with both endpoints free.
    pub fn first_uncovered(&self, g: &DynGraph) -> Option<Edge> {
        g.edges().find(|&(u, v)| !self.is_matched(u) && !self.is_matched(v))
    }

    pub fn is_maximal_in(&self, g: &DynGraph) -> bool {
        self.first_uncovered(g).is_none()
    }

    /// Vertices whose matched status differs between `self` and `other`.
    pub fn vertex_set_diff(&self, other: &Matching) -> Vec<VertexId> {
        (0..self.n()).filter(|&v| self.is_matched(v) != other.is_matched(v)).collect()
    }
}

impl Matching {
    /// Whether the normalized edge is in the matching.
    pub fn contains_edge(&self, e: Edge) -> bool {
        let (u, v) = norm(e.0, e.1);
        self.contains(u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augment_single_edge() {
        let mut m = Matching::new(2);
        m.augment_along(&[0, 1]).unwrap();
        assert_eq!(m.edges(), vec![(0, 1)]);
    }

    #[test]
    fn augment_three_edge_path() {
        // a=0, b=1, c=2, d=3
        let mut m = Matching::from_edges(4, [(1, 2)]).unwrap();
        m.augment_along(&[0, 1, 2, 3]).unwrap();
        assert_eq!(m.edges(), vec![(0, 1), (2, 3)]);
        assert_eq!(m.size(), 2);
    }

    #[test]
    fn non_alternating_path_is_rejected() {
        // a=0, b=1, c=2, d=3; (b, d) is not matched.
        let mut m = Matching::from_edges(4, [(1, 2)]).unwrap();
        let before = m.clone();
        assert!(matches!(m.augment_along(&[0, 1, 3]), Err(CoreError::NotAlternating(_))));
        assert_eq!(m, before);
    }

    #[test]
    fn matched_start_is_rejected() {
        let mut m = Matching::from_edges(4, [(0, 1)]).unwrap();
        assert!(m.augment_along(&[0, 2]).is_err());
    }

    #[test]
    fn uncovered_edge_detection() {
        let g = DynGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let mut m = Matching::new(4);
        assert_eq!(m.first_uncovered(&g), Some((0, 1)));
        m.add(0, 1);
        assert_eq!(m.first_uncovered(&g), Some((2, 3)));
        m.add(3, 2);
        assert!(m.is_maximal_in(&g));
        m.validate_against(&g).unwrap();
    }
}
