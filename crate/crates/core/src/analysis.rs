//! Structural checks on degree-gap graphs: the contracted graph `G_M`, its
//! Eulerian supergraph `G_Eu`, exact conductance, random-walk hitting rates
//! and alternating-BFS layer sizes.

use crate::graph::{Matching, VertexId};
use crate::lpm::{DegreeGapGraph, Side};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("{0} vertices is too many for exhaustive enumeration (limit 20)")]
    TooLarge(usize),
    #[error("matching is not left-perfect: live left vertex {0} is free")]
    NotLeftPerfect(VertexId),
    #[error("not a matching of the graph: {0}")]
    InvalidMatching(String),
    #[error("vertex {0} is the sink or out of range")]
    BadVertex(usize),
    #[error("every cut has an empty side by volume")]
    Degenerate,
}

/// Directed multigraph with one node per matched pair plus the sink `t`,
/// which is always the last node.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ContractedGraph {
    /// `out[u][w]` is the multiplicity of `u -> w`.
    out: Vec<BTreeMap<usize, u64>>,
    /// Matched pair `(left, right)` behind each non-sink node.
    pairs: Vec<(VertexId, VertexId)>,
}

impl ContractedGraph {
    /// Empty graph on `k` non-sink nodes.
    pub fn with_nodes(k: usize) -> Self {
        ContractedGraph { out: vec![BTreeMap::new(); k + 1], pairs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.len() == 1
    }

    pub fn sink(&self) -> usize {
        self.out.len() - 1
    }

    pub fn pairs(&self) -> &[(VertexId, VertexId)] {
        &self.pairs
    }

    /// Adds `mult` parallel copies of `u -> w`; self-loops are ignored.
    pub fn add_edge(&mut self, u: usize, w: usize, mult: u64) {
        if u != w && mult > 0 {
            *self.out[u].entry(w).or_insert(0) += mult;
        }
    }

    pub fn multiplicity(&self, u: usize, w: usize) -> u64 {
        self.out[u].get(&w).copied().unwrap_or(0)
    }

    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.out[u].iter().map(|(&w, &c)| (w, c))
    }

    pub fn out_degree(&self, u: usize) -> u64 {
        self.out[u].values().sum()
    }

    pub fn in_degrees(&self) -> Vec<u64> {
        let mut d = vec![0; self.len()];
        for adj in &self.out {
            for (&w, &c) in adj {
                d[w] += c;
            }
        }
        d
    }

    pub fn num_edges(&self) -> u64 {
        self.out.iter().flat_map(|a| a.values()).sum()
    }

    pub fn is_eulerian(&self) -> bool {
        let ind = self.in_degrees();
        (0..self.len()).all(|u| self.out_degree(u) == ind[u])
    }

    /// Non-sink nodes whose out-degree or in-degree breaks `(x, gamma)`.
    pub fn gap_violations(&self, x: u64, gamma: f64) -> Vec<usize> {
        let ind = self.in_degrees();
        let cap = (1.0 - gamma) * x as f64 + 1e-9;
        (0..self.sink()).filter(|&u| self.out_degree(u) < x || ind[u] as f64 > cap).collect()
    }
}

/// Builds `G_M`: every matched pair becomes one node, every free vertex
/// becomes `t`, and each non-matching edge `(l, r)` becomes `c(l) -> c(r)`.
pub fn contract(g: &DegreeGapGraph, m: &Matching) -> Result<ContractedGraph, AnalysisError> {
    let n = g.n();
    if m.n() != n {
        return Err(AnalysisError::InvalidMatching(format!("{} vertices vs {}", m.n(), n)));
    }
    let mut node = vec![usize::MAX; n];
    let mut pairs = Vec::new();
    for l in g.left() {
        if let Some(r) = m.mate(l) {
            if !g.graph().has_edge(l, r) || g.side(r) != Side::Right {
                return Err(AnalysisError::InvalidMatching(format!("({l}, {r}) is not a left-right edge")));
            }
            node[l] = pairs.len();
            node[r] = pairs.len();
            pairs.push((l, r));
        }
    }
    let mut gm = ContractedGraph::with_nodes(pairs.len());
    let t = gm.sink();
    let c = |v: VertexId| if node[v] == usize::MAX { t } else { node[v] };
    for l in g.left() {
        for &r in g.graph().neighbors(l) {
            if m.mate(l) != Some(r) {
                gm.add_edge(c(l), c(r), 1);
            }
        }
    }
    gm.pairs = pairs;
    Ok(gm)
}

/// Balances every non-sink node with parallel edges to or from `t`.
/// Gap inputs only ever need `t -> u` edges.
pub fn eulerianize(gm: &ContractedGraph) -> ContractedGraph {
    let mut eu = gm.clone();
    let t = eu.sink();
    let ind = gm.in_degrees();
    for u in 0..t {
        let out = gm.out_degree(u);
        if out > ind[u] {
            eu.add_edge(t, u, out - ind[u]);
        } else if ind[u] > out {
            eu.add_edge(u, t, ind[u] - out);
        }
    }
    eu
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConductanceReport {
    pub phi: Ratio<u64>,
    /// Minimizing `S`, as node indices.
    pub cut: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConductanceRecord {
    pub numer: u64,
    pub denom: u64,
    pub cut: Vec<usize>,
}

impl ConductanceReport {
    pub fn record(&self) -> ConductanceRecord {
        ConductanceRecord { numer: *self.phi.numer(), denom: *self.phi.denom(), cut: self.cut.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.record()).expect("plain record")
    }
}

/// Exact `min_S |E(S, V∖S)| / min(vol S, vol V∖S)` over nonempty proper `S`,
/// with volumes taken as out-degrees. Cuts with a zero-volume side are skipped.
pub fn conductance_bruteforce(g: &ContractedGraph) -> Result<ConductanceReport, AnalysisError> {
    let n = g.len();
    if n > 20 {
        return Err(AnalysisError::TooLarge(n));
    }
    let deg: Vec<u64> = (0..n).map(|u| g.out_degree(u)).collect();
    let edges: Vec<(usize, usize, u64)> =
        (0..n).flat_map(|u| g.out_edges(u).map(move |(w, c)| (u, w, c))).collect();
    let total: u64 = deg.iter().sum();
    let mut best: Option<(Ratio<u64>, u32)> = None;
    for s in 1u32..(1u32 << n) - 1 {
        let vol: u64 = (0..n).filter(|&u| s >> u & 1 == 1).map(|u| deg[u]).sum();
        let denom = vol.min(total - vol);
        if denom == 0 {
            continue;
        }
        let cut: u64 = edges.iter().filter(|&&(u, w, _)| s >> u & 1 == 1 && s >> w & 1 == 0).map(|e| e.2).sum();
        let phi = Ratio::new(cut, denom);
        if best.as_ref().is_none_or(|(b, _)| phi < *b) {
            best = Some((phi, s));
        }
    }
    let (phi, s) = best.ok_or(AnalysisError::Degenerate)?;
    Ok(ConductanceReport { phi, cut: (0..n).filter(|&u| s >> u & 1 == 1).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HitStats {
    pub trials: u64,
    pub hits: u64,
    pub rate: f64,
    /// 95% Wilson score interval.
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `hits` out of `trials` at normal quantile `z`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte-Carlo rate at which a `k`-step walk from `v` reaches `t`. Each step
/// follows an out-edge chosen proportionally to multiplicity; a walk stuck at
/// a node without out-edges fails.
pub fn walk_hit_stats(gm: &ContractedGraph, v: usize, k: usize, trials: u64, seed: u64) -> Result<HitStats, AnalysisError> {
    let t = gm.sink();
    if v >= t {
        return Err(AnalysisError::BadVertex(v));
    }
    let tables: Vec<(Vec<usize>, Vec<u64>)> = (0..gm.len())
        .map(|u| {
            let mut acc = 0;
            gm.out_edges(u)
                .map(|(w, c)| {
                    acc += c;
                    (w, acc)
                })
                .unzip()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..trials {
        let mut u = v;
        for _ in 0..k {
            let (to, cum) = &tables[u];
            let Some(&tot) = cum.last() else { break };
            let x = rng.gen_range(0..tot);
            u = to[cum.partition_point(|&c| c <= x)];
            if u == t {
                hits += 1;
                break;
            }
        }
    }
    let (lower, upper) = wilson_interval(hits, trials, 1.96);
    Ok(HitStats { trials, hits, rate: hits as f64 / trials.max(1) as f64, lower, upper })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerAudit {
    /// `sizes[i]` is `|L_{i+1}|`, where `L_j` holds the live left vertices whose
    /// shortest alternating path to an unmarked free right vertex uses `j`
    /// non-matching edges.
    pub sizes: Vec<usize>,
    /// Live left vertices with no such path.
    pub unreachable: usize,
    pub num_left: usize,
    pub num_marked: usize,
    /// `ceil((4/γ) ln |L|)`.
    pub delta_prime: usize,
    /// `|L_{>δ'}|`, unreachable vertices included.
    pub far: usize,
    /// Indices `i` with `|L_{>i}| >= (2/γ)|R_mark|` but `|L_{i+1}| < (γ/2)|L_{>i}|`.
    pub growth_violations: Vec<usize>,
}

impl LayerAudit {
    /// `|L_{>i}|`.
    pub fn beyond(&self, i: usize) -> usize {
        self.unreachable + self.sizes.iter().skip(i).sum::<usize>()
    }

    pub fn far_bound(&self, gamma: f64) -> f64 {
        2.0 / gamma * self.num_marked as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain record")
    }
}

/// Layer index of every left vertex (`0` if no path exists), by backward
/// alternating BFS from the unmarked free right vertices.
pub fn alternating_layers(g: &DegreeGapGraph, m: &Matching, r_mark: &[VertexId]) -> Vec<usize> {
    let n = g.n();
    let mut marked = vec![false; n];
    for &r in r_mark {
        marked[r] = true;
    }
    let mut layer = vec![0usize; n];
    let mut queue = VecDeque::new();
    for r in g.right() {
        if m.is_matched(r) || marked[r] {
            continue;
        }
        for &u in g.graph().neighbors(r) {
            if layer[u] == 0 {
                layer[u] = 1;
                queue.push_back(u);
            }
        }
    }
    while let Some(l) = queue.pop_front() {
        let Some(r) = m.mate(l) else { continue };
        for &u in g.graph().neighbors(r) {
            if u != l && layer[u] == 0 {
                layer[u] = layer[l] + 1;
                queue.push_back(u);
            }
        }
    }
    layer
}

pub fn alternating_layer_audit(
    g: &DegreeGapGraph,
    m: &Matching,
    r_mark: &[VertexId],
) -> Result<LayerAudit, AnalysisError> {
    let live: Vec<VertexId> = g.left().filter(|&u| g.is_live_left(u)).collect();
    if let Some(&u) = live.iter().find(|&&u| !m.is_matched(u)) {
        return Err(AnalysisError::NotLeftPerfect(u));
    }
    let layer = alternating_layers(g, m, r_mark);
    let depth = live.iter().map(|&u| layer[u]).max().unwrap_or(0);
    let mut sizes = vec![0; depth];
    let mut unreachable = 0;
    for &u in &live {
        match layer[u] {
            0 => unreachable += 1,
            j => sizes[j - 1] += 1,
        }
    }
    let gamma = g.gamma();
    let nl = live.len().max(2) as f64;
    let delta_prime = (4.0 / gamma * nl.ln() - 1e-9).ceil() as usize;
    let mut audit = LayerAudit {
        sizes,
        unreachable,
        num_left: live.len(),
        num_marked: r_mark.len(),
        delta_prime,
        far: 0,
        growth_violations: Vec::new(),
    };
    audit.far = audit.beyond(delta_prime);
    let thresh = audit.far_bound(gamma);
    for i in 0..depth.max(1) {
        let beyond = audit.beyond(i);
        let next = audit.sizes.get(i).copied().unwrap_or(0);
        if beyond > 0 && beyond as f64 >= thresh && (next as f64) < gamma / 2.0 * beyond as f64 - 1e-9 {
            audit.growth_violations.push(i);
        }
    }
    Ok(audit)
}

/// Shortest alternating path from the live left vertex `u` to any unmarked
/// free right vertex, starting with a non-matching edge; `[u, r1, l1, ..., r]`.
pub fn shortest_alternating_path(
    g: &DegreeGapGraph,
    m: &Matching,
    u: VertexId,
    r_mark: &[VertexId],
) -> Option<Vec<VertexId>> {
    let n = g.n();
    let mut marked = vec![false; n];
    for &r in r_mark {
        marked[r] = true;
    }
    let mut parent = vec![usize::MAX; n];
    parent[u] = u;
    let mut queue = VecDeque::from([u]);
    while let Some(l) = queue.pop_front() {
        for &r in g.graph().neighbors(l) {
            if m.mate(l) == Some(r) || parent[r] != usize::MAX {
                continue;
            }
            parent[r] = l;
            match m.mate(r) {
                None if !marked[r] => {
                    let mut path = vec![r];
                    let mut x = r;
                    while x != u {
                        x = parent[x];
                        path.push(x);
                    }
                    path.reverse();
                    return Some(path);
                }
                None => {}
                Some(l2) if parent[l2] == usize::MAX => {
                    parent[l2] = r;
                    queue.push_back(l2);
                }
                Some(_) => {}
            }
        }
    }
    None
}
