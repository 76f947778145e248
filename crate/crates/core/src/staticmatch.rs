//! Static matchings that cover almost every near-maximum-degree vertex.
//!
//! `V_κ = { v : deg(v) ≥ (1 - κ) Δ }`. `match_most` returns a matching that
//! leaves at most `2 κ n` vertices of `V_κ` unmatched, using one colour class
//! of a proper edge colouring with at most `Δ + 1` colours.

use crate::graph::{norm, DynGraph, Edge, Matching, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StaticMatchError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

const NONE: usize = usize::MAX;

/// Proper edge colouring: colour classes are matchings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeColoring {
    pub edges: Vec<Edge>,
    pub colors: Vec<usize>,
    pub num_colors: usize,
    /// Colour-table entries and path edges examined while colouring.
    pub work: u64,
}

impl EdgeColoring {
    pub fn class(&self, c: usize) -> Vec<Edge> {
        self.edges.iter().zip(&self.colors).filter(|&(_, &k)| k == c).map(|(&e, _)| e).collect()
    }

    /// Checks that no two edges sharing an endpoint have the same colour.
    pub fn is_proper(&self, n: usize) -> bool {
        let mut seen: HashMap<(VertexId, usize), ()> = HashMap::with_capacity(2 * self.edges.len());
        for (&(u, v), &c) in self.edges.iter().zip(&self.colors) {
            if c >= self.num_colors || u >= n || v >= n {
                return false;
            }
            if seen.insert((u, c), ()).is_some() || seen.insert((v, c), ()).is_some() {
                return false;
            }
        }
        true
    }
}

/// Misra–Gries colouring state: `at[v * k + c]` is the neighbour joined to
/// `v` by the edge of colour `c`; `free[v * w ..]` is a bitset of the colours
/// missing at `v`.
struct Mg {
    k: usize,
    words: usize,
    at: Vec<usize>,
    free: Vec<u64>,
    color: HashMap<Edge, usize>,
    /// Fan membership, by stamp.
    mark: Vec<u64>,
    stamp: u64,
    work: u64,
}

impl Mg {
    fn new(n: usize, k: usize, m: usize) -> Self {
        let words = k.div_ceil(64).max(1);
        let mut free = vec![0u64; n * words];
        for v in 0..n {
            for c in 0..k {
                free[v * words + c / 64] |= 1 << (c % 64);
            }
        }
        Mg {
            k,
            words,
            at: vec![NONE; n * k],
            free,
            color: HashMap::with_capacity(m),
            mark: vec![0; n],
            stamp: 0,
            work: 0,
        }
    }

    #[inline]
    fn at(&self, v: VertexId, c: usize) -> usize {
        self.at[v * self.k + c]
    }

    /// Smallest colour with `mask(word)` set, scanning the bitsets word by word.
    fn first_bit(&mut self, mut mask: impl FnMut(usize) -> u64) -> Option<usize> {
        for i in 0..self.words {
            self.work += 1;
            let w = mask(i);
            if w != 0 {
                return Some(i * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    fn free(&mut self, v: VertexId) -> usize {
        let (base, f) = (v * self.words, std::mem::take(&mut self.free));
        let c = self.first_bit(|i| f[base + i]);
        self.free = f;
        c.expect("Δ + 1 colours leave one free")
    }

    fn common_free(&mut self, u: VertexId, v: VertexId) -> Option<usize> {
        let (bu, bv, f) = (u * self.words, v * self.words, std::mem::take(&mut self.free));
        let c = self.first_bit(|i| f[bu + i] & f[bv + i]);
        self.free = f;
        c
    }

    #[inline]
    fn is_free(&self, v: VertexId, c: usize) -> bool {
        self.at(v, c) == NONE
    }

    fn set(&mut self, u: VertexId, v: VertexId, c: usize) {
        let k = self.k;
        self.at[u * k + c] = v;
        self.at[v * k + c] = u;
        self.free[u * self.words + c / 64] &= !(1 << (c % 64));
        self.free[v * self.words + c / 64] &= !(1 << (c % 64));
        self.color.insert(norm(u, v), c);
    }

    fn unset(&mut self, u: VertexId, v: VertexId) -> Option<usize> {
        let c = self.color.remove(&norm(u, v))?;
        let k = self.k;
        self.at[u * k + c] = NONE;
        self.at[v * k + c] = NONE;
        self.free[u * self.words + c / 64] |= 1 << (c % 64);
        self.free[v * self.words + c / 64] |= 1 << (c % 64);
        Some(c)
    }

    fn get(&self, u: VertexId, v: VertexId) -> Option<usize> {
        self.color.get(&norm(u, v)).copied()
    }

    /// Next fan vertex: a neighbour `w` of `u` whose edge colour is free at
    /// `last`, with `w` not yet in the fan.
    fn fan_step(&mut self, u: VertexId, last: VertexId) -> Option<VertexId> {
        let (bu, bl) = (u * self.words, last * self.words);
        for i in 0..self.words {
            self.work += 1;
            let mut cand = !self.free[bu + i] & self.free[bl + i];
            while cand != 0 {
                let c = i * 64 + cand.trailing_zeros() as usize;
                cand &= cand - 1;
                if c >= self.k {
                    break;
                }
                self.work += 1;
                let w = self.at(u, c);
                if self.mark[w] != self.stamp {
                    return Some(w);
                }
            }
        }
        None
    }

    fn color_edge(&mut self, u: VertexId, v: VertexId) {
        if let Some(c) = self.common_free(u, v) {
            self.set(u, v, c);
            return;
        }
        // Maximal fan at u starting with v.
        self.stamp += 1;
        self.mark[v] = self.stamp;
        let mut fan = vec![v];
        while let Some(w) = self.fan_step(u, *fan.last().unwrap()) {
            self.mark[w] = self.stamp;
            fan.push(w);
        }
        self.work += fan.len() as u64;
        let c = self.free(u);
        let d = self.free(*fan.last().unwrap());
        if c != d {
            self.invert_path(u, c, d);
        }
        // First fan prefix ending at a vertex where d is free.
        let mut end = 0;
        for i in 0..fan.len() {
            if i > 0 {
                let ci = self.get(u, fan[i]).expect("fan edges are coloured");
                if !self.is_free(fan[i - 1], ci) {
                    break;
                }
            }
            if self.is_free(fan[i], d) {
                end = i;
                break;
            }
            end = i;
        }
        debug_assert!(self.is_free(fan[end], d) && self.is_free(u, d));
        let shifted: Vec<usize> =
            (1..=end).map(|i| self.unset(u, fan[i]).expect("fan edges are coloured")).collect();
        for (i, col) in shifted.into_iter().enumerate() {
            self.set(u, fan[i], col);
        }
        self.set(u, fan[end], d);
    }

    /// König colouring step for bipartite graphs: the `c/d` path from `v`
    /// cannot reach `u`, so flipping it frees `c` at both endpoints.
    fn color_edge_bipartite(&mut self, u: VertexId, v: VertexId) {
        if let Some(c) = self.common_free(u, v) {
            self.set(u, v, c);
            return;
        }
        let c = self.free(u);
        let d = self.free(v);
        self.invert_path(v, d, c);
        self.set(u, v, c);
    }

    /// Swaps colours `c` and `d` on the maximal path from `u` starting with `d`.
    fn invert_path(&mut self, u: VertexId, c: usize, d: usize) {
        let mut path = Vec::new();
        let (mut x, mut want) = (u, d);
        loop {
            let y = self.at(x, want);
            if y == NONE {
                break;
            }
            path.push((x, y, want));
            self.work += 1;
            x = y;
            want = if want == d { c } else { d };
        }
        for &(a, b, _) in &path {
            self.unset(a, b);
        }
        for (a, b, k) in path {
            self.set(a, b, if k == d { c } else { d });
        }
    }
}

/// Two-colouring of the vertices, if one exists.
fn bipartition(g: &DynGraph) -> Option<Vec<u8>> {
    let mut side = vec![2u8; g.n()];
    let mut stack = Vec::new();
    for s in 0..g.n() {
        if side[s] != 2 {
            continue;
        }
        side[s] = 0;
        stack.push(s);
        while let Some(x) = stack.pop() {
            for &y in g.neighbors(x) {
                if side[y] == 2 {
                    side[y] = 1 - side[x];
                    stack.push(y);
                } else if side[y] == side[x] {
                    return None;
                }
            }
        }
    }
    Some(side)
}

/// Sequential edge colouring: `Δ` colours on bipartite graphs (alternating
/// path flips), `Δ + 1` otherwise (Misra–Gries).
pub fn edge_color(g: &DynGraph) -> EdgeColoring {
    let bip = bipartition(g).is_some();
    let k = g.max_degree() + usize::from(!bip);
    let mut mg = Mg::new(g.n(), k, g.m());
    for (u, v) in g.edges() {
        if bip {
            mg.color_edge_bipartite(u, v);
        } else {
            mg.color_edge(u, v);
        }
    }
    let edges = g.edge_vec();
    let colors = edges.iter().map(|e| mg.color[e]).collect();
    let work = mg.work + (g.n() * mg.words) as u64 + g.m() as u64;
    EdgeColoring { edges, colors, num_colors: if g.m() == 0 { 0 } else { k }, work }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MatchMode {
    Deterministic,
    Randomized { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatchMostParams {
    pub delta: usize,
    pub kappa: f64,
    pub mode: MatchMode,
}

/// Vertices of degree at least `(1 - κ) Δ`.
pub fn v_kappa(g: &DynGraph, delta: usize, kappa: f64) -> Vec<VertexId> {
    let thr = (1.0 - kappa) * delta as f64 - 1e-9;
    (0..g.n()).filter(|&v| g.degree(v) as f64 >= thr && !g.is_removed(v)).collect()
}

/// Number of `V_κ` vertices left unmatched by `m`.
pub fn unmatched_in_v_kappa(g: &DynGraph, m: &Matching, delta: usize, kappa: f64) -> usize {
    v_kappa(g, delta, kappa).into_iter().filter(|&v| !m.is_matched(v)).count()
}

pub fn match_most(g: &DynGraph, p: &MatchMostParams) -> Result<Matching, StaticMatchError> {
    match_most_counted(g, p).map(|(m, _)| m)
}

/// `match_most` together with the colouring work it spent.
pub fn match_most_counted(g: &DynGraph, p: &MatchMostParams) -> Result<(Matching, u64), StaticMatchError> {
    if !(p.kappa > 0.0 && p.kappa < 1.0) {
        return Err(StaticMatchError::InvalidParams(format!("kappa = {} not in (0, 1)", p.kappa)));
    }
    if g.max_degree() > p.delta {
        return Err(StaticMatchError::InvalidParams(format!(
            "max degree {} exceeds Δ = {}",
            g.max_degree(),
            p.delta
        )));
    }
    let n = g.n();
    let vk = v_kappa(g, p.delta, p.kappa);
    let mut in_vk = vec![false; n];
    vk.iter().for_each(|&v| in_vk[v] = true);
    match p.mode {
        MatchMode::Deterministic => {
            let col = edge_color(g);
            let best = best_class(&col, (0..col.num_colors).collect(), &in_vk, n);
            Ok((to_matching(n, &col, best, n), col.work + col.edges.len() as u64))
        }
        MatchMode::Randomized { seed } => {
            if (p.delta as f64) < 4.0 / p.kappa {
                return Err(StaticMatchError::InvalidParams(format!(
                    "randomized mode needs Δ ≥ 4/κ = {:.1}, got {}",
                    4.0 / p.kappa,
                    p.delta
                )));
            }
            let nd = (n as f64 * p.kappa).ceil().max(1.0) as usize;
            let mut ext = DynGraph::new(n + nd);
            for (u, v) in g.edges() {
                ext.insert_edge(u, v).expect("copy of a simple graph");
            }
            // Round-robin over the dummies that still have room; one pass per
            // vertex visits each dummy at most once.
            let mut open: VecDeque<usize> = (n..n + nd).collect();
            let mut fill_work = 0u64;
            for &v in &vk {
                let mut need = p.delta - g.degree(v);
                let mut rounds = open.len();
                while need > 0 && rounds > 0 {
                    let dmy = open.pop_front().expect("rounds bound the queue");
                    rounds -= 1;
                    fill_work += 1;
                    ext.insert_edge(v, dmy).expect("fresh dummy edge");
                    need -= 1;
                    if ext.degree(dmy) < p.delta {
                        open.push_back(dmy);
                    }
                }
            }
            let col = edge_color(&ext);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = (20.0 * (n.max(2) as f64).ln()).ceil() as usize;
            let picks = (0..samples).map(|_| rng.gen_range(0..col.num_colors.max(1))).collect();
            let best = best_class(&col, picks, &in_vk, n);
            Ok((to_matching(n, &col, best, n), col.work + col.edges.len() as u64 + ext.m() as u64 + fill_work))
        }
    }
}

/// Colour among `cands` whose class matches the most `V_κ` vertices through
/// real edges (`u, v < n_real`); ties go to the smaller colour.
fn best_class(col: &EdgeColoring, mut cands: Vec<usize>, in_vk: &[bool], n_real: usize) -> usize {
    let mut score = vec![0usize; col.num_colors];
    for (&(u, v), &c) in col.edges.iter().zip(&col.colors) {
        if u < n_real && v < n_real {
            score[c] += usize::from(in_vk[u]) + usize::from(in_vk[v]);
        }
    }
    cands.sort_unstable();
    cands.into_iter().max_by_key(|&c| (score.get(c).copied().unwrap_or(0), std::cmp::Reverse(c))).unwrap_or(0)
}

fn to_matching(n: usize, col: &EdgeColoring, c: usize, n_real: usize) -> Matching {
    let mut m = Matching::new(n);
    for (&(u, v), &k) in col.edges.iter().zip(&col.colors) {
        if k == c && u < n_real && v < n_real {
            m.add(u, v);
        }
    }
    m
}
