//! Property tests for the invariants every module promises.

use dynamatch::analysis::{contract, wilson_interval};
use dynamatch::edcs::{edcs_init, edcs_on_update};
use dynamatch::engine::{Backend, Engine, EngineParams};
use dynamatch::estree::{es_build, es_delete, ResidualGraph};
use dynamatch::graph::{parse_stream, write_stream, DynGraph, Matching, Stream, UpdateEvent};
use dynamatch::harness::oracle_verify;
use dynamatch::lpm::{random_gap_instance, Lpm, LpmConfig};
use dynamatch::staticmatch::{match_most, unmatched_in_v_kappa, MatchMode, MatchMostParams};
use proptest::prelude::*;

/// Turns `(u, v)` pairs into a valid stream by toggling each edge.
fn toggles(n: usize, pairs: &[(usize, usize)]) -> Vec<UpdateEvent> {
    let mut g = DynGraph::new(n);
    let mut out = Vec::new();
    for &(a, b) in pairs {
        let (u, v) = (a % n, b % n);
        if u == v {
            continue;
        }
        let e = if g.has_edge(u, v) { UpdateEvent::delete(u, v) } else { UpdateEvent::insert(u, v) };
        g.apply_update(&e).unwrap();
        out.push(e);
    }
    out
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..64, 0usize..64), 0..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_stays_consistent(n in 2usize..30, ps in pairs(300)) {
        let mut g = DynGraph::new(n);
        for e in toggles(n, &ps) {
            g.apply_update(&e).unwrap();
            prop_assert!(g.neighbors(e.u).windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert_eq!(g.check_consistency(), Ok(()));
        prop_assert_eq!(g.degree_sum(), 2 * g.m());
    }

    #[test]
    fn stream_text_round_trips(n in 2usize..30, ps in pairs(100)) {
        let s = Stream { n, events: toggles(n, &ps) };
        prop_assert_eq!(parse_stream(&write_stream(&s)).unwrap(), s);
    }

    #[test]
    fn edcs_valid_after_every_update(n in 3usize..20, b in 2usize..8, ps in pairs(200)) {
        let mut g = DynGraph::new(n);
        let mut s = edcs_init(&g, b.min(n), 0.25).unwrap();
        for e in toggles(n, &ps) {
            g.apply_update(&e).unwrap();
            edcs_on_update(&mut s, &g, &e);
            let rep = s.validate(&g);
            prop_assert!(rep.is_clean(), "{:?}", rep);
        }
    }

    #[test]
    fn es_tree_matches_dijkstra_under_deletions(
        n in 2usize..25,
        edges in prop::collection::vec((0usize..25, 0usize..26, 1u64..6), 0..120),
        order in prop::collection::vec(any::<prop::sample::Index>(), 0..60),
    ) {
        let mut g = ResidualGraph::new(n);
        for (u, v, w) in edges {
            let (u, v) = (u % n, v % (n + 1));
            let w = if v == n { w } else { 1 };
            if u != v && !g.has_edge(u, v) {
                g.add_edge(u, v, w).unwrap();
            }
        }
        let mut tr = es_build(g);
        for idx in order {
            let all: Vec<(usize, usize)> =
                (0..n).flat_map(|u| tr.graph().out_edges(u).iter().map(move |&(v, _)| (u, v))).collect();
            if all.is_empty() {
                break;
            }
            let (u, v) = all[idx.index(all.len())];
            es_delete(&mut tr, u, v).unwrap();
            prop_assert_eq!(tr.check_exact(), Ok(()));
        }
    }

    #[test]
    fn lpm_keeps_live_left_matched(
        nl in 4usize..40,
        seed in 0u64..1000,
        randomized in any::<bool>(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 0..80),
    ) {
        let gg = random_gap_instance(nl, 6, 0.25, seed).unwrap();
        let n = gg.n();
        let cfg = if randomized { LpmConfig::randomized(seed) } else { LpmConfig::deterministic() };
        let mut s = Lpm::init(cfg, gg, &Matching::new(n)).unwrap();
        for u in s.unmatched_live_left() {
            s.augment(u).unwrap();
        }
        for p in picks {
            let live: Vec<usize> = (0..nl).filter(|&u| s.is_live(u)).collect();
            if live.is_empty() {
                break;
            }
            let u = live[p.index(live.len())];
            let nb = s.gap_graph().graph().neighbors(u).to_vec();
            let v = nb[p.index(nb.len())];
            if let Some(l) = s.delete(u, v).unwrap().freed_left {
                s.augment(l).unwrap();
            }
            prop_assert!(s.unmatched_live_left().is_empty());
            prop_assert_eq!(s.gap_graph().check_gap(), Ok(()));
        }
        prop_assert_eq!(s.check_all(), Ok(()));
    }

    #[test]
    fn match_most_is_a_matching_within_bound(
        n in 10usize..60,
        d in 5usize..12,
        seed in 0u64..1000,
        randomized in any::<bool>(),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = n & !1;
        let mut g = DynGraph::new(n);
        let mut perm: Vec<usize> = (0..n).collect();
        for _ in 0..d {
            perm.shuffle(&mut rng);
            for c in perm.chunks(2) {
                if !g.has_edge(c[0], c[1]) {
                    g.insert_edge(c[0], c[1]).unwrap();
                }
            }
        }
        let delta = g.max_degree();
        prop_assume!(delta >= 5);
        // κ chosen so that Δ ≥ 4/κ and κΔ ≥ 1.
        let kappa = (4.0 / delta as f64).clamp(0.05, 0.9);
        let mode = if randomized { MatchMode::Randomized { seed } } else { MatchMode::Deterministic };
        let m = match_most(&g, &MatchMostParams { delta, kappa, mode }).unwrap();
        prop_assert_eq!(m.validate_against(&g), Ok(()));
        prop_assert!(unmatched_in_v_kappa(&g, &m, delta, kappa) as f64 <= 2.0 * kappa * n as f64);
    }

    #[test]
    fn wilson_interval_brackets_the_rate(trials in 1u64..5000, frac in 0.0f64..=1.0) {
        let hits = (frac * trials as f64).floor() as u64;
        let (lo, hi) = wilson_interval(hits, trials, 1.96);
        let p = hits as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn contraction_keeps_non_matching_edges(nl in 2usize..30, seed in 0u64..1000) {
        let gg = random_gap_instance(nl, 4, 0.25, seed).unwrap();
        let n = gg.n();
        let mut s = Lpm::init(LpmConfig::deterministic(), gg.clone(), &Matching::new(n)).unwrap();
        for u in s.unmatched_live_left() {
            s.augment(u).unwrap();
        }
        let gm = contract(&gg, s.matching()).unwrap();
        prop_assert_eq!(gm.num_edges() as usize, gg.graph().m() - s.matching().size());
        prop_assert_eq!(gm.len(), s.matching().size() + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_output_is_maximal_after_every_update(
        n in 8usize..40,
        b in 3usize..8,
        randomized in any::<bool>(),
        start in prop::collection::vec((0usize..64, 0usize..64), 0..200),
        ps in pairs(400),
    ) {
        let backend = if randomized { Backend::Randomized } else { Backend::Deterministic };
        let params = EngineParams::new(b, 0.002, backend);
        let mut g0 = DynGraph::new(n);
        for e in toggles(n, &start) {
            g0.apply_update(&e).unwrap();
        }
        let mut eng = Engine::from_graph(g0.clone(), params).unwrap();
        let mut g = g0;
        for e in toggles(n, &ps) {
            // Re-target the toggle at the evolving graph.
            let e = if g.has_edge(e.u, e.v) { UpdateEvent::delete(e.u, e.v) } else { UpdateEvent::insert(e.u, e.v) };
            g.apply_update(&e).unwrap();
            eng.handle_update(&e).unwrap();
            let m = eng.current_matching();
            prop_assert_eq!(m.validate_against(&g), Ok(()));
            prop_assert_eq!(oracle_verify(&g, &m), Ok(()));
            prop_assert_eq!(eng.audit(), Ok(()));
            prop_assert!(eng.metrics().max_recourse <= 4);
        }
    }
}
