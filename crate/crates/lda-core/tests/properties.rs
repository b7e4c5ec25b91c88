//! Property tests of the graph, pairing and run invariants.

use std::collections::VecDeque;

use proptest::prelude::*;

use lda_core::algorithms::{make_algorithm, AlgorithmParams};
use lda_core::graph_core::{
    count_short_cycles, girth, parse_graph, serialize_edge_list, ColouredGraph, Girth, GraphFormat, VertexId,
};
use lda_core::lda::{constant_chunky, run_algorithm, select_vertices, RunOptions, Selection};
use lda_core::ode::neutral_id;
use lda_core::pairing::{random_pairing, Pairing, Rng};

fn edge_lists() -> impl Strategy<Value = (usize, Vec<(VertexId, VertexId)>)> {
    (1usize..12).prop_flat_map(|n| {
        let v = 0..n as VertexId;
        (Just(n), prop::collection::vec((v.clone(), v), 0..20))
    })
}

/// Shortest cycle by deleting each edge in turn and measuring the distance
/// between its ends.
fn girth_by_edge_removal(n: usize, edges: &[(VertexId, VertexId)]) -> Option<u32> {
    let mut best: Option<u32> = None;
    for (skip, &(s, t)) in edges.iter().enumerate() {
        if s == t {
            return Some(1);
        }
        let mut dist = vec![u32::MAX; n];
        dist[s as usize] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for (i, &(a, b)) in edges.iter().enumerate() {
                if i == skip || a == b {
                    continue;
                }
                let w = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        if dist[t as usize] != u32::MAX {
            let len = dist[t as usize] + 1;
            best = Some(best.map_or(len, |b| b.min(len)));
        }
    }
    best
}

proptest! {
    #[test]
    fn edge_list_round_trip((n, edges) in edge_lists()) {
        let g = ColouredGraph::from_edges(n, &edges);
        let text = serialize_edge_list(&g);
        let back = parse_graph(&text, GraphFormat::EdgeList).unwrap();
        prop_assert_eq!(back.n(), n);
        prop_assert_eq!(serialize_edge_list(&back), text);
        let ends: Vec<_> = back.edges().map(|(_, u, v)| (u, v)).collect();
        prop_assert_eq!(ends, edges);
    }

    #[test]
    fn girth_matches_edge_removal((n, edges) in edge_lists()) {
        let g = ColouredGraph::from_edges(n, &edges);
        let want = girth_by_edge_removal(n, &edges);
        match (girth(&g), want) {
            (Girth::Infinite, None) => prop_assert_eq!(count_short_cycles(&g, n as u32), 0),
            (Girth::Finite(k), Some(w)) => {
                prop_assert_eq!(k, w);
                prop_assert!(count_short_cycles(&g, k) >= 1);
                prop_assert_eq!(count_short_cycles(&g, k - 1), 0);
            }
            (got, want) => prop_assert!(false, "girth {:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn full_pairings_are_regular_involutions(n in 1usize..40, r in 1u32..5, seed in any::<u64>()) {
        prop_assume!((n * r as usize).is_multiple_of(2));
        let p = random_pairing(&vec![r; n], &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(p.unexposed(), 0);
        for q in 0..p.points() as u32 {
            let m = p.mate(q).unwrap();
            prop_assert_ne!(m, q);
            prop_assert_eq!(p.mate(m), Some(q));
        }
        prop_assert!(p.to_pseudograph().is_regular(r));
    }

    #[test]
    fn split_streams_are_reproducible(seed in any::<u64>(), stream in 0u64..1000) {
        use rand::Rng as _;
        let a: Vec<u64> = (0..4).map({ let mut r = Rng::split(seed, stream); move |_| r.gen() }).collect();
        let b: Vec<u64> = (0..4).map({ let mut r = Rng::split(seed, stream); move |_| r.gen() }).collect();
        let c: Vec<u64> = (0..4).map({ let mut r = Rng::split(seed, stream + 1); move |_| r.gen() }).collect();
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(&a, &c);
    }

    /// Vertices only die, and the set under construction only grows.
    #[test]
    fn runs_are_monotone(seed in any::<u64>(), n in 10usize..200) {
        let n = n * 2;
        let spec = make_algorithm("min_degree_is", &AlgorithmParams::default()).unwrap();
        let mut host = spec.survival_pairing(Pairing::new(&vec![3; n]).unwrap());
        let opts = RunOptions { audit: true, ..RunOptions::default() };
        let rec = run_algorithm(&spec, &mut host, &Selection::Prioritised, &opts, &mut Rng::new(seed)).unwrap();
        for w in rec.trajectory.rows.windows(2) {
            let alive = |row: &lda_core::lda::TrajectoryRow| row.counts.iter().sum::<u32>();
            prop_assert!(alive(&w[1]) < alive(&w[0]));
            prop_assert!(w[1].outputs[0] >= w[0].outputs[0]);
        }
        prop_assert_eq!(host.alive_count(), 0);
    }
}

/// Every perfect matching of six points should appear equally often.
#[test]
fn pairings_are_uniform() {
    let mut rng = Rng::new(17);
    let samples = 30_000;
    let mut counts = std::collections::HashMap::new();
    for _ in 0..samples {
        let p = random_pairing(&[1; 6], &mut rng).unwrap();
        *counts.entry(p.pairs()).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 15);
    let expect = samples as f64 / 15.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 99.9% quantile of chi-square with 14 degrees of freedom.
    assert!(chi2 < 36.12, "chi-square {chi2}");
}

#[test]
fn chunky_selection_is_binomial() {
    let spec = make_algorithm("min_degree_is", &AlgorithmParams::default()).unwrap();
    let n = 10_000;
    let host = spec.survival_pairing(Pairing::new(&vec![3; n]).unwrap());
    let mut probs = vec![0.0; spec.type_count()];
    probs[neutral_id(&spec, 3)] = 0.5;
    let sel = constant_chunky(probs);
    let sigma = (n as f64 * 0.25).sqrt();
    let mut rng = Rng::new(5);
    for step in 1..=50 {
        let s = select_vertices(&spec, &host, &sel, step, &mut rng).unwrap();
        assert!((s.len() as f64 - 5000.0).abs() <= 3.0 * sigma + 1.0, "step {step}: {}", s.len());
    }
    let none = constant_chunky(vec![0.0; spec.type_count()]);
    assert!(select_vertices(&spec, &host, &none, 1, &mut rng).unwrap().is_empty());
}
