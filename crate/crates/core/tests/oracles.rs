//! Frozen values and independent brute-force oracles.

mod common;

use std::collections::VecDeque;
use std::sync::Arc;

use ergoflow_core::approx::{diagonal_approximation, l1_chain_distance, DistanceVerdict};
use ergoflow_core::flow::{accumulate_flows, connected_components, cut_flow_series, pairs, FlowAccumulator, InfiniteFlowGraph};
use ergoflow_core::models::*;
use ergoflow_core::simulate::run_trajectory;
use ergoflow_core::{ErgodicityPattern, FlowMode, IndexSet, PathStreams, Schedule, StochasticMatrix};
use rand::Rng;

use common::{random_matrix, rng};

fn brute_cut(w: &StochasticMatrix, s: &[bool]) -> f64 {
    let m = w.dim();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if s[i] && !s[j] {
                total += w.get(i, j);
                total += w.get(j, i);
            }
        }
    }
    total
}

#[test]
fn cut_flow_matches_exhaustive_enumeration() {
    let mut r = rng(11);
    for case in 0..100 {
        let m = 2 + case % 5;
        let w = random_matrix(m, &mut r);
        for mask in 1..(1u64 << m) - 1 {
            let s = IndexSet::from_mask(m, mask).unwrap();
            let ind = s.indicator();
            assert!((w.cut_flow(&s).unwrap() - brute_cut(&w, &ind)).abs() < 1e-12);
            let c = w.cut_flow(&s.complement().unwrap()).unwrap();
            assert!((c - w.cut_flow(&s).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn cut_flow_series_matches_pair_sums() {
    let mut r = rng(12);
    for case in 0..50 {
        let m = 2 + case % 5;
        let sums: Vec<f64> = pairs(m).map(|_| r.random::<f64>() * 10.0).collect();
        let acc = FlowAccumulator::from_pair_sums(m, sums.clone()).unwrap();
        for mask in 1..(1u64 << m) - 1 {
            let s = IndexSet::from_mask(m, mask).unwrap();
            let ind = s.indicator();
            let brute: f64 = pairs(m)
                .zip(&sums)
                .filter(|((i, j), _)| ind[*i] != ind[*j])
                .map(|(_, v)| v)
                .sum();
            assert!((cut_flow_series(&acc, &s).unwrap() - brute).abs() < 1e-12);
        }
    }
}

fn bfs_labels(m: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); m];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label = vec![usize::MAX; m];
    let mut next = 0;
    for start in 0..m {
        if label[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        label[start] = next;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

#[test]
fn components_match_bfs() {
    let mut r = rng(13);
    for _ in 0..100 {
        let m = r.random_range(1..=8);
        let p = r.random::<f64>() * 0.5;
        let edges: Vec<(usize, usize)> = pairs(m).filter(|_| r.random_bool(p)).collect();
        let g = InfiniteFlowGraph::from_edges(m, &edges).unwrap();
        let expected = ErgodicityPattern::from_labels(&bfs_labels(m, &edges));
        assert_eq!(connected_components(&g), expected);
    }
}

#[test]
fn failure_compose_matches_literal_formula() {
    let mut r = rng(14);
    for case in 0..100 {
        let m = 1 + case % 6;
        let w = random_matrix(m, &mut r);
        let rows: Vec<Vec<u8>> = (0..m)
            .map(|i| (0..m).map(|j| u8::from(i != j && r.random_bool(0.4))).collect())
            .collect();
        let f = FailureMatrix::from_rows(&rows).unwrap();
        let u = link_failure_compose(&w, &f).unwrap();
        for i in 0..m {
            let mut diag = w.get(i, i);
            for j in 0..m {
                if j != i {
                    let fij = f64::from(rows[i][j]);
                    assert_eq!(u.get(i, j), w.get(i, j) * (1.0 - fij));
                    diag += w.get(i, j) * fij;
                }
            }
            assert!((u.get(i, i) - diag).abs() < 1e-15);
        }
    }
}

#[test]
fn diagonal_approximation_l1_bound() {
    let mut r = rng(15);
    for case in 0..100 {
        let m = 1 + case % 6;
        let w = random_matrix(m, &mut r);
        let labels: Vec<usize> = (0..m).map(|_| r.random_range(0..3)).collect();
        let pattern = ErgodicityPattern::from_labels(&labels);
        let d = diagonal_approximation(&w, &pattern).unwrap();
        let bound: f64 = pattern
            .blocks()
            .iter()
            .filter(|b| b.len() < m)
            .map(|b| w.cut_flow(&IndexSet::new(m, b.iter().copied()).unwrap()).unwrap())
            .sum();
        assert!(w.l1_distance(&d).unwrap() <= 2.0 * bound + 1e-12);
        for b in pattern.blocks() {
            for &i in b {
                let s: f64 = b.iter().map(|&j| d.get(i, j)).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn fixed_matrix_values() {
    let w = StochasticMatrix::validate(&[vec![0.6, 0.2, 0.2], vec![0.1, 0.8, 0.1], vec![0.0, 0.3, 0.7]], 1e-12).unwrap();
    assert!((w.cut_flow(&IndexSet::from_one_based(3, &[1]).unwrap()).unwrap() - 0.5).abs() < 1e-15);
    assert!((w.pair_flow(1, 2).unwrap() - 0.4).abs() < 1e-15);
    let p = ErgodicityPattern::from_one_based(3, &[vec![1, 2], vec![3]]).unwrap();
    assert!((w.l1_distance(&diagonal_approximation(&w, &p).unwrap()).unwrap() - 1.2).abs() < 1e-15);
}

/// The gap of the 2x2 harmonic chain from `x(1) = (1, 0)` after `K` steps is
/// `prod_{k=1..K} k / (k+2) = 2 / ((K+1)(K+2))`.
#[test]
fn harmonic_gap_oracle() {
    for k in [1u64, 10, 100, 1000] {
        let exact: f64 = (1..=k).map(|s| s as f64 / (s + 2) as f64).product();
        let closed = 2.0 / ((k + 1) as f64 * (k + 2) as f64);
        assert!((exact - closed).abs() <= 1e-12 * closed);
        let r = run_trajectory(&HarmonicPair, &[1.0, 0.0], 1, k + 1, 0).unwrap();
        let gap = (r.x_final[0] - r.x_final[1]).abs();
        assert!((gap - closed).abs() <= 1e-9 * closed, "K={k}: {gap} vs {closed}");
    }
    assert!((2.0f64 / (101.0 * 102.0) - 1.941_370_607_649_971_e-4).abs() < 1e-15);
}

#[test]
fn harmonic_series_against_identity() {
    let h: SharedModel = Arc::new(HarmonicPair);
    let id = DeterministicSequence::identity(2);
    let r = l1_chain_distance(h.as_ref(), &id, 1 << 14, FlowMode::Expected, 0.1).unwrap();
    assert_eq!(r.verdict, DistanceVerdict::Diverging);
    // sum_k 1/(k+2) over a dyadic window tends to ln 2 per entry.
    for w in &r.window_sums[4..] {
        assert!((w - 4.0 * std::f64::consts::LN_2).abs() < 0.1);
    }
    let basel = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
    assert!(r.max_entry_l2() <= basel);
    let tail: f64 = (2u64 + (1 << 14)..1 << 24).map(|n| 1.0 / (n as f64 * n as f64)).sum();
    assert!((r.max_entry_l2() + tail - basel).abs() < 1e-7);
}

#[test]
fn harmonic_flow_partial_sum() {
    let acc = accumulate_flows(&HarmonicPair, 3, FlowMode::Expected).unwrap();
    assert!((acc.pair_sum(0, 1) - 13.0 / 6.0).abs() < 1e-15);
}

/// Enumerates every failure pattern of a fixed base matrix.
fn failure_moments_brute(w: &StochasticMatrix, p: f64) -> (Vec<f64>, Vec<f64>) {
    let m = w.dim();
    let slots: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let mut mean = vec![0.0; m * m];
    let mut second = vec![0.0; m * m * m];
    for mask in 0u64..1 << slots.len() {
        let mut rows = vec![vec![0u8; m]; m];
        let mut prob = 1.0;
        for (n, &(i, j)) in slots.iter().enumerate() {
            if mask >> n & 1 == 1 {
                rows[i][j] = 1;
                prob *= p;
            } else {
                prob *= 1.0 - p;
            }
        }
        let u = link_failure_compose(w, &FailureMatrix::from_rows(&rows).unwrap()).unwrap();
        for l in 0..m {
            for a in 0..m {
                mean[l * m + a] += prob * u.get(l, a);
                for b in 0..m {
                    second[(l * m + a) * m + b] += prob * u.get(l, a) * u.get(l, b);
                }
            }
        }
    }
    (mean, second)
}

#[test]
fn failure_moments_match_enumeration() {
    let mut r = rng(16);
    for case in 0..6 {
        let m = 2 + case % 2;
        let w = random_matrix(m, &mut r);
        let p = [0.0, 0.3, 0.5, 0.9, 1.0, 0.15][case];
        let base: SharedModel = Arc::new(DeterministicSequence::new(vec![w.clone()]).unwrap());
        let model = LinkFailure::new(base, FailureSchedule::Failure(Schedule::Constant { c: p })).unwrap();
        let (mean, second) = failure_moments_brute(&w, p);
        let e = model.expected(0).unwrap();
        let rm = model.row_moments(0).unwrap();
        for l in 0..m {
            for a in 0..m {
                assert!((e.get(l, a) - mean[l * m + a]).abs() < 1e-12);
                for b in 0..m {
                    assert!(
                        (rm.get(l, a, b) - second[(l * m + a) * m + b]).abs() < 1e-12,
                        "m={m} p={p} l={l} a={a} b={b}"
                    );
                }
            }
        }
    }
}

#[test]
fn failure_moments_over_gossip_base() {
    // Mix of enumerated base outcomes and enumerated failures.
    let base = Gossip::complete(3).unwrap();
    let p = 0.35;
    let model = LinkFailure::new(Arc::new(base.clone()), FailureSchedule::Survival(Schedule::Constant { c: 1.0 - p })).unwrap();
    let rm = model.row_moments(0).unwrap();
    let mut second = vec![0.0; 27];
    for (i, j) in pairs(3) {
        let (_, s) = failure_moments_brute(&gossip_matrix(3, i, j), p);
        for (acc, v) in second.iter_mut().zip(s) {
            *acc += v / 3.0;
        }
    }
    for l in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                assert!((rm.get(l, a, b) - second[(l * 3 + a) * 3 + b]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn diagonal_model_moments_match_outcomes() {
    let g: SharedModel = Arc::new(Gossip::complete(4).unwrap());
    let pattern = ErgodicityPattern::from_one_based(4, &[vec![1, 3], vec![2, 4]]).unwrap();
    let d = DiagonalApproximation::new(g, pattern.clone()).unwrap();
    let rm = d.row_moments(0).unwrap();
    let mut brute = RowMoments::zeros(4);
    for (i, j) in pairs(4) {
        brute.add_outcome(1.0 / 6.0, &diagonal_approximation(&gossip_matrix(4, i, j), &pattern).unwrap());
    }
    for l in 0..4 {
        for a in 0..4 {
            for b in 0..4 {
                assert!((rm.get(l, a, b) - brute.get(l, a, b)).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn samples_are_reproducible() {
    let models: Vec<Box<dyn ChainModel>> = vec![
        Box::new(Gossip::complete(4).unwrap()),
        Box::new(BroadcastGossip::ring(5, Schedule::Power { c: 1.0, a: 1.0 }).unwrap()),
        Box::new(Permutation::new(4).unwrap()),
        Box::new(SimplexRow),
        Box::new(
            LinkFailure::new(Arc::new(Gossip::complete(3).unwrap()), FailureSchedule::Failure(Schedule::Constant { c: 0.5 })).unwrap(),
        ),
    ];
    for model in &models {
        let a = PathStreams::new(99);
        let b = PathStreams::new(99);
        for k in [0u64, 5, 17, 1000] {
            assert_eq!(model.sample(k, &mut a.at(k)), model.sample(k, &mut b.at(k)));
        }
    }
}
