//! Monte Carlo checks of sampler distributions against closed forms.

mod common;

use std::collections::HashMap;
use std::sync::Arc;

use ergoflow_core::models::*;
use ergoflow_core::properties::{find_common_steady_state, weak_feedback_coefficient, Coefficient, Estimator};
use ergoflow_core::{ChainModel, PathStreams, Schedule, StochasticMatrix};

const N: u64 = 100_000;

/// Entrywise mean and standard error of `n` draws at a fixed step.
fn sample_moments(model: &dyn ChainModel, step: u64, n: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let m = model.dim();
    let mut sum = vec![0.0; m * m];
    let mut sq = vec![0.0; m * m];
    for s in 0..n {
        let w = model.sample(step, &mut PathStreams::new(seed).at(s));
        for (idx, v) in w.as_flat().iter().enumerate() {
            sum[idx] += v;
            sq[idx] += v * v;
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let se = sq
        .iter()
        .zip(&mean)
        .map(|(q, mu)| ((q / nf - mu * mu).max(0.0) / nf).sqrt())
        .collect();
    (mean, se)
}

fn assert_within_3_sigma(model: &dyn ChainModel, step: u64, seed: u64) {
    let (mean, se) = sample_moments(model, step, N, seed);
    let e = model.expected(step).unwrap();
    for (idx, (mu, s)) in mean.iter().zip(&se).enumerate() {
        let target = e.as_flat()[idx];
        assert!((mu - target).abs() <= 3.0 * s + 1e-12, "{:?} entry {idx}: {mu} vs {target} (se {s})", model.kind());
    }
}

#[test]
fn gossip_expectation_matches_samples() {
    let links = vec![
        Link { i: 0, j: 1, weight: Schedule::Constant { c: 3.0 } },
        Link { i: 1, j: 2, weight: Schedule::Constant { c: 1.0 } },
        Link { i: 2, j: 3, weight: Schedule::Constant { c: 2.0 } },
        Link { i: 0, j: 3, weight: Schedule::Constant { c: 1.0 } },
    ];
    assert_within_3_sigma(&Gossip::new(4, links).unwrap(), 0, 1);
}

#[test]
fn broadcast_expectation_matches_samples() {
    assert_within_3_sigma(&BroadcastGossip::ring(5, Schedule::Constant { c: 0.4 }).unwrap(), 3, 2);
}

#[test]
fn failure_expectation_matches_samples() {
    let model =
        LinkFailure::new(Arc::new(Gossip::complete(4).unwrap()), FailureSchedule::Failure(Schedule::Constant { c: 0.3 })).unwrap();
    assert_within_3_sigma(&model, 0, 3);
}

#[test]
fn failure_sampler_rate() {
    let m = 4;
    let mut failed = 0usize;
    let streams = PathStreams::new(4);
    for s in 0..N {
        let f = uniform_failure_sample(0.5, m, &mut streams.at(s));
        for i in 0..m {
            for j in 0..m {
                if i != j && f.is_failed(i, j) {
                    failed += 1;
                }
            }
        }
    }
    let rate = failed as f64 / (N as f64 * (m * (m - 1)) as f64);
    assert!((rate - 0.5).abs() <= 0.005, "{rate}");
}

#[test]
fn permutation_sampler_is_uniform() {
    let streams = PathStreams::new(5);
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for s in 0..60_000 {
        let w = permutation_sample(3, &mut streams.at(s));
        let image: Vec<usize> = (0..3).map(|i| (0..3).position(|j| w.get(i, j) == 1.0).unwrap()).collect();
        *counts.entry(image).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    for (perm, c) in counts {
        assert!((c as i64 - 10_000).abs() <= 400, "{perm:?}: {c}");
    }
}

#[test]
fn simplex_row_mean() {
    let (mean, _) = sample_moments(&SimplexRow, 0, N, 6);
    for i in 0..3 {
        for j in 0..3 {
            let v = mean[i * 3 + j];
            if i == 1 {
                assert!((v - 1.0 / 3.0).abs() <= 0.005, "{v}");
            } else {
                assert_eq!(v, f64::from(u8::from(i == j)));
            }
        }
    }
}

#[test]
fn feedback_standard_error_shrinks() {
    let est = |samples| {
        weak_feedback_coefficient(&SimplexRow, 0..4, Estimator::MonteCarlo { samples, seed: 7 })
            .unwrap()
            .max_standard_error
            .unwrap()
    };
    let ratio = est(4000) / est(8000);
    assert!((ratio - 2f64.sqrt()).abs() < 0.15, "{ratio}");
}

#[test]
fn feedback_closed_form_agrees_with_monte_carlo() {
    let model = BroadcastGossip::ring(4, Schedule::Constant { c: 0.3 }).unwrap();
    let exact = weak_feedback_coefficient(&model, 0..2, Estimator::ClosedForm).unwrap();
    let mc = weak_feedback_coefficient(&model, 0..2, Estimator::MonteCarlo { samples: 20_000, seed: 8 }).unwrap();
    let se = mc.max_standard_error.unwrap();
    assert!((exact.gamma.value() - mc.gamma.value()).abs() <= 4.0 * se, "{:?} vs {:?}", exact.gamma, mc.gamma);
}

#[test]
fn gossip_feedback_lower_bound() {
    let m = 5;
    let g = Gossip::complete(m).unwrap();
    let p_min = g.activation_probabilities(0).iter().map(|&(_, _, p)| p).fold(f64::INFINITY, f64::min);
    let report = weak_feedback_coefficient(&g, 0..8, Estimator::ClosedForm).unwrap();
    let Coefficient::Value(gamma) = report.gamma else { panic!("vacuous") };
    assert!(gamma >= 0.5 * p_min / m as f64, "{gamma}");
    assert!(report.witnesses.is_empty());
}

#[test]
fn doubly_stochastic_models_have_uniform_steady_state() {
    let models: Vec<Box<dyn ChainModel>> = vec![
        Box::new(Gossip::complete(6).unwrap()),
        Box::new(Permutation::new(4).unwrap()),
        Box::new(
            LinkFailure::new(Arc::new(Gossip::complete(4).unwrap()), FailureSchedule::Survival(Schedule::Constant { c: 0.6 })).unwrap(),
        ),
    ];
    for model in &models {
        let r = find_common_steady_state(model.as_ref(), 0..16).unwrap();
        let pi = r.pi.unwrap();
        let m = model.dim() as f64;
        assert!(r.max_residual <= 1e-10);
        for p in pi {
            assert!((p - 1.0 / m).abs() <= 1e-12);
        }
        assert!(r.positive);
    }
}

#[test]
fn broadcast_steady_state_is_positive() {
    let model = BroadcastGossip::static_graph(4, vec![(0, 1), (1, 2), (2, 3)], Schedule::Constant { c: 0.5 }).unwrap();
    let r = find_common_steady_state(&model, 0..4).unwrap();
    assert!(r.max_residual <= 1e-10);
    let pi = r.pi.unwrap();
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(r.positive && r.pi_min > 0.0);
    let e = model.expected(0).unwrap();
    let moved: Vec<f64> = (0..4).map(|j| (0..4).map(|i| pi[i] * e.get(i, j)).sum()).collect();
    for (a, b) in moved.iter().zip(&pi) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn identity_has_full_fixed_space() {
    let r = find_common_steady_state(&DeterministicSequence::new(vec![StochasticMatrix::identity(3)]).unwrap(), 0..3).unwrap();
    assert_eq!(r.nullity, 3);
    assert!(r.positive);
}
