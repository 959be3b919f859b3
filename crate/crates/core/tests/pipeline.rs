use std::sync::Arc;

use ergoflow_core::approx::{block_infinite_flow, l1_chain_distance, proof_mixing_schedule, DistanceVerdict};
use ergoflow_core::flow::predict_ergodicity_pattern;
use ergoflow_core::models::*;
use ergoflow_core::properties::{basis_starts, m2_survey, M2Config, M2Verdict};
use ergoflow_core::simulate::{empirical_ergodicity_pattern, run_trajectory, verify_prediction, EmpiricalConfig, Initials, VerifyConfig};
use ergoflow_core::{ErgodicityPattern, FlowMode, Schedule, SeriesClass, SharedModel, StochasticMatrix};

/// Two cliques `{1,2,3}` and `{4,5,6}` joined by links whose weight decays geometrically.
fn two_cliques() -> Gossip {
    let mut links = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)] {
        links.push(Link { i, j, weight: Schedule::Constant { c: 1.0 } });
    }
    links.push(Link { i: 2, j: 3, weight: Schedule::Geometric { c: 1.0, r: 0.5 } });
    Gossip::new(6, links).unwrap()
}

fn cliques() -> ErgodicityPattern {
    ErgodicityPattern::from_one_based(6, &[vec![1, 2, 3], vec![4, 5, 6]]).unwrap()
}

#[test]
fn two_cliques_prediction_is_analytic() {
    let p = predict_ergodicity_pattern(&two_cliques(), FlowMode::Expected, 1 << 10, 0.1, 0).unwrap();
    assert_eq!(p.pattern, cliques());
    assert_eq!(p.pattern.to_string(), "{{1,2,3},{4,5,6}}");
    assert!(p.graph.all_analytic());
    assert!(p.warnings.is_empty());
}

#[test]
fn two_cliques_empirical_pattern() {
    let config = EmpiricalConfig {
        trials: 20,
        horizon: 1500,
        ..EmpiricalConfig::default()
    };
    let report = empirical_ergodicity_pattern(&two_cliques(), &config).unwrap();
    assert_eq!(report.pattern, cliques());
    assert_eq!(report.runs, 20 * 2 * 6);
    assert_eq!(report.stable_coordinates(), vec![1, 2, 3, 4, 5, 6]);
}

#[test]
fn verification_agrees_on_two_cliques() {
    let config = VerifyConfig {
        empirical: EmpiricalConfig {
            trials: 10,
            horizon: 1500,
            ..EmpiricalConfig::default()
        },
        ..VerifyConfig::default()
    };
    let report = verify_prediction(&two_cliques(), &config).unwrap();
    assert!(report.matches && report.refines);
    assert!(report.hypothesis_warnings.is_empty(), "{:?}", report.hypothesis_warnings);
    assert!(report.reliable);
}

#[test]
fn empirical_runs_are_deterministic() {
    let model = BroadcastGossip::ring(5, Schedule::Power { c: 1.0, a: 1.0 }).unwrap();
    let config = EmpiricalConfig {
        trials: 8,
        horizon: 300,
        ..EmpiricalConfig::default()
    };
    let a = empirical_ergodicity_pattern(&model, &config).unwrap();
    let b = empirical_ergodicity_pattern(&model, &config).unwrap();
    assert_eq!(a, b);
    let c = empirical_ergodicity_pattern(&model, &EmpiricalConfig { seed: 1, ..config }).unwrap();
    assert_ne!(a.trials, c.trials);
}

#[test]
fn trajectory_csv_layout() {
    let r = run_trajectory(&Gossip::complete(3).unwrap(), &[1.0, 0.0, 0.0], 0, 10, 4).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,x_1,x_2,x_3,spread");
    assert_eq!(lines.len(), 1 + r.checkpoints.len());
    assert!(lines[1].starts_with("0,"));
    assert!(lines.last().unwrap().starts_with("10,"));
    let sum: f64 = r.x_final.iter().sum();
    assert!((sum - 1.0).abs() < 1e-12, "gossip preserves the average");
}

#[test]
fn identity_pattern_is_singletons() {
    let config = EmpiricalConfig {
        trials: 2,
        horizon: 50,
        initials: Initials::Vectors(vec![vec![0.0, 1.0, 2.0]]),
        ..EmpiricalConfig::default()
    };
    let report = empirical_ergodicity_pattern(&DeterministicSequence::identity(3), &config).unwrap();
    assert_eq!(report.pattern, ErgodicityPattern::singletons(3));
    assert_eq!(report.stability, 1.0);
}

#[test]
fn m2_survey_bounded_for_mixing_gossip() {
    let config = M2Config {
        horizon: 1 << 10,
        trials: 20,
        ..M2Config::default()
    };
    let reports = m2_survey(&Gossip::complete(4).unwrap(), &basis_starts(4, &[0, 7]), &config).unwrap();
    assert_eq!(reports.len(), 8);
    for r in reports {
        assert_eq!(r.verdict, M2Verdict::BoundedLooking);
        assert!(r.partial_series.is_finite() && r.partial_series > 0.0);
    }
}

#[test]
fn mixing_schedule_vanishes_for_block_diagonal_mean() {
    let w = StochasticMatrix::validate(
        &[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]],
        1e-12,
    )
    .unwrap();
    let model = DeterministicSequence::new(vec![w]).unwrap();
    let pattern = ErgodicityPattern::from_one_based(3, &[vec![1, 2], vec![3]]).unwrap();
    let sched = proof_mixing_schedule(&model, &pattern, 0.2, 0, 16).unwrap();
    for k in 0..16 {
        assert_eq!(sched.value(k), 0.0);
    }
}

#[test]
fn diagonal_approximation_is_l1_close_under_geometric_cross_links() {
    let base: SharedModel = Arc::new(two_cliques());
    let diag = DiagonalApproximation::new(base.clone(), cliques()).unwrap();
    let r = l1_chain_distance(base.as_ref(), &diag, 1 << 10, FlowMode::Sampled { seed: 3 }, 0.1).unwrap();
    assert_eq!(r.verdict, DistanceVerdict::L1Close);
    let checks = block_infinite_flow(base.as_ref(), &cliques()).unwrap();
    assert_eq!(checks.len(), 2);
    assert!(checks.iter().all(|c| c.verdict == SeriesClass::Divergent && c.witness.is_none()));
}

#[test]
fn harmonic_against_periodic_diverges() {
    let perm = StochasticMatrix::validate(&[vec![0.0, 1.0], vec![1.0, 0.0]], 1e-12).unwrap();
    let periodic = DeterministicSequence::new(vec![perm, StochasticMatrix::identity(2)]).unwrap();
    let r = l1_chain_distance(&HarmonicPair, &periodic, 1 << 10, FlowMode::Expected, 0.1).unwrap();
    assert_eq!(r.verdict, DistanceVerdict::Diverging);
}
