//! Trajectories of `x(k+1) = W(k) x(k)`, the empirical ergodicity pattern and
//! prediction checks.

use std::io::{self, Write};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{pair_count, pairs, predict_ergodicity_pattern, ErgodicityPattern, FlowMode, Prediction, UnionFind};
use crate::models::ChainModel;
use crate::properties::{find_common_steady_state, weak_feedback_coefficient, Coefficient, Estimator, Site};
use crate::streams::{derive_seed, PathStreams};

/// Share of the horizon used as the final window.
pub const WINDOW_FRACTION: f64 = 0.1;

fn spread(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// First step of the final window of a run over `t0..horizon`.
pub fn window_start(t0: u64, horizon: u64) -> u64 {
    let len = ((horizon as f64 * WINDOW_FRACTION) as u64).clamp(1, horizon - t0);
    horizon - len
}

/// `t0, t0+1, t0+2, t0+4, ...` and `horizon`.
pub fn log_checkpoints(t0: u64, horizon: u64) -> Vec<u64> {
    let mut steps = vec![t0];
    let mut offset = 1u64;
    while t0 + offset < horizon {
        steps.push(t0 + offset);
        offset *= 2;
    }
    steps.push(horizon);
    steps
}

/// Several initial vectors driven by one sample path.
struct ColumnRun {
    finals: Vec<f64>,
    /// `max - min` of each coordinate over the final window, `[i * cols + c]`.
    cauchy: Vec<f64>,
    /// Largest `|x_i - x_j|` over the final window, `[pair * cols + c]`.
    pair_gaps: Vec<f64>,
    checkpoints: Vec<(u64, Vec<f64>)>,
}

fn run_columns(model: &dyn ChainModel, init: &[f64], cols: usize, t0: u64, horizon: u64, streams: &PathStreams, record: bool) -> ColumnRun {
    let m = model.dim();
    let start = window_start(t0, horizon);
    let marks = if record { log_checkpoints(t0, horizon) } else { Vec::new() };
    let mut mark = 0;
    let mut x = init.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut lo = vec![f64::INFINITY; m * cols];
    let mut hi = vec![f64::NEG_INFINITY; m * cols];
    let mut pair_gaps = vec![0.0; pair_count(m) * cols];
    let mut checkpoints = Vec::with_capacity(marks.len());
    let mut k = t0;
    loop {
        if mark < marks.len() && marks[mark] == k {
            checkpoints.push((k, x.clone()));
            mark += 1;
        }
        if k >= start {
            for (n, v) in x.iter().enumerate() {
                lo[n] = lo[n].min(*v);
                hi[n] = hi[n].max(*v);
            }
            for (p, (i, j)) in pairs(m).enumerate() {
                for c in 0..cols {
                    let g = (x[i * cols + c] - x[j * cols + c]).abs();
                    let slot = &mut pair_gaps[p * cols + c];
                    if g > *slot {
                        *slot = g;
                    }
                }
            }
        }
        if k == horizon {
            break;
        }
        model.sample(k, &mut streams.at(k)).apply_columns(&x, cols, &mut next);
        std::mem::swap(&mut x, &mut next);
        k += 1;
    }
    ColumnRun {
        cauchy: hi.iter().zip(&lo).map(|(h, l)| h - l).collect(),
        finals: x,
        pair_gaps,
        checkpoints,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub step: u64,
    pub x: Vec<f64>,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairGap {
    /// 1-based.
    pub pair: [usize; 2],
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub t0: u64,
    pub horizon: u64,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub x_final: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub window_start: u64,
    /// Largest `|x_i - x_j|` over the final window.
    pub pair_gaps: Vec<PairGap>,
    /// Per-coordinate `max |x_i(k) - x_i(k')|` over the final window.
    pub cauchy_gaps: Vec<f64>,
}

impl TrajectoryReport {
    pub fn spread_series(&self) -> Vec<(u64, f64)> {
        self.checkpoints.iter().map(|c| (c.step, c.spread)).collect()
    }

    pub fn final_spread(&self) -> f64 {
        spread(&self.x_final)
    }

    /// Checkpoints as CSV with columns `step, x_1..x_m, spread`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "step")?;
        for i in 1..=self.x0.len() {
            write!(out, ",x_{i}")?;
        }
        writeln!(out, ",spread")?;
        for c in &self.checkpoints {
            write!(out, "{}", c.step)?;
            for v in &c.x {
                write!(out, ",{v:e}")?;
            }
            writeln!(out, ",{:e}", c.spread)?;
        }
        Ok(())
    }
}

fn check_run(model: &dyn ChainModel, x0_len: usize, t0: u64, horizon: u64) -> Result<()> {
    if x0_len != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x0_len,
        });
    }
    if horizon <= t0 {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must exceed the start step {t0}")));
    }
    Ok(())
}

/// Runs `x(k+1) = W(k) x(k)` for `k = t0..horizon` on the path of `seed`.
pub fn run_trajectory(model: &dyn ChainModel, x0: &[f64], t0: u64, horizon: u64, seed: u64) -> Result<TrajectoryReport> {
    check_run(model, x0.len(), t0, horizon)?;
    let run = run_columns(model, x0, 1, t0, horizon, &PathStreams::new(seed), true);
    Ok(TrajectoryReport {
        t0,
        horizon,
        seed,
        x0: x0.to_vec(),
        checkpoints: run
            .checkpoints
            .into_iter()
            .map(|(step, x)| Checkpoint { step, spread: spread(&x), x })
            .collect(),
        window_start: window_start(t0, horizon),
        pair_gaps: pairs(model.dim())
            .zip(run.pair_gaps)
            .map(|((i, j), gap)| PairGap { pair: [i + 1, j + 1], gap })
            .collect(),
        cauchy_gaps: run.cauchy,
        x_final: run.finals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initials {
    /// The coordinate basis `e_1, .., e_m`.
    Basis,
    Vectors(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalConfig {
    pub trials: usize,
    pub t0_set: Vec<u64>,
    pub horizon: u64,
    pub epsilon: f64,
    /// Fraction of runs in which a pair must agree.
    pub agreement: f64,
    pub initials: Initials,
    pub seed: u64,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            t0_set: vec![0, 7],
            horizon: 2000,
            epsilon: 1e-6,
            agreement: 0.99,
            initials: Initials::Basis,
            seed: 0,
        }
    }
}

/// One `(trial, t0)` path with all initial vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub t0: u64,
    /// Largest spread at the horizon over the initial vectors.
    pub final_spread: f64,
    /// Largest final-window pair gap over pairs and initial vectors.
    pub max_pair_gap: f64,
    pub max_cauchy_gap: f64,
    /// Every run of this path had all Cauchy gaps below epsilon.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEvidence {
    pub pair: [usize; 2],
    /// Share of runs with final-window gap below epsilon.
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub pattern: ErgodicityPattern,
    pub runs: usize,
    pub epsilon: f64,
    pub agreement_threshold: f64,
    pub horizon: u64,
    pub t0_set: Vec<u64>,
    pub window_fraction: f64,
    pub pair_evidence: Vec<PairEvidence>,
    /// Per coordinate: share of runs with Cauchy gap below epsilon.
    pub coordinate_stability: Vec<f64>,
    /// Share of runs where every coordinate's Cauchy gap is below epsilon.
    pub stability: f64,
    /// Per coordinate: largest Cauchy gap over all runs.
    pub max_cauchy_gaps: Vec<f64>,
    pub trials: Vec<TrialSummary>,
}

impl EmpiricalReport {
    /// Coordinates whose Cauchy gap stayed below epsilon in every run.
    pub fn stable_coordinates(&self) -> Vec<usize> {
        (0..self.coordinate_stability.len())
            .filter(|&i| self.coordinate_stability[i] == 1.0)
            .map(|i| i + 1)
            .collect()
    }
}

struct PathTally {
    pair_agree: Vec<usize>,
    coord_stable: Vec<usize>,
    stable_runs: usize,
    max_cauchy: Vec<f64>,
    summary: TrialSummary,
}

fn initial_columns(m: usize, initials: &Initials) -> Result<(Vec<f64>, usize)> {
    let vectors: Vec<Vec<f64>> = match initials {
        Initials::Basis => (0..m)
            .map(|l| {
                let mut e = vec![0.0; m];
                e[l] = 1.0;
                e
            })
            .collect(),
        Initials::Vectors(v) => v.clone(),
    };
    if vectors.is_empty() {
        return Err(Error::InvalidParameter("at least one initial vector is required".into()));
    }
    let cols = vectors.len();
    let mut init = vec![0.0; m * cols];
    for (c, v) in vectors.iter().enumerate() {
        if v.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: v.len() });
        }
        for i in 0..m {
            init[i * cols + c] = v[i];
        }
    }
    Ok((init, cols))
}

/// Classes of the finite-sample relation "final-window gap below epsilon in at
/// least `agreement` of the runs", closed transitively.
///
/// Trial `n` uses the path seeded by `derive_seed(seed, n)` for every `t0`,
/// so models sharing base randomness stay matched.
pub fn empirical_ergodicity_pattern(model: &dyn ChainModel, config: &EmpiricalConfig) -> Result<EmpiricalReport> {
    let m = model.dim();
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    if config.trials == 0 || config.t0_set.is_empty() {
        return Err(Error::InvalidParameter("at least one trial and one start step are required".into()));
    }
    if !(0.0..=1.0).contains(&config.agreement) {
        return Err(Error::InvalidParameter("agreement must lie in [0, 1]".into()));
    }
    for &t0 in &config.t0_set {
        check_run(model, m, t0, config.horizon)?;
    }
    let (init, cols) = initial_columns(m, &config.initials)?;
    let jobs: Vec<(usize, u64)> = (0..config.trials)
        .flat_map(|trial| config.t0_set.iter().map(move |&t0| (trial, t0)))
        .collect();
    let eps = config.epsilon;
    let tallies: Vec<PathTally> = jobs
        .par_iter()
        .map(|&(trial, t0)| {
            let streams = PathStreams::new(derive_seed(config.seed, trial as u64));
            let run = run_columns(model, &init, cols, t0, config.horizon, &streams, false);
            let mut pair_agree = vec![0; pair_count(m)];
            for (p, agree) in pair_agree.iter_mut().enumerate() {
                *agree = (0..cols).filter(|&c| run.pair_gaps[p * cols + c] < eps).count();
            }
            let mut coord_stable = vec![0; m];
            let mut max_cauchy = vec![0.0f64; m];
            for i in 0..m {
                for c in 0..cols {
                    let g = run.cauchy[i * cols + c];
                    coord_stable[i] += usize::from(g < eps);
                    max_cauchy[i] = max_cauchy[i].max(g);
                }
            }
            let stable_runs = (0..cols).filter(|&c| (0..m).all(|i| run.cauchy[i * cols + c] < eps)).count();
            let final_spread = (0..cols)
                .map(|c| spread(&(0..m).map(|i| run.finals[i * cols + c]).collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            let max_cauchy_gap = max_cauchy.iter().copied().fold(0.0, f64::max);
            PathTally {
                pair_agree,
                coord_stable,
                stable_runs,
                summary: TrialSummary {
                    trial,
                    t0,
                    final_spread,
                    max_pair_gap: run.pair_gaps.iter().copied().fold(0.0, f64::max),
                    max_cauchy_gap,
                    stable: stable_runs == cols,
                },
                max_cauchy,
            }
        })
        .collect();
    let runs = jobs.len() * cols;
    let mut pair_agree = vec![0usize; pair_count(m)];
    let mut coord_stable = vec![0usize; m];
    let mut stable_runs = 0;
    let mut max_cauchy_gaps = vec![0.0f64; m];
    let mut trials = Vec::with_capacity(tallies.len());
    for t in tallies {
        for (a, b) in pair_agree.iter_mut().zip(&t.pair_agree) {
            *a += b;
        }
        for (a, b) in coord_stable.iter_mut().zip(&t.coord_stable) {
            *a += b;
        }
        for (a, b) in max_cauchy_gaps.iter_mut().zip(&t.max_cauchy) {
            *a = a.max(*b);
        }
        stable_runs += t.stable_runs;
        trials.push(t.summary);
    }
    let mut uf = UnionFind::new(m);
    let mut pair_evidence = Vec::with_capacity(pair_count(m));
    for ((i, j), &agree) in pairs(m).zip(&pair_agree) {
        let share = agree as f64 / runs as f64;
        if share >= config.agreement {
            uf.union(i, j);
        }
        pair_evidence.push(PairEvidence {
            pair: [i + 1, j + 1],
            agreement: share,
        });
    }
    Ok(EmpiricalReport {
        pattern: uf.pattern(),
        runs,
        epsilon: eps,
        agreement_threshold: config.agreement,
        horizon: config.horizon,
        t0_set: config.t0_set.clone(),
        window_fraction: WINDOW_FRACTION,
        pair_evidence,
        coordinate_stability: coord_stable.iter().map(|&s| s as f64 / runs as f64).collect(),
        stability: stable_runs as f64 / runs as f64,
        max_cauchy_gaps,
        trials,
    })
}

/// A hypothesis of the main theorem that the checks could not confirm.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum HypothesisWarning {
    NoWeakFeedback { gamma: f64, witness: Option<Site> },
    SteadyStateNotPositive { pi_min: f64 },
    NoSteadyState,
    Unchecked { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub empirical: EmpiricalConfig,
    pub flow_mode: FlowMode,
    pub flow_horizon: u64,
    pub threshold: f64,
    /// Steps on which feedback and the steady state are checked.
    pub property_steps: Range<u64>,
    /// Samples per step when feedback must be estimated.
    pub feedback_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            empirical: EmpiricalConfig::default(),
            flow_mode: FlowMode::Expected,
            flow_horizon: crate::flow::DEFAULT_HORIZON,
            threshold: crate::flow::DEFAULT_THRESHOLD,
            property_steps: 0..32,
            feedback_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub predicted: ErgodicityPattern,
    pub empirical: ErgodicityPattern,
    #[serde(rename = "match")]
    pub matches: bool,
    /// No empirical class spans two predicted classes.
    pub refines: bool,
    pub stability: f64,
    pub hypothesis_warnings: Vec<HypothesisWarning>,
    pub reliable: bool,
    pub prediction: Prediction,
    pub evidence: EmpiricalReport,
}

fn hypothesis_warnings(model: &dyn ChainModel, config: &VerifyConfig) -> Result<Vec<HypothesisWarning>> {
    let mut warnings = Vec::new();
    let closed = model.row_moments(config.property_steps.start).is_ok() && model.expected(config.property_steps.start).is_ok();
    let estimator = if closed {
        Estimator::ClosedForm
    } else {
        Estimator::MonteCarlo {
            samples: config.feedback_samples,
            seed: derive_seed(config.empirical.seed, 0xfeed),
        }
    };
    let feedback = weak_feedback_coefficient(model, config.property_steps.clone(), estimator)?;
    if let Coefficient::Value(g) = feedback.gamma {
        if g <= 0.0 {
            warnings.push(HypothesisWarning::NoWeakFeedback {
                gamma: g,
                witness: feedback.witnesses.first().copied(),
            });
        }
    }
    match find_common_steady_state(model, config.property_steps.clone()) {
        Ok(r) => match r.pi {
            None => warnings.push(HypothesisWarning::NoSteadyState),
            Some(_) if !r.positive => warnings.push(HypothesisWarning::SteadyStateNotPositive { pi_min: r.pi_min }),
            Some(_) => {}
        },
        Err(Error::NoClosedForm(kind)) => warnings.push(HypothesisWarning::Unchecked {
            reason: format!("steady state needs closed-form expectations ({kind})"),
        }),
        Err(e) => return Err(e),
    }
    Ok(warnings)
}

/// Predicted (flow graph) against empirical (simulation) ergodicity pattern.
pub fn verify_prediction(model: &dyn ChainModel, config: &VerifyConfig) -> Result<VerificationReport> {
    let prediction = predict_ergodicity_pattern(
        model,
        config.flow_mode,
        config.flow_horizon,
        config.threshold,
        derive_seed(config.empirical.seed, 0xf10),
    )?;
    let evidence = empirical_ergodicity_pattern(model, &config.empirical)?;
    let warnings = hypothesis_warnings(model, config)?;
    Ok(VerificationReport {
        predicted: prediction.pattern.clone(),
        empirical: evidence.pattern.clone(),
        matches: prediction.pattern == evidence.pattern,
        refines: evidence.pattern.refines(&prediction.pattern),
        stability: evidence.stability,
        reliable: warnings.is_empty(),
        hypothesis_warnings: warnings,
        prediction,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DeterministicSequence, Gossip, HarmonicPair};

    #[test]
    fn identity_keeps_state() {
        let r = run_trajectory(&DeterministicSequence::identity(3), &[0.2, 0.5, 0.9], 0, 50, 1).unwrap();
        assert_eq!(r.x_final, vec![0.2, 0.5, 0.9]);
        assert!(r.spread_series().iter().all(|&(_, s)| (s - 0.7).abs() < 1e-15));
    }

    #[test]
    fn harmonic_gap_telescopes() {
        for k in [10u64, 100] {
            let r = run_trajectory(&HarmonicPair, &[1.0, 0.0], 1, k + 1, 0).unwrap();
            let gap = (r.x_final[0] - r.x_final[1]).abs();
            let exact = 2.0 / ((k + 1) as f64 * (k + 2) as f64);
            assert!((gap - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn gossip_pair_averages_at_once() {
        let r = run_trajectory(&Gossip::complete(2).unwrap(), &[3.0, 1.0], 0, 1, 42).unwrap();
        assert_eq!(r.x_final, vec![2.0, 2.0]);
    }

    #[test]
    fn checkpoints_are_logarithmic() {
        assert_eq!(log_checkpoints(0, 10), vec![0, 1, 2, 4, 8, 10]);
        assert_eq!(log_checkpoints(7, 8), vec![7, 8]);
        assert_eq!(window_start(0, 4000), 3600);
        assert_eq!(window_start(7, 8), 7);
    }

    #[test]
    fn csv_layout() {
        let r = run_trajectory(&DeterministicSequence::identity(2), &[1.0, 0.0], 0, 2, 0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,x_1,x_2,spread");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1e0,0e0,1e0"));
    }

    #[test]
    fn identity_pattern_is_singletons() {
        let cfg = EmpiricalConfig {
            trials: 2,
            horizon: 20,
            ..EmpiricalConfig::default()
        };
        let r = empirical_ergodicity_pattern(&DeterministicSequence::identity(3), &cfg).unwrap();
        assert_eq!(r.pattern, ErgodicityPattern::singletons(3));
        assert_eq!(r.stability, 1.0);
    }

    #[test]
    fn complete_gossip_reaches_consensus() {
        let cfg = EmpiricalConfig {
            trials: 10,
            horizon: 2000,
            ..EmpiricalConfig::default()
        };
        let r = empirical_ergodicity_pattern(&Gossip::complete(3).unwrap(), &cfg).unwrap();
        assert_eq!(r.pattern, ErgodicityPattern::whole(3));
    }
}
