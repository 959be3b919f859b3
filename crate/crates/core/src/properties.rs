//! Model hypotheses: common steady state in expectation, (weak) feedback
//! coefficients and the M2 series diagnostic.

use std::ops::Range;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::flow::{complete_windows, pair_count, pairs, window_of};
use crate::models::ChainModel;
use crate::stochastic::StochasticMatrix;
use crate::streams::{derive_seed, PathStreams};

/// Singular values below this bound span the common fixed direction.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub steps: [u64; 2],
    pub pi: Option<Vec<f64>>,
    /// `||pi^T E[W(k)] - pi^T||_1` per checked step (empty without `pi`).
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub positive: bool,
    pub pi_min: f64,
    /// Dimension of the common left fixed space.
    pub nullity: usize,
}

fn residual(pi: &[f64], w: &StochasticMatrix) -> f64 {
    let m = pi.len();
    (0..m)
        .map(|j| ((0..m).map(|i| pi[i] * w.get(i, j)).sum::<f64>() - pi[j]).abs())
        .sum()
}

/// Max-min stochastic vector in the column span of `basis` (`m x d`).
fn max_min_stochastic(basis: &DMatrix<f64>) -> Option<Vec<f64>> {
    let (m, d) = basis.shape();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let coeffs: Vec<_> = (0..d).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for i in 0..m {
        let mut entry = LinearExpr::empty();
        let mut shifted = LinearExpr::empty();
        for (c, &v) in coeffs.iter().enumerate() {
            entry.add(v, basis[(i, c)]);
            shifted.add(v, basis[(i, c)]);
        }
        shifted.add(t, -1.0);
        lp.add_constraint(entry, ComparisonOp::Ge, 0.0);
        lp.add_constraint(shifted, ComparisonOp::Ge, 0.0);
    }
    let mut total = LinearExpr::empty();
    for (c, &v) in coeffs.iter().enumerate() {
        total.add(v, basis.column(c).sum());
    }
    lp.add_constraint(total, ComparisonOp::Eq, 1.0);
    let solution = lp.solve().ok()?;
    let pi: Vec<f64> = (0..m)
        .map(|i| coeffs.iter().enumerate().map(|(c, &v)| basis[(i, c)] * solution[v]).sum::<f64>().max(0.0))
        .collect();
    let s: f64 = pi.iter().sum();
    Some(pi.into_iter().map(|p| p / s).collect())
}

/// Solves `pi^T E[W(k)] = pi^T` jointly over `steps`.
///
/// The stacked system `(E[W(k)]^T - I) pi = 0` is compressed to an `m x m`
/// triangular factor by repeated QR, so singular values match the full stack.
pub fn find_common_steady_state(model: &dyn ChainModel, steps: Range<u64>) -> Result<SteadyStateReport> {
    if steps.is_empty() {
        return Err(Error::InvalidParameter("steady-state step range is empty".into()));
    }
    let m = model.dim();
    let mut expected = Vec::new();
    let mut r = DMatrix::<f64>::zeros(0, m);
    let mut last: Option<StochasticMatrix> = None;
    for k in steps.clone() {
        let e = model.expected(k)?;
        if last.as_ref() != Some(&e) {
            let mut block = DMatrix::<f64>::zeros(r.nrows() + m, m);
            block.rows_mut(0, r.nrows()).copy_from(&r);
            for i in 0..m {
                for j in 0..m {
                    // row i of (E^T - I)
                    block[(r.nrows() + i, j)] = e.get(j, i) - if i == j { 1.0 } else { 0.0 };
                }
            }
            r = block.qr().r();
            last = Some(e.clone());
        }
        expected.push(e);
    }
    let svd = r.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    // The factor is m x m, so V^T is complete.
    let basis_cols: Vec<Vec<f64>> = (0..m)
        .filter(|&c| svd.singular_values[c] < SINGULAR_THRESHOLD)
        .map(|c| v_t.row(c).iter().copied().collect())
        .collect();
    let nullity = basis_cols.len();
    let uniform = vec![1.0 / m as f64; m];
    let uniform_fits = expected.iter().all(|e| residual(&uniform, e) <= 1e-12);
    let pi = if nullity == 0 {
        None
    } else if uniform_fits {
        Some(uniform)
    } else if nullity == 1 {
        let v = &basis_cols[0];
        let s: f64 = v.iter().sum();
        let scaled: Vec<f64> = v.iter().map(|x| x / s).collect();
        if s.abs() > 1e-12 && scaled.iter().all(|&x| x >= -1e-10) {
            Some(scaled.into_iter().map(|x| x.max(0.0)).collect())
        } else {
            None
        }
    } else {
        let basis = DMatrix::from_fn(m, nullity, |i, c| basis_cols[c][i]);
        max_min_stochastic(&basis)
    };
    let (residuals, pi_min) = match &pi {
        Some(p) => (
            expected.iter().map(|e| residual(p, e)).collect::<Vec<_>>(),
            p.iter().copied().fold(f64::INFINITY, f64::min),
        ),
        None => (Vec::new(), 0.0),
    };
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(SteadyStateReport {
        steps: [steps.start, steps.end],
        positive: pi.is_some() && pi_min > 1e-12,
        pi,
        residuals,
        max_residual,
        pi_min,
        nullity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    /// `E[W^i(k)^T W^j(k)] >= gamma E[W_ij(k) + W_ji(k)]`
    Weak,
    /// `E[W_ii W_ij + W_jj W_ji] >= gamma E[W_ij + W_ji]`
    Strong,
}

/// A coefficient that is `+inf` when every inequality was vacuous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Value(f64),
    Vacuous,
}

impl Coefficient {
    pub fn value(&self) -> f64 {
        match self {
            Coefficient::Value(v) => *v,
            Coefficient::Vacuous => f64::INFINITY,
        }
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Coefficient::Value(v) => serializer.serialize_f64(*v),
            Coefficient::Vacuous => serializer.serialize_str("vacuous"),
        }
    }
}

/// One checked `(k, i, j)`; indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Site {
    pub step: u64,
    pub i: usize,
    pub j: usize,
    pub left: f64,
    pub right: f64,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
}

const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackReport {
    pub property: FeedbackKind,
    pub estimator: Estimator,
    pub steps: [u64; 2],
    pub gamma: Coefficient,
    pub checked: usize,
    pub vacuous: usize,
    /// Site attaining the minimum ratio.
    pub argmin: Option<Site>,
    /// Sites whose left side is zero while the right side is positive.
    pub witnesses: Vec<Site>,
    pub witness_count: usize,
    /// Largest standard error of a ratio (Monte Carlo only).
    pub max_standard_error: Option<f64>,
}

fn left_side(kind: FeedbackKind, w: &StochasticMatrix, i: usize, j: usize) -> f64 {
    match kind {
        FeedbackKind::Weak => (0..w.dim()).map(|l| w.get(l, i) * w.get(l, j)).sum(),
        FeedbackKind::Strong => w.get(i, i) * w.get(i, j) + w.get(j, j) * w.get(j, i),
    }
}

/// Per-step sites `(i, j, left, right, standard error)`.
fn step_sites(model: &dyn ChainModel, kind: FeedbackKind, estimator: Estimator, k: u64) -> Result<Vec<(usize, usize, f64, f64, Option<f64>)>> {
    let m = model.dim();
    match estimator {
        Estimator::ClosedForm => {
            let moments = model.row_moments(k)?;
            let mean = model.expected(k)?;
            Ok(pairs(m)
                .map(|(i, j)| {
                    let left = match kind {
                        FeedbackKind::Weak => moments.h(i, j),
                        FeedbackKind::Strong => moments.feedback_left(i, j),
                    };
                    (i, j, left, mean.get(i, j) + mean.get(j, i), None)
                })
                .collect())
        }
        Estimator::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("Monte Carlo estimation needs at least two samples".into()));
            }
            let p = pair_count(m);
            // sums of L, R, L^2, R^2, LR
            let mut acc = vec![[0.0f64; 5]; p];
            for s in 0..samples {
                let w = model.sample(k, &mut PathStreams::new(derive_seed(seed, s as u64)).at(k));
                for (n, (i, j)) in pairs(m).enumerate() {
                    let l = left_side(kind, &w, i, j);
                    let r = w.get(i, j) + w.get(j, i);
                    let a = &mut acc[n];
                    a[0] += l;
                    a[1] += r;
                    a[2] += l * l;
                    a[3] += r * r;
                    a[4] += l * r;
                }
            }
            let n = samples as f64;
            Ok(pairs(m)
                .zip(acc)
                .map(|((i, j), a)| {
                    let (lm, rm) = (a[0] / n, a[1] / n);
                    let se = if rm > 0.0 {
                        let var_l = (a[2] / n - lm * lm) * n / (n - 1.0);
                        let var_r = (a[3] / n - rm * rm) * n / (n - 1.0);
                        let cov = (a[4] / n - lm * rm) * n / (n - 1.0);
                        let ratio = lm / rm;
                        let v = (var_l - 2.0 * ratio * cov + ratio * ratio * var_r) / (n * rm * rm);
                        Some(v.max(0.0).sqrt())
                    } else {
                        None
                    };
                    (i, j, lm, rm, se)
                })
                .collect())
        }
    }
}

fn feedback(model: &dyn ChainModel, kind: FeedbackKind, steps: Range<u64>, estimator: Estimator) -> Result<FeedbackReport> {
    if steps.is_empty() {
        return Err(Error::InvalidParameter("feedback step range is empty".into()));
    }
    let per_step: Vec<Result<Vec<_>>> = steps
        .clone()
        .into_par_iter()
        .map(|k| step_sites(model, kind, estimator, k))
        .collect();
    let mut report = FeedbackReport {
        property: kind,
        estimator,
        steps: [steps.start, steps.end],
        gamma: Coefficient::Vacuous,
        checked: 0,
        vacuous: 0,
        argmin: None,
        witnesses: Vec::new(),
        witness_count: 0,
        max_standard_error: None,
    };
    for (k, sites) in steps.zip(per_step) {
        for (i, j, left, right, se) in sites? {
            if !(right > 0.0) {
                report.vacuous += 1;
                continue;
            }
            report.checked += 1;
            let site = Site {
                step: k,
                i: i + 1,
                j: j + 1,
                left,
                right,
                ratio: left / right,
                standard_error: se,
            };
            if let Some(se) = se {
                report.max_standard_error = Some(report.max_standard_error.map_or(se, |m: f64| m.max(se)));
            }
            if left <= 0.0 {
                report.witness_count += 1;
                if report.witnesses.len() < MAX_WITNESSES {
                    report.witnesses.push(site);
                }
            }
            if report.argmin.is_none_or(|a| site.ratio < a.ratio) {
                report.argmin = Some(site);
            }
        }
    }
    report.gamma = match (&report.argmin, report.witness_count) {
        (_, n) if n > 0 => Coefficient::Value(0.0),
        (Some(a), _) => Coefficient::Value(a.ratio),
        (None, _) => Coefficient::Vacuous,
    };
    Ok(report)
}

/// Largest `gamma` with `E[W^i^T W^j] >= gamma E[W_ij + W_ji]` over the checked sites.
pub fn weak_feedback_coefficient(model: &dyn ChainModel, steps: Range<u64>, estimator: Estimator) -> Result<FeedbackReport> {
    feedback(model, FeedbackKind::Weak, steps, estimator)
}

/// Largest `gamma` with `E[W_ii W_ij + W_jj W_ji] >= gamma E[W_ij + W_ji]`.
pub fn feedback_coefficient(model: &dyn ChainModel, steps: Range<u64>, estimator: Estimator) -> Result<FeedbackReport> {
    feedback(model, FeedbackKind::Strong, steps, estimator)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum M2Verdict {
    BoundedLooking,
    Growing,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HEstimator {
    ClosedForm,
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M2Start {
    pub t0: u64,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2Config {
    pub horizon: u64,
    pub trials: usize,
    pub seed: u64,
    /// Samples per step for `H(k)` when the model has no closed form.
    pub h_samples: usize,
}

impl Default for M2Config {
    fn default() -> Self {
        Self {
            horizon: 1 << 14,
            trials: 200,
            seed: 0,
            h_samples: 1000,
        }
    }
}

/// Truncated `sum_k sum_{i<j} H_ij(k) E[(x_i(k) - x_j(k))^2]` from one start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M2Report {
    pub t0: u64,
    pub x0: Vec<f64>,
    pub horizon: u64,
    pub trials: usize,
    pub h_estimator: HEstimator,
    pub partial_series: f64,
    /// Complete dyadic windows (indexed by step, steps before `t0` contribute 0).
    pub window_sums: Vec<f64>,
    pub verdict: M2Verdict,
}

/// Bounded-looking when the last window is below `1e-3` of the total,
/// growing when the last two windows both exceed 0.1.
pub fn m2_verdict(total: f64, windows: &[f64]) -> M2Verdict {
    if total == 0.0 || windows.last().is_some_and(|&w| w < 1e-3 * total) {
        M2Verdict::BoundedLooking
    } else if crate::flow::sustained_growth(windows, 0.1) {
        M2Verdict::Growing
    } else {
        M2Verdict::Unknown
    }
}

/// Off-diagonal `H_ij(k)` in pair order for `k in steps`.
fn h_table(model: &dyn ChainModel, steps: Range<u64>, config: &M2Config) -> Result<(Vec<Vec<f64>>, HEstimator)> {
    let m = model.dim();
    let closed = model.row_moments(steps.start).is_ok();
    let rows: Vec<Result<Vec<f64>>> = steps
        .into_par_iter()
        .map(|k| {
            if closed {
                let r = model.row_moments(k)?;
                Ok(pairs(m).map(|(i, j)| r.h(i, j)).collect())
            } else {
                let mut h = vec![0.0; pair_count(m)];
                let salt = derive_seed(config.seed, u64::MAX);
                for s in 0..config.h_samples {
                    let w = model.sample(k, &mut PathStreams::new(derive_seed(salt, s as u64)).at(k));
                    for (n, (i, j)) in pairs(m).enumerate() {
                        h[n] += (0..m).map(|l| w.get(l, i) * w.get(l, j)).sum::<f64>();
                    }
                }
                for v in &mut h {
                    *v /= config.h_samples as f64;
                }
                Ok(h)
            }
        })
        .collect();
    let estimator = if closed {
        HEstimator::ClosedForm
    } else {
        HEstimator::MonteCarlo {
            samples: config.h_samples,
        }
    };
    Ok((rows.into_iter().collect::<Result<_>>()?, estimator))
}

/// Runs the M2 diagnostic for several starts, sharing `H(k)` and, per `t0`,
/// the sample paths of each trial.
pub fn m2_survey(model: &dyn ChainModel, starts: &[M2Start], config: &M2Config) -> Result<Vec<M2Report>> {
    let m = model.dim();
    if config.trials == 0 {
        return Err(Error::InvalidParameter("M2 diagnostic needs at least one trial".into()));
    }
    if config.h_samples == 0 {
        return Err(Error::InvalidParameter("H estimation needs at least one sample".into()));
    }
    for s in starts {
        if s.x0.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: s.x0.len(),
            });
        }
        if s.t0 >= config.horizon {
            return Err(Error::InvalidParameter(format!("start step {} is not before the horizon {}", s.t0, config.horizon)));
        }
    }
    let Some(first) = starts.iter().map(|s| s.t0).min() else {
        return Ok(Vec::new());
    };
    let (h, estimator) = h_table(model, first..config.horizon, config)?;
    let n_windows = window_of(config.horizon - 1) + 1;
    let mut t0s: Vec<u64> = starts.iter().map(|s| s.t0).collect();
    t0s.sort_unstable();
    t0s.dedup();
    let mut reports: Vec<Option<M2Report>> = vec![None; starts.len()];
    for t0 in t0s {
        let members: Vec<usize> = (0..starts.len()).filter(|&s| starts[s].t0 == t0).collect();
        let cols = members.len();
        let mut init = vec![0.0; m * cols];
        for (c, &s) in members.iter().enumerate() {
            for i in 0..m {
                init[i * cols + c] = starts[s].x0[i];
            }
        }
        let per_trial: Vec<Vec<f64>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let streams = PathStreams::new(derive_seed(config.seed, trial as u64));
                let mut x = init.clone();
                let mut next = vec![0.0; x.len()];
                // windows x columns
                let mut sums = vec![0.0; n_windows * cols];
                for k in t0..config.horizon {
                    let hk = &h[(k - first) as usize];
                    let t = window_of(k);
                    for (n, (i, j)) in pairs(m).enumerate() {
                        if hk[n] == 0.0 {
                            continue;
                        }
                        for c in 0..cols {
                            let d = x[i * cols + c] - x[j * cols + c];
                            sums[t * cols + c] += hk[n] * d * d;
                        }
                    }
                    model.sample(k, &mut streams.at(k)).apply_columns(&x, cols, &mut next);
                    std::mem::swap(&mut x, &mut next);
                }
                sums
            })
            .collect();
        for (c, &s) in members.iter().enumerate() {
            let mut windows = vec![0.0; n_windows];
            for trial in &per_trial {
                for (t, w) in windows.iter_mut().enumerate() {
                    *w += trial[t * cols + c];
                }
            }
            for w in &mut windows {
                *w /= config.trials as f64;
            }
            let total: f64 = windows.iter().sum();
            windows.truncate(complete_windows(config.horizon));
            reports[s] = Some(M2Report {
                t0,
                x0: starts[s].x0.clone(),
                horizon: config.horizon,
                trials: config.trials,
                h_estimator: estimator,
                partial_series: total,
                verdict: m2_verdict(total, &windows),
                window_sums: windows,
            });
        }
    }
    Ok(reports.into_iter().map(|r| r.expect("every start belongs to a group")).collect())
}

/// The M2 diagnostic from a single `(t0, x0)`.
pub fn m2_diagnostic(model: &dyn ChainModel, x0: &[f64], t0: u64, config: &M2Config) -> Result<M2Report> {
    let start = M2Start { t0, x0: x0.to_vec() };
    Ok(m2_survey(model, std::slice::from_ref(&start), config)?.remove(0))
}

/// Default starts: every `t0` with every coordinate basis vector.
pub fn basis_starts(m: usize, t0s: &[u64]) -> Vec<M2Start> {
    t0s.iter()
        .flat_map(|&t0| {
            (0..m).map(move |l| {
                let mut x0 = vec![0.0; m];
                x0[l] = 1.0;
                M2Start { t0, x0 }
            })
        })
        .collect()
}
