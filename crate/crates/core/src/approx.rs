//! Chain perturbations that keep ergodicity classes: ℓ1 chain distance,
//! cut-zero and diagonal approximations, and the per-block mixing
//! perturbation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{complete_windows, pair_index, window_of, DivergenceDescriptor, ErgodicityPattern, FlowMode};
use crate::models::{ChainModel, Lineage};
use crate::schedule::{Schedule, SeriesClass};
use crate::stochastic::{IndexSet, StochasticMatrix};
use crate::streams::PathStreams;

/// Zeroes the weights crossing `S | S̄` and folds them into the diagonal.
pub fn cut_zero_approximation(a: &StochasticMatrix, cut: &IndexSet) -> Result<StochasticMatrix> {
    a.check_dim(cut.ambient())?;
    cut.require_nontrivial()?;
    let inside = cut.indicator();
    Ok(fold_cross(a, |i, j| inside[i] != inside[j]))
}

/// Block-diagonal `W̃` of `W` w.r.t. `pattern`, kept in the original index order.
pub fn diagonal_approximation(w: &StochasticMatrix, pattern: &ErgodicityPattern) -> Result<StochasticMatrix> {
    if pattern.dim() != w.dim() {
        return Err(Error::InvalidPartition(format!(
            "pattern covers {} indices, matrix has {}",
            pattern.dim(),
            w.dim()
        )));
    }
    let labels = pattern.labels();
    Ok(fold_cross(w, |i, j| labels[i] != labels[j]))
}

fn fold_cross(a: &StochasticMatrix, cross: impl Fn(usize, usize) -> bool) -> StochasticMatrix {
    let m = a.dim();
    let mut out = a.as_flat().to_vec();
    for i in 0..m {
        let mut moved = 0.0;
        for j in 0..m {
            if cross(i, j) {
                moved += out[i * m + j];
                out[i * m + j] = 0.0;
            }
        }
        out[i * m + i] += moved;
    }
    StochasticMatrix::from_flat_unchecked(m, out)
}

/// Values of `d(k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingCoefficients {
    Schedule(Schedule),
    /// `d(k) = table[k]`, the last entry repeating.
    Table(Vec<f64>),
}

/// `d(k)` together with the switch-on step `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingSchedule {
    pub switch_on: u64,
    pub d: MixingCoefficients,
}

impl MixingSchedule {
    pub fn new(switch_on: u64, d: MixingCoefficients) -> Result<Self> {
        let ok = match &d {
            MixingCoefficients::Schedule(s) => {
                s.validate_nonnegative("mixing coefficient").is_ok() && s.is_nonincreasing() && s.value(switch_on) <= 0.5
            }
            MixingCoefficients::Table(t) => !t.is_empty() && t.iter().all(|v| (0.0..=0.5).contains(v)),
        };
        if !ok {
            return Err(Error::InvalidParameter("mixing coefficients must lie in [0, 1/2]".into()));
        }
        Ok(Self { switch_on, d })
    }

    pub fn value(&self, k: u64) -> f64 {
        match &self.d {
            MixingCoefficients::Schedule(s) => s.value(k),
            MixingCoefficients::Table(t) => t[(k as usize).min(t.len() - 1)],
        }
    }
}

/// `U^(r)(k) = (1 - d(k)) W̃^(r)(k) + (d(k) / m_r) e e^T` per block; `U(k) = I` for `k < N`.
pub fn mixing_perturbation(wtilde: &StochasticMatrix, pattern: &ErgodicityPattern, schedule: &MixingSchedule, k: u64) -> Result<StochasticMatrix> {
    let m = wtilde.dim();
    if pattern.dim() != m {
        return Err(Error::InvalidPartition(format!("pattern covers {} indices, matrix has {m}", pattern.dim())));
    }
    let labels = pattern.labels();
    for i in 0..m {
        for j in 0..m {
            let v = wtilde.get(i, j);
            if labels[i] != labels[j] && v != 0.0 {
                return Err(Error::NotBlockDiagonal {
                    row: i + 1,
                    col: j + 1,
                    value: v,
                });
            }
        }
    }
    if k < schedule.switch_on {
        return Ok(StochasticMatrix::identity(m));
    }
    let d = schedule.value(k);
    let mut out = vec![0.0; m * m];
    for block in pattern.blocks() {
        let share = d / block.len() as f64;
        for &i in block {
            for &j in block {
                out[i * m + j] = (1.0 - d) * wtilde.get(i, j) + share;
            }
        }
    }
    Ok(StochasticMatrix::from_flat_unchecked(m, out))
}

/// The default `d(k) = min(1/2, (4 m^2 / pi_min) M̂(k))` for `k < horizon`, with
/// `M̂(k)` the largest entrywise gap between `E[W(k)]` and its diagonal approximation.
pub fn proof_mixing_schedule(model: &dyn ChainModel, pattern: &ErgodicityPattern, pi_min: f64, switch_on: u64, horizon: u64) -> Result<MixingSchedule> {
    if !(pi_min > 0.0) {
        return Err(Error::InvalidParameter(format!("pi_min must be positive, got {pi_min}")));
    }
    let m = model.dim() as f64;
    let mut table = Vec::with_capacity(horizon as usize);
    for k in 0..horizon.max(1) {
        let e = model.expected(k)?;
        let approx = diagonal_approximation(&e, pattern)?;
        let dev = e
            .as_flat()
            .iter()
            .zip(approx.as_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        table.push((4.0 * m * m / pi_min * dev).min(0.5));
    }
    MixingSchedule::new(switch_on, MixingCoefficients::Table(table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceVerdict {
    L1Close,
    Diverging,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum VerdictSource {
    Analytic { reason: String },
    Heuristic { threshold: f64 },
}

/// Truncated `sum_k |A_ij(k) - B_ij(k)|` and `sum_k |A_ij(k) - B_ij(k)|^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDistanceReport {
    pub m: usize,
    pub horizon: u64,
    pub mode: FlowMode,
    pub per_entry_l1: Vec<Vec<f64>>,
    pub per_entry_l2: Vec<Vec<f64>>,
    pub total_l1: f64,
    /// Complete dyadic windows of the total ℓ1 series.
    pub window_sums: Vec<f64>,
    pub verdict: DistanceVerdict,
    pub source: VerdictSource,
}

impl ChainDistanceReport {
    pub fn max_entry_l2(&self) -> f64 {
        self.per_entry_l2.iter().flatten().copied().fold(0.0, f64::max)
    }
}

fn same_model(a: &dyn ChainModel, b: &dyn ChainModel) -> bool {
    std::ptr::addr_eq(a as *const dyn ChainModel, b as *const dyn ChainModel)
}

fn strip_prefix(model: &dyn ChainModel) -> &dyn ChainModel {
    match model.lineage() {
        Some(Lineage::IdentityPrefix { base, .. }) => strip_prefix(base.as_ref()),
        _ => model,
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn analytic_distance(a: &dyn ChainModel, b: &dyn ChainModel) -> Option<(DistanceVerdict, String)> {
    let (a, b) = (strip_prefix(a), strip_prefix(b));
    if same_model(a, b) {
        return Some((DistanceVerdict::L1Close, "chains agree after finitely many steps".into()));
    }
    match (a.lineage(), b.lineage()) {
        (Some(Lineage::Diagonal { pattern, base }), _) if same_model(strip_prefix(base.as_ref()), b) => diagonal_verdict(base, pattern),
        (_, Some(Lineage::Diagonal { pattern, base })) if same_model(strip_prefix(base.as_ref()), a) => diagonal_verdict(base, pattern),
        (Some(Lineage::Harmonic), Some(Lineage::Harmonic)) => Some((DistanceVerdict::L1Close, "identical deterministic chains".into())),
        (Some(Lineage::Harmonic), Some(Lineage::Periodic(_))) | (Some(Lineage::Periodic(_)), Some(Lineage::Harmonic)) => Some((
            DistanceVerdict::Diverging,
            "harmonic chain against a periodic chain: per-step distance is bounded below by a harmonic term".into(),
        )),
        (Some(Lineage::Periodic(x)), Some(Lineage::Periodic(y))) => {
            let period = x.len() / gcd(x.len(), y.len()) * y.len();
            if period > 1_000_000 {
                return None;
            }
            let differ = (0..period).any(|k| x[k % x.len()] != y[k % y.len()]);
            if differ {
                Some((DistanceVerdict::Diverging, "periodic chains differ once per period".into()))
            } else {
                Some((DistanceVerdict::L1Close, "periodic chains coincide".into()))
            }
        }
        _ => None,
    }
}

fn diagonal_verdict(base: &Arc<dyn ChainModel>, pattern: &ErgodicityPattern) -> Option<(DistanceVerdict, String)> {
    // The per-step distance is between the cross-block flow and twice of it.
    let rates = base.pair_rates()?;
    let m = base.dim();
    let labels = pattern.labels();
    let mut all_summable = true;
    for i in 0..m {
        for j in i + 1..m {
            if labels[i] == labels[j] {
                continue;
            }
            match rates[pair_index(m, i, j)].map(|r| r.series_class()) {
                Some(SeriesClass::Divergent) => {
                    return Some((
                        DistanceVerdict::Diverging,
                        format!("cross-block flow of pair {{{}, {}}} diverges", i + 1, j + 1),
                    ))
                }
                Some(SeriesClass::Summable) => {}
                _ => all_summable = false,
            }
        }
    }
    all_summable.then(|| (DistanceVerdict::L1Close, "every cross-block flow is summable".into()))
}

/// Truncated entrywise distance between two chains over `0..horizon`.
///
/// Sampled mode draws both chains from the same per-step streams.
pub fn l1_chain_distance(a: &dyn ChainModel, b: &dyn ChainModel, horizon: u64, mode: FlowMode, threshold: f64) -> Result<ChainDistanceReport> {
    let m = a.dim();
    if b.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: b.dim(),
        });
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut l1 = vec![0.0; m * m];
    let mut l2 = vec![0.0; m * m];
    let mut windows = vec![0.0; window_of(horizon - 1) + 1];
    let streams = match mode {
        FlowMode::Sampled { seed } => Some(PathStreams::new(seed)),
        FlowMode::Expected => None,
    };
    for k in 0..horizon {
        let (wa, wb) = match &streams {
            Some(s) => (a.sample(k, &mut s.at(k)), b.sample(k, &mut s.at(k))),
            None => (a.expected(k)?, b.expected(k)?),
        };
        let mut step = 0.0;
        for (n, (x, y)) in wa.as_flat().iter().zip(wb.as_flat()).enumerate() {
            let d = (x - y).abs();
            l1[n] += d;
            l2[n] += d * d;
            step += d;
        }
        windows[window_of(k)] += step;
    }
    windows.truncate(complete_windows(horizon));
    let total_l1: f64 = l1.iter().sum();
    let (verdict, source) = match analytic_distance(a, b) {
        Some((v, reason)) => (v, VerdictSource::Analytic { reason }),
        None => {
            let v = if total_l1 == 0.0 || windows.last().is_some_and(|&w| w <= 1e-3 * total_l1) {
                DistanceVerdict::L1Close
            } else if crate::flow::sustained_growth(&windows, threshold) {
                DistanceVerdict::Diverging
            } else {
                DistanceVerdict::Unknown
            };
            (v, VerdictSource::Heuristic { threshold })
        }
    };
    let rows = |v: Vec<f64>| v.chunks(m).map(|c| c.to_vec()).collect();
    Ok(ChainDistanceReport {
        m,
        horizon,
        mode,
        per_entry_l1: rows(l1),
        per_entry_l2: rows(l2),
        total_l1,
        window_sums: windows,
        verdict,
        source,
    })
}

/// Whether every nontrivial sub-cut of a block carries a divergent flow series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockFlowCheck {
    pub block: Vec<usize>,
    pub subcuts: usize,
    pub verdict: SeriesClass,
    /// A sub-cut (1-based) whose series is summable or undecided.
    pub witness: Option<Vec<usize>>,
}

/// Checks the infinite flow property of each block chain analytically.
///
/// Within-block weights are untouched by the diagonal approximation, so a
/// sub-cut's series diverges iff one of its crossing pairs does in the model.
pub fn block_infinite_flow(model: &dyn ChainModel, pattern: &ErgodicityPattern) -> Result<Vec<BlockFlowCheck>> {
    if pattern.dim() != model.dim() {
        return Err(Error::InvalidPartition(format!(
            "pattern covers {} indices, model has {}",
            pattern.dim(),
            model.dim()
        )));
    }
    let descriptor = DivergenceDescriptor::from_model(model);
    let mut out = Vec::with_capacity(pattern.len());
    for block in pattern.blocks() {
        let n = block.len();
        if n > 20 {
            return Err(Error::InvalidParameter(format!("block of size {n} is too large to enumerate")));
        }
        let one_based: Vec<usize> = block.iter().map(|i| i + 1).collect();
        let mut check = BlockFlowCheck {
            block: one_based,
            subcuts: 0,
            verdict: SeriesClass::Divergent,
            witness: None,
        };
        // Sub-cuts containing the block's first member; complements give the rest.
        for rest in 0u64..(1u64 << (n.max(1) - 1)) {
            let mask = rest << 1 | 1;
            if mask == (1u64 << n) - 1 {
                continue;
            }
            check.subcuts += 1;
            let mut class = SeriesClass::Summable;
            for a in (0..n).filter(|a| mask >> a & 1 == 1) {
                for b in (0..n).filter(|b| mask >> b & 1 == 0) {
                    let tag = descriptor.as_ref().map_or(SeriesClass::Unknown, |d| d.tag(block[a], block[b]));
                    class = match (class, tag) {
                        (SeriesClass::Divergent, _) | (_, SeriesClass::Divergent) => SeriesClass::Divergent,
                        (SeriesClass::Unknown, _) | (_, SeriesClass::Unknown) => SeriesClass::Unknown,
                        _ => SeriesClass::Summable,
                    };
                }
            }
            if class != SeriesClass::Divergent && check.verdict != SeriesClass::Summable {
                check.verdict = class;
                check.witness = Some((0..n).filter(|a| mask >> a & 1 == 1).map(|a| block[a] + 1).collect());
            }
        }
        out.push(check);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DeterministicSequence, HarmonicPair, IdentityPrefix, SharedModel};

    fn sample3() -> StochasticMatrix {
        StochasticMatrix::validate(&[vec![0.6, 0.2, 0.2], vec![0.1, 0.8, 0.1], vec![0.0, 0.3, 0.7]], 1e-12).unwrap()
    }

    fn close(a: &StochasticMatrix, b: &[f64]) -> bool {
        a.as_flat().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn cut_zero_example() {
        let b = cut_zero_approximation(&sample3(), &IndexSet::new(3, [0, 1]).unwrap()).unwrap();
        assert!(close(&b, &[0.8, 0.2, 0.0, 0.1, 0.9, 0.0, 0.0, 0.0, 1.0]));
        let block = StochasticMatrix::validate(&[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]], 1e-12).unwrap();
        assert_eq!(cut_zero_approximation(&block, &IndexSet::new(3, [2]).unwrap()).unwrap(), block);
        assert_eq!(
            cut_zero_approximation(&block, &IndexSet::new(3, [0, 1, 2]).unwrap()),
            Err(Error::TrivialCut)
        );
    }

    #[test]
    fn diagonal_example() {
        let w = sample3();
        let p = ErgodicityPattern::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let d = diagonal_approximation(&w, &p).unwrap();
        assert!(close(&d, &[0.8, 0.2, 0.0, 0.1, 0.9, 0.0, 0.0, 0.0, 1.0]));
        assert!((w.l1_distance(&d).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(diagonal_approximation(&w, &ErgodicityPattern::whole(3)).unwrap(), w);
    }

    #[test]
    fn mixing_examples() {
        let w = StochasticMatrix::validate(&[vec![0.8, 0.2], vec![0.1, 0.9]], 1e-12).unwrap();
        let p = ErgodicityPattern::whole(2);
        let half = MixingSchedule::new(0, MixingCoefficients::Schedule(Schedule::Constant { c: 0.5 })).unwrap();
        let u = mixing_perturbation(&w, &p, &half, 3).unwrap();
        assert!(close(&u, &[0.65, 0.35, 0.3, 0.7]));
        let zero = MixingSchedule::new(0, MixingCoefficients::Schedule(Schedule::Constant { c: 0.0 })).unwrap();
        assert_eq!(mixing_perturbation(&w, &p, &zero, 0).unwrap(), w);
        let late = MixingSchedule::new(10, MixingCoefficients::Table(vec![0.5])).unwrap();
        assert_eq!(mixing_perturbation(&w, &p, &late, 9).unwrap(), StochasticMatrix::identity(2));
        let split = ErgodicityPattern::singletons(2);
        assert!(matches!(
            mixing_perturbation(&w, &split, &half, 0),
            Err(Error::NotBlockDiagonal { row: 1, col: 2, .. })
        ));
        assert!(MixingSchedule::new(0, MixingCoefficients::Table(vec![0.6])).is_err());
    }

    #[test]
    fn distance_verdicts() {
        let harmonic: SharedModel = Arc::new(HarmonicPair);
        let identity = DeterministicSequence::identity(2);
        let r = l1_chain_distance(harmonic.as_ref(), &identity, 1 << 10, FlowMode::Expected, 0.1).unwrap();
        assert_eq!(r.verdict, DistanceVerdict::Diverging);
        let same = l1_chain_distance(harmonic.as_ref(), harmonic.as_ref(), 100, FlowMode::Expected, 0.1).unwrap();
        assert_eq!(same.total_l1, 0.0);
        assert_eq!(same.verdict, DistanceVerdict::L1Close);
        let prefix = IdentityPrefix::new(harmonic.clone(), 5);
        let r = l1_chain_distance(&prefix, harmonic.as_ref(), 1000, FlowMode::Expected, 0.1).unwrap();
        assert_eq!(r.verdict, DistanceVerdict::L1Close);
        assert!(r.total_l1 <= 2.0 * 2.0 * 5.0);
    }

    #[test]
    fn block_flow_checks() {
        let harmonic = HarmonicPair;
        let checks = block_infinite_flow(&harmonic, &ErgodicityPattern::whole(2)).unwrap();
        assert_eq!(checks[0].subcuts, 1);
        assert_eq!(checks[0].verdict, SeriesClass::Divergent);
        let checks = block_infinite_flow(&DeterministicSequence::identity(3), &ErgodicityPattern::whole(3)).unwrap();
        assert_eq!(checks[0].subcuts, 3);
        assert_eq!(checks[0].verdict, SeriesClass::Summable);
    }
}
