//! Independent random chain models.
//!
//! Every model draws `W(k)` from a caller-owned [`StepRng`]. Models that admit
//! a closed form also expose `E[W(k)]`, the same-row product moments
//! `E[W_la(k) W_lb(k)]`, and the asymptotic rate of each expected pair flow,
//! which is what decides the edges of the infinite flow graph analytically.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;

use crate::approx::diagonal_approximation;
use crate::error::{Error, Result};
use crate::flow::{pair_count, pair_index, ErgodicityPattern};
use crate::schedule::{Rate, Schedule};
use crate::stochastic::StochasticMatrix;
use crate::streams::StepRng;

/// Same-row second moments `E[W_la W_lb]` of one step, stored `[l][a][b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowMoments {
    m: usize,
    data: Vec<f64>,
}

impl RowMoments {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    pub fn identity(m: usize) -> Self {
        let mut r = Self::zeros(m);
        for l in 0..m {
            *r.at_mut(l, l, l) = 1.0;
        }
        r
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, l: usize, a: usize, b: usize) -> f64 {
        self.data[(l * self.m + a) * self.m + b]
    }

    #[inline]
    fn at_mut(&mut self, l: usize, a: usize, b: usize) -> &mut f64 {
        &mut self.data[(l * self.m + a) * self.m + b]
    }

    fn row(&self, l: usize) -> &[f64] {
        let mm = self.m * self.m;
        &self.data[l * mm..(l + 1) * mm]
    }

    fn row_mut(&mut self, l: usize) -> &mut [f64] {
        let mm = self.m * self.m;
        &mut self.data[l * mm..(l + 1) * mm]
    }

    /// Accumulates `prob * W_la W_lb` over the nonzeros of each row.
    pub fn add_outcome(&mut self, prob: f64, w: &StochasticMatrix) {
        let m = self.m;
        let mut nz = Vec::with_capacity(m);
        for l in 0..m {
            nz.clear();
            nz.extend(w.row(l).iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(a, &v)| (a, v)));
            for &(a, va) in &nz {
                for &(b, vb) in &nz {
                    *self.at_mut(l, a, b) += prob * va * vb;
                }
            }
        }
    }

    /// `H_ij = E[(W^T W)_ij] = E[W^i^T W^j]`.
    pub fn h(&self, i: usize, j: usize) -> f64 {
        (0..self.m).map(|l| self.get(l, i, j)).sum()
    }

    pub fn h_matrix(&self) -> Vec<f64> {
        let m = self.m;
        let mut h = vec![0.0; m * m];
        for l in 0..m {
            for a in 0..m {
                for b in 0..m {
                    h[a * m + b] += self.get(l, a, b);
                }
            }
        }
        h
    }

    /// `E[W_ii W_ij + W_jj W_ji]`, the left side of the feedback property.
    pub fn feedback_left(&self, i: usize, j: usize) -> f64 {
        self.get(i, i, j) + self.get(j, j, i)
    }

    /// Moments of `M W` row by row, where row `l` of the image is `maps[l] * W_l`.
    fn transformed(&self, maps: &[Vec<f64>]) -> Self {
        let m = self.m;
        let mut out = Self::zeros(m);
        let mut tmp = vec![0.0; m * m];
        for l in 0..m {
            let map = &maps[l];
            let r = self.row(l);
            // tmp = map * r
            for a in 0..m {
                for b in 0..m {
                    let mut s = 0.0;
                    for c in 0..m {
                        let f = map[a * m + c];
                        if f != 0.0 {
                            s += f * r[c * m + b];
                        }
                    }
                    tmp[a * m + b] = s;
                }
            }
            let dst = out.row_mut(l);
            for a in 0..m {
                for b in 0..m {
                    let mut s = 0.0;
                    for c in 0..m {
                        let f = map[b * m + c];
                        if f != 0.0 {
                            s += tmp[a * m + c] * f;
                        }
                    }
                    dst[a * m + b] = s;
                }
            }
        }
        out
    }
}

/// How a model was derived from other models; used to decide ℓ1 closeness analytically.
#[derive(Debug, Clone, Copy)]
pub enum Lineage<'a> {
    Harmonic,
    Periodic(&'a [StochasticMatrix]),
    IdentityPrefix {
        steps: u64,
        base: &'a SharedModel,
    },
    Diagonal {
        pattern: &'a ErgodicityPattern,
        base: &'a SharedModel,
    },
}

/// An independent random chain `{W(k)}`.
///
/// Only [`ChainModel::sample`] is required. Models without a closed form
/// leave the other methods at their defaults, which disables expected-chain
/// analyses with [`Error::NoClosedForm`].
pub trait ChainModel: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Draws `W(k)`. Identical `(rng state, k)` must give identical matrices.
    fn sample(&self, k: u64, rng: &mut StepRng) -> StochasticMatrix;

    fn expected(&self, _k: u64) -> Result<StochasticMatrix> {
        Err(Error::NoClosedForm(self.kind().to_string()))
    }

    fn row_moments(&self, _k: u64) -> Result<RowMoments> {
        Err(Error::NoClosedForm(self.kind().to_string()))
    }

    /// Asymptotic rate of `E[W_ij(k) + W_ji(k)]` per unordered pair (see
    /// [`pair_index`]); `None` entries are unknown.
    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        None
    }

    fn lineage(&self) -> Option<Lineage<'_>> {
        None
    }
}

pub type SharedModel = Arc<dyn ChainModel>;

/// `E[W(k)]` of a model, when it has one.
pub fn expected_matrix(model: &dyn ChainModel, k: u64) -> Result<StochasticMatrix> {
    model.expected(k)
}

fn check_pair(m: usize, i: usize, j: usize) -> Result<()> {
    for x in [i, j] {
        if x >= m {
            return Err(Error::IndexOutOfRange { index: x + 1, m });
        }
    }
    if i == j {
        return Err(Error::EqualIndices(i + 1));
    }
    Ok(())
}

fn expected_from_outcomes<'a>(m: usize, outcomes: impl Iterator<Item = (f64, StochasticMatrix)>) -> StochasticMatrix {
    let mut acc = vec![0.0; m * m];
    for (p, w) in outcomes {
        for (a, b) in acc.iter_mut().zip(w.as_flat()) {
            *a += p * b;
        }
    }
    StochasticMatrix::from_flat_unchecked(m, acc)
}

fn moments_from_outcomes(m: usize, outcomes: impl Iterator<Item = (f64, StochasticMatrix)>) -> RowMoments {
    let mut r = RowMoments::zeros(m);
    for (p, w) in outcomes {
        r.add_outcome(p, &w);
    }
    r
}

// ---------------------------------------------------------------------------
// Gossip

/// `I - (1/2)(e_i - e_j)(e_i - e_j)^T`.
pub fn gossip_matrix(m: usize, i: usize, j: usize) -> StochasticMatrix {
    let mut w = StochasticMatrix::identity(m).as_flat().to_vec();
    w[i * m + i] = 0.5;
    w[j * m + j] = 0.5;
    w[i * m + j] = 0.5;
    w[j * m + i] = 0.5;
    StochasticMatrix::from_flat_unchecked(m, w)
}

/// Draws one gossip matrix from explicit link probabilities `(i, j, P_ij)`.
pub fn gossip_sample(m: usize, probabilities: &[(usize, usize, f64)], k: u64, rng: &mut StepRng) -> Result<StochasticMatrix> {
    let mut mass = 0.0;
    for &(i, j, p) in probabilities {
        check_pair(m, i, j)?;
        if !(p >= 0.0) {
            return Err(Error::DegenerateSchedule { step: k, mass: p });
        }
        mass += p;
    }
    if (mass - 1.0).abs() > 1e-12 {
        return Err(Error::DegenerateSchedule { step: k, mass });
    }
    let (i, j) = pick_link(probabilities.iter().map(|&(i, j, p)| (i, j, p)), mass, rng);
    Ok(gossip_matrix(m, i, j))
}

fn pick_link(weights: impl Iterator<Item = (usize, usize, f64)> + Clone, total: f64, rng: &mut StepRng) -> (usize, usize) {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, j, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some((i, j));
        if u < acc {
            return (i, j);
        }
    }
    last.expect("schedule has positive mass")
}

/// A gossip link with a nonnegative activation weight schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub i: usize,
    pub j: usize,
    pub weight: Schedule,
}

/// Time-varying gossip: at step `k` exactly one link `{i, j}` averages, with
/// probability `P_ij(k) = w_ij(k) / sum w(k)`.
#[derive(Debug, Clone)]
pub struct Gossip {
    m: usize,
    links: Vec<Link>,
}

impl Gossip {
    pub fn new(m: usize, links: Vec<Link>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter("gossip needs at least two agents".into()));
        }
        let mut seen = vec![false; pair_count(m)];
        for link in &links {
            check_pair(m, link.i, link.j)?;
            link.weight.validate_nonnegative("gossip link weight")?;
            let idx = pair_index(m, link.i, link.j);
            if seen[idx] {
                return Err(Error::InvalidParameter(format!(
                    "gossip link {{{}, {}}} listed twice",
                    link.i + 1,
                    link.j + 1
                )));
            }
            seen[idx] = true;
        }
        // Weights that never vanish in floating point keep P(k) well defined.
        let persistent = links.iter().any(|l| match l.weight {
            Schedule::Constant { c } | Schedule::Power { c, .. } => c > 0.0,
            Schedule::Geometric { c, r } => c > 0.0 && r >= 1.0,
        });
        if !persistent {
            return Err(Error::DegenerateSchedule { step: 0, mass: 0.0 });
        }
        Ok(Self { m, links })
    }

    /// Uniform activation over the complete graph.
    pub fn complete(m: usize) -> Result<Self> {
        let mut links = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                links.push(Link {
                    i,
                    j,
                    weight: Schedule::Constant { c: 1.0 },
                });
            }
        }
        Self::new(m, links)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// `(i, j, P_ij(k))` for every listed link.
    pub fn activation_probabilities(&self, k: u64) -> Vec<(usize, usize, f64)> {
        let weights: Vec<f64> = self.links.iter().map(|l| l.weight.value(k)).collect();
        let total: f64 = weights.iter().sum();
        self.links
            .iter()
            .zip(weights)
            .map(|(l, w)| (l.i, l.j, w / total))
            .collect()
    }

    fn outcomes(&self, k: u64) -> impl Iterator<Item = (f64, StochasticMatrix)> + '_ {
        let m = self.m;
        self.activation_probabilities(k)
            .into_iter()
            .filter(|&(_, _, p)| p > 0.0)
            .map(move |(i, j, p)| (p, gossip_matrix(m, i, j)))
    }
}

impl ChainModel for Gossip {
    fn kind(&self) -> &'static str {
        "gossip"
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn sample(&self, k: u64, rng: &mut StepRng) -> StochasticMatrix {
        let weights: Vec<(usize, usize, f64)> = self.links.iter().map(|l| (l.i, l.j, l.weight.value(k))).collect();
        let total: f64 = weights.iter().map(|w| w.2).sum();
        let (i, j) = pick_link(weights.iter().copied(), total, rng);
        gossip_matrix(self.m, i, j)
    }

    fn expected(&self, k: u64) -> Result<StochasticMatrix> {
        Ok(expected_from_outcomes(self.m, self.outcomes(k)))
    }

    fn row_moments(&self, k: u64) -> Result<RowMoments> {
        Ok(moments_from_outcomes(self.m, self.outcomes(k)))
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        let total = self.links.iter().fold(Rate::ZERO, |acc, l| acc.plus(l.weight.rate()));
        let mut rates = vec![Some(Rate::ZERO); pair_count(self.m)];
        for l in &self.links {
            // E[W_ij + W_ji] = P_ij(k)
            rates[pair_index(self.m, l.i, l.j)] = Some(l.weight.rate().div(total));
        }
        Some(rates)
    }
}

// ---------------------------------------------------------------------------
// Broadcast gossip

/// `I - gamma sum_{j in N_i} e_j (e_j - e_i)^T`.
pub fn broadcast_matrix(m: usize, broadcaster: usize, neighbors: &[usize], gamma: f64) -> StochasticMatrix {
    let mut w = StochasticMatrix::identity(m).as_flat().to_vec();
    for &j in neighbors {
        w[j * m + j] = 1.0 - gamma;
        w[j * m + broadcaster] = gamma;
    }
    StochasticMatrix::from_flat_unchecked(m, w)
}

/// Broadcast gossip on a periodic sequence of undirected graphs
/// (`G(k) = graphs[k mod period]`): one uniformly chosen agent broadcasts and
/// each neighbor moves a fraction `gamma(k)` toward it.
#[derive(Debug, Clone)]
pub struct BroadcastGossip {
    m: usize,
    neighbors: Vec<Vec<Vec<usize>>>,
    edge_frequency: Vec<f64>,
    gamma: Schedule,
}

impl BroadcastGossip {
    pub fn new(m: usize, graphs: Vec<Vec<(usize, usize)>>, gamma: Schedule) -> Result<Self> {
        if m < 1 {
            return Err(Error::Empty);
        }
        if graphs.is_empty() {
            return Err(Error::InvalidParameter("broadcast topology needs at least one graph".into()));
        }
        gamma.validate_mixing("broadcast mixing parameter")?;
        let mut neighbors = Vec::with_capacity(graphs.len());
        let mut edge_frequency = vec![0.0; pair_count(m)];
        for edges in &graphs {
            let mut adj = vec![Vec::new(); m];
            let mut present = vec![false; pair_count(m)];
            for &(i, j) in edges {
                check_pair(m, i, j)?;
                let idx = pair_index(m, i, j);
                if present[idx] {
                    continue;
                }
                present[idx] = true;
                adj[i].push(j);
                adj[j].push(i);
            }
            for list in &mut adj {
                list.sort_unstable();
            }
            for (f, p) in edge_frequency.iter_mut().zip(&present) {
                if *p {
                    *f += 1.0 / graphs.len() as f64;
                }
            }
            neighbors.push(adj);
        }
        Ok(Self {
            m,
            neighbors,
            edge_frequency,
            gamma,
        })
    }

    pub fn static_graph(m: usize, edges: Vec<(usize, usize)>, gamma: Schedule) -> Result<Self> {
        Self::new(m, vec![edges], gamma)
    }

    /// Cycle `1 - 2 - ... - m - 1`.
    pub fn ring(m: usize, gamma: Schedule) -> Result<Self> {
        let edges = (0..m).map(|i| (i, (i + 1) % m)).filter(|(i, j)| i != j).collect();
        Self::static_graph(m, edges, gamma)
    }

    pub fn gamma(&self) -> Schedule {
        self.gamma
    }

    pub fn neighbors_at(&self, k: u64) -> &[Vec<usize>] {
        &self.neighbors[(k % self.neighbors.len() as u64) as usize]
    }

    fn outcomes(&self, k: u64) -> impl Iterator<Item = (f64, StochasticMatrix)> + '_ {
        let gamma = self.gamma.value(k);
        let adj = self.neighbors_at(k);
        let p = 1.0 / self.m as f64;
        (0..self.m).map(move |i| (p, broadcast_matrix(self.m, i, &adj[i], gamma)))
    }
}

impl ChainModel for BroadcastGossip {
    fn kind(&self) -> &'static str {
        "broadcast_gossip"
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn sample(&self, k: u64, rng: &mut StepRng) -> StochasticMatrix {
        let i = rng.random_range(0..self.m);
        broadcast_matrix(self.m, i, &self.neighbors_at(k)[i], self.gamma.value(k))
    }

    fn expected(&self, k: u64) -> Result<StochasticMatrix> {
        Ok(expected_from_outcomes(self.m, self.outcomes(k)))
    }

    fn row_moments(&self, k: u64) -> Result<RowMoments> {
        Ok(moments_from_outcomes(self.m, self.outcomes(k)))
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        // E[W_ij + W_ji] = 2 gamma(k) / m on steps where {i, j} is an edge of G(k).
        let base = self.gamma.rate().scale(2.0 / self.m as f64);
        Some(self.edge_frequency.iter().map(|&f| Some(base.scale(f))).collect())
    }
}

// ---------------------------------------------------------------------------
// Link failures

/// Binary failure pattern `F` with zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureMatrix {
    m: usize,
    failed: Vec<bool>,
}

impl FailureMatrix {
    pub fn none(m: usize) -> Self {
        Self {
            m,
            failed: vec![false; m * m],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        let mut failed = Vec::with_capacity(m * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::NonSquare {
                    row: i + 1,
                    len: row.len(),
                    expected: m,
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 || (i == j && v != 0) {
                    return Err(Error::NonBinaryFailureMatrix { row: i + 1, col: j + 1 });
                }
                failed.push(v == 1);
            }
        }
        Ok(Self { m, failed })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn is_failed(&self, i: usize, j: usize) -> bool {
        self.failed[i * self.m + j]
    }
}

/// `U = W .* (ee^T - F) + diag([W .* F] e)`.
pub fn link_failure_compose(w: &StochasticMatrix, f: &FailureMatrix) -> Result<StochasticMatrix> {
    w.check_dim(f.dim())?;
    let m = w.dim();
    let mut u = w.as_flat().to_vec();
    for i in 0..m {
        let mut moved = 0.0;
        for j in 0..m {
            if j != i && f.is_failed(i, j) {
                moved += u[i * m + j];
                u[i * m + j] = 0.0;
            }
        }
        u[i * m + i] += moved;
    }
    Ok(StochasticMatrix::from_flat_unchecked(m, u))
}

/// Off-diagonal entries fail independently with probability `p`.
pub fn uniform_failure_sample(p: f64, m: usize, rng: &mut StepRng) -> FailureMatrix {
    let mut failed = vec![false; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                failed[i * m + j] = rng.random::<f64>() < p;
            }
        }
    }
    FailureMatrix { m, failed }
}

/// Failure probability per step, given either as `p_k` or as `1 - p_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureSchedule {
    Failure(Schedule),
    Survival(Schedule),
}

impl FailureSchedule {
    pub fn probability(&self, k: u64) -> f64 {
        match self {
            FailureSchedule::Failure(s) => s.value(k),
            FailureSchedule::Survival(s) => 1.0 - s.value(k),
        }
    }

    fn survival_rate(&self) -> Rate {
        match self {
            FailureSchedule::Failure(s) => s.complement_rate(),
            FailureSchedule::Survival(s) => s.rate(),
        }
    }
}

/// A base model composed with an independent uniform link-failure process.
#[derive(Debug, Clone)]
pub struct LinkFailure {
    base: SharedModel,
    schedule: FailureSchedule,
}

impl LinkFailure {
    pub fn new(base: SharedModel, schedule: FailureSchedule) -> Result<Self> {
        match schedule {
            FailureSchedule::Failure(s) | FailureSchedule::Survival(s) => s.validate_probability("failure schedule")?,
        }
        Ok(Self { base, schedule })
    }

    pub fn base(&self) -> &SharedModel {
        &self.base
    }
}

impl ChainModel for LinkFailure {
    fn kind(&self) -> &'static str {
        "link_failure"
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample(&self, k: u64, rng: &mut StepRng) -> StochasticMatrix {
        // Base draws come first so the base path matches the bare model's path.
        let w = self.base.sample(k, rng);
        let f = uniform_failure_sample(self.schedule.probability(k), self.dim(), rng);
        link_failure_compose(&w, &f).expect("dimensions agree")
    }

    fn expected(&self, k: u64) -> Result<StochasticMatrix> {
        let p = self.schedule.probability(k);
        let m = self.dim();
        let base = self.base.expected(k)?;
        let mut u: Vec<f64> = base.as_flat().iter().map(|w| (1.0 - p) * w).collect();
        for i in 0..m {
            u[i * m + i] += p;
        }
        Ok(StochasticMatrix::from_flat_unchecked(m, u))
    }

    fn row_moments(&self, k: u64) -> Result<RowMoments> {
        let base = self.base.row_moments(k)?;
        let p = self.schedule.probability(k);
        let q = 1.0 - p;
        let m = self.dim();
        let mut out = RowMoments::zeros(m);
        for l in 0..m {
            let r = |a: usize, b: usize| base.get(l, a, b);
            let off: Vec<usize> = (0..m).filter(|&n| n != l).collect();
            for a in 0..m {
                for b in 0..m {
                    let v = match (a == l, b == l) {
                        (false, false) if a == b => q * r(a, a),
                        (false, false) => q * q * r(a, b),
                        (true, false) | (false, true) => {
                            let o = if a == l { b } else { a };
                            let spill: f64 = off.iter().filter(|&&n| n != o).map(|&n| r(n, o)).sum();
                            q * (r(l, o) + p * spill)
                        }
                        (true, true) => {
                            let mut v = r(l, l);
                            for &n in &off {
                                v += 2.0 * p * r(l, n) + p * r(n, n);
                                for &n2 in &off {
                                    if n2 != n {
                                        v += p * p * r(n, n2);
                                    }
                                }
                            }
                            v
                        }
                    };
                    *out.at_mut(l, a, b) = v;
                }
            }
        }
        Ok(out)
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        let survival = self.schedule.survival_rate();
        let base = self.base.pair_rates()?;
        Some(base.into_iter().map(|r| r.map(|r| r.mul(survival))).collect())
    }
}

// ---------------------------------------------------------------------------
// Deterministic chains

/// A periodic deterministic chain `A(k) = matrices[k mod period]`.
#[derive(Debug, Clone)]
pub struct DeterministicSequence {
    matrices: Vec<StochasticMatrix>,
}

impl DeterministicSequence {
    pub fn new(matrices: Vec<StochasticMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidParameter("deterministic sequence needs a matrix".into()))?;
        let m = first.dim();
        for w in &matrices {
            first.check_dim(w.dim())?;
        }
        let _ = m;
        Ok(Self { matrices })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrices: vec![StochasticMatrix::identity(m)],
        }
    }

    pub fn matrices(&self) -> &[StochasticMatrix] {
        &self.matrices
    }

    fn at(&self, k: u64) -> &StochasticMatrix {
        &self.matrices[(k % self.matrices.len() as u64) as usize]
    }
}

impl ChainModel for DeterministicSequence {
    fn kind(&self) -> &'static str {
        "deterministic_sequence"
    }

    fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    fn sample(&self, k: u64, _rng: &mut StepRng) -> StochasticMatrix {
        self.at(k).clone()
    }

    fn expected(&self, k: u64) -> Result<StochasticMatrix> {
        Ok(self.at(k).clone())
    }

    fn row_moments(&self, k: u64) -> Result<RowMoments> {
        Ok(moments_from_outcomes(self.dim(), std::iter::once((1.0, self.at(k).clone()))))
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        let m = self.dim();
        let period = self.matrices.len() as f64;
        let mut rates = Vec::with_capacity(pair_count(m));
        for i in 0..m {
            for j in i + 1..m {
                let mean: f64 = self.matrices.iter().map(|w| w.get(i, j) + w.get(j, i)).sum::<f64>() / period;
                rates.push(Some(Rate::new(mean, 0.0, 1.0)));
            }
        }
        Some(rates)
    }

    fn lineage(&self) -> Option<Lineage<'_>> {
        Some(Lineage::Periodic(&self.matrices))
    }
}

/// `[[1 - 1/(k+2), 1/(k+2)], [1/(k+2), 1 - 1/(k+2)]]`.
pub fn harmonic_pair_matrix(k: u64) -> StochasticMatrix {
    let a = 1.0 / (k as f64 + 2.0);
    StochasticMatrix::from_flat_unchecked(2, vec![1.0 - a, a, a, 1.0 - a])
}

/// The deterministic 2x2 chain of [`harmonic_pair_matrix`]: ergodic, while the
/// identity chain approximates it in every ℓp with `p > 1` but not in ℓ1.
#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicPair;

impl ChainModel for HarmonicPair {
    fn kind(&self) -> &'static str {
        "harmonic_pair"
    }

    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, k: u64, _rng: &mut StepRng) -> StochasticMatrix {
        harmonic_pair_matrix(k)
    }

    fn expected(&self, k: u64) -> Result<StochasticMatrix> {
        Ok(harmonic_pair_matrix(k))
    }

    fn row_moments(&self, k: u64) -> Result<RowMoments> {
        Ok(moments_from_outcomes(2, std::iter::once((1.0, harmonic_pair_matrix(k)))))
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        Some(vec![Some(Rate::new(2.0, 1.0, 1.0))])
    }

    fn lineage(&self) -> Option<Lineage<'_>> {
        Some(Lineage::Harmonic)
    }
}

// ---------------------------------------------------------------------------
// Counterexample models

/// Uniformly random permutation matrix (Fisher-Yates).
pub fn permutation_sample(m: usize, rng: &mut StepRng) -> StochasticMatrix {
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    let mut w = vec![0.0; m * m];
    for (i, &p) in perm.iter().enumerate() {
        w[i * m + p] = 1.0;
    }
    StochasticMatrix::from_flat_unchecked(m, w)
}

/// I.i.d. uniformly random permutation matrices.
#[derive(Debug, Clone, Copy)]
pub struct Permutation {
    m: usize,
}

impl Permutation {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty);
        }
        Ok(Self { m })
    }
}

impl ChainModel for Permutation {
    fn kind(&self) -> &'static str {
        "permutation"
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn sample(&self, _k: u64, rng: &mut StepRng) -> StochasticMatrix {
        permutation_sample(self.m, rng)
    }

    fn expected(&self, _k: u64) -> Result<StochasticMatrix> {
        Ok(StochasticMatrix::uniform(self.m))
    }

    fn row_moments(&self, _k: u64) -> Result<RowMoments> {
        // A row has a single 1, in a uniform column.
        let mut r = RowMoments::zeros(self.m);
        for l in 0..self.m {
            for a in 0..self.m {
                *r.at_mut(l, a, a) = 1.0 / self.m as f64;
            }
        }
        Ok(r)
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        Some(vec![Some(Rate::new(2.0 / self.m as f64, 0.0, 1.0)); pair_count(self.m)])
    }
}

/// Rows 1 and 3 fixed at `e_1`, `e_3`; row 2 uniform on the probability simplex.
pub fn simplex_row_sample(rng: &mut StepRng) -> StochasticMatrix {
    let e: [f64; 3] = [rng.sample(Exp1), rng.sample(Exp1), rng.sample(Exp1)];
    let total: f64 = e.iter().sum();
    let u = [e[0] / total, e[1] / total, 1.0 - e[0] / total - e[1] / total];
    let u2 = if u[2] < 0.0 { 0.0 } else { u[2] };
    StochasticMatrix::from_flat_unchecked(3, vec![1.0, 0.0, 0.0, u[0], u[1], u2, 0.0, 0.0, 1.0])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexRow;

impl ChainModel for SimplexRow {
    fn kind(&self) -> &'static str {
        "simplex_row"
    }

    fn dim(&self) -> usize {
        3
    }

    fn sample(&self, _k: u64, rng: &mut StepRng) -> StochasticMatrix {
        simplex_row_sample(rng)
    }

    fn expected(&self, _k: u64) -> Result<StochasticMatrix> {
        let third = 1.0 / 3.0;
        Ok(StochasticMatrix::from_flat_unchecked(
            3,
            vec![1.0, 0.0, 0.0, third, third, third, 0.0, 0.0, 1.0],
        ))
    }

    fn row_moments(&self, _k: u64) -> Result<RowMoments> {
        // Dirichlet(1,1,1): E[u_a^2] = 1/6, E[u_a u_b] = 1/12.
        let mut r = RowMoments::zeros(3);
        *r.at_mut(0, 0, 0) = 1.0;
        *r.at_mut(2, 2, 2) = 1.0;
        for a in 0..3 {
            for b in 0..3 {
                *r.at_mut(1, a, b) = if a == b { 1.0 / 6.0 } else { 1.0 / 12.0 };
            }
        }
        Ok(r)
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        let third = Some(Rate::new(1.0 / 3.0, 0.0, 1.0));
        // pairs {1,2}, {1,3}, {2,3}
        Some(vec![third, Some(Rate::ZERO), third])
    }
}

// ---------------------------------------------------------------------------
// Derived chains

/// `base` with its first `steps` matrices replaced by the identity.
#[derive(Debug, Clone)]
pub struct IdentityPrefix {
    base: SharedModel,
    steps: u64,
}

impl IdentityPrefix {
    pub fn new(base: SharedModel, steps: u64) -> Self {
        Self { base, steps }
    }
}

impl ChainModel for IdentityPrefix {
    fn kind(&self) -> &'static str {
        "identity_prefix"
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample(&self, k: u64, rng: &mut StepRng) -> StochasticMatrix {
        if k < self.steps {
            StochasticMatrix::identity(self.dim())
        } else {
            self.base.sample(k, rng)
        }
    }

    fn expected(&self, k: u64) -> Result<StochasticMatrix> {
        if k < self.steps {
            Ok(StochasticMatrix::identity(self.dim()))
        } else {
            self.base.expected(k)
        }
    }

    fn row_moments(&self, k: u64) -> Result<RowMoments> {
        if k < self.steps {
            Ok(RowMoments::identity(self.dim()))
        } else {
            self.base.row_moments(k)
        }
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        self.base.pair_rates()
    }

    fn lineage(&self) -> Option<Lineage<'_>> {
        Some(Lineage::IdentityPrefix {
            steps: self.steps,
            base: &self.base,
        })
    }
}

/// The diagonal approximation of `base` w.r.t. a fixed partition, applied to
/// every sample (so matched streams give matched base randomness).
#[derive(Debug, Clone)]
pub struct DiagonalApproximation {
    base: SharedModel,
    pattern: ErgodicityPattern,
}

impl DiagonalApproximation {
    pub fn new(base: SharedModel, pattern: ErgodicityPattern) -> Result<Self> {
        if pattern.dim() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: pattern.dim(),
            });
        }
        Ok(Self { base, pattern })
    }

    pub fn pattern(&self) -> &ErgodicityPattern {
        &self.pattern
    }

    fn row_maps(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        let label = self.pattern.labels();
        (0..m)
            .map(|l| {
                let mut map = vec![0.0; m * m];
                for a in 0..m {
                    if a == l {
                        map[a * m + a] = 1.0;
                        for c in 0..m {
                            if label[c] != label[l] {
                                map[a * m + c] = 1.0;
                            }
                        }
                    } else if label[a] == label[l] {
                        map[a * m + a] = 1.0;
                    }
                }
                map
            })
            .collect()
    }
}

impl ChainModel for DiagonalApproximation {
    fn kind(&self) -> &'static str {
        "diagonal_approximation"
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample(&self, k: u64, rng: &mut StepRng) -> StochasticMatrix {
        diagonal_approximation(&self.base.sample(k, rng), &self.pattern).expect("pattern matches dimension")
    }

    fn expected(&self, k: u64) -> Result<StochasticMatrix> {
        diagonal_approximation(&self.base.expected(k)?, &self.pattern)
    }

    fn row_moments(&self, k: u64) -> Result<RowMoments> {
        Ok(self.base.row_moments(k)?.transformed(&self.row_maps()))
    }

    fn pair_rates(&self) -> Option<Vec<Option<Rate>>> {
        let m = self.dim();
        let label = self.pattern.labels();
        let mut rates = self.base.pair_rates()?;
        for i in 0..m {
            for j in i + 1..m {
                if label[i] != label[j] {
                    rates[pair_index(m, i, j)] = Some(Rate::ZERO);
                }
            }
        }
        Some(rates)
    }

    fn lineage(&self) -> Option<Lineage<'_>> {
        Some(Lineage::Diagonal {
            pattern: &self.pattern,
            base: &self.base,
        })
    }
}
