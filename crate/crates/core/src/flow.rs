//! Pairwise flow accumulation, the infinite flow graph and its components.
//!
//! Partial sums are additionally bucketed into dyadic windows: window `t`
//! holds the steps with `2^t <= k + 1 < 2^(t+1)`. A harmonic series puts
//! constant mass in every window while a summable one leaves vanishing mass,
//! which is what the sustained-growth heuristic looks at.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::models::ChainModel;
use crate::schedule::SeriesClass;
use crate::stochastic::{IndexSet, StochasticMatrix};
use crate::streams::PathStreams;

/// Default heuristic threshold for the last two dyadic windows.
pub const DEFAULT_THRESHOLD: f64 = 0.1;
/// Default accumulation horizon, `2^14` steps.
pub const DEFAULT_HORIZON: u64 = 1 << 14;

pub fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Position of the unordered pair `{i, j}` in row-major upper-triangular order.
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(j < m && i != j);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

/// All unordered pairs `(i, j)`, `i < j`, in [`pair_index`] order.
pub fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
}

/// Dyadic window holding step `k`.
pub fn window_of(k: u64) -> usize {
    (63 - (k + 1).leading_zeros()) as usize
}

/// Number of windows lying entirely inside `0..horizon`.
pub fn complete_windows(horizon: u64) -> usize {
    // window t ends at step 2^(t+1) - 2
    window_of(horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowMode {
    /// One sample path from the given seed.
    Sampled { seed: u64 },
    /// The deterministic chain of expected matrices.
    Expected,
}

/// Truncated pair-flow series `sum_{k < horizon} (W_ij(k) + W_ji(k))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowAccumulator {
    m: usize,
    horizon: u64,
    mode: FlowMode,
    pair_sums: Vec<f64>,
    window_sums: Vec<Vec<f64>>,
}

impl FlowAccumulator {
    pub fn new(m: usize, mode: FlowMode) -> Self {
        Self {
            m,
            horizon: 0,
            mode,
            pair_sums: vec![0.0; pair_count(m)],
            window_sums: Vec::new(),
        }
    }

    /// Builds an accumulator directly from pair sums (no window data).
    pub fn from_pair_sums(m: usize, pair_sums: Vec<f64>) -> Result<Self> {
        if pair_sums.len() != pair_count(m) {
            return Err(Error::DimensionMismatch {
                expected: pair_count(m),
                found: pair_sums.len(),
            });
        }
        Ok(Self {
            m,
            horizon: 0,
            mode: FlowMode::Expected,
            pair_sums,
            window_sums: Vec::new(),
        })
    }

    /// Adds step `horizon` (steps must be pushed in order).
    pub fn push(&mut self, w: &StochasticMatrix) {
        debug_assert_eq!(w.dim(), self.m);
        let t = window_of(self.horizon);
        if self.window_sums.len() <= t {
            self.window_sums.resize(t + 1, vec![0.0; self.pair_sums.len()]);
        }
        let window = &mut self.window_sums[t];
        for (idx, (i, j)) in pairs(self.m).enumerate() {
            let f = w.get(i, j) + w.get(j, i);
            self.pair_sums[idx] += f;
            window[idx] += f;
        }
        self.horizon += 1;
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn mode(&self) -> FlowMode {
        self.mode
    }

    pub fn pair_sum(&self, i: usize, j: usize) -> f64 {
        self.pair_sums[pair_index(self.m, i, j)]
    }

    pub fn pair_sums(&self) -> &[f64] {
        &self.pair_sums
    }

    /// Window sums of one pair, complete windows only.
    pub fn pair_windows(&self, i: usize, j: usize) -> Vec<f64> {
        let idx = pair_index(self.m, i, j);
        self.window_sums
            .iter()
            .take(complete_windows(self.horizon))
            .map(|w| w[idx])
            .collect()
    }
}

/// Accumulates the pair flows of `model` over steps `0..horizon`.
pub fn accumulate_flows(model: &dyn ChainModel, horizon: u64, mode: FlowMode) -> Result<FlowAccumulator> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut acc = FlowAccumulator::new(model.dim(), mode);
    match mode {
        FlowMode::Expected => {
            for k in 0..horizon {
                acc.push(&model.expected(k)?);
            }
        }
        FlowMode::Sampled { seed } => {
            let streams = PathStreams::new(seed);
            for k in 0..horizon {
                acc.push(&model.sample(k, &mut streams.at(k)));
            }
        }
    }
    Ok(acc)
}

/// Truncated `sum_k W_S(k)` from the pair sums.
pub fn cut_flow_series(acc: &FlowAccumulator, cut: &IndexSet) -> Result<f64> {
    if cut.ambient() != acc.m {
        return Err(Error::DimensionMismatch {
            expected: acc.m,
            found: cut.ambient(),
        });
    }
    cut.require_nontrivial()?;
    let inside = cut.indicator();
    Ok(pairs(acc.m)
        .zip(&acc.pair_sums)
        .filter(|((i, j), _)| inside[*i] != inside[*j])
        .map(|(_, s)| s)
        .sum())
}

/// Analytic divergence tag per unordered pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceDescriptor {
    m: usize,
    tags: Vec<SeriesClass>,
}

impl DivergenceDescriptor {
    pub fn new(m: usize, tags: Vec<SeriesClass>) -> Result<Self> {
        if tags.len() != pair_count(m) {
            return Err(Error::DimensionMismatch {
                expected: pair_count(m),
                found: tags.len(),
            });
        }
        Ok(Self { m, tags })
    }

    /// Tags derived from the model's closed-form pair rates, if it has any.
    pub fn from_model(model: &dyn ChainModel) -> Option<Self> {
        let rates = model.pair_rates()?;
        let tags = rates
            .into_iter()
            .map(|r| r.map_or(SeriesClass::Unknown, |r| r.series_class()))
            .collect();
        Some(Self { m: model.dim(), tags })
    }

    pub fn tag(&self, i: usize, j: usize) -> SeriesClass {
        self.tags[pair_index(self.m, i, j)]
    }

    pub fn is_complete(&self) -> bool {
        self.tags.iter().all(|t| *t != SeriesClass::Unknown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Empirical { horizon: u64, threshold: f64 },
}

/// Classification of one unordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairClass {
    pub i: usize,
    pub j: usize,
    pub divergent: bool,
    pub provenance: Provenance,
}

impl Serialize for PairClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            pair: [usize; 2],
            divergent: bool,
            provenance: Provenance,
        }
        Repr {
            pair: [self.i + 1, self.j + 1],
            divergent: self.divergent,
            provenance: self.provenance,
        }
        .serialize(serializer)
    }
}

/// `G∞`: an edge for each pair whose flow series diverges.
#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteFlowGraph {
    m: usize,
    pairs: Vec<PairClass>,
}

impl InfiniteFlowGraph {
    /// A graph with analytic provenance from an explicit edge list.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut divergent = vec![false; pair_count(m)];
        for &(i, j) in edges {
            for x in [i, j] {
                if x >= m {
                    return Err(Error::IndexOutOfRange { index: x + 1, m });
                }
            }
            if i == j {
                return Err(Error::EqualIndices(i + 1));
            }
            divergent[pair_index(m, i, j)] = true;
        }
        Ok(Self {
            m,
            pairs: pairs(m)
                .zip(divergent)
                .map(|((i, j), divergent)| PairClass {
                    i,
                    j,
                    divergent,
                    provenance: Provenance::Analytic,
                })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn pairs(&self) -> &[PairClass] {
        &self.pairs
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().filter(|p| p.divergent).map(|p| (p.i, p.j))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.pairs[pair_index(self.m, i, j)].divergent
    }

    /// 1-based adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m];
        for (i, j) in self.edges() {
            adj[i].push(j + 1);
            adj[j].push(i + 1);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn all_analytic(&self) -> bool {
        self.pairs.iter().all(|p| p.provenance == Provenance::Analytic)
    }
}

impl Serialize for InfiniteFlowGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            m: usize,
            edges: Vec<[usize; 2]>,
            adjacency: Vec<Vec<usize>>,
            pairs: &'a [PairClass],
        }
        Repr {
            m: self.m,
            edges: self.edges().map(|(i, j)| [i + 1, j + 1]).collect(),
            adjacency: self.adjacency(),
            pairs: &self.pairs,
        }
        .serialize(serializer)
    }
}

/// Sustained growth: the last two complete windows both exceed `threshold`.
pub fn sustained_growth(windows: &[f64], threshold: f64) -> bool {
    windows.len() >= 2 && windows[windows.len() - 2..].iter().all(|&w| w > threshold)
}

/// Decides every pair, preferring analytic tags over the window heuristic.
pub fn classify_edges(acc: &FlowAccumulator, descriptor: Option<&DivergenceDescriptor>, threshold: f64) -> InfiniteFlowGraph {
    let classes = pairs(acc.m)
        .map(|(i, j)| {
            let tag = descriptor.map_or(SeriesClass::Unknown, |d| d.tag(i, j));
            let (divergent, provenance) = match tag {
                SeriesClass::Divergent => (true, Provenance::Analytic),
                SeriesClass::Summable => (false, Provenance::Analytic),
                SeriesClass::Unknown => (
                    sustained_growth(&acc.pair_windows(i, j), threshold),
                    Provenance::Empirical {
                        horizon: acc.horizon,
                        threshold,
                    },
                ),
            };
            PairClass {
                i,
                j,
                divergent,
                provenance,
            }
        })
        .collect();
    InfiniteFlowGraph { m: acc.m, pairs: classes }
}

/// A partition of `{0, .., m-1}` with blocks ordered by smallest member.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ErgodicityPattern {
    m: usize,
    blocks: Vec<Vec<usize>>,
}

impl ErgodicityPattern {
    pub fn new(m: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; m];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &i in block {
                if i >= m {
                    return Err(Error::InvalidPartition(format!("index {} outside 1..={m}", i + 1)));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("index {} appears twice", i + 1)));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {} is not covered", missing + 1)));
        }
        let mut blocks = blocks;
        for block in &mut blocks {
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { m, blocks })
    }

    pub fn from_one_based(m: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut zero = Vec::with_capacity(blocks.len());
        for block in blocks {
            let mut b = Vec::with_capacity(block.len());
            for &i in block {
                if i == 0 {
                    return Err(Error::InvalidPartition("indices are 1-based".into()));
                }
                b.push(i - 1);
            }
            zero.push(b);
        }
        Self::new(m, zero)
    }

    /// Partition induced by per-index labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        let m = labels.len();
        let mut first: Vec<Option<usize>> = vec![None; m.max(labels.iter().max().map_or(0, |x| x + 1))];
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match first[l] {
                Some(b) => blocks[b].push(i),
                None => {
                    first[l] = Some(blocks.len());
                    blocks.push(vec![i]);
                }
            }
        }
        Self { m, blocks }
    }

    pub fn singletons(m: usize) -> Self {
        Self {
            m,
            blocks: (0..m).map(|i| vec![i]).collect(),
        }
    }

    pub fn whole(m: usize) -> Self {
        Self {
            m,
            blocks: vec![(0..m).collect()],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block number of every index.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.m];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                labels[i] = b;
            }
        }
        labels
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.iter().map(|i| i + 1).collect()).collect()
    }

    /// Every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &ErgodicityPattern) -> bool {
        if self.m != coarser.m {
            return false;
        }
        let labels = coarser.labels();
        self.blocks.iter().all(|b| b.iter().all(|&i| labels[i] == labels[b[0]]))
    }
}

impl fmt::Debug for ErgodicityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.to_one_based()).finish()
    }
}

impl fmt::Display for ErgodicityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (b, block) in self.blocks.iter().enumerate() {
            if b > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (n, i) in block.iter().enumerate() {
                if n > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", i + 1)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for ErgodicityPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(serializer)
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }

    pub fn pattern(&mut self) -> ErgodicityPattern {
        let labels: Vec<usize> = (0..self.parent.len()).map(|i| self.find(i)).collect();
        ErgodicityPattern::from_labels(&labels)
    }
}

pub fn connected_components(graph: &InfiniteFlowGraph) -> ErgodicityPattern {
    let mut uf = UnionFind::new(graph.m);
    for (i, j) in graph.edges() {
        uf.union(i, j);
    }
    uf.pattern()
}

/// Result of [`predict_ergodicity_pattern`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub pattern: ErgodicityPattern,
    pub graph: InfiniteFlowGraph,
    pub mode: FlowMode,
    pub horizon: u64,
    pub threshold: f64,
    /// Pattern from the other accumulation mode, when that mode was available.
    pub cross_check: Option<ErgodicityPattern>,
    pub warnings: Vec<String>,
}

fn pattern_for(model: &dyn ChainModel, mode: FlowMode, horizon: u64, threshold: f64, descriptor: Option<&DivergenceDescriptor>) -> Result<(InfiniteFlowGraph, ErgodicityPattern)> {
    let acc = accumulate_flows(model, horizon, mode)?;
    let graph = classify_edges(&acc, descriptor, threshold);
    let pattern = connected_components(&graph);
    Ok((graph, pattern))
}

/// Components of `G∞`, cross-checked between expected and sampled accumulation.
///
/// `seed` drives the sampled accumulation (primary or cross-check).
pub fn predict_ergodicity_pattern(model: &dyn ChainModel, mode: FlowMode, horizon: u64, threshold: f64, seed: u64) -> Result<Prediction> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    let descriptor = DivergenceDescriptor::from_model(model);
    let (graph, pattern) = pattern_for(model, mode, horizon, threshold, descriptor.as_ref())?;
    let other = match mode {
        FlowMode::Expected => FlowMode::Sampled { seed },
        FlowMode::Sampled { .. } => FlowMode::Expected,
    };
    let mut warnings = Vec::new();
    let cross_check = if descriptor.as_ref().is_some_and(|d| d.is_complete()) {
        // Analytic tags decide every pair; both modes give the same graph.
        Some(pattern.clone())
    } else {
        match pattern_for(model, other, horizon, threshold, descriptor.as_ref()) {
            Ok((_, p)) => Some(p),
            Err(Error::NoClosedForm(_)) => None,
            Err(e) => return Err(e),
        }
    };
    if let Some(p) = &cross_check {
        if *p != pattern {
            warnings.push(format!("expected-mode and sampled-mode patterns disagree: {pattern} vs {p}"));
        }
    }
    Ok(Prediction {
        pattern,
        graph,
        mode,
        horizon,
        threshold,
        cross_check,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DeterministicSequence, Gossip, HarmonicPair};

    #[test]
    fn pair_indexing() {
        let m = 5;
        for (n, (i, j)) in pairs(m).enumerate() {
            assert_eq!(pair_index(m, i, j), n);
            assert_eq!(pair_index(m, j, i), n);
        }
        assert_eq!(pairs(m).count(), pair_count(m));
    }

    #[test]
    fn dyadic_windows() {
        assert_eq!(window_of(0), 0);
        assert_eq!(window_of(1), 1);
        assert_eq!(window_of(2), 1);
        assert_eq!(window_of(3), 2);
        assert_eq!(complete_windows(1), 1);
        assert_eq!(complete_windows(2), 1);
        assert_eq!(complete_windows(3), 2);
        assert_eq!(complete_windows(1 << 14), 14);
        assert_eq!(complete_windows((1 << 14) - 1), 14);
    }

    #[test]
    fn identity_has_no_flow() {
        let acc = accumulate_flows(&DeterministicSequence::identity(3), 50, FlowMode::Expected).unwrap();
        assert!(acc.pair_sums().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn harmonic_partial_sum() {
        let acc = accumulate_flows(&HarmonicPair, 3, FlowMode::Expected).unwrap();
        assert!((acc.pair_sum(0, 1) - 13.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn gossip_expected_flows_grow_linearly() {
        let g = Gossip::complete(3).unwrap();
        let acc = accumulate_flows(&g, 30, FlowMode::Expected).unwrap();
        for s in acc.pair_sums() {
            assert!((s - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cut_series_examples() {
        let acc = FlowAccumulator::from_pair_sums(3, vec![5.0, 0.0, 2.0]).unwrap();
        assert_eq!(cut_flow_series(&acc, &IndexSet::new(3, [0]).unwrap()).unwrap(), 5.0);
        assert_eq!(
            cut_flow_series(&acc, &IndexSet::new(3, [0, 1, 2]).unwrap()),
            Err(Error::TrivialCut)
        );
    }

    #[test]
    fn analytic_precedence() {
        let acc = FlowAccumulator::from_pair_sums(2, vec![0.0]).unwrap();
        let d = DivergenceDescriptor::new(2, vec![SeriesClass::Divergent]).unwrap();
        let g = classify_edges(&acc, Some(&d), 0.1);
        assert!(g.has_edge(0, 1));
        assert_eq!(g.pairs()[0].provenance, Provenance::Analytic);
    }

    #[test]
    fn heuristic_windows() {
        let k = 1u64 << 12;
        let mut geometric = FlowAccumulator::new(2, FlowMode::Expected);
        let mut harmonic = FlowAccumulator::new(2, FlowMode::Expected);
        for step in 0..k {
            let g = 0.5f64.powi(step as i32).min(0.5);
            geometric.push(&StochasticMatrix::validate(&[vec![1.0 - g, g], vec![0.0, 1.0]], 1e-12).unwrap());
            harmonic.push(&crate::models::harmonic_pair_matrix(step));
        }
        assert!(!classify_edges(&geometric, None, 0.1).has_edge(0, 1));
        let h = classify_edges(&harmonic, None, 0.1);
        assert!(h.has_edge(0, 1));
        assert!(matches!(h.pairs()[0].provenance, Provenance::Empirical { horizon: 4096, .. }));
    }

    #[test]
    fn components() {
        let none = InfiniteFlowGraph::from_edges(3, &[]).unwrap();
        assert_eq!(connected_components(&none), ErgodicityPattern::singletons(3));
        let chain = InfiniteFlowGraph::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(
            connected_components(&chain),
            ErgodicityPattern::new(4, vec![vec![0, 1, 2], vec![3]]).unwrap()
        );
        assert_eq!(connected_components(&chain).to_string(), "{{1,2,3},{4}}");
    }

    #[test]
    fn pattern_validation() {
        assert!(ErgodicityPattern::new(3, vec![vec![0, 1]]).is_err());
        assert!(ErgodicityPattern::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        let p = ErgodicityPattern::new(4, vec![vec![3, 1], vec![2, 0]]).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 2], vec![1, 3]]);
        assert!(ErgodicityPattern::singletons(4).refines(&p));
        assert!(p.refines(&ErgodicityPattern::whole(4)));
        assert!(!ErgodicityPattern::whole(4).refines(&p));
    }

    #[test]
    fn predicted_two_cliques() {
        let mut links = Vec::new();
        for block in [[0, 1, 2], [3, 4, 5]] {
            for a in 0..3 {
                for b in a + 1..3 {
                    links.push(crate::models::Link {
                        i: block[a],
                        j: block[b],
                        weight: crate::schedule::Schedule::Constant { c: 1.0 },
                    });
                }
            }
        }
        let g = Gossip::new(6, links).unwrap();
        let p = predict_ergodicity_pattern(&g, FlowMode::Expected, 64, 0.1, 1).unwrap();
        assert_eq!(p.pattern.to_string(), "{{1,2,3},{4,5,6}}");
        assert!(p.warnings.is_empty());
    }
}
