//! Scenario files: a model, a list of analyses and a seed, written in TOML.
//!
//! Agent indices are 1-based everywhere in the file. Schedules are inline
//! tables such as `{ kind = "power", c = 1.0, a = 2.0 }`.

use std::sync::Arc;

use ergoflow_core::models::{
    BroadcastGossip, DeterministicSequence, DiagonalApproximation, FailureSchedule, Gossip, HarmonicPair, IdentityPrefix, Link, LinkFailure,
    Permutation, SimplexRow,
};
use ergoflow_core::simulate::{EmpiricalConfig, Initials};
use ergoflow_core::{ErgodicityPattern, Schedule, SharedModel, StochasticMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    /// The dynamics or construction the scenario exercises.
    #[serde(default)]
    pub construct: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub fail_on_mismatch: bool,
    pub model: ModelSpec,
    #[serde(rename = "analysis")]
    pub analyses: Vec<AnalysisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub i: usize,
    pub j: usize,
    #[serde(default = "unit_weight")]
    pub weight: Schedule,
}

fn unit_weight() -> Schedule {
    Schedule::Constant { c: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Pairwise averaging; without `links` every pair is equally likely.
    Gossip {
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        links: Option<Vec<LinkSpec>>,
    },
    /// One of `ring`, `edges` or `graphs` (cycled by step) fixes the topology.
    Broadcast {
        m: usize,
        #[serde(default)]
        ring: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<[usize; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graphs: Option<Vec<Vec<[usize; 2]>>>,
        gamma: Schedule,
    },
    /// Exactly one of `failure` (p_k) or `survival` (1 - p_k).
    LinkFailure {
        base: Box<ModelSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<Schedule>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        survival: Option<Schedule>,
    },
    Permutation {
        m: usize,
    },
    SimplexRow,
    HarmonicPair,
    Identity {
        m: usize,
    },
    /// Periodic sequence of fixed matrices.
    Deterministic {
        matrices: Vec<Vec<Vec<f64>>>,
    },
    IdentityPrefix {
        base: Box<ModelSpec>,
        steps: u64,
    },
    Diagonal {
        base: Box<ModelSpec>,
        blocks: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Expected,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    /// Closed form when the model has one, Monte Carlo otherwise.
    #[default]
    Auto,
    ClosedForm,
    MonteCarlo,
}

/// Monte Carlo ensemble for the empirical ergodicity pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub trials: usize,
    pub t0: Vec<u64>,
    pub horizon: u64,
    pub epsilon: f64,
    pub agreement: f64,
    /// Initial vectors; the coordinate basis when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        let d = EmpiricalConfig::default();
        Self {
            trials: d.trials,
            t0: d.t0_set,
            horizon: d.horizon,
            epsilon: d.epsilon,
            agreement: d.agreement,
            x0: None,
        }
    }
}

impl EnsembleSpec {
    pub fn config(&self, seed: u64) -> EmpiricalConfig {
        EmpiricalConfig {
            trials: self.trials,
            t0_set: self.t0.clone(),
            horizon: self.horizon,
            epsilon: self.epsilon,
            agreement: self.agreement,
            initials: match &self.x0 {
                Some(v) => Initials::Vectors(v.clone()),
                None => Initials::Basis,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub t0: u64,
    pub horizon: u64,
    /// Write the checkpoints to a CSV file next to the report.
    #[serde(default = "yes")]
    pub csv: bool,
}

fn yes() -> bool {
    true
}

/// What an `approx_compare` analysis measures the scenario model against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    IdentityPrefix { steps: u64 },
    Diagonal { blocks: Vec<Vec<usize>> },
    Model { model: ModelSpec },
}

fn default_steps() -> [u64; 2] {
    [0, 32]
}

fn default_samples() -> usize {
    2000
}

fn default_flow_horizon() -> u64 {
    ergoflow_core::flow::DEFAULT_HORIZON
}

fn default_threshold() -> f64 {
    ergoflow_core::flow::DEFAULT_THRESHOLD
}

fn default_m2_horizon() -> u64 {
    1 << 14
}

fn default_m2_trials() -> usize {
    200
}

fn default_t0() -> Vec<u64> {
    vec![0, 7]
}

fn default_h_samples() -> usize {
    1000
}

fn default_compare_horizon() -> u64 {
    1 << 12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSpec {
    FlowGraph {
        #[serde(default)]
        mode: ModeName,
        #[serde(default = "default_flow_horizon")]
        horizon: u64,
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Properties {
        #[serde(default = "default_steps")]
        steps: [u64; 2],
        #[serde(default)]
        estimator: EstimatorName,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    M2 {
        #[serde(default = "default_m2_horizon")]
        horizon: u64,
        #[serde(default = "default_m2_trials")]
        trials: usize,
        #[serde(default = "default_t0")]
        t0: Vec<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_h_samples")]
        h_samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Simulate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ensemble: Option<EnsembleSpec>,
        #[serde(default)]
        trajectories: Vec<TrajectorySpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Verify {
        #[serde(default)]
        ensemble: EnsembleSpec,
        #[serde(default)]
        flow_mode: ModeName,
        #[serde(default = "default_flow_horizon")]
        flow_horizon: u64,
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_steps")]
        property_steps: [u64; 2],
        #[serde(default = "default_samples")]
        feedback_samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    ApproxCompare {
        against: Variant,
        #[serde(default)]
        mode: ModeName,
        #[serde(default = "default_compare_horizon")]
        horizon: u64,
        #[serde(default = "default_threshold")]
        threshold: f64,
        /// Empirical patterns of both chains on matched seeds.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ensemble: Option<EnsembleSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl AnalysisSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AnalysisSpec::FlowGraph { .. } => "flow_graph",
            AnalysisSpec::Properties { .. } => "properties",
            AnalysisSpec::M2 { .. } => "m2",
            AnalysisSpec::Simulate { .. } => "simulate",
            AnalysisSpec::Verify { .. } => "verify",
            AnalysisSpec::ApproxCompare { .. } => "approx_compare",
        }
    }

    pub fn seed_override(&self) -> Option<u64> {
        match self {
            AnalysisSpec::FlowGraph { seed, .. }
            | AnalysisSpec::Properties { seed, .. }
            | AnalysisSpec::M2 { seed, .. }
            | AnalysisSpec::Simulate { seed, .. }
            | AnalysisSpec::Verify { seed, .. }
            | AnalysisSpec::ApproxCompare { seed, .. } => *seed,
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Parses a scenario completely; no model is built yet.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        HarnessError::Parse {
            origin: origin.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if scenario.analyses.is_empty() {
        return Err(HarnessError::Parse {
            origin: origin.to_string(),
            line: 0,
            column: 0,
            message: "field `analysis`: at least one analysis is required".into(),
        });
    }
    Ok(scenario)
}

fn zero_based(field: &str, m: usize, i: usize) -> Result<usize> {
    if i == 0 || i > m {
        return Err(HarnessError::field(field, ergoflow_core::Error::IndexOutOfRange { index: i, m }));
    }
    Ok(i - 1)
}

fn pairs_zero_based(field: &str, m: usize, edges: &[[usize; 2]]) -> Result<Vec<(usize, usize)>> {
    edges
        .iter()
        .map(|[a, b]| Ok((zero_based(field, m, *a)?, zero_based(field, m, *b)?)))
        .collect()
}

pub fn build_pattern(field: &str, m: usize, blocks: &[Vec<usize>]) -> Result<ErgodicityPattern> {
    ErgodicityPattern::from_one_based(m, blocks).map_err(|e| HarnessError::field(field, e))
}

/// Builds the chain described by `spec`; `field` names it in errors.
pub fn build_model(spec: &ModelSpec, field: &str) -> Result<SharedModel> {
    let wrap = |e| HarnessError::field(field, e);
    let model: SharedModel = match spec {
        ModelSpec::Gossip { m, links: None } => Arc::new(Gossip::complete(*m).map_err(wrap)?),
        ModelSpec::Gossip { m, links: Some(links) } => {
            let links = links
                .iter()
                .map(|l| {
                    Ok(Link {
                        i: zero_based(&format!("{field}.links"), *m, l.i)?,
                        j: zero_based(&format!("{field}.links"), *m, l.j)?,
                        weight: l.weight,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Arc::new(Gossip::new(*m, links).map_err(wrap)?)
        }
        ModelSpec::Broadcast { m, ring, edges, graphs, gamma } => {
            let field_topology = format!("{field}.edges");
            match (ring, edges, graphs) {
                (true, None, None) => Arc::new(BroadcastGossip::ring(*m, *gamma).map_err(wrap)?),
                (false, Some(e), None) => {
                    Arc::new(BroadcastGossip::static_graph(*m, pairs_zero_based(&field_topology, *m, e)?, *gamma).map_err(wrap)?)
                }
                (false, None, Some(g)) => {
                    let graphs = g
                        .iter()
                        .map(|e| pairs_zero_based(&format!("{field}.graphs"), *m, e))
                        .collect::<Result<Vec<_>>>()?;
                    Arc::new(BroadcastGossip::new(*m, graphs, *gamma).map_err(wrap)?)
                }
                _ => {
                    return Err(HarnessError::field(
                        field,
                        ergoflow_core::Error::InvalidParameter("exactly one of `ring`, `edges`, `graphs` is required".into()),
                    ))
                }
            }
        }
        ModelSpec::LinkFailure { base, failure, survival } => {
            let schedule = match (failure, survival) {
                (Some(s), None) => FailureSchedule::Failure(*s),
                (None, Some(s)) => FailureSchedule::Survival(*s),
                _ => {
                    return Err(HarnessError::field(
                        field,
                        ergoflow_core::Error::InvalidParameter("exactly one of `failure`, `survival` is required".into()),
                    ))
                }
            };
            let base = build_model(base, &format!("{field}.base"))?;
            Arc::new(LinkFailure::new(base, schedule).map_err(wrap)?)
        }
        ModelSpec::Permutation { m } => Arc::new(Permutation::new(*m).map_err(wrap)?),
        ModelSpec::SimplexRow => Arc::new(SimplexRow),
        ModelSpec::HarmonicPair => Arc::new(HarmonicPair),
        ModelSpec::Identity { m } => {
            if *m == 0 {
                return Err(wrap(ergoflow_core::Error::Empty));
            }
            Arc::new(DeterministicSequence::identity(*m))
        }
        ModelSpec::Deterministic { matrices } => {
            let matrices = matrices
                .iter()
                .map(|rows| StochasticMatrix::validate(rows, ergoflow_core::stochastic::DEFAULT_TOLERANCE))
                .collect::<ergoflow_core::Result<Vec<_>>>()
                .map_err(wrap)?;
            Arc::new(DeterministicSequence::new(matrices).map_err(wrap)?)
        }
        ModelSpec::IdentityPrefix { base, steps } => Arc::new(IdentityPrefix::new(build_model(base, &format!("{field}.base"))?, *steps)),
        ModelSpec::Diagonal { base, blocks } => {
            let base = build_model(base, &format!("{field}.base"))?;
            let pattern = build_pattern(&format!("{field}.blocks"), base.dim(), blocks)?;
            Arc::new(DiagonalApproximation::new(base, pattern).map_err(wrap)?)
        }
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
description = "d"

[model]
kind = "gossip"
m = 3

[[analysis]]
type = "flow_graph"
"#;

    #[test]
    fn parses_minimal() {
        let s = parse_scenario(MINIMAL, "t.toml").unwrap();
        assert_eq!(s.model, ModelSpec::Gossip { m: 3, links: None });
        assert_eq!(s.analyses.len(), 1);
        assert_eq!(build_model(&s.model, "model").unwrap().dim(), 3);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("[model]", "[modle]");
        let err = parse_scenario(&text, "t.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("modle"), "{msg}");
        let HarnessError::Parse { line, .. } = err else { panic!() };
        assert!(line > 0);
    }

    #[test]
    fn unknown_nested_key_is_named() {
        let text = MINIMAL.replace("m = 3", "m = 3\nlnks = []");
        let msg = parse_scenario(&text, "t.toml").unwrap_err().to_string();
        assert!(msg.contains("lnks"), "{msg}");
    }

    #[test]
    fn schedules_accept_integers() {
        let text = r#"
name = "t"
description = "d"
[model]
kind = "broadcast"
m = 4
ring = true
gamma = { kind = "power", c = 1, a = 2 }
[[analysis]]
type = "properties"
"#;
        let s = parse_scenario(text, "t").unwrap();
        let ModelSpec::Broadcast { gamma, .. } = s.model else { panic!() };
        assert_eq!(gamma, Schedule::Power { c: 1.0, a: 2.0 });
    }

    #[test]
    fn nested_models_and_errors_name_fields() {
        let text = r#"
name = "t"
description = "d"
[model]
kind = "link_failure"
failure = { kind = "constant", c = 0.5 }
[model.base]
kind = "gossip"
m = 3
links = [{ i = 1, j = 4 }]
[[analysis]]
type = "flow_graph"
"#;
        let s = parse_scenario(text, "t").unwrap();
        let err = build_model(&s.model, "model").unwrap_err().to_string();
        assert!(err.contains("model.base.links"), "{err}");
    }

    #[test]
    fn line_columns() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }
}
