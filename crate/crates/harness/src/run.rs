//! Executes a parsed scenario and assembles its report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ergoflow_core::approx::{block_infinite_flow, l1_chain_distance, BlockFlowCheck, ChainDistanceReport};
use ergoflow_core::flow::{predict_ergodicity_pattern, Prediction};
use ergoflow_core::models::{DiagonalApproximation, IdentityPrefix};
use ergoflow_core::properties::{
    basis_starts, feedback_coefficient, find_common_steady_state, m2_survey, weak_feedback_coefficient, Estimator, FeedbackReport, M2Config,
    M2Report, M2Start, M2Verdict, SteadyStateReport,
};
use ergoflow_core::simulate::{
    empirical_ergodicity_pattern, run_trajectory, verify_prediction, EmpiricalReport, TrajectoryReport, VerificationReport, VerifyConfig,
};
use ergoflow_core::{derive_seed, ErgodicityPattern, FlowMode, SharedModel};
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::scenario::{build_model, build_pattern, AnalysisSpec, EstimatorName, ModeName, Scenario, Variant};

pub const SCHEMA_VERSION: u32 = 1;

/// Default output directory when neither `--out` nor the environment names one.
pub const DEFAULT_OUT_DIR: &str = "ergoflow-out";
pub const OUT_DIR_ENV: &str = "ERGOFLOW_OUT_DIR";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Size of the worker pool; the global pool when absent.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SteadyStateOutcome {
    Report(SteadyStateReport),
    Unavailable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertiesOutput {
    pub steady_state: SteadyStateOutcome,
    pub weak_feedback: FeedbackReport,
    pub feedback: FeedbackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M2Output {
    /// Growing if any start grows, unknown if any is undecided.
    pub verdict: M2Verdict,
    pub reports: Vec<M2Report>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    pub report: TrajectoryReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalReport>,
    pub trajectories: Vec<TrajectoryOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxOutput {
    pub distance: ChainDistanceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_flow: Option<Vec<BlockFlowCheck>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original: Option<EmpiricalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximation: Option<EmpiricalReport>,
    /// Both chains produced the same empirical pattern.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub same_pattern: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisOutput {
    FlowGraph(Prediction),
    Properties(PropertiesOutput),
    M2(M2Output),
    Simulate(SimulateOutput),
    Verify(Box<VerificationReport>),
    ApproxCompare(Box<ApproxOutput>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisResult {
    pub index: usize,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub seed: u64,
    /// Chain steps advanced (simulated or accumulated) by this analysis.
    pub steps: u64,
    pub output: AnalysisOutput,
}

/// Everything in a report except timing; deterministic given scenario and seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBody {
    pub scenario: Scenario,
    pub seed: u64,
    pub analyses: Vec<AnalysisResult>,
    /// Some verification or comparison disagreed.
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_ms: f64,
    pub analyses_ms: Vec<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub body: ReportBody,
    pub timing: Timing,
    /// CSV files `(name, contents)` referenced from the body.
    #[serde(skip)]
    pub files: Vec<(String, String)>,
}

impl RunReport {
    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report body serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn analysis<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a AnalysisOutput> + 'a {
        self.body.analyses.iter().filter(move |a| a.kind == kind).map(|a| &a.output)
    }

    /// Writes `report.json` and the CSV files under `dir/<scenario name>`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let target = dir.join(&self.body.scenario.name);
        fs::create_dir_all(&target).map_err(|e| HarnessError::io(target.display(), e))?;
        let report = target.join("report.json");
        let mut json = self.to_json();
        json.push('\n');
        fs::write(&report, json).map_err(|e| HarnessError::io(report.display(), e))?;
        for (name, contents) in &self.files {
            let path = target.join(name);
            fs::write(&path, contents).map_err(|e| HarnessError::io(path.display(), e))?;
        }
        Ok(report)
    }
}

/// `--out`, then the environment, then the scenario, then the default.
pub fn output_dir(cli: Option<&Path>, scenario: &Scenario) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    scenario.output_dir.as_deref().map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from)
}

fn flow_mode(mode: ModeName, seed: u64) -> FlowMode {
    match mode {
        ModeName::Expected => FlowMode::Expected,
        ModeName::Sampled => FlowMode::Sampled { seed },
    }
}

fn estimator(name: EstimatorName, model: &SharedModel, steps: &std::ops::Range<u64>, samples: usize, seed: u64) -> Estimator {
    let closed = || model.row_moments(steps.start).is_ok() && model.expected(steps.start).is_ok();
    match name {
        EstimatorName::ClosedForm => Estimator::ClosedForm,
        EstimatorName::Auto if closed() => Estimator::ClosedForm,
        _ => Estimator::MonteCarlo { samples, seed },
    }
}

fn overall_m2(reports: &[M2Report]) -> M2Verdict {
    if reports.iter().any(|r| r.verdict == M2Verdict::Growing) {
        M2Verdict::Growing
    } else if reports.iter().any(|r| r.verdict == M2Verdict::Unknown) {
        M2Verdict::Unknown
    } else {
        M2Verdict::BoundedLooking
    }
}

fn ensemble_steps(report: &EmpiricalReport) -> u64 {
    report.t0_set.iter().map(|t0| report.horizon - t0).sum::<u64>() * report.trials.len() as u64 / report.t0_set.len().max(1) as u64
}

struct Outcome {
    output: AnalysisOutput,
    steps: u64,
    files: Vec<(String, String)>,
    mismatch: bool,
}

fn run_analysis(index: usize, spec: &AnalysisSpec, model: &SharedModel, seed: u64) -> Result<Outcome> {
    let field = format!("analysis[{index}] ({})", spec.label());
    let wrap = |e| HarnessError::field(field.clone(), e);
    let m = model.dim();
    let mut files = Vec::new();
    let mut mismatch = false;
    let (output, steps) = match spec {
        AnalysisSpec::FlowGraph { mode, horizon, threshold, .. } => {
            let p = predict_ergodicity_pattern(model.as_ref(), flow_mode(*mode, seed), *horizon, *threshold, seed).map_err(wrap)?;
            let runs = if p.cross_check.is_some() && !p.graph.all_analytic() { 2 } else { 1 };
            (AnalysisOutput::FlowGraph(p), horizon * runs)
        }
        AnalysisSpec::Properties {
            steps,
            estimator: name,
            samples,
            ..
        } => {
            let range = steps[0]..steps[1];
            let est = estimator(*name, model, &range, *samples, seed);
            let steady_state = match find_common_steady_state(model.as_ref(), range.clone()) {
                Ok(r) => SteadyStateOutcome::Report(r),
                Err(e @ ergoflow_core::Error::NoClosedForm(_)) => SteadyStateOutcome::Unavailable { reason: e.to_string() },
                Err(e) => return Err(wrap(e)),
            };
            let weak_feedback = weak_feedback_coefficient(model.as_ref(), range.clone(), est).map_err(wrap)?;
            let feedback = feedback_coefficient(model.as_ref(), range.clone(), est).map_err(wrap)?;
            let per_step = match est {
                Estimator::ClosedForm => 1,
                Estimator::MonteCarlo { samples, .. } => 2 * samples as u64,
            };
            (
                AnalysisOutput::Properties(PropertiesOutput {
                    steady_state,
                    weak_feedback,
                    feedback,
                }),
                (range.end - range.start) * per_step,
            )
        }
        AnalysisSpec::M2 {
            horizon,
            trials,
            t0,
            x0,
            h_samples,
            ..
        } => {
            let starts = match x0 {
                None => basis_starts(m, t0),
                Some(vs) => t0
                    .iter()
                    .flat_map(|&t| vs.iter().map(move |v| M2Start { t0: t, x0: v.clone() }))
                    .collect(),
            };
            let config = M2Config {
                horizon: *horizon,
                trials: *trials,
                seed,
                h_samples: *h_samples,
            };
            let reports = m2_survey(model.as_ref(), &starts, &config).map_err(wrap)?;
            let steps = t0.iter().map(|t| horizon.saturating_sub(*t)).sum::<u64>() * *trials as u64;
            (
                AnalysisOutput::M2(M2Output {
                    verdict: overall_m2(&reports),
                    reports,
                }),
                steps,
            )
        }
        AnalysisSpec::Simulate { ensemble, trajectories, .. } => {
            let empirical = match ensemble {
                Some(e) => Some(empirical_ergodicity_pattern(model.as_ref(), &e.config(seed)).map_err(wrap)?),
                None => None,
            };
            let mut steps = empirical.as_ref().map_or(0, ensemble_steps);
            let mut outputs = Vec::new();
            for (n, t) in trajectories.iter().enumerate() {
                let report = run_trajectory(model.as_ref(), &t.x0, t.t0, t.horizon, derive_seed(seed, n as u64)).map_err(wrap)?;
                steps += t.horizon - t.t0;
                let csv = if t.csv {
                    let name = format!("trajectory_{index}_{n}.csv");
                    let mut buf = Vec::new();
                    report.write_csv(&mut buf).expect("writing to memory");
                    files.push((name.clone(), String::from_utf8(buf).expect("csv is UTF-8")));
                    Some(name)
                } else {
                    None
                };
                outputs.push(TrajectoryOutput { csv, report });
            }
            (
                AnalysisOutput::Simulate(SimulateOutput {
                    empirical,
                    trajectories: outputs,
                }),
                steps,
            )
        }
        AnalysisSpec::Verify {
            ensemble,
            flow_mode: mode,
            flow_horizon,
            threshold,
            property_steps,
            feedback_samples,
            ..
        } => {
            let config = VerifyConfig {
                empirical: ensemble.config(seed),
                flow_mode: flow_mode(*mode, derive_seed(seed, 1)),
                flow_horizon: *flow_horizon,
                threshold: *threshold,
                property_steps: property_steps[0]..property_steps[1],
                feedback_samples: *feedback_samples,
            };
            let report = verify_prediction(model.as_ref(), &config).map_err(wrap)?;
            mismatch |= !report.matches;
            let steps = ensemble_steps(&report.evidence) + flow_horizon;
            (AnalysisOutput::Verify(Box::new(report)), steps)
        }
        AnalysisSpec::ApproxCompare {
            against,
            mode,
            horizon,
            threshold,
            ensemble,
            ..
        } => {
            let (other, pattern): (SharedModel, Option<ErgodicityPattern>) = match against {
                Variant::IdentityPrefix { steps } => (std::sync::Arc::new(IdentityPrefix::new(model.clone(), *steps)), None),
                Variant::Diagonal { blocks } => {
                    let pattern = build_pattern(&format!("{field}.against.blocks"), m, blocks)?;
                    (
                        std::sync::Arc::new(DiagonalApproximation::new(model.clone(), pattern.clone()).map_err(wrap)?),
                        Some(pattern),
                    )
                }
                Variant::Model { model: spec } => (build_model(spec, &format!("{field}.against.model"))?, None),
            };
            let distance =
                l1_chain_distance(model.as_ref(), other.as_ref(), *horizon, flow_mode(*mode, seed), *threshold).map_err(wrap)?;
            let block_flow = match &pattern {
                Some(p) => Some(block_infinite_flow(model.as_ref(), p).map_err(wrap)?),
                None => None,
            };
            let mut steps = *horizon;
            let (original, approximation, same_pattern) = match ensemble {
                Some(e) => {
                    // Matched seeds: trial n drives both chains from the same base randomness.
                    let config = e.config(derive_seed(seed, 2));
                    let a = empirical_ergodicity_pattern(model.as_ref(), &config).map_err(wrap)?;
                    let b = empirical_ergodicity_pattern(other.as_ref(), &config).map_err(wrap)?;
                    steps += ensemble_steps(&a) + ensemble_steps(&b);
                    let same = a.pattern == b.pattern;
                    mismatch |= !same;
                    (Some(a), Some(b), Some(same))
                }
                None => (None, None, None),
            };
            (
                AnalysisOutput::ApproxCompare(Box::new(ApproxOutput {
                    distance,
                    block_flow,
                    original,
                    approximation,
                    same_pattern,
                })),
                steps,
            )
        }
    };
    Ok(Outcome {
        output,
        steps,
        files,
        mismatch,
    })
}

/// Builds every model, then runs the analyses in order.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunReport> {
    match options.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| HarnessError::Pool(e.to_string()))?;
            pool.install(|| run_in_pool(scenario, options))
        }
        None => run_in_pool(scenario, options),
    }
}

fn run_in_pool(scenario: &Scenario, options: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let seed = options.seed.unwrap_or(scenario.seed);
    let model = build_model(&scenario.model, "model")?;
    let mut analyses = Vec::with_capacity(scenario.analyses.len());
    let mut analyses_ms = Vec::with_capacity(scenario.analyses.len());
    let mut files = Vec::new();
    let mut mismatch = false;
    for (index, spec) in scenario.analyses.iter().enumerate() {
        let t = Instant::now();
        let analysis_seed = spec.seed_override().unwrap_or_else(|| derive_seed(seed, index as u64));
        let outcome = run_analysis(index, spec, &model, analysis_seed)?;
        analyses_ms.push(t.elapsed().as_secs_f64() * 1e3);
        mismatch |= outcome.mismatch;
        files.extend(outcome.files);
        analyses.push(AnalysisResult {
            index,
            kind: spec.label(),
            seed: analysis_seed,
            steps: outcome.steps,
            output: outcome.output,
        });
    }
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        body: ReportBody {
            scenario: scenario.clone(),
            seed,
            analyses,
            mismatch,
        },
        timing: Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
            analyses_ms,
            workers: rayon::current_num_threads(),
        },
        files,
    })
}
