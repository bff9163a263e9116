//! Problem-spec parsing and the subcommand implementations behind the
//! `fixedpoint` binary.
//!
//! Problem files are JSON (human-writable, schema-checked on parse, with
//! unknown fields rejected); traces are CSV so any plotting tool can
//! consume them. Schedule hypotheses are gated at parse time: a spec whose
//! coefficients violate the convergence hypotheses is rejected up front
//! instead of producing a misleading "failed" run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::iterate::{
    halpern_traced, viscosity_traced, ContractionFamily, ContractionScope, IterationTrace,
    StopRule, TraceSpec,
};
use crate::operators::{ConvexSet, Operator, ScalarFunction};
use crate::oracle::{project_intersection_oracle, prox_scalar_oracle, OracleResult};
use crate::sequences::{BetaTable, OperatorSequence, Schedule, ScheduleFlags};
use crate::space::Vector;
use crate::verify::ProbeReport;
use crate::{Error, Result};

/// Schedule description as it appears in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Power { c: f64, p: f64, offset: f64 },
    Constant { value: f64 },
    HarmonicShifted { shift: f64 },
    Custom { values: Vec<f64>, flags: ScheduleFlags },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Schedule> {
        match self {
            ScheduleSpec::Power { c, p, offset } => Schedule::power(*c, *p, *offset),
            ScheduleSpec::Constant { value } => Schedule::constant(*value),
            ScheduleSpec::HarmonicShifted { shift } => Schedule::harmonic_shifted(*shift),
            ScheduleSpec::Custom { values, flags } => Schedule::custom(values.clone(), *flags),
        }
    }
}

/// Operator description as it appears in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Constant { point: Vector },
    Project { set: ConvexSet },
    Prox { f: ScalarFunction, lambda: f64 },
    Relax { gamma: f64, inner: Box<OperatorSpec> },
    ConvexCombo { weights: Vec<f64>, ops: Vec<OperatorSpec> },
    GeometricCombo { ops: Vec<OperatorSpec> },
}

impl OperatorSpec {
    pub fn build(&self, dim: usize) -> Result<Operator> {
        let op = match self {
            OperatorSpec::Identity => Operator::identity(dim),
            OperatorSpec::Constant { point } => Operator::constant(point.clone()),
            OperatorSpec::Project { set } => Operator::projection(set.clone())?,
            OperatorSpec::Prox { f, lambda } => Operator::resolvent(f.clone(), *lambda, dim)?,
            OperatorSpec::Relax { gamma, inner } => {
                Operator::relax(*gamma, inner.build(dim)?)?
            }
            OperatorSpec::ConvexCombo { weights, ops } => {
                let members: Result<Vec<Operator>> =
                    ops.iter().map(|o| o.build(dim)).collect();
                Operator::convex_combo(weights.clone(), members?)?
            }
            OperatorSpec::GeometricCombo { ops } => {
                let members: Result<Vec<Operator>> =
                    ops.iter().map(|o| o.build(dim)).collect();
                Operator::truncated_geometric_combo(members?)?
            }
        };
        if op.domain_dim() != dim {
            return Err(Error::SpecValidation(format!(
                "operator dimension {} does not match the problem dimension {dim}",
                op.domain_dim()
            )));
        }
        Ok(op)
    }
}

/// Sequence description as it appears in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    Constant { operator: OperatorSpec },
    Resolvent { f: ScalarFunction },
    Cfp { ops: Vec<OperatorSpec> },
}

/// Contraction family description (presence switches the run to the
/// viscosity driver).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContractionSpec {
    /// `f_n(x) = point`; reproduces the anchored iteration at that point.
    Constant { point: Vector },
    /// `f(x) = theta * x`.
    Scale { theta: f64 },
}

impl ContractionSpec {
    pub fn build(&self, dim: usize) -> Result<ContractionFamily> {
        match self {
            ContractionSpec::Constant { point } => {
                if point.dim() != dim {
                    return Err(Error::SpecValidation(
                        "contraction point dimension mismatch".into(),
                    ));
                }
                Ok(ContractionFamily::constant_anchor(point.clone()))
            }
            ContractionSpec::Scale { theta } => {
                ContractionFamily::from_fn(*theta, ContractionScope::Global, {
                    let theta = *theta;
                    move |_, x: &Vector| x.scale(theta)
                })
            }
        }
    }
}

/// A complete problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub sequence: SequenceSpec,
    pub alpha: ScheduleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<ScheduleSpec>,
    pub anchor: Vector,
    pub start: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionSpec>,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_stride() -> usize {
    crate::iterate::DEFAULT_STRIDE
}

impl ProblemSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let spec: ProblemSpec = serde_json::from_str(&text)
            .map_err(|e| Error::SpecValidation(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.dimension > crate::space::MAX_DIM {
            return Err(Error::SpecValidation(format!(
                "dimension must lie in 1..={}",
                crate::space::MAX_DIM
            )));
        }
        if self.anchor.dim() != self.dimension {
            return Err(Error::SpecValidation("anchor dimension mismatch".into()));
        }
        if self.start.dim() != self.dimension {
            return Err(Error::SpecValidation("start dimension mismatch".into()));
        }
        if self.stride == 0 {
            return Err(Error::SpecValidation("stride must be positive".into()));
        }
        self.stop.validate()?;
        match &self.sequence {
            SequenceSpec::Resolvent { .. } if self.lambda.is_none() => {
                return Err(Error::SpecValidation(
                    "resolvent sequences require a lambda schedule".into(),
                ));
            }
            SequenceSpec::Cfp { .. } if self.gamma.is_none() => {
                return Err(Error::SpecValidation(
                    "cfp sequences require a gamma schedule".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// Builds the operator sequence the spec describes.
    pub fn build_sequence(&self) -> Result<OperatorSequence> {
        match &self.sequence {
            SequenceSpec::Constant { operator } => {
                OperatorSequence::constant(operator.build(self.dimension)?)
            }
            SequenceSpec::Resolvent { f } => {
                let lambdas = self
                    .lambda
                    .as_ref()
                    .expect("validated")
                    .build()
                    .map_err(|e| Error::SpecValidation(format!("lambda: {e}")))?;
                OperatorSequence::resolvent(f.clone(), lambdas, self.dimension)
            }
            SequenceSpec::Cfp { ops } => {
                let gamma = self
                    .gamma
                    .as_ref()
                    .expect("validated")
                    .build()
                    .map_err(|e| Error::SpecValidation(format!("gamma: {e}")))?;
                let members: Result<Vec<Operator>> =
                    ops.iter().map(|o| o.build(self.dimension)).collect();
                OperatorSequence::cfp(members?, BetaTable::geometric(), gamma)
            }
        }
    }
}

/// What `run` leaves on disk plus its exit disposition.
#[derive(Debug)]
pub struct RunOutcome {
    pub trace: IterationTrace,
    pub reference: Option<OracleResult>,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    /// 0 when the run met a tolerance, 2 when the step budget ran out.
    pub exit_code: i32,
}

/// Command-line overrides applied on top of a problem file.
#[derive(Debug, Default, Clone)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub stride: Option<usize>,
}

/// Computes the reference limit of a run: the certified projection of the
/// anchor onto the common fixed set, when the oracle can produce one.
pub fn reference_for(
    seq: &OperatorSequence,
    anchor: &Vector,
    contraction: Option<&ContractionSpec>,
) -> Result<Option<OracleResult>> {
    let sets: Vec<ConvexSet> =
        seq.common_fixed_set().flatten().into_iter().cloned().collect();
    match contraction {
        None => Ok(Some(project_intersection_oracle(&sets, anchor)?)),
        Some(ContractionSpec::Constant { point }) => {
            Ok(Some(project_intersection_oracle(&sets, point)?))
        }
        Some(ContractionSpec::Scale { theta }) => {
            // the run converges to the unique fixed point of the retracted
            // contraction; iterate it with oracle projections
            let mut w = anchor.clone();
            let mut result = None;
            for _ in 0..400 {
                let fw = w.scale(*theta);
                let r = project_intersection_oracle(&sets, &fw)?;
                let next = r.value.clone();
                let moved = w.distance(&next);
                w = next;
                result = Some(r);
                if moved <= 1e-12 {
                    break;
                }
            }
            Ok(result.map(|r| OracleResult { value: w, ..r }))
        }
    }
}

/// Runs a problem file and writes `trace.csv` and `summary.json`.
pub fn run(spec_path: &Path, out_dir: &Path, overrides: &RunOverrides) -> Result<RunOutcome> {
    let mut spec = ProblemSpec::from_path(spec_path)?;
    if let Some(s) = overrides.seed {
        spec.seed = s;
    }
    if let Some(m) = overrides.max_iters {
        spec.stop.max_iters = m;
    }
    if let Some(t) = overrides.tol {
        spec.stop.target_tol = Some(t);
    }
    if let Some(s) = overrides.stride {
        spec.stride = s;
    }
    spec.validate()?;

    let seq = spec.build_sequence()?;
    let alpha = spec
        .alpha
        .build()
        .map_err(|e| Error::SpecValidation(format!("alpha: {e}")))?;
    alpha
        .require_anchor_coefficients()
        .map_err(|e| Error::SpecValidation(format!("alpha: {e}")))?;

    let reference = reference_for(&seq, &spec.anchor, spec.contraction.as_ref())?;
    let ref_vec = reference.as_ref().map(|r| r.value.clone());

    log::info!(
        "running {:?} (dim {}, seed {}, max_iters {})",
        spec.sequence,
        spec.dimension,
        spec.seed,
        spec.stop.max_iters
    );

    let trace_spec = TraceSpec { stride: spec.stride };
    let trace = match &spec.contraction {
        None => halpern_traced(
            &seq,
            &spec.anchor,
            &spec.start,
            &alpha,
            &spec.stop,
            ref_vec.as_ref(),
            trace_spec,
        )?,
        Some(cspec) => {
            let f = cspec.build(spec.dimension)?;
            viscosity_traced(
                &seq,
                &f,
                &spec.start,
                &alpha,
                &spec.stop,
                ref_vec.as_ref(),
                trace_spec,
            )?
        }
    };

    fs::create_dir_all(out_dir)?;
    let trace_path = out_dir.join("trace.csv");
    let summary_path = out_dir.join("summary.json");
    let mut file = fs::File::create(&trace_path)?;
    trace.write_csv(&mut file)?;
    let summary = trace.summary();
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;

    let exit_code = match trace.stop_reason {
        crate::iterate::StopReason::MaxIters => 2,
        _ => 0,
    };
    log::info!(
        "finished after {} steps ({:?}), final residual {:e}",
        trace.steps(),
        trace.stop_reason,
        summary.final_residual
    );
    Ok(RunOutcome { trace, reference, trace_path, summary_path, exit_code })
}

/// One property check inside a verification suite, together with its
/// expected polarity (negative controls are expected to fail).
#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub expected_pass: bool,
    #[serde(flatten)]
    pub report: ProbeReport,
}

impl SuiteEntry {
    fn positive(report: ProbeReport) -> Self {
        SuiteEntry { expected_pass: true, report }
    }

    fn negative(report: ProbeReport) -> Self {
        SuiteEntry { expected_pass: false, report }
    }

    /// A control passes when its outcome matches its polarity.
    pub fn satisfied(&self) -> bool {
        self.report.pass == self.expected_pass
    }
}

/// Aggregated outcome of one named suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub pass: bool,
    pub entries: Vec<SuiteEntry>,
}

mod suites;
pub use suites::{run_suite, run_suites, SUITE_NAMES};

/// Row of a schedule comparison: steps needed to shrink the oracle
/// distance below each relative threshold (empty when never reached).
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub label: String,
    pub iters_to: [Option<usize>; 3],
}

/// Relative thresholds used by `compare`, as fractions of the initial
/// anchor-to-limit distance.
pub const COMPARE_THRESHOLDS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Sweeps anchor-coefficient schedules over one problem and reports the
/// step counts at which the distance to the oracle limit crosses each
/// threshold (relative to the anchor's own distance to the limit).
pub fn compare(
    spec_path: &Path,
    schedules: &[String],
    max_iters_override: Option<usize>,
) -> Result<Vec<CompareRow>> {
    if schedules.is_empty() {
        return Err(Error::InvalidArgument("schedule list is empty".into()));
    }
    let spec = ProblemSpec::from_path(spec_path)?;
    if spec.contraction.is_some() {
        return Err(Error::SpecValidation(
            "compare sweeps the anchored iteration; drop the contraction block".into(),
        ));
    }
    let seq = spec.build_sequence()?;
    let parsed: Result<Vec<(String, Schedule)>> = schedules
        .iter()
        .map(|s| {
            let sched_spec: ScheduleSpec = serde_json::from_str(s)
                .map_err(|e| Error::SpecValidation(format!("schedule {s:?}: {e}")))?;
            let sched = sched_spec.build()?;
            sched
                .require_anchor_coefficients()
                .map_err(|e| Error::SpecValidation(format!("schedule {s:?}: {e}")))?;
            Ok((s.clone(), sched))
        })
        .collect();
    let parsed = parsed?;

    let reference = reference_for(&seq, &spec.anchor, None)?
        .ok_or_else(|| Error::OracleFailure("no reference available".into()))?;
    let scale = spec.anchor.distance(&reference.value).max(1e-12);

    let mut rows = Vec::new();
    for (label, alpha) in parsed {
        let stop = StopRule {
            max_iters: max_iters_override.unwrap_or(spec.stop.max_iters),
            residual_tol: 1e-300_f64.max(f64::MIN_POSITIVE),
            target_tol: Some(COMPARE_THRESHOLDS[2] * scale),
            min_iters: 1,
        };
        let trace = halpern_traced(
            &seq,
            &spec.anchor,
            &spec.start,
            &alpha,
            &stop,
            Some(&reference.value),
            TraceSpec { stride: spec.stride },
        )?;
        let dists = trace.dist_to_ref.as_ref().expect("reference supplied");
        let mut iters_to = [None; 3];
        for (slot, tau) in iters_to.iter_mut().zip(COMPARE_THRESHOLDS) {
            *slot = dists.iter().position(|d| *d <= tau * scale).map(|i| i + 1);
        }
        rows.push(CompareRow { label, iters_to });
    }
    Ok(rows)
}

/// Serializes comparison rows as CSV.
pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("schedule,iters_to_1e-1,iters_to_1e-2,iters_to_1e-3\n");
    for row in rows {
        let cells: Vec<String> = row
            .iters_to
            .iter()
            .map(|v| v.map(|n| n.to_string()).unwrap_or_default())
            .collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_escape(&row.label),
            cells[0],
            cells[1],
            cells[2]
        ));
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Input accepted by the `oracle` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleRequest {
    /// Certified projection of `u` onto the intersection of `sets`.
    Project { sets: Vec<ConvexSet>, u: Vector },
    /// Ground-truth scalar resolvent value.
    Prox { f: ScalarFunction, lambda: f64, x: f64 },
}

/// Executes an oracle request read from a problem file.
pub fn oracle_request(path: &Path) -> Result<OracleResult> {
    let text = fs::read_to_string(path)?;
    let request: OracleRequest = serde_json::from_str(&text)
        .map_err(|e| Error::SpecValidation(format!("{}: {e}", path.display())))?;
    match request {
        OracleRequest::Project { sets, u } => project_intersection_oracle(&sets, &u),
        OracleRequest::Prox { f, lambda, x } => {
            let z = prox_scalar_oracle(&f, lambda, x)?;
            Ok(OracleResult {
                value: Vector::new(vec![z])?,
                method: crate::oracle::OracleMethod::ScalarMinimization,
                certified_tol: 1e-10,
                kkt_residual: None,
            })
        }
    }
}
