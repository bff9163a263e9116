//! Anchored iteration drivers with full diagnostic traces.
//!
//! All drivers run the same recursion core,
//! `x_{n+1} = a_n f_n(x_n) + (1 - a_n) S_n x_n`, with the plain anchored
//! iteration obtained from the constant evaluation family `f_n = u`. That
//! shared path is what makes the anchored and viscosity traces bitwise
//! identical in the constant case, which the acceptance suite asserts as
//! exact floating-point equality.
//!
//! The drivers are deterministic: no randomness, fixed evaluation order.
//! Scalar residuals are recorded every step; iterate snapshots are strided
//! (default every 100 steps) to keep million-step traces small.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::operators::{Operator, ScalarFunction};
use crate::sequences::{BetaTable, OperatorSequence, Schedule};
use crate::space::Vector;
use crate::{Error, Result};

/// Default snapshot stride for recorded iterates.
pub const DEFAULT_STRIDE: usize = 100;

/// Termination policy for a driver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Hard step budget (at least 1).
    pub max_iters: usize,
    /// Stop once `||x_n - T x_n||` falls below this (strictly positive).
    pub residual_tol: f64,
    /// Stop once `||x_n - reference||` falls below this, when a reference
    /// limit is supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tol: Option<f64>,
    /// Suppress the stop checks before this step; useful for reproducing
    /// fixed step counts on problems where every point is already fixed.
    #[serde(default = "default_min_iters")]
    pub min_iters: usize,
}

fn default_min_iters() -> usize {
    1
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_iters: 1_000_000, residual_tol: 1e-10, target_tol: None, min_iters: 1 }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidStopRule("max_iters must be at least 1".into()));
        }
        if !(self.residual_tol.is_finite() && self.residual_tol > 0.0) {
            return Err(Error::InvalidStopRule("residual_tol must be strictly positive".into()));
        }
        if let Some(t) = self.target_tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidStopRule("target_tol must be strictly positive".into()));
            }
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ResidualMet,
    TargetMet,
    MaxIters,
}

/// Per-step diagnostics of a driver run.
///
/// `residual_seq[i]`, `residual_target[i]`, and (when a reference is
/// supplied) `dist_to_ref[i]` all describe step `i + 1`; the lists always
/// have equal length. Snapshots hold `(step, iterate)` pairs at the stride
/// plus the final step.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub snapshots: Vec<(usize, Vector)>,
    /// `||x_n - S_n x_n||` per step.
    pub residual_seq: Vec<f64>,
    /// `||x_n - T x_n||` per step.
    pub residual_target: Vec<f64>,
    /// `||x_n - reference||` per step, when a reference was supplied.
    pub dist_to_ref: Option<Vec<f64>>,
    pub stop_reason: StopReason,
    final_iterate: Vector,
}

/// Summary emitted next to the CSV trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSummary {
    pub stop_reason: StopReason,
    pub iters: usize,
    pub final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_dist: Option<f64>,
}

impl IterationTrace {
    pub fn final_iterate(&self) -> &Vector {
        &self.final_iterate
    }

    /// Number of recorded steps.
    pub fn steps(&self) -> usize {
        self.residual_seq.len()
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            stop_reason: self.stop_reason,
            iters: self.steps(),
            final_residual: *self.residual_target.last().expect("at least one step"),
            final_dist: self.dist_to_ref.as_ref().map(|d| *d.last().expect("nonempty")),
        }
    }

    /// Writes the trace as CSV with the fixed header
    /// `n,residual_S,residual_T,dist_to_ref`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,residual_S,residual_T,dist_to_ref")?;
        for i in 0..self.residual_seq.len() {
            match &self.dist_to_ref {
                Some(d) => writeln!(
                    w,
                    "{},{},{},{}",
                    i + 1,
                    self.residual_seq[i],
                    self.residual_target[i],
                    d[i]
                )?,
                None => writeln!(
                    w,
                    "{},{},{},",
                    i + 1,
                    self.residual_seq[i],
                    self.residual_target[i]
                )?,
            }
        }
        Ok(())
    }
}

/// Trace granularity knobs.
#[derive(Debug, Clone, Copy)]
pub struct TraceSpec {
    /// Record an iterate snapshot every `stride` steps (the final iterate
    /// is always recorded).
    pub stride: usize,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec { stride: DEFAULT_STRIDE }
    }
}

/// Scope of the contraction bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractionScope {
    Global,
    WithRespectToFixedSet,
}

/// Evaluation family `n -> f_n` with a contraction modulus below one.
#[derive(Clone)]
pub struct ContractionFamily {
    at: Arc<dyn Fn(usize, &Vector) -> Vector + Send + Sync>,
    theta: f64,
    scope: ContractionScope,
}

impl std::fmt::Debug for ContractionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContractionFamily")
            .field("theta", &self.theta)
            .field("scope", &self.scope)
            .finish()
    }
}

impl ContractionFamily {
    /// Constant family `f_n(x) = u`, a 0-contraction. Running the viscosity
    /// driver with it reproduces the anchored iteration bit for bit.
    pub fn constant_anchor(u: Vector) -> Self {
        ContractionFamily {
            at: Arc::new(move |_, _| u.clone()),
            theta: 0.0,
            scope: ContractionScope::Global,
        }
    }

    /// Family of constants `f_n(x) = u_n`.
    pub fn anchor_sequence<F>(points: F) -> Self
    where
        F: Fn(usize) -> Vector + Send + Sync + 'static,
    {
        ContractionFamily {
            at: Arc::new(move |n, _| points(n)),
            theta: 0.0,
            scope: ContractionScope::Global,
        }
    }

    /// Linear shrink `f(x) = theta * x`.
    pub fn scaling(theta: f64) -> Result<Self> {
        ContractionFamily::from_fn(theta, ContractionScope::Global, move |_, x: &Vector| {
            x.scale(theta)
        })
    }

    /// Arbitrary family with declared modulus and scope.
    pub fn from_fn<F>(theta: f64, scope: ContractionScope, at: F) -> Result<Self>
    where
        F: Fn(usize, &Vector) -> Vector + Send + Sync + 'static,
    {
        if !(theta.is_finite() && (0.0..1.0).contains(&theta)) {
            return Err(Error::ContractionRejected(format!(
                "contraction modulus must lie in [0, 1), got {theta}"
            )));
        }
        Ok(ContractionFamily { at: Arc::new(at), theta, scope })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn scope(&self) -> ContractionScope {
        self.scope
    }

    pub fn eval(&self, n: usize, x: &Vector) -> Vector {
        (self.at)(n, x)
    }
}

/// Anchored iteration `x_{n+1} = a_n u + (1 - a_n) S_n x_n`.
///
/// The coefficient schedule must tend to zero with diverging partial sums;
/// the iterates then converge to the projection of the anchor onto the
/// common fixed set, and every sampled common fixed point `w` bounds the
/// whole run by `max(||u - w||, ||x_1 - w||)`.
pub fn halpern(
    seq: &OperatorSequence,
    u: &Vector,
    x1: &Vector,
    alpha: &Schedule,
    stop: &StopRule,
    reference: Option<&Vector>,
) -> Result<IterationTrace> {
    halpern_traced(seq, u, x1, alpha, stop, reference, TraceSpec::default())
}

/// [`halpern`] with explicit trace granularity.
pub fn halpern_traced(
    seq: &OperatorSequence,
    u: &Vector,
    x1: &Vector,
    alpha: &Schedule,
    stop: &StopRule,
    reference: Option<&Vector>,
    trace: TraceSpec,
) -> Result<IterationTrace> {
    if u.dim() != seq.dim() {
        return Err(Error::DimensionMismatch { expected: seq.dim(), got: u.dim() });
    }
    viscosity_traced(
        seq,
        &ContractionFamily::constant_anchor(u.clone()),
        x1,
        alpha,
        stop,
        reference,
        trace,
    )
}

/// Viscosity iteration `y_{n+1} = a_n f_n(y_n) + (1 - a_n) S_n y_n`.
pub fn viscosity(
    seq: &OperatorSequence,
    f: &ContractionFamily,
    y1: &Vector,
    alpha: &Schedule,
    stop: &StopRule,
    reference: Option<&Vector>,
) -> Result<IterationTrace> {
    viscosity_traced(seq, f, y1, alpha, stop, reference, TraceSpec::default())
}

/// [`viscosity`] with explicit trace granularity.
pub fn viscosity_traced(
    seq: &OperatorSequence,
    f: &ContractionFamily,
    y1: &Vector,
    alpha: &Schedule,
    stop: &StopRule,
    reference: Option<&Vector>,
    trace: TraceSpec,
) -> Result<IterationTrace> {
    alpha.require_anchor_coefficients()?;
    stop.validate()?;
    if trace.stride == 0 {
        return Err(Error::InvalidArgument("trace stride must be positive".into()));
    }
    if y1.dim() != seq.dim() {
        return Err(Error::DimensionMismatch { expected: seq.dim(), got: y1.dim() });
    }
    if let Some(r) = reference {
        if r.dim() != seq.dim() {
            return Err(Error::DimensionMismatch { expected: seq.dim(), got: r.dim() });
        }
    }

    let target = seq.nst_target();
    let mut x = y1.clone();
    let mut snapshots = Vec::new();
    let mut residual_seq = Vec::new();
    let mut residual_target = Vec::new();
    let mut dist_to_ref = reference.map(|_| Vec::new());

    let mut n = 1usize;
    let stop_reason = loop {
        let sx = seq.at(n).apply(&x)?;
        let tx = target.apply(&x)?;
        let r_s = x.distance(&sx);
        let r_t = x.distance(&tx);
        residual_seq.push(r_s);
        residual_target.push(r_t);
        let d = reference.map(|r| x.distance(r));
        if let (Some(list), Some(d)) = (dist_to_ref.as_mut(), d) {
            list.push(d);
        }
        if n == 1 || n % trace.stride == 0 {
            snapshots.push((n, x.clone()));
        }

        if n >= stop.min_iters {
            if let (Some(tol), Some(d)) = (stop.target_tol, d) {
                if d <= tol {
                    break StopReason::TargetMet;
                }
            }
            if r_t <= stop.residual_tol {
                break StopReason::ResidualMet;
            }
        }
        if n >= stop.max_iters {
            break StopReason::MaxIters;
        }

        let a = alpha.value(n);
        let fx = f.eval(n, &x);
        if fx.dim() != seq.dim() {
            return Err(Error::DimensionMismatch { expected: seq.dim(), got: fx.dim() });
        }
        x = Vector::combine(a, &fx, 1.0 - a, &sx);
        n += 1;
    };

    if snapshots.last().map(|(k, _)| *k) != Some(n) {
        snapshots.push((n, x.clone()));
    }
    Ok(IterationTrace {
        snapshots,
        residual_seq,
        residual_target,
        dist_to_ref,
        stop_reason,
        final_iterate: x,
    })
}

/// Anchored proximal iteration `x_{n+1} = a_n u + (1 - a_n) J_{l_n} x_n`
/// over the resolvent family of `f`; converges to the projection of the
/// anchor onto the minimizer set.
pub fn proximal_halpern(
    f: &ScalarFunction,
    lambdas: &Schedule,
    u: &Vector,
    x1: &Vector,
    alpha: &Schedule,
    stop: &StopRule,
) -> Result<IterationTrace> {
    let seq = OperatorSequence::resolvent(f.clone(), lambdas.clone(), u.dim())?;
    halpern(&seq, u, x1, alpha, stop, None)
}

/// Anchored common-fixed-point iteration over
/// `S_n = g_n I + (1 - g_n) sum_k beta[n][k] T_k`; converges to the
/// projection of the anchor onto the intersection of the members' fixed
/// sets.
pub fn cfp_halpern(
    ops: Vec<Operator>,
    beta: BetaTable,
    gamma: Schedule,
    u: &Vector,
    x1: &Vector,
    alpha: &Schedule,
    stop: &StopRule,
) -> Result<IterationTrace> {
    let seq = OperatorSequence::cfp(ops, beta, gamma)?;
    halpern(&seq, u, x1, alpha, stop, None)
}

/// Solves the anchor-path equation `z = t u + (1 - t) T z` by iterating
/// the `(1 - t)`-contraction `z -> t u + (1 - t) T z` from `u` until the
/// equation residual drops below `tol`.
///
/// The inner loop caps at `ceil(log(tol) / log(1 - t)) + 64` steps, the
/// budget the known contraction factor prescribes for unit-scale data; a
/// run that still exceeds `tol` at the cap reports failure rather than
/// returning a point that misses the contract.
pub fn anchor_point(t_op: &Operator, u: &Vector, t: f64, tol: f64) -> Result<Vector> {
    if !(t.is_finite() && t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "anchor parameter must lie in (0, 1), got {t}"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be strictly positive".into()));
    }
    if u.dim() != t_op.domain_dim() {
        return Err(Error::DimensionMismatch { expected: t_op.domain_dim(), got: u.dim() });
    }
    let cap = (tol.ln() / (1.0 - t).ln()).ceil() as usize + 64;
    let mut z = u.clone();
    for _ in 0..cap {
        let tz = t_op.apply(&z)?;
        let next = Vector::combine(t, u, 1.0 - t, &tz);
        let moved = z.distance(&next);
        z = next;
        // the contraction factor bounds the new residual by (1 - t) * moved;
        // confirm against the equation directly before returning
        if moved * (1.0 - t) <= tol {
            let tz = t_op.apply(&z)?;
            let img = Vector::combine(t, u, 1.0 - t, &tz);
            if z.distance(&img) <= tol {
                return Ok(z);
            }
        }
    }
    let tz = t_op.apply(&z)?;
    let img = Vector::combine(t, u, 1.0 - t, &tz);
    if z.distance(&img) <= tol {
        Ok(z)
    } else {
        Err(Error::DidNotConverge(format!(
            "anchor path residual {:e} above {tol:e} after {cap} steps",
            z.distance(&img)
        )))
    }
}

/// Evaluates the anchor path along a decreasing parameter list and returns
/// the point at the smallest parameter, the best available approximation
/// of the retraction value the path converges to.
pub fn anchor_limit(t_op: &Operator, u: &Vector, t_values: &[f64], tol: f64) -> Result<Vector> {
    if t_values.is_empty() {
        return Err(Error::InvalidArgument("anchor parameter list is empty".into()));
    }
    for w in t_values.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidArgument(
                "anchor parameters must be strictly decreasing".into(),
            ));
        }
    }
    for &t in t_values {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "anchor parameter must lie in (0, 1), got {t}"
            )));
        }
    }
    anchor_point(t_op, u, *t_values.last().unwrap(), tol)
}
