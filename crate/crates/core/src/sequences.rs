//! Operator sequences `n -> S_n` with validated parameter schedules.
//!
//! A sequence bundles three things: the indexed family itself, the reference
//! operator `T` whose residual the family's asymptotic fixed points are
//! measured against (the residual-transfer target), and a descriptor of the
//! common fixed-point set. The constructors below build the three families
//! used by the iteration drivers; arbitrary user families run through
//! [`OperatorSequence::from_fn`] without a structural certificate and rely
//! on the empirical probes in `verify`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::operators::{
    truncated_geometric_weights, Certificate, ConvexSet, Operator, ScalarFunction, WEIGHT_SUM_TOL,
};
use crate::{Error, Result};

/// Asymptotic properties a schedule is asserted to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScheduleFlags {
    /// `value(n) -> 0`.
    pub tends_to_zero: bool,
    /// `sum_n value(n) = infinity`.
    pub sum_diverges: bool,
    /// `inf_n value(n) > 0`.
    pub inf_positive: bool,
    /// `sup_n value(n) < 1`.
    pub sup_below_one: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    /// `min(1, c / (n + offset + 1)^p)`.
    Power { c: f64, p: f64, offset: f64 },
    Constant(f64),
    /// `1 / (n + shift)`.
    HarmonicShifted(f64),
    /// Explicit head values; the last value repeats past the end.
    Custom(Vec<f64>),
}

/// A validated real sequence used as an iteration parameter.
///
/// Built-in families derive their asymptotic flags analytically; custom
/// schedules carry caller-asserted flags and are marked unverified.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    family: Family,
    flags: ScheduleFlags,
    analytically_verified: bool,
}

impl Schedule {
    /// Power family `min(1, c / (n + offset + 1)^p)` with `c > 0`,
    /// `p > 0`, `offset >= 0`. Diverging partial sums require `p <= 1`.
    pub fn power(c: f64, p: f64, offset: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::ScheduleRejected("power scale must be positive".into()));
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::ScheduleRejected("power exponent must be positive".into()));
        }
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::ScheduleRejected("power offset must be nonnegative".into()));
        }
        let flags = ScheduleFlags {
            tends_to_zero: true,
            sum_diverges: p <= 1.0,
            inf_positive: false,
            // values are nonincreasing, so the sup is the first value
            sup_below_one: c / (2.0 + offset).powf(p) < 1.0,
        };
        Ok(Schedule { family: Family::Power { c, p, offset }, flags, analytically_verified: true })
    }

    /// Constant schedule `value(n) = v` with `v > 0`.
    pub fn constant(v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::ScheduleRejected("constant value must be positive".into()));
        }
        let flags = ScheduleFlags {
            tends_to_zero: false,
            sum_diverges: true,
            inf_positive: true,
            sup_below_one: v < 1.0,
        };
        Ok(Schedule { family: Family::Constant(v), flags, analytically_verified: true })
    }

    /// Harmonic schedule `value(n) = 1 / (n + shift)` with `shift >= 0`.
    pub fn harmonic_shifted(shift: f64) -> Result<Self> {
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::ScheduleRejected("harmonic shift must be nonnegative".into()));
        }
        let flags = ScheduleFlags {
            tends_to_zero: true,
            sum_diverges: true,
            inf_positive: false,
            sup_below_one: shift > 0.0,
        };
        Ok(Schedule {
            family: Family::HarmonicShifted(shift),
            flags,
            analytically_verified: true,
        })
    }

    /// Custom schedule from explicit values and caller-asserted flags.
    ///
    /// The last value repeats for indices past the list. The flags are
    /// taken on trust (`analytically_verified` reports `false`), except
    /// that obviously inconsistent combinations are rejected.
    pub fn custom(values: Vec<f64>, flags: ScheduleFlags) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ScheduleRejected("custom schedule needs at least one value".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::ScheduleRejected(
                "custom schedule values must be finite and positive".into(),
            ));
        }
        if flags.inf_positive && flags.tends_to_zero {
            return Err(Error::ScheduleRejected(
                "a schedule cannot both tend to zero and have a positive infimum".into(),
            ));
        }
        Ok(Schedule { family: Family::Custom(values), flags, analytically_verified: false })
    }

    /// Value at index `n >= 1`.
    pub fn value(&self, n: usize) -> f64 {
        assert!(n >= 1, "schedules are indexed from 1");
        match &self.family {
            Family::Power { c, p, offset } => (c / (n as f64 + offset + 1.0).powf(*p)).min(1.0),
            Family::Constant(v) => *v,
            Family::HarmonicShifted(shift) => 1.0 / (n as f64 + shift),
            Family::Custom(values) => values[(n - 1).min(values.len() - 1)],
        }
    }

    pub fn flags(&self) -> ScheduleFlags {
        self.flags
    }

    /// Whether the flags were derived analytically rather than asserted.
    pub fn analytically_verified(&self) -> bool {
        self.analytically_verified
    }

    /// Gate for anchor coefficients: `value -> 0`, diverging sums, and
    /// values inside `(0, 1]`.
    pub fn require_anchor_coefficients(&self) -> Result<()> {
        if !self.flags.tends_to_zero {
            return Err(Error::ScheduleRejected(
                "anchor coefficients must tend to zero".into(),
            ));
        }
        if !self.flags.sum_diverges {
            return Err(Error::ScheduleRejected(
                "anchor coefficients must have divergent partial sums (power exponents above 1 \
                 make the series summable)"
                    .into(),
            ));
        }
        if let Family::Custom(values) = &self.family {
            if values.iter().any(|v| *v > 1.0) {
                return Err(Error::ScheduleRejected(
                    "anchor coefficients must lie in (0, 1]".into(),
                ));
            }
        }
        if let Family::HarmonicShifted(_) | Family::Power { .. } | Family::Constant(_) =
            &self.family
        {
            if self.value(1) > 1.0 {
                return Err(Error::ScheduleRejected(
                    "anchor coefficients must lie in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Gate for relaxation coefficients: `0 < inf <= sup < 1`.
    pub fn require_relaxation_coefficients(&self) -> Result<()> {
        if !self.flags.inf_positive {
            return Err(Error::ScheduleRejected(
                "relaxation coefficients must stay bounded away from zero".into(),
            ));
        }
        if !self.flags.sup_below_one {
            return Err(Error::ScheduleRejected(
                "relaxation coefficients must stay bounded away from one".into(),
            ));
        }
        Ok(())
    }

    /// Gate for resolvent parameters: `inf > 0`.
    pub fn require_resolvent_parameters(&self) -> Result<()> {
        if !self.flags.inf_positive {
            return Err(Error::ScheduleRejected(
                "resolvent parameters must stay bounded away from zero".into(),
            ));
        }
        Ok(())
    }
}

type BetaRule = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

/// Double array of mixing coefficients `beta[n][k]`, `1 <= k <= n`, with
/// unit row sums and `inf { beta[n][k] : n >= k } > 0` for each `k`.
///
/// The default rule is geometric, `2^-k` for `k < n` with the tail mass
/// folded into `k = n`, which achieves `inf = 2^-k`. The uniform rule
/// `1/n` is *not* admissible: its per-column infimum vanishes.
#[derive(Clone)]
pub struct BetaTable {
    rule: Option<BetaRule>,
}

impl Default for BetaTable {
    fn default() -> Self {
        BetaTable::geometric()
    }
}

impl std::fmt::Debug for BetaTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.rule.is_none() { "BetaTable::geometric" } else { "BetaTable::custom" })
    }
}

impl BetaTable {
    pub fn geometric() -> Self {
        BetaTable { rule: None }
    }

    /// Custom rule `(n, k) -> beta[n][k]`; rows are validated on access.
    pub fn custom<F>(rule: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Send + Sync + 'static,
    {
        BetaTable { rule: Some(Arc::new(rule)) }
    }

    /// Entry `beta[n][k]` for `1 <= k <= n`.
    pub fn value(&self, n: usize, k: usize) -> f64 {
        assert!(k >= 1 && k <= n, "beta table is indexed by 1 <= k <= n");
        match &self.rule {
            None => {
                if k < n {
                    0.5f64.powi(k as i32)
                } else {
                    // k == n carries the folded tail mass 2^-(n-1)
                    0.5f64.powi((n - 1) as i32)
                }
            }
            Some(rule) => rule(n, k),
        }
    }

    /// Row `beta[n][1..=n]`, validated to sum to 1 within `1e-12`.
    pub fn row(&self, n: usize) -> Result<Vec<f64>> {
        assert!(n >= 1);
        let row: Vec<f64> = (1..=n).map(|k| self.value(n, k)).collect();
        if row.iter().any(|b| !b.is_finite() || *b <= 0.0 || *b > 1.0) {
            return Err(Error::InvalidWeights(format!(
                "beta row {n} has entries outside (0, 1]"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "beta row {n} sums to {sum}, deviating from 1 beyond {WEIGHT_SUM_TOL:e}"
            )));
        }
        Ok(row)
    }

    /// Row `n` folded onto `m` operators: entries with `k > m` (which repeat
    /// the last operator) are merged into position `m`.
    ///
    /// The merged tail is taken as the exact complement of the head mass,
    /// which keeps the fold well-defined for indices where individual row
    /// entries would underflow.
    pub fn folded_row(&self, n: usize, m: usize) -> Result<Vec<f64>> {
        assert!(m >= 1);
        if n <= m {
            return self.row(n);
        }
        let mut folded: Vec<f64> = (1..m).map(|k| self.value(n, k)).collect();
        if folded.iter().any(|b| !b.is_finite() || *b <= 0.0 || *b > 1.0) {
            return Err(Error::InvalidWeights(format!(
                "beta row {n} has head entries outside (0, 1]"
            )));
        }
        let head: f64 = folded.iter().sum();
        let tail = 1.0 - head;
        if tail <= 0.0 {
            return Err(Error::InvalidWeights(format!(
                "beta row {n} leaves no tail mass to fold"
            )));
        }
        folded.push(tail);
        Ok(folded)
    }
}

#[derive(Clone)]
enum SeqKind {
    Constant(Arc<Operator>),
    Resolvent { f: ScalarFunction, lambdas: Schedule, dim: usize },
    Cfp { ops: Vec<Arc<Operator>>, beta: BetaTable, gamma: Schedule },
    Custom(Arc<dyn Fn(usize) -> Operator + Send + Sync>),
}

/// An indexed family `n -> S_n`, its residual-transfer target `T`, and the
/// common fixed-point set the iterations converge into.
#[derive(Clone)]
pub struct OperatorSequence {
    kind: SeqKind,
    nst_target: Arc<Operator>,
    common_fixed_set: ConvexSet,
    sns_certified: bool,
    dim: usize,
}

impl std::fmt::Debug for OperatorSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            SeqKind::Constant(_) => "constant",
            SeqKind::Resolvent { .. } => "resolvent",
            SeqKind::Cfp { .. } => "cfp",
            SeqKind::Custom(_) => "custom",
        };
        f.debug_struct("OperatorSequence")
            .field("kind", &kind)
            .field("dim", &self.dim)
            .field("sns_certified", &self.sns_certified)
            .finish()
    }
}

impl OperatorSequence {
    /// The constant family `S_n = T`.
    ///
    /// `T` must declare a fixed set and carry a firmly-nonexpansive or
    /// averaged certificate, which is what makes the constant family
    /// strongly nonexpansive by construction.
    pub fn constant(op: Operator) -> Result<Self> {
        let fixed = op.fixed_set().cloned().ok_or_else(|| {
            Error::InvalidOperator(
                "constant sequences require an operator with a declared fixed set".into(),
            )
        })?;
        if op.certificate() == Certificate::NonexpansiveOnly {
            return Err(Error::InvalidOperator(
                "constant sequences require a firmly nonexpansive or averaged certificate; wrap \
                 raw operators with OperatorSequence::from_fn instead"
                    .into(),
            ));
        }
        let dim = op.domain_dim();
        let op = Arc::new(op);
        Ok(OperatorSequence {
            kind: SeqKind::Constant(op.clone()),
            nst_target: op,
            common_fixed_set: fixed,
            sns_certified: true,
            dim,
        })
    }

    /// Resolvent family `S_n = (I + lambda_n * df)^{-1}` with target the
    /// unit resolvent; the common fixed set is the minimizer set of `f`,
    /// independent of the parameter.
    pub fn resolvent(f: ScalarFunction, lambdas: Schedule, dim: usize) -> Result<Self> {
        f.validate()?;
        lambdas.require_resolvent_parameters()?;
        let target = Operator::resolvent(f.clone(), 1.0, dim)?;
        Ok(OperatorSequence {
            common_fixed_set: f.argmin_set(dim),
            kind: SeqKind::Resolvent { f, lambdas, dim },
            nst_target: Arc::new(target),
            sns_certified: true,
            dim,
        })
    }

    /// Common-fixed-point family
    /// `S_n = gamma_n * I + (1 - gamma_n) * sum_k beta[n][k] T_k`,
    /// with indices past the supplied operators repeating the last one
    /// (realized by folding the corresponding beta mass).
    ///
    /// The target is the geometric combination of the `T_k`, whose fixed
    /// set equals the common fixed set of the family.
    pub fn cfp(ops: Vec<Operator>, beta: BetaTable, gamma: Schedule) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidOperator("cfp family needs at least one operator".into()));
        }
        gamma.require_relaxation_coefficients()?;
        let dim = ops[0].domain_dim();
        for op in &ops {
            if op.domain_dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: op.domain_dim() });
            }
            if op.fixed_set().is_none() {
                return Err(Error::InvalidOperator(
                    "cfp family requires every operator to declare its fixed set".into(),
                ));
            }
        }
        // probe the first few rows so malformed custom tables fail fast
        for n in 1..=8 {
            beta.row(n)?;
        }
        let sets: Vec<ConvexSet> =
            ops.iter().map(|op| op.fixed_set().cloned().unwrap()).collect();
        let common = if sets.len() == 1 {
            sets.into_iter().next().unwrap()
        } else {
            ConvexSet::Intersection { sets }
        };
        let target = Operator::truncated_geometric_combo(ops.clone())?;
        Ok(OperatorSequence {
            kind: SeqKind::Cfp { ops: ops.into_iter().map(Arc::new).collect(), beta, gamma },
            nst_target: Arc::new(target),
            common_fixed_set: common,
            sns_certified: true,
            dim,
        })
    }

    /// Wraps a raw family. No structural certificate is recorded; the
    /// empirical probes in `verify` are the only guard.
    pub fn from_fn<F>(dim: usize, at: F, nst_target: Operator, common_fixed_set: ConvexSet) -> Self
    where
        F: Fn(usize) -> Operator + Send + Sync + 'static,
    {
        OperatorSequence {
            kind: SeqKind::Custom(Arc::new(at)),
            nst_target: Arc::new(nst_target),
            common_fixed_set,
            sns_certified: false,
            dim,
        }
    }

    /// The member `S_n` for `n >= 1`.
    pub fn at(&self, n: usize) -> Operator {
        assert!(n >= 1, "operator sequences are indexed from 1");
        match &self.kind {
            SeqKind::Constant(op) => (**op).clone(),
            SeqKind::Resolvent { f, lambdas, dim } => {
                Operator::resolvent(f.clone(), lambdas.value(n), *dim)
                    .expect("validated at construction")
            }
            SeqKind::Cfp { ops, beta, gamma } => {
                let m = ops.len();
                let take = n.min(m);
                let weights = beta.folded_row(n, m).expect("validated at construction");
                let members: Vec<Operator> =
                    ops[..take].iter().map(|op| (**op).clone()).collect();
                let combo = Operator::convex_combo(weights, members)
                    .expect("validated at construction");
                Operator::relax(gamma.value(n), combo).expect("validated at construction")
            }
            SeqKind::Custom(at) => at(n),
        }
    }

    pub fn nst_target(&self) -> &Operator {
        &self.nst_target
    }

    pub fn common_fixed_set(&self) -> &ConvexSet {
        &self.common_fixed_set
    }

    pub fn sns_certified(&self) -> bool {
        self.sns_certified
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Beta row folded onto `m` operators for the default geometric table.
pub fn geometric_folded_row(n: usize, m: usize) -> Vec<f64> {
    if n >= m {
        truncated_geometric_weights(m)
    } else {
        truncated_geometric_weights(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(coords: &[f64]) -> Vector {
        Vector::new(coords.to_vec()).unwrap()
    }

    fn proj_x1() -> Operator {
        Operator::projection(ConvexSet::Halfspace { a: v(&[1.0, 0.0]), b: 0.0 }).unwrap()
    }

    fn proj_x2() -> Operator {
        Operator::projection(ConvexSet::Halfspace { a: v(&[0.0, 1.0]), b: 0.0 }).unwrap()
    }

    #[test]
    fn power_schedule_is_harmonic_for_unit_parameters() {
        let s = Schedule::power(1.0, 1.0, 0.0).unwrap();
        assert_eq!(s.value(1), 0.5);
        assert_eq!(s.value(99), 0.01);
        assert!(s.flags().tends_to_zero && s.flags().sum_diverges);
        assert!(s.require_anchor_coefficients().is_ok());
    }

    #[test]
    fn constant_schedule_flags() {
        let s = Schedule::constant(0.5).unwrap();
        let f = s.flags();
        assert!(f.sum_diverges && !f.tends_to_zero && f.inf_positive && f.sup_below_one);
        assert!(s.require_anchor_coefficients().is_err());
        assert!(s.require_relaxation_coefficients().is_ok());
    }

    #[test]
    fn summable_power_rejected_as_anchor() {
        let s = Schedule::power(1.0, 2.0, 0.0).unwrap();
        assert!(!s.flags().sum_diverges);
        assert!(s.require_anchor_coefficients().is_err());
    }

    #[test]
    fn harmonic_partial_sums_outgrow_log() {
        // divergence witness: sum_{n<=N} 1/(n+1) = ln(N) + O(1), with the
        // O(1) constant just below zero, so the log bound carries unit slack
        let s = Schedule::power(1.0, 1.0, 0.0).unwrap();
        let mut sum = 0.0;
        let mut n: usize = 1;
        for bound in [10usize, 100, 10_000, 1_000_000] {
            while n <= bound {
                sum += s.value(n);
                n += 1;
            }
            assert!(sum >= (bound as f64).ln() - 1.0, "partial sum fell behind log at {bound}");
        }
    }

    #[test]
    fn custom_schedule_is_unverified() {
        let flags = ScheduleFlags { tends_to_zero: true, sum_diverges: true, ..Default::default() };
        let s = Schedule::custom(vec![0.5, 0.25, 0.125], flags).unwrap();
        assert!(!s.analytically_verified());
        assert_eq!(s.value(2), 0.25);
        // past the end the last value repeats
        assert_eq!(s.value(10), 0.125);
        assert!(Schedule::custom(vec![], flags).is_err());
        let bad = ScheduleFlags { tends_to_zero: true, inf_positive: true, ..Default::default() };
        assert!(Schedule::custom(vec![0.5], bad).is_err());
    }

    #[test]
    fn beta_rows_sum_to_one_and_match_geometric_rule() {
        let beta = BetaTable::geometric();
        assert_eq!(beta.row(1).unwrap(), vec![1.0]);
        assert_eq!(beta.row(2).unwrap(), vec![0.5, 0.5]);
        assert_eq!(beta.row(3).unwrap(), vec![0.5, 0.25, 0.25]);
        for n in 1..=50 {
            let row = beta.row(n).unwrap();
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "row {n} sums to {sum}");
        }
        // per-column infimum over n >= k is 2^-k
        for k in 1..=10usize {
            let inf = (k..=k + 40)
                .map(|n| beta.value(n.max(k), k))
                .fold(f64::INFINITY, f64::min);
            assert!((inf - 0.5f64.powi(k as i32)).abs() <= 1e-15);
        }
    }

    #[test]
    fn folded_rows_merge_tail_mass() {
        let beta = BetaTable::geometric();
        assert_eq!(beta.folded_row(2, 2).unwrap(), vec![0.5, 0.5]);
        assert_eq!(beta.folded_row(7, 2).unwrap(), vec![0.5, 0.5]);
        assert_eq!(beta.folded_row(7, 3).unwrap(), vec![0.5, 0.25, 0.25]);
        assert_eq!(beta.folded_row(1, 3).unwrap(), vec![1.0]);
    }

    #[test]
    fn malformed_custom_beta_rejected() {
        let beta = BetaTable::custom(|n, _k| 1.0 / n as f64 + 0.1);
        assert!(beta.row(3).is_err());
    }

    #[test]
    fn constant_sequence_basics() {
        let seq = OperatorSequence::constant(proj_x1()).unwrap();
        assert!(seq.sns_certified());
        let x = v(&[2.0, -1.0]);
        assert_eq!(seq.at(1).apply(&x).unwrap(), seq.at(7).apply(&x).unwrap());
        let seq = OperatorSequence::constant(Operator::identity(2)).unwrap();
        assert_eq!(seq.at(3).apply(&x).unwrap(), x);
        let relaxed = Operator::relax(
            0.5,
            Operator::projection(ConvexSet::Ball { center: v(&[0.0, 0.0]), radius: 1.0 }).unwrap(),
        )
        .unwrap();
        assert!(OperatorSequence::constant(relaxed).unwrap().sns_certified());
    }

    #[test]
    fn constant_sequence_rejects_uncertified_or_setless() {
        let raw = Operator::from_fn(2, None, |x: &Vector| x.clone());
        assert!(OperatorSequence::constant(raw).is_err());
        let raw_with_set = Operator::from_fn(
            2,
            Some(ConvexSet::Ball { center: v(&[0.0, 0.0]), radius: 0.0 }),
            |x: &Vector| x.scale(-1.0),
        );
        assert!(OperatorSequence::constant(raw_with_set).is_err());
    }

    #[test]
    fn resolvent_sequence_soft_threshold() {
        let lambdas = Schedule::constant(1.0).unwrap();
        let seq = OperatorSequence::resolvent(ScalarFunction::AbsValue, lambdas, 1).unwrap();
        let y = seq.at(4).apply(&v(&[2.5])).unwrap();
        assert!((y.coords()[0] - 1.5).abs() < 1e-15);
        // fixed set of the quadratic family is its minimizer
        let seq = OperatorSequence::resolvent(
            ScalarFunction::Quadratic { curvature: 1.0, center: 0.0 },
            Schedule::constant(2.0).unwrap(),
            1,
        )
        .unwrap();
        match seq.common_fixed_set() {
            ConvexSet::Box { lo, hi } => {
                assert_eq!(lo.coords(), &[0.0]);
                assert_eq!(hi.coords(), &[0.0]);
            }
            other => panic!("unexpected fixed set {other:?}"),
        }
        // prox of an indicator is the clamp, independent of lambda
        let seq = OperatorSequence::resolvent(
            ScalarFunction::Indicator { lo: 0.0, hi: 1.0 },
            Schedule::constant(2.0).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(seq.at(3).apply(&v(&[4.0])).unwrap().coords(), &[1.0]);
    }

    #[test]
    fn resolvent_sequence_requires_inf_positive() {
        let vanishing = Schedule::power(1.0, 1.0, 0.0).unwrap();
        assert!(OperatorSequence::resolvent(ScalarFunction::AbsValue, vanishing, 1).is_err());
    }

    #[test]
    fn resolvent_fixed_set_is_parameter_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seq = OperatorSequence::resolvent(
            ScalarFunction::Indicator { lo: -1.0, hi: 2.0 },
            Schedule::constant(3.0).unwrap(),
            2,
        )
        .unwrap();
        for _ in 0..50 {
            let z = seq.common_fixed_set().sample(&mut rng).unwrap();
            for n in [1usize, 2, 17, 50] {
                assert!(seq.at(n).apply(&z).unwrap().distance(&z) <= 1e-12);
            }
            assert!(seq.nst_target().apply(&z).unwrap().distance(&z) <= 1e-12);
        }
    }

    #[test]
    fn cfp_single_operator_degenerates_to_relaxation() {
        let gamma = Schedule::constant(0.5).unwrap();
        let seq = OperatorSequence::cfp(vec![proj_x1()], BetaTable::geometric(), gamma).unwrap();
        let x = v(&[2.0, 0.0]);
        // gamma x + (1-gamma) P x = midpoint
        assert_eq!(seq.at(5).apply(&x).unwrap(), v(&[1.0, 0.0]));
        let tx = seq.nst_target().apply(&x).unwrap();
        assert_eq!(tx, v(&[0.0, 0.0]));
    }

    #[test]
    fn cfp_inner_weights_fold_at_n_two() {
        let gamma = Schedule::constant(0.5).unwrap();
        let seq =
            OperatorSequence::cfp(vec![proj_x1(), proj_x2()], BetaTable::geometric(), gamma)
                .unwrap();
        // inner combo weights (0.5, 0.5): at (2,2) the combo gives (1,1),
        // then relaxing with gamma = 0.5 gives (1.5, 1.5)
        let y = seq.at(2).apply(&v(&[2.0, 2.0])).unwrap();
        assert_eq!(y, v(&[1.5, 1.5]));
    }

    #[test]
    fn cfp_fixes_common_points_for_all_probed_indices() {
        let gamma = Schedule::constant(0.5).unwrap();
        let seq =
            OperatorSequence::cfp(vec![proj_x1(), proj_x2()], BetaTable::geometric(), gamma)
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let z = seq.common_fixed_set().sample(&mut rng).unwrap();
            for n in 1..=50 {
                assert!(seq.at(n).apply(&z).unwrap().distance(&z) <= 1e-12);
            }
        }
    }

    #[test]
    fn cfp_gate_rejections() {
        let alpha_like = Schedule::power(1.0, 1.0, 0.0).unwrap();
        assert!(OperatorSequence::cfp(vec![proj_x1()], BetaTable::geometric(), alpha_like)
            .is_err());
        let gamma = Schedule::constant(0.5).unwrap();
        assert!(OperatorSequence::cfp(vec![], BetaTable::geometric(), gamma.clone()).is_err());
        let one = Schedule::constant(1.0).unwrap();
        assert!(OperatorSequence::cfp(vec![proj_x1()], BetaTable::geometric(), one).is_err());
    }

    #[test]
    fn constant_family_fixes_declared_points_over_window() {
        let seq = OperatorSequence::constant(proj_x1()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let z = seq.common_fixed_set().sample(&mut rng).unwrap();
            for n in 1..=50 {
                assert!(seq.at(n).apply(&z).unwrap().distance(&z) <= 1e-12);
            }
        }
    }
}
