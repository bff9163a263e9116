//! Nonexpansive operators and the combinators that preserve their
//! fixed-point structure.
//!
//! Operators carry three pieces of metadata next to their action: the
//! domain dimension, an optional analytic descriptor of their fixed-point
//! set, and a certificate recording *how* they were built
//! (`firmly_nonexpansive` for projections and resolvents, `averaged` for
//! relaxations with the identity, `nonexpansive_only` otherwise). The
//! certificates are declared by the constructors, never inferred from
//! sampling; the `verify` module tests the declarations.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::space::{inner, Vector};
use crate::{Error, Result};

/// Weight-sum slack accepted by convex combinations.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Analytic description of a nonempty closed convex subset of `R^d`.
///
/// The canonical JSON form is a tagged union, e.g.
/// `{"type": "halfspace", "a": [1, 0], "b": 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexSet {
    /// `{ x : <a, x> <= b }` with `a != 0`.
    Halfspace { a: Vector, b: f64 },
    /// Closed ball of the given center and radius (radius 0 is a point).
    Ball { center: Vector, radius: f64 },
    /// Axis-aligned box `{ x : lo <= x <= hi }` componentwise.
    Box { lo: Vector, hi: Vector },
    /// Affine subspace through `point` orthogonal to the pairwise
    /// orthonormal `normals`; an empty normal list denotes the whole space.
    Affine { point: Vector, normals: Vec<Vector> },
    /// Intersection of the listed sets. Nonemptiness is caller-asserted.
    Intersection { sets: Vec<ConvexSet> },
}

impl ConvexSet {
    /// Checks the structural invariants of the descriptor.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Halfspace { a, .. } => {
                if a.norm() == 0.0 {
                    return Err(Error::InvalidDescriptor(
                        "halfspace normal must be nonzero".into(),
                    ));
                }
            }
            ConvexSet::Ball { radius, .. } => {
                if !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::InvalidDescriptor(
                        "ball radius must be finite and nonnegative".into(),
                    ));
                }
            }
            ConvexSet::Box { lo, hi } => {
                lo.check_dim(hi)?;
                if lo.coords().iter().zip(hi.coords()).any(|(l, h)| l > h) {
                    return Err(Error::InvalidDescriptor(
                        "box requires lo <= hi componentwise".into(),
                    ));
                }
            }
            ConvexSet::Affine { point, normals } => {
                for (i, n) in normals.iter().enumerate() {
                    point.check_dim(n)?;
                    if (n.norm() - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidDescriptor(format!(
                            "affine normal {i} is not unit length"
                        )));
                    }
                    for m in &normals[..i] {
                        if inner(n, m)?.abs() > 1e-9 {
                            return Err(Error::InvalidDescriptor(
                                "affine normals must be pairwise orthonormal".into(),
                            ));
                        }
                    }
                }
            }
            ConvexSet::Intersection { sets } => {
                if sets.is_empty() {
                    return Err(Error::InvalidDescriptor(
                        "intersection requires at least one set".into(),
                    ));
                }
                let d = sets[0].dim();
                for s in sets {
                    s.validate()?;
                    if s.dim() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: s.dim(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Ambient dimension of the set.
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Halfspace { a, .. } => a.dim(),
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::Box { lo, .. } => lo.dim(),
            ConvexSet::Affine { point, .. } => point.dim(),
            ConvexSet::Intersection { sets } => sets[0].dim(),
        }
    }

    pub fn is_primitive(&self) -> bool {
        !matches!(self, ConvexSet::Intersection { .. })
    }

    /// Flattens nested intersections into a list of primitive sets.
    pub fn flatten(&self) -> Vec<&ConvexSet> {
        match self {
            ConvexSet::Intersection { sets } => sets.iter().flat_map(|s| s.flatten()).collect(),
            other => vec![other],
        }
    }

    /// Membership test up to `tol` on the constraint residuals.
    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(match self {
            ConvexSet::Halfspace { a, b } => inner(a, x)? <= b + tol,
            ConvexSet::Ball { center, radius } => x.distance(center) <= radius + tol,
            ConvexSet::Box { lo, hi } => x
                .coords()
                .iter()
                .zip(lo.coords().iter().zip(hi.coords()))
                .all(|(xi, (l, h))| *xi >= l - tol && *xi <= h + tol),
            ConvexSet::Affine { point, normals } => {
                let shifted = x.sub(point);
                normals
                    .iter()
                    .all(|n| inner(n, &shifted).map(|v| v.abs() <= tol).unwrap_or(false))
            }
            ConvexSet::Intersection { sets } => {
                for s in sets {
                    if !s.contains(x, tol)? {
                        return Ok(false);
                    }
                }
                true
            }
        })
    }

    /// Distance from `x` to the set (primitives only).
    pub fn distance_to(&self, x: &Vector) -> Result<f64> {
        Ok(project(self, x)?.distance(x))
    }

    /// Draws a point of the set by projecting a Gaussian-ish seed onto it.
    ///
    /// Intersections are sampled with cyclic projections, which converge to
    /// *some* intersection point; a degenerate (empty) intersection is
    /// reported as an error.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vector> {
        let d = self.dim();
        let seed = Vector::new(
            (0..d)
                .map(|_| rng.random_range(-3.0..3.0))
                .collect::<Vec<_>>(),
        )?;
        match self {
            ConvexSet::Intersection { sets } => {
                let mut x = seed;
                for _ in 0..10_000 {
                    for s in sets {
                        x = project_primitive_or_recurse(s, &x)?;
                    }
                    if self.contains(&x, 1e-12)? {
                        return Ok(x);
                    }
                }
                Err(Error::OracleFailure(
                    "cyclic projection sampler failed to reach the intersection".into(),
                ))
            }
            primitive => project(primitive, &seed),
        }
    }
}

fn project_primitive_or_recurse(set: &ConvexSet, x: &Vector) -> Result<Vector> {
    match set {
        ConvexSet::Intersection { sets } => {
            let mut y = x.clone();
            for s in sets {
                y = project_primitive_or_recurse(s, &y)?;
            }
            Ok(y)
        }
        primitive => project(primitive, x),
    }
}

/// Metric projection onto a primitive convex set.
///
/// Intersections are rejected here; certified intersection projections live
/// in the `oracle` module.
pub fn project(set: &ConvexSet, x: &Vector) -> Result<Vector> {
    set.validate()?;
    if x.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: x.dim(),
        });
    }
    match set {
        ConvexSet::Halfspace { a, b } => {
            let excess = inner(a, x)? - b;
            if excess <= 0.0 {
                Ok(x.clone())
            } else {
                let nn = inner(a, a)?;
                Ok(x.sub(&a.scale(excess / nn)))
            }
        }
        ConvexSet::Ball { center, radius } => {
            let offset = x.sub(center);
            let dist = offset.norm();
            if dist <= *radius {
                Ok(x.clone())
            } else {
                Ok(center.add(&offset.scale(radius / dist)))
            }
        }
        ConvexSet::Box { lo, hi } => Vector::new(
            x.coords()
                .iter()
                .zip(lo.coords().iter().zip(hi.coords()))
                .map(|(xi, (l, h))| xi.max(*l).min(*h))
                .collect(),
        ),
        ConvexSet::Affine { point, normals } => {
            let mut y = x.clone();
            let shifted = x.sub(point);
            for n in normals {
                let c = inner(n, &shifted)?;
                y = y.sub(&n.scale(c));
            }
            Ok(y)
        }
        ConvexSet::Intersection { .. } => Err(Error::InvalidArgument(
            "projection onto an intersection requires the oracle module".into(),
        )),
    }
}

/// Separable scalar convex function, applied componentwise by `prox`.
///
/// Canonical JSON form: `{"type": "abs_value"}`,
/// `{"type": "quadratic", "curvature": c, "center": m}` for
/// `z -> (c/2)(z - m)^2`, and `{"type": "indicator", "lo": a, "hi": b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarFunction {
    AbsValue,
    Quadratic { curvature: f64, center: f64 },
    Indicator { lo: f64, hi: f64 },
}

impl ScalarFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarFunction::AbsValue => Ok(()),
            ScalarFunction::Quadratic { curvature, center } => {
                if !curvature.is_finite() || *curvature <= 0.0 {
                    return Err(Error::InvalidFunction(
                        "quadratic curvature must be strictly positive".into(),
                    ));
                }
                if !center.is_finite() {
                    return Err(Error::InvalidFunction("quadratic center must be finite".into()));
                }
                Ok(())
            }
            ScalarFunction::Indicator { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::InvalidFunction(
                        "indicator interval must be nonempty and finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Function value (infinite outside an indicator interval).
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            ScalarFunction::AbsValue => z.abs(),
            ScalarFunction::Quadratic { curvature, center } => {
                0.5 * curvature * (z - center).powi(2)
            }
            ScalarFunction::Indicator { lo, hi } => {
                if z >= *lo && z <= *hi {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Closed-form scalar resolvent `(I + lambda * df)^{-1}`.
    pub fn prox_scalar(&self, lambda: f64, z: f64) -> f64 {
        match self {
            ScalarFunction::AbsValue => {
                // soft threshold
                if z > lambda {
                    z - lambda
                } else if z < -lambda {
                    z + lambda
                } else {
                    0.0
                }
            }
            ScalarFunction::Quadratic { curvature, center } => {
                (z + lambda * curvature * center) / (1.0 + lambda * curvature)
            }
            ScalarFunction::Indicator { lo, hi } => z.max(*lo).min(*hi),
        }
    }

    /// Interval of minimizers, i.e. the zero set of the subdifferential.
    pub fn argmin_interval(&self) -> (f64, f64) {
        match self {
            ScalarFunction::AbsValue => (0.0, 0.0),
            ScalarFunction::Quadratic { center, .. } => (*center, *center),
            ScalarFunction::Indicator { lo, hi } => (*lo, *hi),
        }
    }

    /// Minimizer set of the separable extension to `R^d`.
    pub fn argmin_set(&self, dim: usize) -> ConvexSet {
        let (lo, hi) = self.argmin_interval();
        ConvexSet::Box {
            lo: Vector::new(vec![lo; dim]).expect("argmin interval is finite"),
            hi: Vector::new(vec![hi; dim]).expect("argmin interval is finite"),
        }
    }
}

/// Componentwise proximal map `x -> (I + lambda * df)^{-1} x`.
pub fn prox(f: &ScalarFunction, lambda: f64, x: &Vector) -> Result<Vector> {
    f.validate()?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(
            "prox requires a strictly positive lambda".into(),
        ));
    }
    Vector::new(
        x.coords()
            .iter()
            .map(|&z| f.prox_scalar(lambda, z))
            .collect(),
    )
}

/// How an operator's nonexpansiveness was established at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    FirmlyNonexpansive,
    Averaged { alpha: f64 },
    NonexpansiveOnly,
}

impl Certificate {
    /// Coefficient `gamma` of the identity in `gamma*I + (1-gamma)*N`, when
    /// the certificate implies one (`1/2` for firmly nonexpansive maps).
    pub fn identity_coefficient(&self) -> Option<f64> {
        match self {
            Certificate::FirmlyNonexpansive => Some(0.5),
            Certificate::Averaged { alpha } => Some(1.0 - alpha),
            Certificate::NonexpansiveOnly => None,
        }
    }
}

#[derive(Clone)]
enum Kind {
    Identity,
    Constant(Vector),
    Project(ConvexSet),
    Prox { f: ScalarFunction, lambda: f64 },
    Relax { gamma: f64, inner: Arc<Operator> },
    Combo { weights: Vec<f64>, ops: Vec<Arc<Operator>> },
    Custom(Arc<dyn Fn(&Vector) -> Vector + Send + Sync>),
}

/// A nonexpansive self-map of `R^d` with optional fixed-set descriptor.
///
/// Operators are immutable after construction and `apply` is pure, so they
/// are safe to share across threads.
#[derive(Clone)]
pub struct Operator {
    kind: Kind,
    domain_dim: usize,
    fixed_set: Option<ConvexSet>,
    certificate: Certificate,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Identity => "identity",
            Kind::Constant(_) => "constant",
            Kind::Project(_) => "project",
            Kind::Prox { .. } => "prox",
            Kind::Relax { .. } => "relax",
            Kind::Combo { .. } => "convex_combo",
            Kind::Custom(_) => "custom",
        };
        f.debug_struct("Operator")
            .field("kind", &kind)
            .field("dim", &self.domain_dim)
            .field("certificate", &self.certificate)
            .finish()
    }
}

impl Operator {
    /// Identity map; every point is fixed.
    pub fn identity(dim: usize) -> Self {
        Operator {
            kind: Kind::Identity,
            domain_dim: dim,
            // The whole space, written as an affine set with no constraints.
            fixed_set: Some(ConvexSet::Affine {
                point: Vector::zeros(dim),
                normals: vec![],
            }),
            certificate: Certificate::FirmlyNonexpansive,
        }
    }

    /// Constant map to `p`; firmly nonexpansive with fixed set `{p}`.
    pub fn constant(p: Vector) -> Self {
        let dim = p.dim();
        Operator {
            kind: Kind::Constant(p.clone()),
            domain_dim: dim,
            fixed_set: Some(ConvexSet::Ball { center: p, radius: 0.0 }),
            certificate: Certificate::FirmlyNonexpansive,
        }
    }

    /// Metric projection onto a primitive convex set.
    pub fn projection(set: ConvexSet) -> Result<Self> {
        set.validate()?;
        if !set.is_primitive() {
            return Err(Error::InvalidArgument(
                "projection operators require a primitive set; use the oracle for intersections"
                    .into(),
            ));
        }
        Ok(Operator {
            domain_dim: set.dim(),
            fixed_set: Some(set.clone()),
            kind: Kind::Project(set),
            certificate: Certificate::FirmlyNonexpansive,
        })
    }

    /// Componentwise resolvent of `f` at parameter `lambda`.
    pub fn resolvent(f: ScalarFunction, lambda: f64, dim: usize) -> Result<Self> {
        f.validate()?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(
                "resolvent requires a strictly positive lambda".into(),
            ));
        }
        Ok(Operator {
            fixed_set: Some(f.argmin_set(dim)),
            kind: Kind::Prox { f, lambda },
            domain_dim: dim,
            certificate: Certificate::FirmlyNonexpansive,
        })
    }

    /// Relaxation `x -> gamma*x + (1-gamma)*Vx` with `gamma` in `(0,1)`.
    ///
    /// The fixed set is inherited from `V` and the result is
    /// `(1-gamma)`-averaged.
    pub fn relax(gamma: f64, v: Operator) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(
                "relaxation coefficient must lie in the open interval (0,1)".into(),
            ));
        }
        Ok(Operator {
            domain_dim: v.domain_dim,
            fixed_set: v.fixed_set.clone(),
            certificate: Certificate::Averaged { alpha: 1.0 - gamma },
            kind: Kind::Relax {
                gamma,
                inner: Arc::new(v),
            },
        })
    }

    /// Convex combination `x -> sum_k w_k T_k x`.
    ///
    /// Weights must be strictly positive and sum to 1 within `1e-12`. The
    /// fixed set is the intersection of the members' fixed sets (valid by
    /// strict convexity of the Euclidean norm), recorded only when every
    /// member declares one. The combination of firmly nonexpansive maps is
    /// firmly nonexpansive; otherwise only plain nonexpansiveness is
    /// certified.
    pub fn convex_combo(weights: Vec<f64>, ops: Vec<Operator>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidWeights("empty operator list".into()));
        }
        if weights.len() != ops.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} operators",
                weights.len(),
                ops.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidWeights(
                "weights must be strictly positive".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, deviating from 1 beyond {WEIGHT_SUM_TOL:e}"
            )));
        }
        let dim = ops[0].domain_dim;
        for op in &ops {
            if op.domain_dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: op.domain_dim,
                });
            }
        }
        let fixed_set = if ops.iter().all(|op| op.fixed_set.is_some()) {
            let sets: Vec<ConvexSet> = ops
                .iter()
                .map(|op| op.fixed_set.clone().unwrap())
                .collect();
            Some(if sets.len() == 1 {
                sets.into_iter().next().unwrap()
            } else {
                ConvexSet::Intersection { sets }
            })
        } else {
            None
        };
        let certificate = if ops
            .iter()
            .all(|op| op.certificate == Certificate::FirmlyNonexpansive)
        {
            Certificate::FirmlyNonexpansive
        } else {
            Certificate::NonexpansiveOnly
        };
        Ok(Operator {
            domain_dim: dim,
            fixed_set,
            certificate,
            kind: Kind::Combo {
                weights,
                ops: ops.into_iter().map(Arc::new).collect(),
            },
        })
    }

    /// Convex combination with geometric weights `2^-1, ..., 2^-(n-1)` and
    /// the tail mass folded into the last term, so the weights sum to 1
    /// exactly.
    pub fn truncated_geometric_combo(ops: Vec<Operator>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidWeights("empty operator list".into()));
        }
        let weights = truncated_geometric_weights(ops.len());
        Operator::convex_combo(weights, ops)
    }

    /// Wraps an arbitrary map. The caller asserts nonexpansiveness; the
    /// certificate is `nonexpansive_only` and `verify::check_sns` is the
    /// empirical guard.
    pub fn from_fn<F>(dim: usize, fixed_set: Option<ConvexSet>, f: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Operator {
            kind: Kind::Custom(Arc::new(f)),
            domain_dim: dim,
            fixed_set,
            certificate: Certificate::NonexpansiveOnly,
        }
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn fixed_set(&self) -> Option<&ConvexSet> {
        self.fixed_set.as_ref()
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    /// Applies the operator.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.domain_dim {
            return Err(Error::DimensionMismatch {
                expected: self.domain_dim,
                got: x.dim(),
            });
        }
        Ok(match &self.kind {
            Kind::Identity => x.clone(),
            Kind::Constant(p) => p.clone(),
            Kind::Project(set) => project(set, x)?,
            Kind::Prox { f, lambda } => prox(f, *lambda, x)?,
            Kind::Relax { gamma, inner } => {
                let vx = inner.apply(x)?;
                Vector::combine(*gamma, x, 1.0 - *gamma, &vx)
            }
            Kind::Combo { weights, ops } => {
                let mut acc = Vector::zeros(self.domain_dim);
                for (w, op) in weights.iter().zip(ops) {
                    acc = acc.add(&op.apply(x)?.scale(*w));
                }
                acc
            }
            Kind::Custom(f) => {
                let y = f(x);
                if y.dim() != self.domain_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.domain_dim,
                        got: y.dim(),
                    });
                }
                y
            }
        })
    }
}

/// Geometric weights `2^-1, ..., 2^-(n-1)` with the tail folded into the
/// last entry: `(2^-1, ..., 2^-(n-1), 2^-(n-1))`.
pub fn truncated_geometric_weights(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![1.0];
    }
    let mut w: Vec<f64> = (1..n).map(|k| 0.5f64.powi(k as i32)).collect();
    w.push(0.5f64.powi((n - 1) as i32));
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(coords: &[f64]) -> Vector {
        Vector::new(coords.to_vec()).unwrap()
    }

    fn halfspace_x1() -> ConvexSet {
        // x_1 <= 0
        ConvexSet::Halfspace { a: v(&[1.0, 0.0]), b: 0.0 }
    }

    fn halfspace_x2() -> ConvexSet {
        // x_2 <= 0
        ConvexSet::Halfspace { a: v(&[0.0, 1.0]), b: 0.0 }
    }

    fn random_vec<R: Rng>(rng: &mut R, d: usize, r: f64) -> Vector {
        Vector::new((0..d).map(|_| rng.random_range(-r..r)).collect()).unwrap()
    }

    #[test]
    fn project_halfspace_closed_form() {
        let p = project(&halfspace_x1(), &v(&[2.0, 3.0])).unwrap();
        assert_eq!(p, v(&[0.0, 3.0]));
    }

    #[test]
    fn project_ball_radial_scaling() {
        let set = ConvexSet::Ball { center: v(&[0.0, 0.0]), radius: 1.0 };
        let p = project(&set, &v(&[3.0, 4.0])).unwrap();
        assert!((p.coords()[0] - 0.6).abs() < 1e-15);
        assert!((p.coords()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn project_box_clamps() {
        let set = ConvexSet::Box { lo: v(&[0.0, 0.0]), hi: v(&[1.0, 1.0]) };
        let p = project(&set, &v(&[-1.0, 0.5])).unwrap();
        assert_eq!(p, v(&[0.0, 0.5]));
    }

    #[test]
    fn project_rejects_intersection_and_mismatch() {
        let set = ConvexSet::Intersection { sets: vec![halfspace_x1(), halfspace_x2()] };
        assert!(project(&set, &v(&[1.0, 1.0])).is_err());
        assert!(project(&halfspace_x1(), &v(&[1.0])).is_err());
    }

    #[test]
    fn descriptor_validation() {
        assert!(ConvexSet::Halfspace { a: v(&[0.0, 0.0]), b: 1.0 }.validate().is_err());
        assert!(ConvexSet::Box { lo: v(&[1.0]), hi: v(&[0.0]) }.validate().is_err());
        assert!(ConvexSet::Ball { center: v(&[0.0]), radius: -1.0 }.validate().is_err());
        let skewed = ConvexSet::Affine { point: v(&[0.0, 0.0]), normals: vec![v(&[1.0, 1.0])] };
        assert!(skewed.validate().is_err());
        let ok = ConvexSet::Affine {
            point: v(&[0.0, 0.0]),
            normals: vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])],
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn prox_abs_matches_soft_threshold() {
        let f = ScalarFunction::AbsValue;
        let p = prox(&f, 1.0, &v(&[2.5])).unwrap();
        assert!((p.coords()[0] - 1.5).abs() < 1e-15);
        let p = prox(&f, 1.0, &v(&[0.0])).unwrap();
        assert_eq!(p.coords()[0], 0.0);
    }

    #[test]
    fn prox_quadratic_stationarity() {
        // curvature 1, center 0, lambda 1, x = 3: z + (z - 3) = 0 => 1.5
        let f = ScalarFunction::Quadratic { curvature: 1.0, center: 0.0 };
        let p = prox(&f, 1.0, &v(&[3.0])).unwrap();
        assert!((p.coords()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn prox_rejects_nonpositive_lambda() {
        assert!(prox(&ScalarFunction::AbsValue, 0.0, &v(&[1.0])).is_err());
        assert!(prox(&ScalarFunction::AbsValue, -1.0, &v(&[1.0])).is_err());
    }

    #[test]
    fn relax_midpoint_of_projection() {
        let proj = Operator::projection(halfspace_x1()).unwrap();
        let s = Operator::relax(0.5, proj).unwrap();
        let y = s.apply(&v(&[2.0, 0.0])).unwrap();
        assert_eq!(y, v(&[1.0, 0.0]));
        assert_eq!(s.certificate(), Certificate::Averaged { alpha: 0.5 });
    }

    #[test]
    fn relax_keeps_fixed_points() {
        let proj = Operator::projection(halfspace_x1()).unwrap();
        let s = Operator::relax(0.3, proj).unwrap();
        let x = v(&[-2.0, 5.0]);
        assert_eq!(s.apply(&x).unwrap(), x);
    }

    #[test]
    fn relax_constant_map() {
        let c = Operator::constant(v(&[0.0, 0.0]));
        let s = Operator::relax(0.25, c).unwrap();
        assert_eq!(s.apply(&v(&[4.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn relax_rejects_bad_gamma() {
        let id = Operator::identity(2);
        assert!(Operator::relax(0.0, id.clone()).is_err());
        assert!(Operator::relax(1.0, id).is_err());
    }

    #[test]
    fn combo_singleton_matches_member() {
        let proj = Operator::projection(halfspace_x1()).unwrap();
        let combo = Operator::convex_combo(vec![1.0], vec![proj.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_vec(&mut rng, 2, 5.0);
            assert_eq!(combo.apply(&x).unwrap(), proj.apply(&x).unwrap());
        }
    }

    #[test]
    fn combo_average_of_projections() {
        let p1 = Operator::projection(halfspace_x1()).unwrap();
        let p2 = Operator::projection(halfspace_x2()).unwrap();
        let combo = Operator::convex_combo(vec![0.5, 0.5], vec![p1, p2]).unwrap();
        // average of (0,2) and (2,0)
        assert_eq!(combo.apply(&v(&[2.0, 2.0])).unwrap(), v(&[1.0, 1.0]));
        // common fixed point is untouched
        let z = v(&[-1.0, -2.0]);
        assert_eq!(combo.apply(&z).unwrap(), z);
        assert_eq!(combo.certificate(), Certificate::FirmlyNonexpansive);
    }

    #[test]
    fn combo_rejects_bad_weights() {
        let id = Operator::identity(1);
        assert!(Operator::convex_combo(vec![], vec![]).is_err());
        assert!(Operator::convex_combo(vec![0.5, 0.6], vec![id.clone(), id.clone()]).is_err());
        assert!(Operator::convex_combo(vec![1.5, -0.5], vec![id.clone(), id.clone()]).is_err());
    }

    #[test]
    fn geometric_weights_fold_tail() {
        assert_eq!(truncated_geometric_weights(1), vec![1.0]);
        assert_eq!(truncated_geometric_weights(3), vec![0.5, 0.25, 0.25]);
        for n in 1..12 {
            let sum: f64 = truncated_geometric_weights(n).iter().sum();
            assert_eq!(sum, 1.0);
        }
    }

    #[test]
    fn geometric_combo_of_identities_is_identity() {
        let combo = Operator::truncated_geometric_combo(vec![
            Operator::identity(2),
            Operator::identity(2),
        ])
        .unwrap();
        let x = v(&[0.3, -7.0]);
        assert_eq!(combo.apply(&x).unwrap(), x);
    }

    #[test]
    fn nonexpansiveness_on_random_pairs() {
        let ops: Vec<Operator> = vec![
            Operator::projection(halfspace_x1()).unwrap(),
            Operator::projection(ConvexSet::Ball { center: v(&[1.0, -1.0]), radius: 2.0 }).unwrap(),
            Operator::projection(ConvexSet::Box { lo: v(&[-1.0, 0.0]), hi: v(&[1.0, 2.0]) })
                .unwrap(),
            Operator::resolvent(ScalarFunction::AbsValue, 0.7, 2).unwrap(),
            Operator::relax(0.3, Operator::projection(halfspace_x2()).unwrap()).unwrap(),
            Operator::truncated_geometric_combo(vec![
                Operator::projection(halfspace_x1()).unwrap(),
                Operator::projection(halfspace_x2()).unwrap(),
                Operator::resolvent(
                    ScalarFunction::Quadratic { curvature: 2.0, center: 0.5 },
                    1.3,
                    2,
                )
                .unwrap(),
            ])
            .unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for op in &ops {
            for _ in 0..1000 {
                let x = random_vec(&mut rng, 2, 10.0);
                let y = random_vec(&mut rng, 2, 10.0);
                let lhs = op.apply(&x).unwrap().distance(&op.apply(&y).unwrap());
                assert!(lhs <= x.distance(&y) + 1e-10, "{op:?} expanded a pair");
            }
        }
    }

    #[test]
    fn firm_nonexpansiveness_of_project_and_prox() {
        let ops: Vec<Operator> = vec![
            Operator::projection(halfspace_x1()).unwrap(),
            Operator::projection(ConvexSet::Ball { center: v(&[0.5, 0.5]), radius: 1.5 }).unwrap(),
            Operator::projection(ConvexSet::Box { lo: v(&[0.0, 0.0]), hi: v(&[1.0, 1.0]) })
                .unwrap(),
            Operator::resolvent(ScalarFunction::AbsValue, 2.0, 2).unwrap(),
            Operator::resolvent(ScalarFunction::Indicator { lo: 0.0, hi: 1.0 }, 3.0, 2).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for op in &ops {
            for _ in 0..500 {
                let x = random_vec(&mut rng, 2, 8.0);
                let y = random_vec(&mut rng, 2, 8.0);
                let tx = op.apply(&x).unwrap();
                let ty = op.apply(&y).unwrap();
                let diff = tx.sub(&ty);
                let lhs = inner(&diff, &diff).unwrap();
                let rhs = inner(&diff, &x.sub(&y)).unwrap();
                assert!(lhs <= rhs + 1e-10, "{op:?} violated firm nonexpansiveness");
            }
        }
    }

    // Quantitative averaged inequality for relaxations, the workable form of
    // the strongly-nonexpansive-sequence property.
    #[test]
    fn averaged_inequality_for_relaxations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &gamma in &[0.25, 0.5, 0.75] {
            let s = Operator::relax(gamma, Operator::projection(halfspace_x1()).unwrap()).unwrap();
            for _ in 0..500 {
                let x = random_vec(&mut rng, 2, 8.0);
                let y = random_vec(&mut rng, 2, 8.0);
                let sx = s.apply(&x).unwrap();
                let sy = s.apply(&y).unwrap();
                let lhs = sx.distance(&sy).powi(2);
                let disp = x.sub(&sx).sub(&y.sub(&sy)).norm().powi(2);
                let rhs = x.distance(&y).powi(2) - gamma / (1.0 - gamma) * disp;
                assert!(lhs <= rhs + 1e-10);
            }
        }
    }

    // Variational characterization of the metric projection.
    #[test]
    fn projection_variational_inequality() {
        let sets = vec![
            halfspace_x1(),
            ConvexSet::Ball { center: v(&[1.0, 1.0]), radius: 2.0 },
            ConvexSet::Box { lo: v(&[-1.0, -1.0]), hi: v(&[1.0, 1.0]) },
            ConvexSet::Affine { point: v(&[1.0, 0.0]), normals: vec![v(&[0.0, 1.0])] },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for set in &sets {
            let x = random_vec(&mut rng, 2, 6.0);
            let q = project(set, &x).unwrap();
            for _ in 0..200 {
                let z = set.sample(&mut rng).unwrap();
                let val = inner(&x.sub(&q), &z.sub(&q)).unwrap();
                assert!(val <= 1e-10, "VI violated for {set:?}: {val}");
            }
        }
    }

    // x - J_lambda(x) lands in lambda*[-1, 1] with matching signs.
    #[test]
    fn resolvent_inclusion_for_abs() {
        let lambda = 0.8;
        let op = Operator::resolvent(ScalarFunction::AbsValue, lambda, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let x = random_vec(&mut rng, 1, 5.0);
            let jx = op.apply(&x).unwrap();
            let r = x.coords()[0] - jx.coords()[0];
            assert!(r.abs() <= lambda + 1e-12);
            let z = jx.coords()[0];
            if z > 0.0 {
                assert!((r - lambda).abs() <= 1e-12);
            } else if z < 0.0 {
                assert!((r + lambda).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn combo_fixes_sampled_intersection_points() {
        let p1 = Operator::projection(halfspace_x1()).unwrap();
        let p2 = Operator::projection(halfspace_x2()).unwrap();
        let combo = Operator::convex_combo(vec![0.5, 0.5], vec![p1, p2]).unwrap();
        let fixed = combo.fixed_set().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let z = fixed.sample(&mut rng).unwrap();
            assert!(combo.apply(&z).unwrap().distance(&z) <= 1e-12);
        }
    }

    #[test]
    fn scalar_function_validation() {
        assert!(ScalarFunction::Quadratic { curvature: 0.0, center: 0.0 }.validate().is_err());
        assert!(ScalarFunction::Indicator { lo: 1.0, hi: 0.0 }.validate().is_err());
    }

    #[test]
    fn operators_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Operator>();
        assert_send_sync::<ConvexSet>();
        assert_send_sync::<ScalarFunction>();
        assert_send_sync::<crate::sequences::OperatorSequence>();
        assert_send_sync::<crate::sequences::BetaTable>();
    }

    #[test]
    fn descriptor_json_canonical_form() {
        let set = halfspace_x1();
        let s = serde_json::to_string(&set).unwrap();
        assert_eq!(s, r#"{"type":"halfspace","a":[1.0,0.0],"b":0.0}"#);
        let back: ConvexSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, set);
        let f = ScalarFunction::Quadratic { curvature: 1.0, center: 0.0 };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"type":"quadratic","curvature":1.0,"center":0.0}"#);
    }
}
