//! Executable forms of the scalar recursion lemmas and empirical probes
//! for the operator-sequence properties.
//!
//! The probes are numeric surrogates for asymptotic statements: finite
//! windows stand in for tails, and seeded generators stand in for the
//! universally quantified sequences. Every report records its seed so a
//! failure reproduces exactly. Infinite-sequence claims are tested by
//! window extension: double the window and the property must persist.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sequences::{OperatorSequence, Schedule};
use crate::space::Vector;
use crate::{Error, Result};

/// Input pair on which a probe observed its worst violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vector,
    pub y: Vector,
    /// Trial index (0-based) that produced the pair.
    pub index: usize,
}

/// Outcome of an empirical property check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub property: String,
    pub trials: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<Witness>,
    pub seed: u64,
}

impl ProbeReport {
    /// Merge two reports for the same property, keeping the worse violation.
    pub fn merge(self, other: ProbeReport) -> ProbeReport {
        let (worse, better) = if self.worst_violation >= other.worst_violation {
            (self, other)
        } else {
            (other, self)
        };
        ProbeReport {
            trials: worse.trials + better.trials,
            pass: worse.pass && better.pass,
            ..worse
        }
    }
}

/// Tail fraction used for "terminal behavior" surrogates.
const TAIL_FRACTION: f64 = 0.25;
/// Tail max of a vanishing-gap displacement probe must drop below this
/// multiple of its head max.
const SNS_DECAY_RATIO: f64 = 0.25;
/// Absolute floor for the decay tolerance.
const SNS_DECAY_FLOOR: f64 = 1e-9;
/// Tolerance on the quantitative averaged inequality.
const SNS_QUANT_TOL: f64 = 1e-8;
/// Finite-window surrogate for `limsup <= 0`.
const GAMMA_TAIL_TOL: f64 = 1e-2;

fn tail_start(len: usize) -> usize {
    len - ((len as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, len)
}

/// Empirical check of the strongly-nonexpansive-sequence property.
///
/// For trial `n` the probe samples a bounded pair around a common fixed
/// point and moves `y` toward `x + (1/n) e` (a unit offset keeps the pair
/// from collapsing) just far enough that the norm gap
/// `||x - y|| - ||S_n x - S_n y||` drops below `1/n`. Along that family the
/// displacement difference `||(x - y) - (S_n x - S_n y)||` must decay; the
/// tail max is compared against a quarter of the head max. Sequences whose
/// members carry an averaged or firmly-nonexpansive certificate are
/// additionally held to the quantitative inequality
/// `||Sx - Sy||^2 <= ||x - y||^2 - (g/(1-g)) ||(I-S)x - (I-S)y||^2`,
/// and that violation (machine-precision for genuine members) is what the
/// report carries.
pub fn check_sns(seq: &OperatorSequence, seed: u64, trials: usize) -> ProbeReport {
    assert!(trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = seq.dim();

    let mut disp = Vec::with_capacity(trials);
    let mut pairs = Vec::with_capacity(trials);
    let mut quant_worst: f64 = 0.0;
    let mut quant_witness: Option<Witness> = None;
    let mut all_certified = true;

    for n in 1..=trials {
        let op = seq.at(n);
        let anchor = seq
            .common_fixed_set()
            .sample(&mut rng)
            .unwrap_or_else(|_| Vector::zeros(dim));
        let x = offset_within(&anchor, 2.0, &mut rng);
        let y_raw = offset_within(&anchor, 2.0, &mut rng);
        let delta = 1.0 / n as f64;
        let e = random_unit(dim, &mut rng);
        let target = x.add(&e.scale(delta));

        let gap_of = |c: f64| -> f64 {
            let y = Vector::combine(1.0 - c, &y_raw, c, &target);
            let sx = op.apply(&x).expect("dims validated");
            let sy = op.apply(&y).expect("dims validated");
            x.distance(&y) - sx.distance(&sy)
        };
        // smallest movement that drives the gap below delta; c = 1 always
        // qualifies because the separation itself shrinks to delta there
        let c_star = if gap_of(0.0) <= delta {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if gap_of(mid) <= delta {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        let y = Vector::combine(1.0 - c_star, &y_raw, c_star, &target);
        let sx = op.apply(&x).expect("dims validated");
        let sy = op.apply(&y).expect("dims validated");
        let displacement = x.sub(&sx).sub(&y.sub(&sy)).norm();
        disp.push(displacement);
        pairs.push((x.clone(), y.clone()));

        match op.certificate().identity_coefficient() {
            Some(g) if g > 0.0 && g < 1.0 => {
                for (px, py) in [(&x, &y), (&x, &y_raw)] {
                    let sx = op.apply(px).expect("dims validated");
                    let sy = op.apply(py).expect("dims validated");
                    let d2 = px.sub(&sx).sub(&py.sub(&sy)).norm().powi(2);
                    let violation = sx.distance(&sy).powi(2) + g / (1.0 - g) * d2
                        - px.distance(py).powi(2);
                    if violation > quant_worst {
                        quant_worst = violation;
                        quant_witness =
                            Some(Witness { x: px.clone(), y: py.clone(), index: n - 1 });
                    }
                }
            }
            _ => all_certified = false,
        }
    }

    let head_max = disp[..tail_start(trials).max(1)]
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    let tail = &disp[tail_start(trials)..];
    let (tail_max, tail_arg) = tail
        .iter()
        .enumerate()
        .fold((0.0f64, 0usize), |(m, am), (i, &v)| {
            if v > m {
                (v, i)
            } else {
                (m, am)
            }
        });
    let decay_tol = (SNS_DECAY_RATIO * head_max).max(SNS_DECAY_FLOOR);
    let decay_ok = tail_max <= decay_tol;
    let witness_index = tail_start(trials) + tail_arg;

    if all_certified {
        let pass = quant_worst <= SNS_QUANT_TOL && decay_ok;
        ProbeReport {
            property: "strongly_nonexpansive_sequence".into(),
            trials,
            worst_violation: if decay_ok { quant_worst } else { tail_max },
            tolerance: if decay_ok { SNS_QUANT_TOL } else { decay_tol },
            pass,
            witness: if pass {
                None
            } else if decay_ok {
                quant_witness
            } else {
                let (x, y) = pairs[witness_index].clone();
                Some(Witness { x, y, index: witness_index })
            },
            seed,
        }
    } else {
        ProbeReport {
            property: "strongly_nonexpansive_sequence".into(),
            trials,
            worst_violation: tail_max,
            tolerance: decay_tol,
            pass: decay_ok,
            witness: if decay_ok {
                None
            } else {
                let (x, y) = pairs[witness_index].clone();
                Some(Witness { x, y, index: witness_index })
            },
            seed,
        }
    }
}

fn offset_within<R: Rng>(anchor: &Vector, radius: f64, rng: &mut R) -> Vector {
    let d = anchor.dim();
    let dir = random_unit(d, rng);
    let r = radius * rng.random_range(0.0..1.0f64).powf(1.0 / d as f64);
    anchor.add(&dir.scale(r))
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = Vector::new(raw).unwrap();
        let n = v.norm();
        if n > 1e-3 {
            return v.scale(1.0 / n);
        }
    }
}

/// Residual-transfer check: along every supplied probe sequence whose own
/// residual `||x_n - S_n x_n||` vanishes (verified on the tail, otherwise
/// the probe is *rejected*, not failed), the target residual
/// `||x_n - T x_n||` must fall below `tol` by the end of the window.
pub fn check_nst(
    seq: &OperatorSequence,
    probes: &[Vec<Vector>],
    hypothesis_tol: f64,
    tol: f64,
) -> Result<ProbeReport> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("at least one probe required".into()));
    }
    let mut worst: f64 = 0.0;
    let mut witness: Option<Witness> = None;
    let mut total = 0usize;
    for (pi, probe) in probes.iter().enumerate() {
        if probe.len() < 4 {
            return Err(Error::ProbeRejected(format!("probe {pi} is too short")));
        }
        for (i, x) in probe.iter().enumerate() {
            let n = i + 1;
            if x.norm() > 1e9 {
                return Err(Error::ProbeRejected(format!("probe {pi} is unbounded")));
            }
            let r = seq.at(n).apply(x)?.distance(x);
            if i >= tail_start(probe.len()) && r > hypothesis_tol {
                return Err(Error::ProbeRejected(format!(
                    "probe {pi} violates its own hypothesis: ||x_n - S_n x_n|| = {r:e} at n = {n}"
                )));
            }
        }
        total += probe.len();
        let last = probe.last().unwrap();
        let t_last = seq.nst_target().apply(last)?;
        let r_t = t_last.distance(last);
        if r_t > worst {
            worst = r_t;
            witness = Some(Witness { x: last.clone(), y: t_last, index: pi });
        }
    }
    let pass = worst <= tol;
    Ok(ProbeReport {
        property: "nst_condition".into(),
        trials: total,
        worst_violation: worst,
        tolerance: tol,
        pass,
        witness: if pass { None } else { witness },
        seed: 0,
    })
}

/// Runs the scalar recursion `xi_{n+1} = (1 - a_n) xi_n + a_n g_n` with
/// equality dynamics, clamped at zero. Requires diverging `a` sums and a
/// `g` tail compatible with `limsup g <= 0`; the generated sequence then
/// vanishes, which the callers assert at their chosen horizon.
pub fn xu_recursion(
    xi1: f64,
    alpha: &Schedule,
    gamma: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    if !(xi1.is_finite() && xi1 >= 0.0) {
        return Err(Error::InvalidArgument("xi1 must be nonnegative".into()));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument("need at least two steps".into()));
    }
    if !alpha.flags().sum_diverges {
        return Err(Error::ScheduleRejected(
            "the recursion only vanishes under diverging coefficient sums".into(),
        ));
    }
    if gamma.len() < steps - 1 {
        return Err(Error::InvalidArgument(format!(
            "gamma supplies {} values but {} are needed",
            gamma.len(),
            steps - 1
        )));
    }
    let tail = &gamma[tail_start(steps - 1)..steps - 1];
    let tail_max = tail.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if tail_max > GAMMA_TAIL_TOL {
        return Err(Error::ProbeRejected(format!(
            "gamma tail max {tail_max} is incompatible with limsup <= 0"
        )));
    }
    let mut xi = Vec::with_capacity(steps);
    xi.push(xi1);
    let mut cur = xi1;
    for n in 1..steps {
        let a = alpha.value(n);
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::ScheduleRejected(format!(
                "coefficient {a} at index {n} lies outside [0, 1]"
            )));
        }
        cur = ((1.0 - a) * cur + a * gamma[n - 1]).max(0.0);
        xi.push(cur);
    }
    Ok(xi)
}

/// Index map extracted from a finite window: `tau(n)` is the largest
/// `k <= n` with `xi[k] <= xi[k + 1]` (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaingeTau {
    /// First index with an increase; the map is defined from here on.
    pub start: usize,
    /// `tau[i]` is the value at `n = start + i`, for `n` up to the last
    /// window index.
    pub tau: Vec<usize>,
}

impl MaingeTau {
    pub fn at(&self, n: usize) -> usize {
        assert!(n >= self.start && n < self.start + self.tau.len());
        self.tau[n - self.start]
    }

    pub fn last_n(&self) -> usize {
        self.start + self.tau.len() - 1
    }
}

/// Computes the eventually-increasing index map of a window.
///
/// A strictly decreasing window is rejected rather than mapped: it has no
/// admissible index, and being monotone it needs no index map to certify
/// convergence. With `n0_hint` the output starts no earlier than the
/// given index.
pub fn mainge_tau(xi: &[f64], n0_hint: Option<usize>) -> Result<MaingeTau> {
    if xi.len() < 2 {
        return Err(Error::InvalidArgument("window needs at least two entries".into()));
    }
    let first = (0..xi.len() - 1)
        .find(|&k| xi[k] <= xi[k + 1])
        .ok_or_else(|| {
            Error::ProbeRejected(
                "strictly decreasing window admits no increase index".into(),
            )
        })?;
    let admissible: Vec<usize> = (0..xi.len() - 1).filter(|&k| xi[k] <= xi[k + 1]).collect();
    let start = first.max(n0_hint.unwrap_or(0)).min(xi.len() - 1);
    let mut tau = Vec::with_capacity(xi.len() - start);
    let mut ptr = 0usize;
    for n in start..xi.len() {
        let cap = n.min(xi.len() - 2);
        while ptr + 1 < admissible.len() && admissible[ptr + 1] <= cap {
            ptr += 1;
        }
        // largest admissible index <= cap
        tau.push(admissible[ptr]);
    }
    Ok(MaingeTau { start, tau })
}

/// Finite weighted sum `sum_j lambda_j y(j, n)` over a bounded table.
///
/// Weights must be nonnegative and sum to 1 within `1e-12`; the result's
/// norm is then bounded by the table's sup norm, and it inherits the
/// table's decay in `n`.
pub fn weighted_tail_sum<F>(lambdas: &[f64], table: F, n: usize) -> Result<Vector>
where
    F: Fn(usize, usize) -> Vector,
{
    if lambdas.is_empty() {
        return Err(Error::InvalidWeights("empty weight list".into()));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidWeights("weights must be nonnegative".into()));
    }
    let sum: f64 = lambdas.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {sum}, deviating from 1 beyond 1e-12"
        )));
    }
    let first = table(1, n);
    let mut acc = Vector::zeros(first.dim());
    for (j, lambda) in lambdas.iter().enumerate() {
        let y = table(j + 1, n);
        if y.dim() != acc.dim() {
            return Err(Error::DimensionMismatch { expected: acc.dim(), got: y.dim() });
        }
        acc = acc.add(&y.scale(*lambda));
    }
    Ok(acc)
}

/// Convergence surrogate for the tau-conditioned scalar recursion.
///
/// On each window the hypotheses are checked along the window's own index
/// map: the recursion inequality must hold at the selected indices and the
/// selected drive terms must have a nonpositive-compatible tail. Windows
/// violating the hypotheses are rejected, not failed. The conclusion —
/// the window is convergent — is asserted as a Cauchy tail: the tail
/// oscillation (max minus min) must drop below `tol` on every window.
pub fn scalar_recursion_convergence_probe<X, G>(
    xi_gen: X,
    alpha: &Schedule,
    gamma_gen: G,
    windows: &[usize],
    tol: f64,
) -> Result<ProbeReport>
where
    X: Fn(usize) -> f64,
    G: Fn(usize) -> f64,
{
    if windows.is_empty() {
        return Err(Error::InvalidArgument("at least one window required".into()));
    }
    let mut worst: f64 = 0.0;
    let mut total = 0usize;
    for &w in windows {
        if w < 8 {
            return Err(Error::InvalidArgument("windows must have at least 8 entries".into()));
        }
        total += w;
        let xi: Vec<f64> = (1..=w).map(&xi_gen).collect();
        if xi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::ProbeRejected(
                "the generated window leaves the nonnegative reals".into(),
            ));
        }
        // hypothesis check along the window's index map, when one exists
        if let Ok(map) = mainge_tau(&xi, None) {
            let usable = map.last_n().min(xi.len() - 2);
            let mut selected_gammas = Vec::new();
            for n in map.start..=usable {
                let k = map.at(n); // 0-based; schedule and generators are 1-based
                let a = alpha.value(k + 1);
                let g = gamma_gen(k + 1);
                selected_gammas.push(g);
                let bound = (1.0 - a) * xi[k] + a * g;
                if xi[k + 1] > bound + 1e-9 {
                    return Err(Error::ProbeRejected(format!(
                        "recursion inequality fails at selected index {k}: {} > {bound}",
                        xi[k + 1]
                    )));
                }
            }
            if !selected_gammas.is_empty() {
                let tail = &selected_gammas[tail_start(selected_gammas.len())..];
                let tail_max = tail.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                if tail_max > GAMMA_TAIL_TOL {
                    return Err(Error::ProbeRejected(format!(
                        "selected drive terms have tail max {tail_max}, incompatible with \
                         limsup <= 0"
                    )));
                }
            }
        }
        let tail = &xi[tail_start(w)..];
        let max = tail.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = tail.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        worst = worst.max(max - min);
    }
    Ok(ProbeReport {
        property: "scalar_recursion_convergence".into(),
        trials: total,
        worst_violation: worst,
        tolerance: tol,
        pass: worst <= tol,
        witness: None,
        seed: 0,
    })
}
