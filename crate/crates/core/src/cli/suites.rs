//! Built-in verification batteries behind `fixedpoint verify`.
//!
//! Each suite bundles a handful of property probes on canonical problems,
//! including the designed negative controls: the rotation family must fail
//! the strong-nonexpansiveness probe, and the oscillating window must be
//! rejected by the scalar recursion probe. A suite passes only when every
//! entry matches its expected polarity.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SuiteEntry, SuiteOutcome};
use crate::iterate::{halpern_traced, StopRule, TraceSpec};
use crate::operators::{ConvexSet, Operator, ScalarFunction};
use crate::oracle::{
    dykstra, project_intersection_oracle, prox_scalar_oracle, variational_inequality_check,
    OracleMethod, AGREEMENT_TOL,
};
use crate::sequences::{BetaTable, OperatorSequence, Schedule};
use crate::space::{inner, Vector};
use crate::verify::{
    check_nst, check_sns, mainge_tau, scalar_recursion_convergence_probe, weighted_tail_sum,
    xu_recursion, ProbeReport,
};
use crate::{Error, Result};

/// The suites `verify` knows about (besides `all`).
pub const SUITE_NAMES: [&str; 4] = ["sns", "nst", "lemmas", "oracle-crosscheck"];

fn v(coords: &[f64]) -> Vector {
    Vector::new(coords.to_vec()).unwrap()
}

fn halfspace_x1() -> ConvexSet {
    ConvexSet::Halfspace { a: v(&[1.0, 0.0]), b: 0.0 }
}

fn halfspace_x2() -> ConvexSet {
    ConvexSet::Halfspace { a: v(&[0.0, 1.0]), b: 0.0 }
}

fn rotation_sequence(theta: f64) -> OperatorSequence {
    let (s, c) = theta.sin_cos();
    let rot = move |x: &Vector| {
        let a = x.coords()[0];
        let b = x.coords()[1];
        Vector::new(vec![c * a - s * b, s * a + c * b]).unwrap()
    };
    let origin = ConvexSet::Ball { center: v(&[0.0, 0.0]), radius: 0.0 };
    let target = Operator::from_fn(2, Some(origin.clone()), rot.clone());
    OperatorSequence::from_fn(2, move |_n| Operator::from_fn(2, None, rot.clone()), target, origin)
}

fn named(mut report: ProbeReport, name: &str) -> ProbeReport {
    report.property = name.to_string();
    report
}

fn plain_report(name: &str, trials: usize, worst: f64, tol: f64) -> ProbeReport {
    ProbeReport {
        property: name.into(),
        trials,
        worst_violation: worst,
        tolerance: tol,
        pass: worst <= tol,
        witness: None,
        seed: 0,
    }
}

/// Runs one named suite.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteOutcome> {
    let entries = match name {
        "sns" => sns_suite(seed)?,
        "nst" => nst_suite()?,
        "lemmas" => lemmas_suite(seed)?,
        "oracle-crosscheck" => oracle_suite(seed)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected one of {SUITE_NAMES:?} or \"all\""
            )))
        }
    };
    let pass = entries.iter().all(SuiteEntry::satisfied);
    Ok(SuiteOutcome { suite: name.to_string(), pass, entries })
}

/// Runs one suite or, for `all`, every suite in order.
pub fn run_suites(name: &str, seed: u64) -> Result<Vec<SuiteOutcome>> {
    if name == "all" {
        SUITE_NAMES.iter().map(|n| run_suite(n, seed)).collect()
    } else {
        Ok(vec![run_suite(name, seed)?])
    }
}

fn sns_suite(seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();

    let identity = OperatorSequence::constant(Operator::identity(2))?;
    entries.push(SuiteEntry::positive(named(
        check_sns(&identity, seed, 300),
        "sns/constant_identity",
    )));

    let relaxed =
        OperatorSequence::constant(Operator::relax(0.5, Operator::projection(halfspace_x1())?)?)?;
    entries.push(SuiteEntry::positive(named(
        check_sns(&relaxed, seed.wrapping_add(1), 600),
        "sns/relaxed_halfspace_projection",
    )));

    let resolvents = OperatorSequence::resolvent(
        ScalarFunction::AbsValue,
        Schedule::constant(2.0)?,
        1,
    )?;
    entries.push(SuiteEntry::positive(named(
        check_sns(&resolvents, seed.wrapping_add(2), 400),
        "sns/resolvent_family",
    )));

    let cfp = OperatorSequence::cfp(
        vec![
            Operator::projection(halfspace_x1())?,
            Operator::projection(halfspace_x2())?,
        ],
        BetaTable::geometric(),
        Schedule::constant(0.5)?,
    )?;
    entries.push(SuiteEntry::positive(named(
        check_sns(&cfp, seed.wrapping_add(3), 400),
        "sns/cfp_family",
    )));

    // designed counterexample: an isometry keeps every norm gap at zero
    // while its displacement difference stays proportional to the pair
    entries.push(SuiteEntry::negative(named(
        check_sns(&rotation_sequence(0.5), seed.wrapping_add(4), 600),
        "sns/rotation_negative_control",
    )));

    Ok(entries)
}

fn probe_from_run(
    seq: &OperatorSequence,
    u: &Vector,
    x1: &Vector,
    steps: usize,
) -> Result<Vec<Vector>> {
    let alpha = Schedule::power(1.0, 1.0, 0.0)?;
    let stop = StopRule {
        max_iters: steps,
        residual_tol: f64::MIN_POSITIVE,
        target_tol: None,
        min_iters: 1,
    };
    let trace = halpern_traced(seq, u, x1, &alpha, &stop, None, TraceSpec { stride: 1 })?;
    Ok(trace.snapshots.into_iter().map(|(_, x)| x).collect())
}

fn nst_suite() -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();

    // constant family: hypothesis and conclusion coincide
    let constant = OperatorSequence::constant(Operator::projection(halfspace_x1())?)?;
    let probe = probe_from_run(&constant, &v(&[1.0, 1.0]), &v(&[2.0, -1.0]), 3000)?;
    entries.push(SuiteEntry::positive(named(
        check_nst(&constant, &[probe], 1e-2, 1e-2)?,
        "nst/constant_projection",
    )));

    // resolvent family at parameter 2 against the unit resolvent
    let resolvents = OperatorSequence::resolvent(
        ScalarFunction::AbsValue,
        Schedule::constant(2.0)?,
        1,
    )?;
    let probe = probe_from_run(&resolvents, &v(&[5.0]), &v(&[5.0]), 4000)?;
    entries.push(SuiteEntry::positive(named(
        check_nst(&resolvents, &[probe], 1e-2, 1e-2)?,
        "nst/resolvent_vs_unit_resolvent",
    )));

    // two-projection family against the geometric combination target
    let cfp = OperatorSequence::cfp(
        vec![
            Operator::projection(halfspace_x1())?,
            Operator::projection(halfspace_x2())?,
        ],
        BetaTable::geometric(),
        Schedule::constant(0.5)?,
    )?;
    let probe = probe_from_run(&cfp, &v(&[2.0, 1.0]), &v(&[0.5, 0.5]), 4000)?;
    entries.push(SuiteEntry::positive(named(
        check_nst(&cfp, &[probe], 1e-2, 1e-2)?,
        "nst/cfp_vs_geometric_combination",
    )));

    Ok(entries)
}

fn lemmas_suite(seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();
    let alpha = Schedule::power(1.0, 1.0, 0.0)?;
    let n = 10_000usize;

    // scalar recursion instances; terminal values must vanish
    let zero_drive = vec![0.0; n];
    let xi = xu_recursion(1.0, &alpha, &zero_drive, n)?;
    entries.push(SuiteEntry::positive(plain_report(
        "lemmas/xu_unit_start_zero_drive",
        n,
        xi[n - 1],
        2e-3,
    )));

    let negative_drive = vec![-0.2; n];
    let xi = xu_recursion(0.0, &alpha, &negative_drive, n)?;
    entries.push(SuiteEntry::positive(plain_report(
        "lemmas/xu_zero_start_nonpositive_drive",
        n,
        xi[n - 1],
        2e-3,
    )));

    let vanishing_drive: Vec<f64> = (1..n).map(|k| 1.0 / k as f64).collect();
    let xi = xu_recursion(5.0, &alpha, &vanishing_drive, n)?;
    entries.push(SuiteEntry::positive(plain_report(
        "lemmas/xu_vanishing_drive",
        n,
        xi[n - 1],
        2e-3,
    )));

    // index-map properties on seeded windows containing an increase
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut windows = 0usize;
    while windows < 1000 {
        let len = 200usize;
        let mut xi = Vec::with_capacity(len);
        let mut cur: f64 = rng.random_range(0.0..4.0);
        for _ in 0..len {
            cur = (cur + rng.random_range(-0.5..0.5)).abs();
            xi.push(cur);
        }
        let Ok(map) = mainge_tau(&xi, None) else { continue };
        windows += 1;
        let mut prev = 0usize;
        for pos in map.start..=map.last_n() {
            let t = map.at(pos);
            if t < prev {
                worst = worst.max(1.0);
            }
            prev = t;
            worst = worst.max(xi[t] - xi[t + 1]);
            worst = worst.max(xi[pos] - xi[t + 1]);
        }
    }
    entries.push(SuiteEntry::positive(plain_report(
        "lemmas/mainge_window_properties",
        1000,
        worst.max(0.0),
        0.0,
    )));

    // weighted tail sums at a million-scale index
    let lambdas = [0.5, 0.25, 0.25];
    let big = 4_000_000usize;
    let w1 = weighted_tail_sum(&lambdas, |_j, n| v(&[1.0 / n as f64, 0.0]), big)?;
    let w2 = weighted_tail_sum(&lambdas, |_j, _n| v(&[0.0, 0.0]), big)?;
    let w3 = weighted_tail_sum(&lambdas, |j, n| v(&[j as f64 / n as f64, 0.0]), big)?;
    let worst = w1.norm().max(w2.norm()).max(w3.norm());
    entries.push(SuiteEntry::positive(plain_report(
        "lemmas/weighted_tail_sum_decay",
        3,
        worst,
        1e-6,
    )));

    // convergence probe fed by a real run: xi_n = ||x_n - w||^2 obeys the
    // recursion with drive 2 <u - w, x_{n+1} - w>
    let seq = OperatorSequence::constant(Operator::convex_combo(
        vec![0.5, 0.5],
        vec![
            Operator::projection(halfspace_x1())?,
            Operator::projection(halfspace_x2())?,
        ],
    )?)?;
    let u = v(&[1.0, 1.0]);
    let w = v(&[0.0, 0.0]);
    let iterates = probe_from_run(&seq, &u, &v(&[2.0, -1.0]), 3000)?;
    let dists: Vec<f64> = iterates.iter().map(|x| x.distance(&w).powi(2)).collect();
    let drives: Vec<f64> = iterates
        .iter()
        .map(|x| 2.0 * inner(&u.sub(&w), &x.sub(&w)).unwrap())
        .collect();
    let report = scalar_recursion_convergence_probe(
        |n| dists[n - 1],
        &alpha,
        |n| drives[n.min(drives.len() - 1)],
        &[1500, 3000],
        1e-5,
    )?;
    entries.push(SuiteEntry::positive(named(
        report,
        "lemmas/recursion_probe_on_run_distances",
    )));

    let report =
        scalar_recursion_convergence_probe(|_| 0.0, &alpha, |_| 0.0, &[128, 256], 1e-9)?;
    entries.push(SuiteEntry::positive(named(report, "lemmas/recursion_probe_constant_zero")));

    // hypothesis-violating oscillation must be screened out, not failed
    let rejection = scalar_recursion_convergence_probe(
        |n| 1.0 + if n % 2 == 0 { 0.5 } else { -0.5 },
        &alpha,
        |_| 0.0,
        &[128],
        1e-9,
    );
    let rejected = matches!(rejection, Err(Error::ProbeRejected(_)));
    entries.push(SuiteEntry::positive(ProbeReport {
        property: "lemmas/recursion_probe_oscillation_rejected_control".into(),
        trials: 128,
        worst_violation: if rejected { 0.0 } else { 1.0 },
        tolerance: 0.0,
        pass: rejected,
        witness: None,
        seed: 0,
    }));

    Ok(entries)
}

fn oracle_suite(seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut entries = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut worst_gap: f64 = 0.0;
    let mut worst_vi: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let instances = 100usize;
    for i in 0..instances {
        let d = rng.random_range(2..=4usize);
        let m = rng.random_range(1..=4usize);
        let witness = v(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let sets: Vec<ConvexSet> = (0..m)
            .map(|_| {
                let a = loop {
                    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let cand = v(&raw);
                    if cand.norm() > 0.1 {
                        break cand;
                    }
                };
                let slack = rng.random_range(0.1..1.0);
                let b = inner(&a, &witness).unwrap() + slack;
                ConvexSet::Halfspace { a, b }
            })
            .collect();
        let u = v(&(0..d).map(|_| rng.random_range(-4.0..4.0)).collect::<Vec<_>>());
        let result = project_intersection_oracle(&sets, &u)?;
        if result.method != OracleMethod::ActiveSetEnumeration {
            return Err(Error::OracleFailure(
                "polyhedral instance unexpectedly skipped enumeration".into(),
            ));
        }
        let cross = dykstra(&sets, &u, 1e-12, 500_000)?;
        worst_gap = worst_gap.max(result.value.distance(&cross));
        worst_kkt = worst_kkt.max(result.kkt_residual.unwrap_or(f64::INFINITY));
        let intersection = ConvexSet::Intersection { sets };
        let vi = variational_inequality_check(
            &u,
            &result.value,
            &intersection,
            50,
            seed.wrapping_add(i as u64),
            1e-6,
        )?;
        worst_vi = worst_vi.max(vi.worst_violation);
        if !vi.pass {
            worst_vi = worst_vi.max(1.0);
        }
    }
    entries.push(SuiteEntry::positive(plain_report(
        "oracle/enumeration_vs_dykstra_agreement",
        instances,
        worst_gap,
        AGREEMENT_TOL,
    )));
    entries.push(SuiteEntry::positive(plain_report(
        "oracle/kkt_residuals",
        instances,
        worst_kkt,
        crate::oracle::ENUM_KKT_TOL,
    )));
    entries.push(SuiteEntry::positive(plain_report(
        "oracle/variational_inequality_of_outputs",
        instances,
        worst_vi,
        1e-6,
    )));

    let mut worst_prox: f64 = 0.0;
    for _ in 0..1000 {
        let lambda = rng.random_range(0.05..4.0);
        let x = rng.random_range(-6.0..6.0);
        let f = match rng.random_range(0..3u8) {
            0 => ScalarFunction::AbsValue,
            1 => ScalarFunction::Quadratic {
                curvature: rng.random_range(0.2..3.0),
                center: rng.random_range(-2.0..2.0),
            },
            _ => {
                let lo = rng.random_range(-2.0..0.0);
                ScalarFunction::Indicator { lo, hi: lo + rng.random_range(0.1..3.0) }
            }
        };
        let oracle = prox_scalar_oracle(&f, lambda, x)?;
        let closed = f.prox_scalar(lambda, x);
        worst_prox = worst_prox.max((oracle - closed).abs());
    }
    entries.push(SuiteEntry::positive(plain_report(
        "oracle/prox_closed_form_crosscheck",
        1000,
        worst_prox,
        1e-8,
    )));

    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        for name in SUITE_NAMES {
            let outcome = run_suite(name, 2024).unwrap();
            assert!(
                outcome.pass,
                "suite {name} failed: {:#?}",
                outcome
                    .entries
                    .iter()
                    .filter(|e| !e.satisfied())
                    .map(|e| &e.report)
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn all_expands_to_every_suite() {
        let outcomes = run_suites("all", 7).unwrap();
        assert_eq!(outcomes.len(), SUITE_NAMES.len());
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suite("bogus", 0).is_err());
    }

    #[test]
    fn sns_suite_requires_the_rotation_to_fail() {
        let outcome = run_suite("sns", 11).unwrap();
        let control = outcome
            .entries
            .iter()
            .find(|e| e.report.property.contains("rotation"))
            .unwrap();
        assert!(!control.expected_pass);
        assert!(!control.report.pass);
        assert!(control.satisfied());
    }
}
