use std::f64::consts::E;

use super::{
    derive_coefficients, divergence_verdict, ConditionEntry, ConditionVerdict, CriterionError, CriterionReport,
    DerivedCoefficients, Evidence, MInverseReading, Overall, ParametersUsed, Role, SampleWitness, ScanRung,
    SurrogateSample, TheoremId, TuningParams, SLACK,
};
use crate::problem::ProblemSpec;
use crate::quad::{
    classify_improper, integrate, invert_monotone, DivergenceVerdict, Integral, QuadError, TailIntegral, VerdictKind,
};

/// Time samples for sampled preconditions.
const PRECONDITION_SAMPLES: usize = 64;
const MAX_WITNESSES: usize = 8;
const SCAN_TOL: f64 = 1e-10;
const SECOND_DIFF_SLACK: f64 = 1e-6;

/// `n` geometrically spaced points on `[lo, hi]`, endpoints included.
fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => lo * (ratio * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn best_effort(r: Result<Integral, QuadError>) -> Result<f64, QuadError> {
    match r {
        Ok(i) => Ok(i.value),
        Err(QuadError::SubdivisionLimit { value, .. }) => Ok(value),
        Err(e) => Err(e),
    }
}

fn divergence_entry(label: &str, statement: &str, role: Role, v: DivergenceVerdict) -> ConditionEntry {
    ConditionEntry {
        label: label.into(),
        statement: statement.into(),
        role,
        verdict: divergence_verdict(&v),
        evidence: Evidence::Divergence(v),
        notes: Vec::new(),
    }
}

fn conclude(
    theorem: TheoremId,
    case: Option<u8>,
    conditions: Vec<ConditionEntry>,
    parameters: ParametersUsed,
    notes: Vec<String>,
) -> CriterionReport {
    let all_hold = conditions.iter().filter(|c| c.role != Role::Informational).all(|c| c.holds());
    let overall = if all_hold { Overall::Oscillatory } else { Overall::Inconclusive };
    CriterionReport { theorem, case, overall, conditions, parameters, notes }
}

fn parameters(d: &DerivedCoefficients, ladder: Vec<f64>) -> ParametersUsed {
    let p = d.params();
    ParametersUsed {
        b: p.b.source().to_string(),
        tau: p.tau.source().to_string(),
        beta: p.beta,
        anchors: d.anchors(),
        probes: p.probes.clone(),
        t_max: d.t_max(),
        ladder,
        m_inverse: p.m_inverse,
        force_zero_damping: p.force_zero_damping,
    }
}

fn precondition_grid(d: &DerivedCoefficients) -> Vec<f64> {
    geometric(d.anchors().t0, d.t_max(), PRECONDITION_SAMPLES)
}

/// Samples `check(t) -> (value, bound, ok)` and turns failures into witnesses.
fn sampled_entry(
    label: &str,
    statement: &str,
    ts: &[f64],
    mut check: impl FnMut(f64, &mut Vec<SampleWitness>) -> Result<(), QuadError>,
) -> ConditionEntry {
    let mut witnesses = Vec::new();
    let mut error = None;
    for &t in ts {
        if let Err(e) = check(t, &mut witnesses) {
            error.get_or_insert(format!("t = {t}: {e}"));
        }
    }
    let total = witnesses.len();
    witnesses.truncate(MAX_WITNESSES);
    let verdict = if total > 0 {
        ConditionVerdict::Fails
    } else if error.is_some() {
        ConditionVerdict::Inconclusive
    } else {
        ConditionVerdict::Holds
    };
    let mut notes = vec!["sampled on a finite grid".to_string()];
    if total > MAX_WITNESSES {
        notes.push(format!("{total} failing samples, first {MAX_WITNESSES} shown"));
    }
    notes.extend(error);
    ConditionEntry {
        label: label.into(),
        statement: statement.into(),
        role: Role::Precondition,
        verdict,
        evidence: Evidence::Samples { checked: ts.len(), witnesses },
        notes,
    }
}

fn nonnegative_damping(d: &DerivedCoefficients) -> ConditionEntry {
    let spec = d.spec();
    let xs = spec.domain.x_samples(d.params().x_grid);
    sampled_entry("nonnegative_damping", "p_hat(x,t) >= 0", &precondition_grid(d), |t, w| {
        for &x in &xs {
            let v = spec.p_hat.at_xt(x, t)?;
            if v < -SLACK {
                w.push(SampleWitness { check: "p_hat >= 0".into(), t, x: Some(x), value: v, bound: 0.0 });
            }
        }
        Ok(())
    })
}

/// `b(t) > 0` on the precondition grid, as a parameter error otherwise.
fn require_positive_b(d: &DerivedCoefficients) -> Result<(), CriterionError> {
    let b = &d.params().b;
    for t in precondition_grid(d) {
        let v = b.at(t)?;
        if v <= 0.0 {
            return Err(CriterionError::Parameter(format!("b must be positive, but b({t}) = {v}")));
        }
    }
    Ok(())
}

fn damping_weight_entry(d: &DerivedCoefficients) -> ConditionEntry {
    let v = classify_improper(&|s| d.damping_weight(s), d.anchors().t0, &d.params().probes);
    divergence_entry("damping_weight", "int_{t0}^inf exp(-int^s p1) ds = inf", Role::Required, v)
}

/// The eventual inequality
/// `m⁻¹(t) ∫_T^t (s−T) Q(s) m(s) ds + (t−T) ∫_t^∞ Q > 1` scanned over a
/// geometric ladder of `T`.
fn eventual_inequality(d: &DerivedCoefficients) -> Result<(ConditionEntry, Vec<f64>), CriterionError> {
    let p = d.params();
    let t0 = d.anchors().t0;
    let t_max = d.t_max();
    let start = p.ladder_start.unwrap_or(t0);
    if !(start >= t0 && start.is_finite()) {
        return Err(CriterionError::Parameter(format!("ladder_start {start} is below t0 = {t0}")));
    }
    let ladder: Vec<f64> = (0..p.ladder_rungs)
        .map(|j| start * 2f64.powi(j as i32))
        .take_while(|&big_t| 2.0 * big_t < t_max)
        .collect();
    if ladder.is_empty() {
        return Err(CriterionError::Parameter(format!("no ladder rung fits below t_max = {t_max}")));
    }
    let statement = match p.m_inverse {
        MInverseReading::Reciprocal => "(1/m(t)) int_T^t (s-T) Q(s) m(s) ds + (t-T) int_t^inf Q > 1 for t >= 2T",
        MInverseReading::InverseFunction => {
            "m^{-1}(t) int_T^t (s-T) Q(s) m(s) ds + (t-T) int_t^inf Q > 1 for t >= 2T"
        }
    };
    let label = "eventual_inequality";
    let tail_verdict = classify_improper(&|s| d.Q(s), t0, &p.probes);
    let mut notes = Vec::new();
    let tail: Option<TailIntegral<_>> = match &tail_verdict.kind {
        VerdictKind::Divergent { .. } => {
            notes.push("int_t^inf Q diverges, so the left side is +inf for t > T".into());
            None
        }
        VerdictKind::Convergent { .. } => Some(TailIntegral::new(|s| d.Q(s), t0, t_max)?),
        VerdictKind::Inconclusive { reason } => {
            let entry = ConditionEntry {
                label: label.into(),
                statement: statement.into(),
                role: Role::Required,
                verdict: ConditionVerdict::Inconclusive,
                evidence: Evidence::Scan { tail: Some(tail_verdict.clone()), reading: p.m_inverse, rungs: vec![] },
                notes: vec![format!("tail of Q could not be classified: {reason}")],
            };
            return Ok((entry, ladder));
        }
    };

    let m = &d.spec().m;
    let rung = |big_t: f64| -> Result<(f64, f64), QuadError> {
        let ts = geometric(2.0 * big_t, t_max, p.scan_samples);
        let Some(tail) = &tail else {
            return Ok((f64::INFINITY, ts[0]));
        };
        let g = |s: f64| -> Result<f64, QuadError> { Ok((s - big_t) * d.Q(s)? * m.at(s)?) };
        let mut acc = 0.0;
        let mut prev = big_t;
        let mut min = (f64::INFINITY, ts[0]);
        for &t in &ts {
            acc += best_effort(integrate(&g, prev, t, SCAN_TOL))?;
            prev = t;
            let factor = match p.m_inverse {
                MInverseReading::Reciprocal => 1.0 / m.at(t)?,
                MInverseReading::InverseFunction => invert_monotone(m, t, (t0, t))?,
            };
            let lhs = factor * acc + (t - big_t) * tail.value(t)?;
            if !(lhs >= min.0) {
                min = (lhs, t);
            }
        }
        Ok(min)
    };

    let rungs: Vec<ScanRung> = ladder
        .iter()
        .map(|&big_t| {
            let base = ScanRung {
                lower: big_t,
                t_from: 2.0 * big_t,
                t_to: t_max,
                samples: p.scan_samples,
                min_lhs: f64::NAN,
                argmin: f64::NAN,
                holds: false,
                error: None,
            };
            match rung(big_t) {
                Ok((min_lhs, argmin)) => ScanRung { min_lhs, argmin, holds: min_lhs > 1.0 + SLACK, ..base },
                Err(e) => ScanRung { error: Some(e.to_string()), ..base },
            }
        })
        .collect();
    let verdict = if rungs.iter().any(|r| r.holds) {
        ConditionVerdict::Holds
    } else if rungs.iter().any(|r| r.error.is_some()) {
        ConditionVerdict::Inconclusive
    } else {
        ConditionVerdict::Fails
    };
    if let Some(first) = rungs.iter().find(|r| r.holds) {
        notes.push(format!("holds from T = {}", first.lower));
    }
    let entry = ConditionEntry {
        label: label.into(),
        statement: statement.into(),
        role: Role::Required,
        verdict,
        evidence: Evidence::Scan { tail: Some(tail_verdict), reading: p.m_inverse, rungs },
        notes,
    };
    Ok((entry, ladder))
}

/// Theorem 2.1: damping weight divergence, `∫ sQ = ∞` and the eventual
/// inequality, under `p̂ ≥ 0`.
pub fn check_theorem_2_1(spec: &ProblemSpec, params: &TuningParams) -> Result<CriterionReport, CriterionError> {
    let d = derive_coefficients(spec, params)?;
    let t0 = d.anchors().t0;
    let mut conditions = vec![nonnegative_damping(&d), damping_weight_entry(&d)];
    let sq = classify_improper(&|s| Ok(s * d.Q(s)?), t0, &params.probes);
    conditions.push(divergence_entry("sq_divergence", "int_{t0}^inf s Q(s) ds = inf", Role::Required, sq));
    let (scan, ladder) = eventual_inequality(&d)?;
    conditions.push(scan);
    let notes = vec!["\"sufficiently large t\" is checked on sampled t in [2T, t_max] for a ladder of T".into()];
    Ok(conclude(TheoremId::T2_1, None, conditions, parameters(&d, ladder), notes))
}

fn tau_constraints(d: &DerivedCoefficients) -> ConditionEntry {
    let tau = &d.params().tau;
    sampled_entry(
        "tau_constraints",
        "tau(t) <= t, tau' >= 0, tau'' <= 0",
        &precondition_grid(d),
        |t, w| {
            let v = tau.at(t)?;
            if v > t + SLACK * (1.0 + t.abs()) {
                w.push(SampleWitness { check: "tau(t) <= t".into(), t, x: None, value: v, bound: t });
            }
            let d1 = tau.dt(t)?;
            if d1 < -SLACK {
                w.push(SampleWitness { check: "tau' >= 0".into(), t, x: None, value: d1, bound: 0.0 });
            }
            let h = 1e-4 * t.abs().max(1.0);
            let d2 = (tau.at(t + h)? - 2.0 * v + tau.at(t - h)?) / (h * h);
            if d2 > SECOND_DIFF_SLACK {
                w.push(SampleWitness { check: "tau'' <= 0".into(), t, x: None, value: d2, bound: 0.0 });
            }
            Ok(())
        },
    )
}

/// The first-order advanced inequality `v' > Q1(t) v(m(τ(t)))` has no
/// positive solution when `liminf ∫_t^{m(τ(t))} Q1 > 1/e`.
fn advanced_surrogate(d: &DerivedCoefficients) -> ConditionEntry {
    let p = d.params();
    let t0 = d.anchors().t0;
    let lo = t0 * 2f64.powi((p.probes.doublings / 2) as i32);
    let ts = geometric(lo, d.t_max(), p.scan_samples);
    let threshold = 1.0 / E;
    let mut samples = Vec::with_capacity(ts.len());
    let mut notes = vec![
        "sufficient surrogate: liminf int_t^{m(tau(t))} Q1 > 1/e, liminf estimated by the minimum over the probe tail"
            .to_string(),
    ];
    let mut verdict = None;
    for &t in &ts {
        let upper = p.tau.at(t).and_then(|tt| d.spec().m.at(tt)).map_err(QuadError::from);
        let res = upper.and_then(|upper| {
            if upper < t - SLACK * (1.0 + t.abs()) {
                return Ok((upper, None));
            }
            best_effort(integrate(&|s| d.q1(s), t, upper, 1e-9)).map(|i| (upper, Some(i)))
        });
        match res {
            Ok((upper, Some(integral))) => samples.push(SurrogateSample { t, upper, integral }),
            Ok((upper, None)) => {
                notes.push(format!("m(tau(t)) = {upper} < t = {t}: the inequality is not of advanced type"));
                verdict = Some(ConditionVerdict::Inconclusive);
                break;
            }
            Err(e) => {
                notes.push(format!("evaluation failed at t = {t}: {e}"));
                verdict = Some(ConditionVerdict::Inconclusive);
                break;
            }
        }
    }
    let liminf = samples.iter().map(|s| s.integral).fold(f64::INFINITY, f64::min);
    let verdict = verdict.unwrap_or(if liminf > threshold + SLACK {
        ConditionVerdict::Holds
    } else {
        ConditionVerdict::Inconclusive
    });
    ConditionEntry {
        label: "no_positive_solution".into(),
        statement: "v'(t) - Q1(t) v(m(tau(t))) > 0 has no positive solution".into(),
        role: Role::Required,
        verdict,
        evidence: Evidence::Surrogate { threshold, liminf_estimate: liminf, samples },
        notes,
    }
}

/// Theorem 2.2, with the no-positive-solution premise replaced by the 1/e
/// sufficient criterion.
pub fn check_theorem_2_2(spec: &ProblemSpec, params: &TuningParams) -> Result<CriterionReport, CriterionError> {
    let d = derive_coefficients(spec, params)?;
    let conditions = vec![tau_constraints(&d), damping_weight_entry(&d), advanced_surrogate(&d)];
    let notes = vec!["the no-positive-solution premise is tested through a sufficient surrogate".into()];
    Ok(conclude(TheoremId::T2_2, None, conditions, parameters(&d, vec![]), notes))
}

/// Theorem 2.3: damping weight divergence and
/// `∫ [b Q − (b'/b − p1)² b/4] = ∞`.
pub fn check_theorem_2_3(spec: &ProblemSpec, params: &TuningParams) -> Result<CriterionReport, CriterionError> {
    let d = derive_coefficients(spec, params)?;
    require_positive_b(&d)?;
    let v = classify_improper(&|s| d.comparison_integrand(s), d.anchors().t1, &params.probes);
    let conditions = vec![
        damping_weight_entry(&d),
        divergence_entry(
            "comparison_integral",
            "int_T^inf [b Q - (b'/b - p1)^2 b/4] ds = inf",
            Role::Required,
            v,
        ),
    ];
    Ok(conclude(TheoremId::T2_3, None, conditions, parameters(&d, vec![]), vec![]))
}

/// Theorem 2.4. The integral `J = ∫ r⁻¹ exp(−∫h/r)` picks the case: divergent
/// needs the Riccati integral to diverge, convergent additionally needs the
/// nested integral to diverge.
pub fn check_theorem_2_4(spec: &ProblemSpec, params: &TuningParams) -> Result<CriterionReport, CriterionError> {
    let d = derive_coefficients(spec, params)?;
    require_positive_b(&d)?;
    let a = d.anchors();
    let sched = &params.probes;
    let j = classify_improper(&|s| d.reciprocal_weight(s), a.t0, sched);
    let case = match j.kind {
        VerdictKind::Divergent { .. } => Some(1),
        VerdictKind::Convergent { .. } => Some(2),
        VerdictKind::Inconclusive { .. } => None,
    };
    let selector = ConditionEntry {
        label: "case_selector".into(),
        statement: "int_{t0}^inf r^{-1} exp(-int^s h/r) ds: divergent selects case (1), convergent case (2)".into(),
        role: Role::CaseSelector,
        verdict: if case.is_some() { ConditionVerdict::Holds } else { ConditionVerdict::Inconclusive },
        evidence: Evidence::Divergence(j),
        notes: Vec::new(),
    };
    let riccati = classify_improper(&|s| d.riccati_integrand(s), a.t1, sched);
    let role = if case.is_some() { Role::Required } else { Role::Informational };
    let mut conditions = vec![
        selector,
        divergence_entry("riccati_integral", "int_{T1}^inf [b Q* - r b (b'/b - h/r)^2 / 4] ds = inf", role, riccati),
    ];
    if case == Some(2) {
        let nested = classify_improper(&|s| d.nested_outer(s), a.t3, sched);
        conditions.push(divergence_entry(
            "nested_integral",
            "int_{T3}^inf r^{-1} exp(-int^tau h/r) int_{T2}^tau Q* theta(m(s)) exp(int^s h/r) ds dtau = inf",
            Role::Required,
            nested,
        ));
    }
    Ok(conclude(TheoremId::T2_4, case, conditions, parameters(&d, vec![]), vec![]))
}

pub fn check_theorem(id: TheoremId, spec: &ProblemSpec, params: &TuningParams) -> Result<CriterionReport, CriterionError> {
    match id {
        TheoremId::T2_1 => check_theorem_2_1(spec, params),
        TheoremId::T2_2 => check_theorem_2_2(spec, params),
        TheoremId::T2_3 => check_theorem_2_3(spec, params),
        TheoremId::T2_4 => check_theorem_2_4(spec, params),
    }
}

/// Runs the selected checks on separate threads, returning results in the
/// order given.
pub fn check_theorems(
    spec: &ProblemSpec,
    params: &TuningParams,
    ids: &[TheoremId],
) -> Vec<(TheoremId, Result<CriterionReport, CriterionError>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = ids
            .iter()
            .map(|&id| (id, scope.spawn(move || check_theorem(id, spec, params))))
            .collect();
        handles
            .into_iter()
            .map(|(id, h)| (id, h.join().expect("theorem check panicked")))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::problem::builtin_example;

    fn ex(id: &str) -> ProblemSpec {
        builtin_example(id).unwrap()
    }

    #[test]
    fn geometric_samples_hit_endpoints() {
        let g = geometric(2.0, 64.0, 6);
        assert_eq!(g[0], 2.0);
        assert_eq!(g[5], 64.0);
        assert!((g[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn example_3_1_theorem_2_1() {
        let rep = check_theorem_2_1(&ex("3.1"), &TuningParams::default()).unwrap();
        assert_eq!(rep.overall, Overall::Oscillatory, "{rep:#?}");
    }

    #[test]
    fn example_3_1_theorem_2_4_case_1() {
        let rep = check_theorem_2_4(&ex("3.1"), &TuningParams::default()).unwrap();
        assert_eq!(rep.summary(), "case (1): Oscillatory");
    }

    #[test]
    fn example_3_2_theorem_2_4_case_2() {
        let rep = check_theorem_2_4(&ex("3.2"), &TuningParams::default()).unwrap();
        assert_eq!(rep.summary(), "case (2): Oscillatory", "{rep:#?}");
    }

    #[test]
    fn zero_q_fails_sq_condition() {
        let mut spec = ex("3.1");
        spec.q = Expr::parse("0").unwrap();
        let rep = check_theorem_2_1(&spec, &TuningParams::default()).unwrap();
        assert_eq!(rep.condition("sq_divergence").unwrap().verdict, ConditionVerdict::Fails);
        assert_eq!(rep.overall, Overall::Inconclusive);
        let rep = check_theorem_2_4(&spec, &TuningParams::default()).unwrap();
        assert_eq!(rep.condition("riccati_integral").unwrap().verdict, ConditionVerdict::Fails);
        assert_eq!(rep.overall, Overall::Inconclusive);
    }

    #[test]
    fn negative_damping_is_inconclusive() {
        let mut spec = ex("3.1");
        spec.p_hat = Expr::parse("-1").unwrap();
        let rep = check_theorem_2_1(&spec, &TuningParams::default()).unwrap();
        assert_eq!(rep.condition("nonnegative_damping").unwrap().verdict, ConditionVerdict::Fails);
        assert_eq!(rep.overall, Overall::Inconclusive);
    }

    #[test]
    fn nonpositive_b_is_a_parameter_error() {
        let params = TuningParams { b: Expr::parse("1 - t").unwrap(), ..TuningParams::default() };
        assert!(matches!(check_theorem_2_3(&ex("3.1"), &params), Err(CriterionError::Parameter(_))));
    }

    #[test]
    fn tau_above_identity_is_flagged() {
        let params = TuningParams { tau: Expr::parse("2*t").unwrap(), ..TuningParams::default() };
        let rep = check_theorem_2_2(&ex("3.1"), &params).unwrap();
        let c = rep.condition("tau_constraints").unwrap();
        assert_eq!(c.verdict, ConditionVerdict::Fails);
        assert_eq!(rep.overall, Overall::Inconclusive);
        match &c.evidence {
            Evidence::Samples { witnesses, .. } => assert!(witnesses[0].value > witnesses[0].t),
            other => panic!("{other:?}"),
        }
    }
}
