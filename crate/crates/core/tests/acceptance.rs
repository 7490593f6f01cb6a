//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::time::{Duration, Instant};

use dampwave::cli::{evaluate, Command, ProblemSource, RunConfig, SummaryVerdict};
use dampwave::criteria::{
    check_theorem_2_1, check_theorem_2_3, derive_coefficients, riccati_residual, CriterionReport, TheoremId,
    TuningParams,
};
use dampwave::expr::Expr;
use dampwave::problem::{builtin_example, check_hypotheses, ProblemSpec};
use dampwave::quad::{classify_improper, plain, ProbeSchedule};
use dampwave::sim::{simulate_reduced, Trajectory};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn check_example(id: &str) -> Result<(Vec<(TheoremId, SummaryVerdict)>, Vec<CriterionReport>, Duration), String> {
    let mut cfg = RunConfig::new(Command::Check, ProblemSource::Builtin(id.into()));
    cfg.skip_hypotheses = true;
    let start = Instant::now();
    let out = evaluate(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let rows = out.summary.iter().map(|r| (r.theorem, r.verdict.clone())).collect();
    Ok((rows, out.reports, elapsed))
}

fn verdict_of(rows: &[(TheoremId, SummaryVerdict)], id: TheoremId) -> String {
    rows.iter().find(|(t, _)| *t == id).map(|(_, v)| v.to_string()).unwrap_or_default()
}

fn report<'a>(reports: &'a [CriterionReport], id: TheoremId) -> Result<&'a CriterionReport, String> {
    reports.iter().find(|r| r.theorem == id).ok_or_else(|| format!("no report for {id}"))
}

fn example_3_1_end_to_end() -> Outcome {
    let (rows, reports, elapsed) = check_example("3.1")?;
    let v24 = verdict_of(&rows, TheoremId::T2_4);
    let v21 = verdict_of(&rows, TheoremId::T2_1);
    ensure(v24 == "case (1): Oscillatory", format!("2.4 gave `{v24}`"))?;
    ensure(v21 == "Oscillatory", format!("2.1 gave `{v21}`"))?;

    // ∫_1^T exp(-∫_1^t 1/s ds) dt = ln T
    let r21 = report(&reports, TheoremId::T2_1)?;
    let dw = r21
        .condition("damping_weight")
        .and_then(|c| c.divergence())
        .ok_or("damping_weight evidence missing")?;
    let mut worst_dw: f64 = 0.0;
    for p in &dw.probes {
        worst_dw = worst_dw.max(rel(p.integral, p.t.ln()));
    }
    ensure(!dw.probes.is_empty() && worst_dw <= 1e-6, format!("damping_weight probes off by {worst_dw:e}"))?;

    // b = 1, h = 0, Q* = 5: the Riccati integral is 5 (T - 1)
    let r24 = report(&reports, TheoremId::T2_4)?;
    let ri = r24
        .condition("riccati_integral")
        .and_then(|c| c.divergence())
        .ok_or("riccati_integral evidence missing")?;
    let mut worst_ri: f64 = 0.0;
    for p in &ri.probes {
        worst_ri = worst_ri.max(rel(p.integral, 5.0 * (p.t - 1.0)));
    }
    ensure(!ri.probes.is_empty() && worst_ri <= 1e-6, format!("riccati_integral probes off by {worst_ri:e}"))?;
    ensure(elapsed <= Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!(
        "2.4 `{v24}`, 2.1 `{v21}`, probe errors {worst_dw:.1e} / {worst_ri:.1e}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn example_3_2_end_to_end() -> Outcome {
    let (rows, reports, elapsed) = check_example("3.2")?;
    let v24 = verdict_of(&rows, TheoremId::T2_4);
    ensure(v24 == "case (2): Oscillatory", format!("2.4 gave `{v24}`"))?;
    let r24 = report(&reports, TheoremId::T2_4)?;
    let sel = r24
        .condition("case_selector")
        .and_then(|c| c.divergence())
        .ok_or("case_selector evidence missing")?;
    // ∫_1^∞ t^-2 dt = 1
    let limit = sel.limit().ok_or_else(|| format!("case_selector not convergent: {:?}", sel.kind))?;
    ensure((limit - 1.0).abs() <= 1e-4, format!("case_selector limit {limit}"))?;

    let spec = builtin_example("3.2").map_err(|e| e.to_string())?;
    let d = derive_coefficients(&spec, &TuningParams::default()).map_err(|e| e.to_string())?;
    let mut worst_theta: f64 = 0.0;
    for i in 0..=99 {
        let t = 1.0 + i as f64;
        let th = d.theta(t).map_err(|e| e.to_string())?;
        worst_theta = worst_theta.max(rel(th, 1.0 / t));
    }
    ensure(worst_theta <= 1e-4, format!("theta off by {worst_theta:e}"))?;
    // Q*(s) θ(s+1) = 3 (s+1)^4 / (s+1)
    let mut worst_inner: f64 = 0.0;
    for i in 0..=40 {
        let s = 1.0 + 2.5 * i as f64;
        let v = d.nested_inner(s).map_err(|e| e.to_string())?;
        worst_inner = worst_inner.max(rel(v, 3.0 * (s + 1.0).powi(3)));
    }
    ensure(worst_inner <= 1e-4, format!("nested_inner off by {worst_inner:e}"))?;
    ensure(elapsed <= Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "2.4 `{v24}`, selector limit {limit:.8}, theta {worst_theta:.1e}, inner {worst_inner:.1e}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn power_family() -> Outcome {
    let sched = ProbeSchedule::default();
    let mut parts = Vec::new();
    for p in [-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 1.0, 2.0] {
        let v = classify_improper(&plain(move |s: f64| s.powf(p)), 1.0, &sched);
        if p >= -1.0 {
            ensure(v.is_divergent(), format!("p = {p}: expected divergence, got {:?}", v.kind))?;
            parts.push(format!("{p}:div"));
        } else {
            let limit = v.limit().ok_or_else(|| format!("p = {p}: expected convergence, got {:?}", v.kind))?;
            let exact = 1.0 / (-p - 1.0);
            ensure(rel(limit, exact) <= 1e-4, format!("p = {p}: limit {limit} vs {exact}"))?;
            parts.push(format!("{p}:{limit:.6}"));
        }
    }
    Ok(parts.join(" "))
}

fn riccati_identity() -> Outcome {
    type Pair = Box<dyn Fn(f64) -> (f64, f64)>;
    let mut trajectories: Vec<Pair> = Vec::new();
    for (c, a, w) in [(2.0, 1.0, 1.0), (1.5, 0.4, 3.0), (3.0, 2.5, 0.5), (1.1, 0.1, 7.0), (5.0, 4.0, 2.0)] {
        trajectories.push(Box::new(move |t: f64| (c + a * (w * t).sin(), a * w * (w * t).cos())));
    }
    for k in [0.3, -0.7, 1.2, -2.0, 0.05] {
        trajectories.push(Box::new(move |t: f64| ((k * t).exp(), k * (k * t).exp())));
    }
    for n in [1, 2, 3, 4, 5] {
        let n = n as f64;
        trajectories.push(Box::new(move |t: f64| (t.powf(n) + 1.0, n * t.powf(n - 1.0))));
    }
    for (a, w) in [(0.5, 1.0), (1.0, 2.0), (0.2, 5.0), (2.0, 0.3), (0.9, 1.7)] {
        trajectories.push(Box::new(move |t: f64| (1.0 / (1.0 + a * (w * t).sin().powi(2)), {
            let s = (w * t).sin();
            -2.0 * a * w * s * (w * t).cos() / (1.0 + a * s * s).powi(2)
        })));
    }
    let bs = ["1", "t", "exp(-t/10)", "1+t^2"].map(|s| Expr::parse(s).expect("weight"));
    let specs: Vec<ProblemSpec> = ["3.1", "3.2"].iter().map(|id| builtin_example(id).expect("builtin")).collect();
    let mut worst: f64 = 0.0;
    for (i, f) in trajectories.iter().enumerate() {
        let tr = Trajectory::from_fn(1.0, 3.0, 1e-3, f);
        let b = &bs[i % bs.len()];
        let spec = &specs[i % specs.len()];
        for j in 0..=20 {
            let t = 1.01 + 0.0485 * j as f64;
            let r = riccati_residual(&tr, b, spec, t).map_err(|e| e.to_string())?;
            worst = worst.max(r.abs());
        }
    }
    ensure(trajectories.len() == 20, "expected 20 trajectories")?;
    ensure(worst <= 1e-5, format!("worst residual {worst:e}"))?;
    Ok(format!("20 trajectories, worst residual {worst:.2e}"))
}

fn harmonic_and_order() -> Outcome {
    let m = Expr::parse("t").map_err(|e| e.to_string())?;
    let zero = plain(|_: f64| 0.0);
    let one = plain(|_: f64| 1.0);
    let run = |dt: f64| simulate_reduced(&zero, &one, &m, (0.0, 3.0), (1.0, 0.0), dt, 1e-10, 50);
    let tr = run(1e-3).map_err(|e| e.to_string())?;
    let first = tr.sign_changes().first.ok_or("no zero of cos found")?;
    ensure((first - std::f64::consts::FRAC_PI_2).abs() <= 1e-3, format!("first zero {first}"))?;
    let err = |dt: f64| -> Result<f64, String> {
        let tr = run(dt).map_err(|e| e.to_string())?;
        Ok(tr.t.iter().zip(&tr.v).map(|(t, v)| (v - t.cos()).abs()).fold(0.0, f64::max))
    };
    let (e1, e2) = (err(0.1)?, err(0.05)?);
    let order = (e1 / e2).log2();
    ensure(order >= 3.8, format!("observed order {order}"))?;
    Ok(format!("first zero {first:.6}, observed order {order:.3}"))
}

fn zero_damping_matches_forced() -> Outcome {
    let mut specs = Vec::new();
    for id in ["3.1", "3.2"] {
        let mut s = builtin_example(id).map_err(|e| e.to_string())?;
        s.p_hat = Expr::parse("0").map_err(|e| e.to_string())?;
        specs.push(s);
    }
    let mut s = builtin_example("3.1").map_err(|e| e.to_string())?;
    s.p_hat = Expr::parse("0*x").map_err(|e| e.to_string())?;
    s.r = Expr::parse("1").map_err(|e| e.to_string())?;
    s.q = Expr::parse("1/t").map_err(|e| e.to_string())?;
    specs.push(s);

    let plain_params = TuningParams::default();
    let forced = TuningParams { force_zero_damping: true, ..TuningParams::default() };
    let mut seen = Vec::new();
    for spec in &specs {
        for check in [check_theorem_2_1, check_theorem_2_3] {
            let a = check(spec, &plain_params).map_err(|e| e.to_string())?;
            let b = check(spec, &forced).map_err(|e| e.to_string())?;
            ensure(
                a.overall == b.overall && a.case == b.case,
                format!("{}: `{}` vs forced `{}`", a.theorem, a.summary(), b.summary()),
            )?;
            seen.push(a.summary());
        }
    }
    Ok(format!("{} comparisons agree ({})", seen.len(), seen.join(", ")))
}

fn damping_weight_monotone_in_strength() -> Outcome {
    let mut weights = Vec::new();
    for lambda in [1.0, 2.0, 5.0] {
        let mut spec = builtin_example("3.1").map_err(|e| e.to_string())?;
        spec.p_hat = Expr::parse(&format!("{lambda}")).map_err(|e| e.to_string())?;
        let d = derive_coefficients(&spec, &TuningParams::default()).map_err(|e| e.to_string())?;
        let ts: Vec<f64> = (0..=30).map(|i| 1.0 + 0.5 * i as f64).collect();
        let w: Result<Vec<f64>, _> = ts.iter().map(|&t| d.damping_weight(t)).collect();
        weights.push((ts, w.map_err(|e| e.to_string())?));
    }
    for pair in weights.windows(2) {
        let (ts, lo) = &pair[0];
        let (_, hi) = &pair[1];
        for ((t, a), b) in ts.iter().zip(lo).zip(hi) {
            if *t > 1.0 {
                ensure(b < a, format!("weight did not drop at t = {t}: {a} -> {b}"))?;
            } else {
                ensure(b <= a, format!("weight grew at t = {t}"))?;
            }
        }
    }
    let at = |k: usize| weights[k].1[30];
    Ok(format!("weights at t = 16: {:.3e} > {:.3e} > {:.3e}", at(0), at(1), at(2)))
}

fn h1_violation_flagged() -> Outcome {
    let mut parts = Vec::new();
    // independent closed forms of p - (alpha - 1) r
    let gap: [(&str, fn(f64) -> f64); 2] = [("3.1", |t| 1.0 - 4.0 * t), ("3.2", |t| 1.0 - 2.0 * t * t)];
    for (id, g) in gap {
        let spec = builtin_example(id).map_err(|e| e.to_string())?;
        let rep = check_hypotheses(&spec, (1.0, 100.0), 200, 51).map_err(|e| e.to_string())?;
        ensure(rep.h1.is_violated(), format!("{id}: H1 not flagged"))?;
        let w = rep
            .h1
            .witnesses()
            .iter()
            .find(|w| w.check.contains("alpha-1"))
            .ok_or_else(|| format!("{id}: no witness for the damping bound"))?;
        let again = g(w.t);
        ensure(again < 0.0, format!("{id}: witness t = {} does not violate ({again})", w.t))?;

        let mut cfg = RunConfig::new(Command::Check, ProblemSource::Builtin(id.into()));
        let gated = evaluate(&cfg).map_err(|e| e.to_string())?;
        ensure(
            gated.summary.iter().all(|r| matches!(r.verdict, SummaryVerdict::Skipped(_))),
            format!("{id}: verdicts were not gated"),
        )?;
        cfg.skip_hypotheses = true;
        let forced = evaluate(&cfg).map_err(|e| e.to_string())?;
        ensure(
            forced.summary.len() == 4 && forced.summary.iter().all(|r| matches!(r.verdict, SummaryVerdict::Evaluated(_))),
            format!("{id}: --skip-hypotheses did not evaluate all theorems"),
        )?;
        parts.push(format!("{id} witness t = {} gap {again}", w.t));
    }
    Ok(parts.join("; "))
}

fn example_3_1_reduced() -> Outcome {
    let m = Expr::parse("2*t").map_err(|e| e.to_string())?;
    let run = |dt: f64| {
        simulate_reduced(&plain(|t: f64| 1.0 / t), &plain(|t: f64| 5.0 / t), &m, (1.0, 60.0), (1.0, 0.0), dt, 1e-8, 200)
            .map_err(|e| e.to_string())
    };
    let coarse = run(5e-3)?;
    let info = &coarse.relaxation;
    ensure(info.final_delta <= 1e-6, format!("final delta {}", info.final_delta))?;
    let sc = coarse.sign_changes();
    ensure(sc.count >= 1, "no sign change")?;
    let first = sc.first.unwrap_or(f64::NAN);
    let half = run(2.5e-3)?.sign_changes().first.ok_or("no sign change at dt/2")?;
    ensure(rel(half, first) <= 0.01, format!("first crossing {first} vs {half} at dt/2"))?;
    Ok(format!(
        "delta {:.2e}, {} crossings, first {first:.7} (dt/2: {half:.7})",
        info.final_delta, sc.count
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("example 3.1 verdicts and closed-form probes", example_3_1_end_to_end),
        ("example 3.2 verdicts, theta and nested integrand", example_3_2_end_to_end),
        ("power family divergence and limits", power_family),
        ("Riccati identity residual", riccati_identity),
        ("harmonic first zero and RK4 order", harmonic_and_order),
        ("zero damping equals forced zero damping", zero_damping_matches_forced),
        ("damping weight decreases with damping strength", damping_weight_monotone_in_strength),
        ("damping bound violation flagged and gated", h1_violation_flagged),
        ("example 3.1 reduced simulation", example_3_1_reduced),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
