use serde::{Deserialize, Serialize};

use super::{integrate, Integrand, QuadError};

/// Controls how improper integrals are probed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSchedule {
    /// Number of doublings; the geometric schedule ends at `start·2^doublings`.
    pub doublings: u32,
    /// Tolerance for each finite piece.
    pub finite_tol: f64,
    /// Relative agreement required between successive tail extrapolations.
    pub tail_tol: f64,
    /// Also run the offset schedule `start + 2^i` and keep the stronger result.
    pub both: bool,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        Self { doublings: 16, finite_tol: 1e-9, tail_tol: 1e-6, both: true }
    }
}

impl ProbeSchedule {
    pub fn t_max(&self, start: f64) -> f64 {
        if start > 0.0 {
            start * 2f64.powi(self.doublings as i32)
        } else {
            start + 2f64.powi(self.doublings as i32)
        }
    }

    /// Largest upper limit any schedule can reach from `start`.
    pub fn reach(&self, start: f64) -> f64 {
        let offset = start + 2f64.powi(self.doublings as i32);
        if start > 0.0 {
            self.t_max(start).max(offset)
        } else {
            offset
        }
    }

    fn points(&self, kind: ScheduleKind, start: f64) -> Vec<f64> {
        match kind {
            ScheduleKind::Geometric => (1..=self.doublings)
                .map(|i| start * 2f64.powi(i as i32))
                .collect(),
            ScheduleKind::Offset => (0..=self.doublings)
                .map(|i| start + 2f64.powi(i as i32))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `T_i = start·2^i`
    Geometric,
    /// `T_i = start + 2^i`
    Offset,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Probe {
    pub t: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Growth {
    Log,
    Power { exponent: f64 },
    Exp { rate: f64 },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum VerdictKind {
    Divergent { growth: Growth, fit_r2: f64 },
    Convergent { limit_estimate: f64, err_estimate: f64 },
    Inconclusive { reason: String },
}

/// Classification of `∫_{start}^∞ f` with the probe sequence behind it.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DivergenceVerdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    pub schedule: ScheduleKind,
    pub start: f64,
    pub probes: Vec<Probe>,
}

impl DivergenceVerdict {
    pub fn is_divergent(&self) -> bool {
        matches!(self.kind, VerdictKind::Divergent { .. })
    }

    pub fn is_convergent(&self) -> bool {
        matches!(self.kind, VerdictKind::Convergent { .. })
    }

    pub fn limit(&self) -> Option<f64> {
        match self.kind {
            VerdictKind::Convergent { limit_estimate, .. } => Some(limit_estimate),
            _ => None,
        }
    }

    /// True when no probe increment is positive, so the partial integrals
    /// cannot grow to +∞ along the probes.
    pub fn never_increases(&self) -> bool {
        self.probes.len() >= 2 && self.probes.windows(2).all(|w| w[1].integral <= w[0].integral)
    }

    fn inconclusive(reason: impl Into<String>, schedule: ScheduleKind, start: f64, probes: Vec<Probe>) -> Self {
        Self { kind: VerdictKind::Inconclusive { reason: reason.into() }, schedule, start, probes }
    }
}

const R2_THRESHOLD: f64 = 0.99;
/// Increments whose log-log slope is within this band of zero count as
/// constant per doubling, i.e. logarithmic growth.
const LOG_BAND: f64 = 0.02;
const FIT_WINDOW: usize = 8;

struct Fit {
    slope: f64,
    r2: f64,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Fit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy <= 1e-28 * (1.0 + my * my) {
        // all ys equal: a perfect (flat) fit
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Fit { slope, r2 }
}

fn run_schedule<I: Integrand + ?Sized>(
    f: &I,
    start: f64,
    sched: &ProbeSchedule,
    kind: ScheduleKind,
) -> DivergenceVerdict {
    let mut probes = vec![Probe { t: start, integral: 0.0 }];
    let mut quad_err = 0.0;
    let mut prev = start;
    let mut acc = 0.0;
    let mut overflow = false;
    for t in sched.points(kind, start) {
        match integrate(f, prev, t, sched.finite_tol) {
            Ok(piece) => {
                acc += piece.value;
                quad_err += piece.err;
            }
            Err(QuadError::NonFinite { .. }) if probes.len() > FIT_WINDOW / 2 + 1 => {
                overflow = true;
                break;
            }
            Err(QuadError::SubdivisionLimit { value, err }) => {
                acc += value;
                quad_err += err;
            }
            Err(e) => return DivergenceVerdict::inconclusive(e.to_string(), kind, start, probes),
        }
        if !acc.is_finite() {
            overflow = true;
            break;
        }
        probes.push(Probe { t, integral: acc });
        prev = t;
    }
    let kind_result = decide(&probes, sched.tail_tol, quad_err, overflow);
    DivergenceVerdict { kind: kind_result, schedule: kind, start, probes }
}

fn decide(probes: &[Probe], tail_tol: f64, quad_err: f64, overflow: bool) -> VerdictKind {
    if probes.len() < 5 {
        return VerdictKind::Inconclusive { reason: "too few finite probes".into() };
    }
    let incs: Vec<(f64, f64)> = probes
        .windows(2)
        .map(|w| (w[1].t, w[1].integral - w[0].integral))
        .collect();
    let last_integral = probes.last().map(|p| p.integral).unwrap_or(0.0);
    if incs.iter().all(|&(_, d)| d == 0.0) {
        return VerdictKind::Convergent { limit_estimate: last_integral, err_estimate: quad_err };
    }
    let window = &incs[incs.len().saturating_sub(FIT_WINDOW)..];
    let win_probes = &probes[probes.len() - window.len()..];

    if incs.iter().all(|&(_, d)| d > 0.0) {
        let ln_t: Vec<f64> = window.iter().map(|(t, _)| t.ln()).collect();
        let ts: Vec<f64> = window.iter().map(|(t, _)| *t).collect();
        let ln_d: Vec<f64> = window.iter().map(|(_, d)| d.ln()).collect();
        let pow = linear_fit(&ln_t, &ln_d);
        let exp = linear_fit(&ts, &ln_d);
        if overflow && exp.slope > 0.0 && exp.r2 >= R2_THRESHOLD {
            return VerdictKind::Divergent { growth: Growth::Exp { rate: exp.slope }, fit_r2: exp.r2 };
        }
        if pow.slope > LOG_BAND {
            if exp.slope > 0.0 && exp.r2 > pow.r2 && exp.r2 >= R2_THRESHOLD {
                return VerdictKind::Divergent { growth: Growth::Exp { rate: exp.slope }, fit_r2: exp.r2 };
            }
            if pow.r2 >= R2_THRESHOLD {
                return VerdictKind::Divergent {
                    growth: Growth::Power { exponent: pow.slope },
                    fit_r2: pow.r2,
                };
            }
            return VerdictKind::Inconclusive {
                reason: format!("increasing partial integrals but no growth model fits (r² {:.4})", pow.r2),
            };
        }
        if pow.slope.abs() <= LOG_BAND {
            let ln_tp: Vec<f64> = win_probes.iter().map(|p| p.t.ln()).collect();
            let is: Vec<f64> = win_probes.iter().map(|p| p.integral).collect();
            let log = linear_fit(&ln_tp, &is);
            if log.slope > 0.0 && log.r2 >= R2_THRESHOLD {
                return VerdictKind::Divergent { growth: Growth::Log, fit_r2: log.r2 };
            }
        }
    }

    // convergence: one-signed, shrinking increments with a stable extrapolated tail
    let same_sign = window.iter().all(|&(_, d)| d >= 0.0) || window.iter().all(|&(_, d)| d <= 0.0);
    if !same_sign {
        return VerdictKind::Inconclusive { reason: "integrand changes sign on the probe tail".into() };
    }
    let n = probes.len();
    let d_last = incs[incs.len() - 1].1;
    let d_prev = incs[incs.len() - 2].1;
    if d_last == 0.0 {
        return VerdictKind::Convergent { limit_estimate: last_integral, err_estimate: quad_err };
    }
    if d_last.abs() >= d_prev.abs() {
        return VerdictKind::Inconclusive { reason: "partial integrals neither settle nor fit a growth model".into() };
    }
    let aitken = |i: usize| -> Option<f64> {
        let d1 = probes[i].integral - probes[i - 1].integral;
        let d0 = probes[i - 1].integral - probes[i - 2].integral;
        let denom = d1 - d0;
        if denom == 0.0 || (d1 / d0) >= 1.0 || (d1 / d0) < 0.0 {
            None
        } else {
            Some(probes[i].integral - d1 * d1 / denom)
        }
    };
    match (aitken(n - 1), aitken(n - 2)) {
        (Some(l1), Some(l0)) => {
            let diff = (l1 - l0).abs();
            if diff <= tail_tol * (1.0 + l1.abs()) {
                VerdictKind::Convergent { limit_estimate: l1, err_estimate: diff + quad_err }
            } else {
                VerdictKind::Inconclusive {
                    reason: format!("tail extrapolations disagree by {diff:.3e}"),
                }
            }
        }
        _ => VerdictKind::Inconclusive { reason: "tail increments are not geometrically decaying".into() },
    }
}

/// Classifies `∫_{t0}^∞ f` as divergent to +∞, convergent, or inconclusive.
///
/// Both probe schedules run when enabled; a decisive verdict beats an
/// inconclusive one and contradictory decisive verdicts are inconclusive.
pub fn classify_improper<I: Integrand + ?Sized>(f: &I, t0: f64, sched: &ProbeSchedule) -> DivergenceVerdict {
    let geometric = (t0 > 0.0).then(|| run_schedule(f, t0, sched, ScheduleKind::Geometric));
    let offset = (sched.both || t0 <= 0.0).then(|| run_schedule(f, t0, sched, ScheduleKind::Offset));
    match (geometric, offset) {
        (Some(g), None) => g,
        (None, Some(o)) => o,
        (Some(g), Some(o)) => {
            let decisive = |v: &DivergenceVerdict| !matches!(v.kind, VerdictKind::Inconclusive { .. });
            match (decisive(&g), decisive(&o)) {
                (true, true) if g.is_divergent() != o.is_divergent() => DivergenceVerdict::inconclusive(
                    "probe schedules disagree",
                    ScheduleKind::Geometric,
                    t0,
                    g.probes,
                ),
                (true, _) => g,
                (false, true) => o,
                (false, false) => g,
            }
        }
        (None, None) => unreachable!("at least one schedule runs"),
    }
}

/// `∫_t^∞ f`: the extrapolated value when the tail converges, `+∞` when it
/// diverges, NaN when inconclusive.
pub fn integrate_tail<I: Integrand + ?Sized>(f: &I, t: f64, sched: &ProbeSchedule) -> (f64, DivergenceVerdict) {
    let verdict = classify_improper(f, t, sched);
    let value = match verdict.kind {
        VerdictKind::Convergent { limit_estimate, .. } => limit_estimate,
        VerdictKind::Divergent { .. } => f64::INFINITY,
        VerdictKind::Inconclusive { .. } => f64::NAN,
    };
    (value, verdict)
}
