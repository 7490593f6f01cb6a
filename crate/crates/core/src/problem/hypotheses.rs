use serde::Serialize;

use super::{BoundaryCondition, Nonlinearity, ProblemError, ProblemSpec};
use crate::expr::{Bindings, EvalError};

/// Margin by which an inequality must fail before a sample counts as a violation.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

const MAX_WITNESSES: usize = 8;

/// A sample point at which `lhs <relation> rhs` fails.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Witness {
    pub check: String,
    pub relation: &'static str,
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_next: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum HypothesisVerdict {
    Satisfied,
    Violated { witnesses: Vec<Witness>, violations: usize },
    Unchecked { reason: String },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct HypothesisEntry {
    pub id: &'static str,
    #[serde(flatten)]
    pub verdict: HypothesisVerdict,
    pub notes: Vec<String>,
}

impl HypothesisEntry {
    pub fn is_satisfied(&self) -> bool {
        matches!(self.verdict, HypothesisVerdict::Satisfied)
    }

    pub fn is_violated(&self) -> bool {
        matches!(self.verdict, HypothesisVerdict::Violated { .. })
    }

    pub fn witnesses(&self) -> &[Witness] {
        match &self.verdict {
            HypothesisVerdict::Violated { witnesses, .. } => witnesses,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SamplingGrid {
    pub t_range: (f64, f64),
    pub n_t: usize,
    pub n_x: usize,
    pub x_range: (f64, f64),
}

/// Grid-limited evidence for the standing hypotheses. Verdicts describe the
/// sampled points only.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct HypothesisReport {
    pub h1: HypothesisEntry,
    pub h2: HypothesisEntry,
    pub h3: HypothesisEntry,
    /// ψ ≥ 0 on the boundary for the Robin condition.
    pub boundary: HypothesisEntry,
    pub grid: SamplingGrid,
}

impl HypothesisReport {
    pub fn entries(&self) -> [&HypothesisEntry; 4] {
        [&self.h1, &self.h2, &self.h3, &self.boundary]
    }

    pub fn any_violated(&self) -> bool {
        self.entries().iter().any(|e| e.is_violated())
    }
}

struct Collector {
    id: &'static str,
    witnesses: Vec<Witness>,
    violations: usize,
    error: Option<String>,
    notes: Vec<String>,
}

impl Collector {
    fn new(id: &'static str) -> Self {
        Self { id, witnesses: Vec::new(), violations: 0, error: None, notes: Vec::new() }
    }

    fn eval(&mut self, check: &str, v: Result<f64, EvalError>) -> Option<f64> {
        match v {
            Ok(v) => Some(v),
            Err(e) => {
                self.error.get_or_insert_with(|| format!("{check}: {e}"));
                None
            }
        }
    }

    /// Records `lhs > 0`.
    fn positive(&mut self, check: &str, v: Result<f64, EvalError>, at: Witness) {
        if let Some(v) = self.eval(check, v) {
            if v <= 0.0 {
                self.push(Witness { check: check.into(), relation: ">", lhs: v, rhs: 0.0, ..at });
            }
        }
    }

    /// Records `lhs >= rhs` up to [`HYPOTHESIS_TOL`].
    fn at_least(&mut self, check: &str, lhs: Result<f64, EvalError>, rhs: Result<f64, EvalError>, at: Witness) {
        let (Some(l), Some(r)) = (self.eval(check, lhs), self.eval(check, rhs)) else {
            return;
        };
        if l - r < -HYPOTHESIS_TOL {
            self.push(Witness { check: check.into(), relation: ">=", lhs: l, rhs: r, ..at });
        }
    }

    fn push(&mut self, w: Witness) {
        self.violations += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(w);
        }
    }

    fn finish(self) -> HypothesisEntry {
        let verdict = if self.violations > 0 {
            HypothesisVerdict::Violated { witnesses: self.witnesses, violations: self.violations }
        } else if let Some(reason) = self.error {
            HypothesisVerdict::Unchecked { reason }
        } else {
            HypothesisVerdict::Satisfied
        };
        HypothesisEntry { id: self.id, verdict, notes: self.notes }
    }
}

fn at_t(t: f64) -> Witness {
    Witness {
        check: String::new(),
        relation: "",
        t,
        t_next: None,
        x: None,
        k: None,
        lhs: 0.0,
        rhs: 0.0,
    }
}

/// Samples (H1)–(H3) and the Robin sign condition on an `n_t × n_x` grid.
pub fn check_hypotheses(
    spec: &ProblemSpec,
    t_range: (f64, f64),
    n_t: usize,
    n_x: usize,
) -> Result<HypothesisReport, ProblemError> {
    let (t_lo, t_hi) = t_range;
    if n_t < 2 || n_x < 2 {
        return Err(ProblemError::InvalidGrid(format!("need n_t, n_x >= 2, got {n_t} x {n_x}")));
    }
    if !(t_lo >= spec.t0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(ProblemError::InvalidGrid(format!(
            "t range [{t_lo}, {t_hi}] must be ordered and start at or after t0 = {}",
            spec.t0
        )));
    }
    let ts: Vec<f64> = (0..n_t)
        .map(|i| t_lo + (t_hi - t_lo) * i as f64 / (n_t - 1) as f64)
        .collect();
    let xs = spec.domain.x_samples(n_x);
    let alpha = spec.alpha.value();

    let mut h1 = Collector::new("H1");
    for &t in &ts {
        h1.positive("r(t) > 0", spec.r.at(t), at_t(t));
        h1.positive("a(t) > 0", spec.a.at(t), at_t(t));
        for k in 1..=spec.s {
            let v = spec.a_k.eval(&Bindings::kt(k as f64, t));
            h1.positive("a_k(t) > 0", v, Witness { k: Some(k), ..at_t(t) });
        }
        for &x in &xs {
            let w = Witness { x: Some(x), ..at_t(t) };
            h1.at_least("p(x,t) >= 0", spec.p.at_xt(x, t), Ok(0.0), w.clone());
            let rhs = spec.r.at(t).map(|r| (alpha - 1.0) * r);
            h1.at_least("p(x,t) >= (alpha-1) r(t)", spec.p.at_xt(x, t), rhs, w);
        }
    }
    h1.notes.push("continuity and differentiability of r are not checked".into());

    let mut h2 = Collector::new("H2");
    for (i, &t) in ts.iter().enumerate() {
        h2.positive("m(t) > 0", spec.m.at(t), at_t(t));
        h2.positive("eta(t) > 0", spec.eta.at(t), at_t(t));
        h2.at_least("m(t) >= t", spec.m.at(t), Ok(t), at_t(t));
        if let Some(&next) = ts.get(i + 1) {
            let w = Witness { t_next: Some(next), ..at_t(t) };
            h2.at_least("m increasing", spec.m.at(next), spec.m.at(t), w.clone());
            h2.at_least("eta increasing", spec.eta.at(next), spec.eta.at(t), w);
        }
    }
    if let (Ok(m_hi), Ok(eta_hi)) = (spec.m.at(t_hi), spec.eta.at(t_hi)) {
        h2.notes.push(format!(
            "limits at infinity are not checkable; m({t_hi}) = {m_hi}, eta({t_hi}) = {eta_hi}"
        ));
    }

    let mut h3 = Collector::new("H3");
    let coef_check = match &spec.f {
        Nonlinearity::PowerLaw { coef } => Some(coef),
        Nonlinearity::Custom { coef, exponent } if *exponent == alpha => Some(coef),
        Nonlinearity::Custom { .. } => None,
    };
    for &t in &ts {
        h3.positive("q(t) > 0", spec.q.at(t), at_t(t));
        if let Some(coef) = coef_check {
            h3.at_least("f coefficient >= q(t)", coef.at(t), spec.q.at(t), at_t(t));
        }
    }
    if coef_check.is_some() {
        h3.notes.push("strict inequality f > q u^alpha is checked as coef(t) >= q(t)".into());
    } else {
        h3.error.get_or_insert_with(|| {
            "nonlinearity exponent differs from alpha; comparison with q u^alpha is not pointwise checkable".into()
        });
    }

    let mut boundary = Collector::new("boundary");
    match &spec.bc {
        BoundaryCondition::Robin { psi } => {
            let (x_lo, x_hi) = spec.domain.x_range();
            for &t in &ts {
                for x in [x_lo, x_hi] {
                    let w = Witness { x: Some(x), ..at_t(t) };
                    boundary.at_least("psi(x,t) >= 0", psi.at_xt(x, t), Ok(0.0), w);
                }
            }
        }
        BoundaryCondition::Dirichlet => boundary.notes.push("Dirichlet condition: nothing to check".into()),
    }

    Ok(HypothesisReport {
        h1: h1.finish(),
        h2: h2.finish(),
        h3: h3.finish(),
        boundary: boundary.finish(),
        grid: SamplingGrid { t_range, n_t, n_x, x_range: spec.domain.x_range() },
    })
}
