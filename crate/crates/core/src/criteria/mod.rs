//! Oscillation criteria.
//!
//! Each theorem check builds its own [`DerivedCoefficients`] and reports one
//! entry per condition. Divergence conditions are decided by
//! [`classify_improper`](crate::quad::classify_improper); a verdict of
//! `Oscillatory` means every required entry holds on the numeric evidence,
//! and anything else is `Inconclusive`. Non-oscillation is never claimed.

mod derived;
mod riccati;
mod theorems;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::problem::{ProblemError, ProblemSpec};
use crate::quad::{DivergenceVerdict, ProbeSchedule, QuadError, VerdictKind};

pub use derived::{derive_coefficients, DerivedCoefficients};
pub use riccati::riccati_residual;
pub use theorems::{
    check_theorem, check_theorem_2_1, check_theorem_2_2, check_theorem_2_3, check_theorem_2_4, check_theorems,
};

/// Slack used in every strict comparison.
pub const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("invalid tuning parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("trajectory is not positive: v({t}) = {v}")]
    NonPositive { t: f64, v: f64 },
    #[error("t = {t} is too close to the ends of the trajectory [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TheoremId {
    T2_1,
    T2_2,
    T2_3,
    T2_4,
}

impl TheoremId {
    pub const ALL: [TheoremId; 4] = [TheoremId::T2_1, TheoremId::T2_2, TheoremId::T2_3, TheoremId::T2_4];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::T2_1 => "2.1",
            TheoremId::T2_2 => "2.2",
            TheoremId::T2_3 => "2.3",
            TheoremId::T2_4 => "2.4",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        TheoremId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.trim())
            .ok_or_else(|| format!("unknown theorem `{s}` (expected 2.1, 2.2, 2.3 or 2.4)"))
    }
}

impl Serialize for TheoremId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Which reading of the `m^{-1}(t)` factor in the eventual inequality of
/// Theorem 2.1 to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MInverseReading {
    /// `1 / m(t)`
    #[default]
    Reciprocal,
    /// The inverse function evaluated at `t`.
    InverseFunction,
}

/// User-adjustable parameters of the criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningParams {
    /// Weight function of Theorems 2.3 and 2.4.
    pub b: Expr,
    /// Inner deviating argument of Theorem 2.2.
    pub tau: Expr,
    /// Averaging length of Theorem 2.2; must be positive.
    pub beta: f64,
    pub probes: ProbeSchedule,
    /// Base point of the exponential weights in Theorem 2.4. Defaults to t0.
    pub t_star: Option<f64>,
    /// Lower limit of the Riccati integral. Defaults to t0.
    pub t1: Option<f64>,
    /// Inner lower limit of the nested integral. Defaults to `t_star`.
    pub t2: Option<f64>,
    /// Outer lower limit of the nested integral. Defaults to `t_star`.
    pub t3: Option<f64>,
    /// First rung of the geometric `T` ladder of the eventual inequality.
    /// Defaults to t0.
    pub ladder_start: Option<f64>,
    pub ladder_rungs: usize,
    /// Geometric `t` samples per rung.
    pub scan_samples: usize,
    pub m_inverse: MInverseReading,
    /// Coarse points for the minimum of `p_hat` over x before refinement.
    pub x_grid: usize,
    /// Replace `min_x p_hat` by zero everywhere.
    pub force_zero_damping: bool,
}

impl Default for TuningParams {
    fn default() -> Self {
        Self {
            b: Expr::parse("1").expect("constant"),
            tau: Expr::parse("t").expect("identity"),
            beta: 1.0,
            probes: ProbeSchedule::default(),
            t_star: None,
            t1: None,
            t2: None,
            t3: None,
            ladder_start: None,
            ladder_rungs: 12,
            scan_samples: 32,
            m_inverse: MInverseReading::Reciprocal,
            x_grid: 33,
            force_zero_damping: false,
        }
    }
}

/// Lower limits actually used, after defaults are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchors {
    pub t0: f64,
    pub t_star: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl TuningParams {
    pub fn anchors(&self, spec: &ProblemSpec) -> Result<Anchors, CriterionError> {
        let t0 = spec.t0;
        let t_star = self.t_star.unwrap_or(t0);
        let a = Anchors {
            t0,
            t_star,
            t1: self.t1.unwrap_or(t0),
            t2: self.t2.unwrap_or(t_star),
            t3: self.t3.unwrap_or(t_star),
        };
        if !(a.t_star >= t0 && a.t1 >= t0 && a.t2 >= a.t_star && a.t3 >= a.t_star) {
            return Err(CriterionError::Parameter(format!(
                "need t_star >= t0, t1 >= t0, t2 >= t_star, t3 >= t_star (got {a:?})"
            )));
        }
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), CriterionError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(CriterionError::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        if self.probes.doublings < 6 {
            return Err(CriterionError::Parameter("at least 6 probe doublings are needed".into()));
        }
        if self.scan_samples < 2 || self.ladder_rungs == 0 {
            return Err(CriterionError::Parameter("scan needs >= 2 samples and >= 1 rung".into()));
        }
        if self.x_grid < 2 {
            return Err(CriterionError::Parameter("x_grid must be at least 2".into()));
        }
        for (name, e) in [("b", &self.b), ("tau", &self.tau)] {
            if e.ast().free_vars().iter().any(|v| *v != crate::expr::Var::T) {
                return Err(CriterionError::Parameter(format!("`{name}` may depend on t only")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Must hold for the theorem (or the selected case) to apply.
    Required,
    /// Standing assumption of the theorem, sampled on a grid.
    Precondition,
    /// Decides which case of the theorem applies.
    CaseSelector,
    /// Evaluated for the record; not part of the selected case.
    Informational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Overall {
    Oscillatory,
    Inconclusive,
}

impl fmt::Display for Overall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Overall::Oscillatory => "Oscillatory",
            Overall::Inconclusive => "Inconclusive",
        })
    }
}

/// One sample at which a sampled requirement fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleWitness {
    pub check: String,
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub value: f64,
    pub bound: f64,
}

/// The eventual inequality scanned from one ladder rung `T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRung {
    pub lower: f64,
    pub t_from: f64,
    pub t_to: f64,
    pub samples: usize,
    /// Smallest left-hand side over the samples (`+inf` when the tail diverges).
    pub min_lhs: f64,
    pub argmin: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurrogateSample {
    pub t: f64,
    pub upper: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Divergence(DivergenceVerdict),
    Scan {
        #[serde(skip_serializing_if = "Option::is_none")]
        tail: Option<DivergenceVerdict>,
        reading: MInverseReading,
        rungs: Vec<ScanRung>,
    },
    Surrogate {
        threshold: f64,
        liminf_estimate: f64,
        samples: Vec<SurrogateSample>,
    },
    Samples {
        checked: usize,
        witnesses: Vec<SampleWitness>,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub label: String,
    pub statement: String,
    pub role: Role,
    pub verdict: ConditionVerdict,
    pub evidence: Evidence,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ConditionEntry {
    pub fn holds(&self) -> bool {
        self.verdict == ConditionVerdict::Holds
    }

    /// The divergence evidence, if any.
    pub fn divergence(&self) -> Option<&DivergenceVerdict> {
        match &self.evidence {
            Evidence::Divergence(v) => Some(v),
            _ => None,
        }
    }
}

/// Parameters recorded with every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametersUsed {
    pub b: String,
    pub tau: String,
    pub beta: f64,
    pub anchors: Anchors,
    pub probes: ProbeSchedule,
    pub t_max: f64,
    pub ladder: Vec<f64>,
    pub m_inverse: MInverseReading,
    pub force_zero_damping: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub theorem: TheoremId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
    pub overall: Overall,
    pub conditions: Vec<ConditionEntry>,
    pub parameters: ParametersUsed,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn condition(&self, label: &str) -> Option<&ConditionEntry> {
        self.conditions.iter().find(|c| c.label == label)
    }

    /// One-line verdict, e.g. `case (1): Oscillatory`.
    pub fn summary(&self) -> String {
        match self.case {
            Some(c) => format!("case ({c}): {}", self.overall),
            None => self.overall.to_string(),
        }
    }
}

/// Maps a divergence verdict onto the condition "the integral diverges to +∞".
pub(crate) fn divergence_verdict(v: &DivergenceVerdict) -> ConditionVerdict {
    match &v.kind {
        VerdictKind::Divergent { .. } => ConditionVerdict::Holds,
        VerdictKind::Convergent { .. } => ConditionVerdict::Fails,
        VerdictKind::Inconclusive { .. } if v.never_increases() => ConditionVerdict::Fails,
        VerdictKind::Inconclusive { .. } => ConditionVerdict::Inconclusive,
    }
}
