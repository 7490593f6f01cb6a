//! Problem model: one instance of the damped quasilinear wave equation
//!
//! ```text
//! r(t)u^{α-1}u_tt + p(x,t)u^{α-2}u_t² + p̂(x,t)u^{α-1}u_t + f(u,x,m(t))
//!     = a(t)Δu(x,t) + Σ_{k=1}^{s} a_k(t)Δu(x,η(t))
//! ```
//!
//! together with its boundary condition, spatial domain and start time.

mod hypotheses;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{Expr, ParseError, Var};

pub use hypotheses::{
    check_hypotheses, HypothesisEntry, HypothesisReport, HypothesisVerdict, SamplingGrid, Witness,
    HYPOTHESIS_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("invalid exponent alpha `{0}`: must be a ratio of positive odd integers")]
    InvalidAlpha(String),
    #[error("t0 must be positive, got {0}")]
    InvalidT0(f64),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("`{field}` may not depend on `{var}`")]
    VariableNotAllowed { field: &'static str, var: Var },
    #[error("unknown built-in example `{0}` (expected 3.1 or 3.2)")]
    UnknownExample(String),
    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),
    #[error("expression for `{field}`: {source}")]
    Expression { field: &'static str, source: ParseError },
}

/// Exponent α, a ratio of positive odd integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alpha {
    num: u32,
    den: u32,
}

impl Alpha {
    pub fn new(num: u32, den: u32) -> Result<Self, ProblemError> {
        if num == 0 || den == 0 || num % 2 == 0 || den % 2 == 0 {
            return Err(ProblemError::InvalidAlpha(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn integer(n: u32) -> Result<Self, ProblemError> {
        Self::new(n, 1)
    }

    pub fn numerator(self) -> u32 {
        self.num
    }

    pub fn denominator(self) -> u32 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Alpha {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProblemError::InvalidAlpha(s.to_string());
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: u32 = n.parse().map_err(|_| bad())?;
        let d: u32 = d.parse().map_err(|_| bad())?;
        Self::new(n, d).map_err(|_| bad())
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// The nonlinearity `f(u, x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `f = coef(t)·u^α`
    PowerLaw { coef: Expr },
    /// `f = coef(t)·u^exponent` (signed power)
    Custom { coef: Expr, exponent: f64 },
}

impl Nonlinearity {
    pub fn coef(&self) -> &Expr {
        match self {
            Nonlinearity::PowerLaw { coef } | Nonlinearity::Custom { coef, .. } => coef,
        }
    }

    pub fn exponent(&self, alpha: Alpha) -> f64 {
        match self {
            Nonlinearity::PowerLaw { .. } => alpha.value(),
            Nonlinearity::Custom { exponent, .. } => *exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// `∂u/∂γ + ψ(x,t)u = 0` with γ the outward normal.
    Robin { psi: Expr },
    /// `u = 0`
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn validate(&self) -> Result<(), ProblemError> {
        match self {
            Domain::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(ProblemError::InvalidDomain(format!("interval [{lo}, {hi}]")));
                }
            }
            Domain::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(ProblemError::InvalidDomain("box corners must have equal, nonzero length".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
                    return Err(ProblemError::InvalidDomain(format!("box {lo:?} x {hi:?}")));
                }
            }
        }
        Ok(())
    }

    /// Extent along the axis bound to the expression variable `x` (the first).
    pub fn x_range(&self) -> (f64, f64) {
        match self {
            Domain::Interval { lo, hi } => (*lo, *hi),
            Domain::Box { lo, hi } => (lo[0], hi[0]),
        }
    }

    /// `n` equally spaced points of the closure of the `x` axis.
    pub fn x_samples(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = self.x_range();
        if n <= 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }
}

/// Complete description of one problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub alpha: Alpha,
    pub r: Expr,
    pub p: Expr,
    pub p_hat: Expr,
    pub q: Expr,
    pub f: Nonlinearity,
    pub a: Expr,
    pub a_k: Expr,
    pub s: u32,
    pub m: Expr,
    pub eta: Expr,
    pub bc: BoundaryCondition,
    pub domain: Domain,
    pub t0: f64,
}

fn allow(field: &'static str, e: &Expr, allowed: &[Var]) -> Result<(), ProblemError> {
    for var in e.ast().free_vars() {
        if !allowed.contains(&var) {
            return Err(ProblemError::VariableNotAllowed { field, var });
        }
    }
    Ok(())
}

impl ProblemSpec {
    /// Checks structural invariants: t0 > 0, a valid domain and the
    /// variables each coefficient may use.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(ProblemError::InvalidT0(self.t0));
        }
        self.domain.validate()?;
        let t = [Var::T];
        let xt = [Var::X, Var::T];
        allow("r", &self.r, &t)?;
        allow("q", &self.q, &t)?;
        allow("a", &self.a, &t)?;
        allow("m", &self.m, &t)?;
        allow("eta", &self.eta, &t)?;
        allow("f_coef", self.f.coef(), &t)?;
        allow("p", &self.p, &xt)?;
        allow("p_hat", &self.p_hat, &xt)?;
        allow("a_k", &self.a_k, &[Var::K, Var::T])?;
        if let BoundaryCondition::Robin { psi } = &self.bc {
            allow("psi", psi, &xt)?;
        }
        Ok(())
    }

    /// `Σ_{k=1}^{s} a_k(t)`.
    pub fn a_sum(&self, t: f64) -> Result<f64, crate::expr::EvalError> {
        let mut sum = 0.0;
        for k in 1..=self.s {
            sum += self.a_k.eval(&crate::expr::Bindings::kt(k as f64, t))?;
        }
        Ok(sum)
    }
}

fn ex(field: &'static str, src: &str) -> Result<Expr, ProblemError> {
    Expr::parse(src).map_err(|source| ProblemError::Expression { field, source })
}

/// The two worked examples, with t0 = 1 and s = 2 summands.
///
/// Example 3.1 lives on Ω = [0, 1] with Robin coefficient ψ = t; Example 3.2
/// on Ω = [0, π] with the Dirichlet condition.
pub fn builtin_example(id: &str) -> Result<ProblemSpec, ProblemError> {
    let spec = match id {
        "3.1" => ProblemSpec {
            alpha: Alpha::integer(5)?,
            r: ex("r", "t")?,
            p: ex("p", "1")?,
            p_hat: ex("p_hat", "1")?,
            q: ex("q", "1")?,
            f: Nonlinearity::PowerLaw { coef: ex("f_coef", "2")? },
            a: ex("a", "1")?,
            a_k: ex("a_k", "3+cos(k*t)")?,
            s: 2,
            m: ex("m", "2*t")?,
            eta: ex("eta", "t/2")?,
            bc: BoundaryCondition::Robin { psi: ex("psi", "t")? },
            domain: Domain::Interval { lo: 0.0, hi: 1.0 },
            t0: 1.0,
        },
        "3.2" => ProblemSpec {
            alpha: Alpha::integer(3)?,
            r: ex("r", "t^2")?,
            p: ex("p", "1")?,
            p_hat: ex("p_hat", "2*t")?,
            q: ex("q", "t^4")?,
            f: Nonlinearity::PowerLaw { coef: ex("f_coef", "2*t^4")? },
            a: ex("a", "1")?,
            a_k: ex("a_k", "1+k*t")?,
            s: 2,
            m: ex("m", "t+1")?,
            eta: ex("eta", "t+2")?,
            bc: BoundaryCondition::Dirichlet,
            domain: Domain::Interval { lo: 0.0, hi: std::f64::consts::PI },
            t0: 1.0,
        },
        other => return Err(ProblemError::UnknownExample(other.to_string())),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_parsing() {
        assert_eq!("5".parse::<Alpha>().unwrap().value(), 5.0);
        let a: Alpha = "5/3".parse().unwrap();
        assert_eq!((a.numerator(), a.denominator()), (5, 3));
        assert_eq!("15/9".parse::<Alpha>().unwrap().to_string(), "5/3");
        assert!("2".parse::<Alpha>().is_err());
        assert!("3/4".parse::<Alpha>().is_err());
        assert!("-3".parse::<Alpha>().is_err());
        assert!("0".parse::<Alpha>().is_err());
    }

    #[test]
    fn builtin_examples() {
        let e1 = builtin_example("3.1").unwrap();
        assert_eq!(e1.m, Expr::parse("2*t").unwrap());
        assert_eq!(e1.alpha.value(), 5.0);
        let e2 = builtin_example("3.2").unwrap();
        assert_eq!(e2.q, Expr::parse("t^4").unwrap());
        assert_eq!(e2.bc, BoundaryCondition::Dirichlet);
        assert_eq!(builtin_example("9.9"), Err(ProblemError::UnknownExample("9.9".into())));
    }

    #[test]
    fn variable_restrictions() {
        let mut spec = builtin_example("3.1").unwrap();
        spec.r = Expr::parse("t + x").unwrap();
        assert_eq!(
            spec.validate(),
            Err(ProblemError::VariableNotAllowed { field: "r", var: Var::X })
        );
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::Interval { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(Domain::Box { lo: vec![0.0, 0.0], hi: vec![1.0] }.validate().is_err());
        assert!(Domain::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 2.0] }.validate().is_ok());
        let mut spec = builtin_example("3.2").unwrap();
        spec.t0 = 0.0;
        assert_eq!(spec.validate(), Err(ProblemError::InvalidT0(0.0)));
    }

    #[test]
    fn coefficient_family_sum() {
        let spec = builtin_example("3.1").unwrap();
        // (3 + cos 0) + (3 + cos 0)
        assert_eq!(spec.a_sum(0.0).unwrap(), 8.0);
    }
}
