//! Expression language for coefficient functions.
//!
//! Every coefficient of the wave equation (r, p, p̂, q, a, aₖ, m, η, ψ, ...) is
//! supplied as a small arithmetic expression over the variables `t`, `x` and
//! `k`. The grammar is documented in `docs/expressions.md`.

mod parse;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use parse::{parse_expression, ParseError, ParseErrorKind};

/// A free variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    T,
    X,
    K,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::K => "k",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Var::T => 1,
            Var::X => 2,
            Var::K => 4,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl UnaryOp {
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Ln => Some("ln"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Abs => Some("abs"),
        }
    }

    pub(crate) fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "ln" => UnaryOp::Ln,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Constant(f64),
    Variable(Var),
    Unary(UnaryOp, Box<ExprAst>),
    Binary(BinaryOp, Box<ExprAst>, Box<ExprAst>),
}

/// Values for the free variables of an expression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub k: Option<f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn t(t: f64) -> Self {
        Self { t: Some(t), ..Self::default() }
    }

    pub fn xt(x: f64, t: f64) -> Self {
        Self { t: Some(t), x: Some(x), k: None }
    }

    pub fn kt(k: f64, t: f64) -> Self {
        Self { t: Some(t), x: None, k: Some(k) }
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        match var {
            Var::T => self.t = Some(value),
            Var::X => self.x = Some(value),
            Var::K => self.k = Some(value),
        }
        self
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::T => self.t,
            Var::X => self.x,
            Var::K => self.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(Var),
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogDomain(f64),
    #[error("square root of negative value {0}")]
    SqrtDomain(f64),
    #[error("negative base {base} raised to non-integer exponent {exponent}")]
    PowDomain { base: f64, exponent: f64 },
}

impl ExprAst {
    /// Evaluates the tree in IEEE double precision.
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        match self {
            ExprAst::Constant(c) => Ok(*c),
            ExprAst::Variable(v) => b.get(*v).ok_or(EvalError::Unbound(*v)),
            ExprAst::Unary(op, child) => {
                let u = child.eval(b)?;
                Ok(match op {
                    UnaryOp::Neg => -u,
                    UnaryOp::Sin => u.sin(),
                    UnaryOp::Cos => u.cos(),
                    UnaryOp::Exp => u.exp(),
                    UnaryOp::Ln => {
                        if u <= 0.0 {
                            return Err(EvalError::LogDomain(u));
                        }
                        u.ln()
                    }
                    UnaryOp::Sqrt => {
                        if u < 0.0 {
                            return Err(EvalError::SqrtDomain(u));
                        }
                        u.sqrt()
                    }
                    UnaryOp::Abs => u.abs(),
                })
            }
            ExprAst::Binary(op, lhs, rhs) => {
                let l = lhs.eval(b)?;
                let r = rhs.eval(b)?;
                Ok(match op {
                    BinaryOp::Add => l + r,
                    BinaryOp::Sub => l - r,
                    BinaryOp::Mul => l * r,
                    BinaryOp::Div => {
                        if r == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        l / r
                    }
                    BinaryOp::Pow => pow(l, r)?,
                })
            }
        }
    }

    /// Bit set of free variables.
    fn var_mask(&self) -> u8 {
        match self {
            ExprAst::Constant(_) => 0,
            ExprAst::Variable(v) => v.bit(),
            ExprAst::Unary(_, c) => c.var_mask(),
            ExprAst::Binary(_, l, r) => l.var_mask() | r.var_mask(),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        self.var_mask() & var.bit() != 0
    }

    pub fn free_vars(&self) -> Vec<Var> {
        let mask = self.var_mask();
        [Var::T, Var::X, Var::K]
            .into_iter()
            .filter(|v| mask & v.bit() != 0)
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        self.var_mask() == 0
    }

    fn precedence(&self) -> u8 {
        match self {
            ExprAst::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            ExprAst::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            ExprAst::Unary(UnaryOp::Neg, _) => 3,
            ExprAst::Binary(BinaryOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalError::PowDomain { base, exponent });
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

/// Unparses with the minimal parentheses that preserve the tree shape.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Constant(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            ExprAst::Variable(v) => write!(f, "{v}"),
            ExprAst::Unary(UnaryOp::Neg, child) => {
                f.write_str("-")?;
                child.write_child(f, child.precedence() < 3)
            }
            ExprAst::Unary(op, child) => {
                write!(f, "{}({child})", op.function_name().unwrap_or_default())
            }
            ExprAst::Binary(BinaryOp::Pow, base, exponent) => {
                base.write_child(f, base.precedence() <= 4)?;
                f.write_str("^")?;
                exponent.write_child(f, exponent.precedence() < 4)
            }
            ExprAst::Binary(op, lhs, rhs) => {
                let prec = self.precedence();
                lhs.write_child(f, lhs.precedence() < prec)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_child(f, rhs.precedence() <= prec)
            }
        }
    }
}

/// An expression together with the source text it was parsed from.
///
/// Equality is structural on the tree; the source text is kept so that
/// configuration files round-trip byte for byte.
#[derive(Debug, Clone)]
pub struct Expr {
    src: String,
    ast: ExprAst,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let ast = parse_expression(src)?;
        Ok(Self { src: src.to_string(), ast })
    }

    pub fn constant(c: f64) -> Self {
        Self { src: format!("{c}"), ast: ExprAst::Constant(c) }
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn ast(&self) -> &ExprAst {
        &self.ast
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        self.ast.eval(b)
    }

    /// Evaluates an expression of `t` alone.
    pub fn at(&self, t: f64) -> Result<f64, EvalError> {
        self.ast.eval(&Bindings::t(t))
    }

    pub fn at_xt(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        self.ast.eval(&Bindings::xt(x, t))
    }

    pub fn depends_on(&self, var: Var) -> bool {
        self.ast.depends_on(var)
    }

    /// Central-difference derivative in `t` with the default step.
    pub fn dt(&self, t: f64) -> Result<f64, EvalError> {
        diff_numeric(&self.ast, Var::T, t, None)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.src)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let src = String::deserialize(d)?;
        Expr::parse(&src).map_err(serde::de::Error::custom)
    }
}

/// Default central-difference step at `at`.
pub fn default_step(at: f64) -> f64 {
    (1e-6 * at.abs()).max(1e-6)
}

/// Central difference `(e(at+h) - e(at-h)) / 2h` in variable `var`.
///
/// Only `var` is bound; expressions with other free variables fail with
/// [`EvalError::Unbound`].
pub fn diff_numeric(e: &ExprAst, var: Var, at: f64, h: Option<f64>) -> Result<f64, EvalError> {
    diff_numeric_with(e, &Bindings::new(), var, at, h)
}

/// Like [`diff_numeric`], holding the remaining variables at `base`.
pub fn diff_numeric_with(
    e: &ExprAst,
    base: &Bindings,
    var: Var,
    at: f64,
    h: Option<f64>,
) -> Result<f64, EvalError> {
    let h = h.unwrap_or_else(|| default_step(at));
    let hi = e.eval(&base.with(var, at + h))?;
    let lo = e.eval(&base.with(var, at - h))?;
    Ok((hi - lo) / (2.0 * h))
}

/// Signed power `sign(u)·|u|^alpha`.
///
/// For `alpha` a ratio of odd integers this is the real branch of `u^alpha`.
#[inline]
pub fn spow(u: f64, alpha: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(src: &str) -> ExprAst {
        parse_expression(src).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(e("t^2").eval(&Bindings::t(3.0)).unwrap(), 9.0);
        assert_eq!(e("3+cos(k*t)").eval(&Bindings::kt(1.0, 0.0)).unwrap(), 4.0);
        assert_eq!(
            e("1/t").eval(&Bindings::t(0.0)),
            Err(EvalError::DivisionByZero)
        );
    }

    #[test]
    fn eval_domain_errors() {
        assert!(matches!(e("ln(t)").eval(&Bindings::t(0.0)), Err(EvalError::LogDomain(_))));
        assert!(matches!(e("sqrt(t)").eval(&Bindings::t(-1.0)), Err(EvalError::SqrtDomain(_))));
        assert!(matches!(
            e("x^0.5").eval(&Bindings::xt(-2.0, 1.0)),
            Err(EvalError::PowDomain { .. })
        ));
        assert_eq!(e("x^3").eval(&Bindings::xt(-2.0, 1.0)).unwrap(), -8.0);
        assert_eq!(e("t*x").eval(&Bindings::t(1.0)), Err(EvalError::Unbound(Var::X)));
    }

    #[test]
    fn derivative_examples() {
        assert!((diff_numeric(&e("t^2"), Var::T, 3.0, None).unwrap() - 6.0).abs() < 1e-6);
        assert!((diff_numeric(&e("2*t"), Var::T, 7.0, None).unwrap() - 2.0).abs() < 1e-9);
        // d/dt sin at 0 is cos 0
        assert!((diff_numeric(&e("sin(t)"), Var::T, 0.0, None).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn derivative_propagates_errors() {
        assert!(diff_numeric(&e("ln(t)"), Var::T, 0.0, None).is_err());
    }

    #[test]
    fn free_variables() {
        assert_eq!(e("3+cos(k*t)").free_vars(), vec![Var::T, Var::K]);
        assert!(e("2^3").is_constant());
        assert!(!e("x").depends_on(Var::T));
    }

    #[test]
    fn signed_power() {
        assert_eq!(spow(-2.0, 3.0), -8.0);
        assert!((spow(-8.0, 1.0 / 3.0) + 2.0).abs() < 1e-12);
        assert_eq!(spow(0.0, 5.0), 0.0);
    }

    #[test]
    fn unparse_keeps_shape() {
        for src in ["-t^2", "(-t)^2", "t^-2", "2^3^2", "(2^3)^2", "t-(x-k)", "t/(x*k)", "-(t+1)", "--t"] {
            let ast = e(src);
            assert_eq!(e(&ast.to_string()), ast, "{src} -> {ast}");
        }
    }

    #[test]
    fn evaluation_is_bitwise_deterministic() {
        let ast = e("sin(t)^2 + exp(-t/3)*sqrt(abs(x)) - ln(t+2)/(1+k)");
        let b = Bindings { t: Some(1.234), x: Some(-0.7), k: Some(3.0) };
        let first = ast.eval(&b).unwrap().to_bits();
        for _ in 0..10 {
            assert_eq!(ast.eval(&b).unwrap().to_bits(), first);
        }
    }
}
