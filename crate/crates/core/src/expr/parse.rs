use std::fmt;

use thiserror::Error;

use super::{BinaryOp, ExprAst, UnaryOp, Var};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at byte offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedToken { found: String, expected: &'static str },
    UnexpectedEnd { expected: &'static str },
    UnknownIdentifier(String),
    Arity { function: String, expected: usize, found: usize },
    InvalidNumber(String),
    /// `^` with a variable exponent whose base may be negative.
    NonConstantExponent,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
            ParseErrorKind::UnexpectedToken { found, expected } => {
                write!(f, "unexpected `{found}`, expected {expected}")
            }
            ParseErrorKind::UnexpectedEnd { expected } => {
                write!(f, "unexpected end of input, expected {expected}")
            }
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::Arity { function, expected, found } => write!(
                f,
                "`{function}` takes {expected} argument(s), found {found}"
            ),
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number `{s}`"),
            ParseErrorKind::NonConstantExponent => write!(
                f,
                "non-constant exponent on a base that may be negative"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "{n}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Op(c) => write!(f, "{c}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::Comma => f.write_str(","),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((i, Tok::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            b',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part: e/E followed by optional sign and digits
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::InvalidNumber(text.to_string()),
                })?;
                out.push((start, Tok::Num(value)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError { offset: i, kind: ParseErrorKind::UnexpectedChar(ch) });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn error_here(&self, expected: &'static str) -> ParseError {
        let kind = match self.peek() {
            Some(t) => ParseErrorKind::UnexpectedToken { found: t.to_string(), expected },
            None => ParseErrorKind::UnexpectedEnd { expected },
        };
        ParseError { offset: self.offset(), kind }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.bump();
            let rhs = self.term()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.bump();
            let rhs = self.unary()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprAst, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.bump();
            let child = self.unary()?;
            return Ok(ExprAst::Unary(UnaryOp::Neg, Box::new(child)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            let at = self.offset();
            self.bump();
            let exponent = self.unary()?;
            if !exponent.is_constant() && sign_of(&base) == Sign::Unknown {
                return Err(ParseError { offset: at, kind: ParseErrorKind::NonConstantExponent });
            }
            return Ok(ExprAst::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst, ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.bump();
                Ok(ExprAst::Constant(v))
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.bump();
                match name.as_str() {
                    "t" => return Ok(ExprAst::Variable(Var::T)),
                    "x" => return Ok(ExprAst::Variable(Var::X)),
                    "k" => return Ok(ExprAst::Variable(Var::K)),
                    "pi" => return Ok(ExprAst::Constant(std::f64::consts::PI)),
                    _ => {}
                }
                let Some(op) = UnaryOp::from_function_name(&name) else {
                    return Err(ParseError {
                        offset,
                        kind: ParseErrorKind::UnknownIdentifier(name),
                    });
                };
                let args = self.call_args(&name, offset)?;
                if args.len() != 1 {
                    return Err(ParseError {
                        offset,
                        kind: ParseErrorKind::Arity { function: name, expected: 1, found: args.len() },
                    });
                }
                let arg = args.into_iter().next().expect("one argument");
                Ok(ExprAst::Unary(op, Box::new(arg)))
            }
            _ => Err(self.error_here("a number, variable, function or `(`")),
        }
    }

    fn call_args(&mut self, name: &str, offset: usize) -> Result<Vec<ExprAst>, ParseError> {
        if self.peek() != Some(&Tok::LParen) {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::Arity { function: name.to_string(), expected: 1, found: 0 },
            });
        }
        self.bump();
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek() {
                Some(Tok::Comma) => {
                    self.bump();
                }
                _ => break,
            }
        }
        self.expect_rparen()?;
        Ok(args)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error_here("`)`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    NonNeg,
    Unknown,
}

/// Conservative sign analysis. `t` (time, past t0 > 0) and `k` (summation
/// index, ≥ 1) count as non-negative; `x` does not.
fn sign_of(e: &ExprAst) -> Sign {
    use Sign::*;
    match e {
        ExprAst::Constant(c) if *c >= 0.0 => NonNeg,
        ExprAst::Constant(_) => Unknown,
        ExprAst::Variable(Var::T | Var::K) => NonNeg,
        ExprAst::Variable(Var::X) => Unknown,
        ExprAst::Unary(UnaryOp::Exp | UnaryOp::Abs | UnaryOp::Sqrt, _) => NonNeg,
        ExprAst::Unary(..) => Unknown,
        ExprAst::Binary(BinaryOp::Add | BinaryOp::Mul | BinaryOp::Div, l, r) => {
            if sign_of(l) == NonNeg && sign_of(r) == NonNeg {
                NonNeg
            } else {
                Unknown
            }
        }
        ExprAst::Binary(BinaryOp::Sub, ..) => Unknown,
        ExprAst::Binary(BinaryOp::Pow, base, exponent) => {
            if sign_of(base) == NonNeg {
                return NonNeg;
            }
            match exponent.eval(&Default::default()) {
                Ok(p) if exponent.is_constant() && p.fract() == 0.0 && (p / 2.0).fract() == 0.0 => NonNeg,
                _ => Unknown,
            }
        }
    }
}

/// Parses `src` into an [`ExprAst`].
///
/// Precedence, tightest first: `^` (right associative), unary minus, `* /`,
/// `+ -` (left associative).
pub fn parse_expression(src: &str) -> Result<ExprAst, ParseError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(ParseError { offset: 0, kind: ParseErrorKind::Empty });
    }
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let ast = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.error_here("an operator or end of input"));
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Box<ExprAst> {
        Box::new(ExprAst::Constant(v))
    }

    fn var(v: Var) -> Box<ExprAst> {
        Box::new(ExprAst::Variable(v))
    }

    #[test]
    fn power_binds_tighter_than_product() {
        let ast = parse_expression("2*t^4").unwrap();
        assert_eq!(
            ast,
            ExprAst::Binary(BinaryOp::Mul, c(2.0), Box::new(ExprAst::Binary(BinaryOp::Pow, var(Var::T), c(4.0))))
        );
    }

    #[test]
    fn coefficient_family() {
        let ast = parse_expression("3+cos(k*t)").unwrap();
        let inner = ExprAst::Binary(BinaryOp::Mul, var(Var::K), var(Var::T));
        assert_eq!(
            ast,
            ExprAst::Binary(
                BinaryOp::Add,
                c(3.0),
                Box::new(ExprAst::Unary(UnaryOp::Cos, Box::new(inner)))
            )
        );
    }

    #[test]
    fn unbalanced_paren_reports_end_offset() {
        let err = parse_expression("sin(t").unwrap_err();
        assert_eq!(err.offset, 5);
        assert!(matches!(err.kind, ParseErrorKind::UnexpectedEnd { .. }));
    }

    #[test]
    fn precedence_and_associativity() {
        let neg_sq = parse_expression("-t^2").unwrap();
        assert!(matches!(neg_sq, ExprAst::Unary(UnaryOp::Neg, _)));
        let right = parse_expression("2^3^2").unwrap();
        assert_eq!(right.eval(&Default::default()).unwrap(), 512.0);
        let left = parse_expression("8-3-2").unwrap();
        assert_eq!(left.eval(&Default::default()).unwrap(), 3.0);
        let div = parse_expression("8/4/2").unwrap();
        assert_eq!(div.eval(&Default::default()).unwrap(), 1.0);
        let neg_exp = parse_expression("2^-1").unwrap();
        assert_eq!(neg_exp.eval(&Default::default()).unwrap(), 0.5);
    }

    #[test]
    fn identifier_errors() {
        let err = parse_expression("2*y").unwrap_err();
        assert_eq!(err.offset, 2);
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        let err = parse_expression("sin(t, x)").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Arity { found: 2, .. }));
        let err = parse_expression("cos").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Arity { found: 0, .. }));
        let err = parse_expression("").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Empty);
        let err = parse_expression("t $ 2").unwrap_err();
        assert_eq!(err.offset, 2);
        let err = parse_expression("t t").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn scientific_notation() {
        let ast = parse_expression("1e-6*t + 2.5E3").unwrap();
        let v = ast.eval(&super::super::Bindings::t(1e6)).unwrap();
        assert!((v - 2501.0).abs() < 1e-9);
    }

    #[test]
    fn variable_exponent_needs_nonnegative_base() {
        assert!(parse_expression("t^t").is_ok());
        assert!(parse_expression("exp(x)^t").is_ok());
        assert!(parse_expression("(x^2)^t").is_ok());
        let err = parse_expression("x^t").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonConstantExponent);
        assert_eq!(err.offset, 1);
        assert!(parse_expression("x^(1/3)").is_ok());
    }
}
