//! Numeric integration engine.
//!
//! Finite integrals use a globally adaptive 7/15-point Gauss–Kronrod rule.
//! Improper integrals are never evaluated to a single number blindly; they
//! are probed on a schedule of growing upper limits and the resulting
//! partial-integral sequence is classified (see [`classify_improper`]).

mod cumulative;
mod improper;

use thiserror::Error;

use crate::expr::{EvalError, Expr};

pub use cumulative::{exp_weight, CumulativeIntegral, ExpWeight, TailIntegral};
pub use improper::{
    classify_improper, integrate_tail, DivergenceVerdict, Growth, Probe, ProbeSchedule, ScheduleKind,
    VerdictKind,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
    #[error("subdivision limit reached (best estimate {value} ± {err})")]
    SubdivisionLimit { value: f64, err: f64 },
    #[error("target {y} is outside [{lo}, {hi}] on the bracket")]
    Bracket { y: f64, lo: f64, hi: f64 },
    #[error("tail integral does not converge beyond {from}")]
    DivergentTail { from: f64 },
    #[error("{0}")]
    Other(String),
}

/// A real function of one variable that may fail to evaluate.
pub trait Integrand {
    fn eval(&self, t: f64) -> Result<f64, QuadError>;
}

impl<F> Integrand for F
where
    F: Fn(f64) -> Result<f64, QuadError>,
{
    fn eval(&self, t: f64) -> Result<f64, QuadError> {
        self(t)
    }
}

/// Adapts an infallible closure.
pub struct Plain<F>(pub F);

impl<F: Fn(f64) -> f64> Integrand for Plain<F> {
    fn eval(&self, t: f64) -> Result<f64, QuadError> {
        Ok((self.0)(t))
    }
}

pub fn plain<F: Fn(f64) -> f64>(f: F) -> Plain<F> {
    Plain(f)
}

/// Integrand backed by an expression of `t`.
pub struct ExprIntegrand<'a>(pub &'a Expr);

impl Integrand for ExprIntegrand<'_> {
    fn eval(&self, t: f64) -> Result<f64, QuadError> {
        Ok(self.0.at(t)?)
    }
}

pub(crate) fn checked<I: Integrand + ?Sized>(f: &I, t: f64) -> Result<f64, QuadError> {
    let v = f.eval(t)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadError::NonFinite { at: t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub err: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

/// One 15-point Kronrod panel with the QUADPACK error rescaling.
pub(crate) fn gk15<I: Integrand + ?Sized>(f: &I, a: f64, b: f64) -> Result<Integral, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = checked(f, center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = checked(f, center - dx)?;
        let f2 = checked(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Integral { value, err })
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// Stops when the estimated error is at most `tol·(1 + |value|)`. Reaching
/// the segment limit returns [`QuadError::SubdivisionLimit`] carrying the
/// best estimate.
pub fn integrate<I: Integrand + ?Sized>(f: &I, a: f64, b: f64, tol: f64) -> Result<Integral, QuadError> {
    integrate_limited(f, a, b, tol, MAX_SEGMENTS)
}

pub(crate) fn integrate_limited<I: Integrand + ?Sized>(
    f: &I,
    a: f64,
    b: f64,
    tol: f64,
    max_segments: usize,
) -> Result<Integral, QuadError> {
    if a == b {
        return Ok(Integral { value: 0.0, err: 0.0 });
    }
    if a > b {
        let r = integrate_limited(f, b, a, tol, max_segments)?;
        return Ok(Integral { value: -r.value, err: r.err });
    }
    let first = gk15(f, a, b)?;
    let mut segments = vec![(a, b, first)];
    let mut total = first.value;
    let mut total_err = first.err;
    loop {
        if total_err <= tol * (1.0 + total.abs()) {
            return Ok(Integral { value: total, err: total_err });
        }
        if segments.len() >= max_segments {
            return Err(QuadError::SubdivisionLimit { value: total, err: total_err });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.err.total_cmp(&y.1 .2.err))
            .expect("non-empty");
        let (lo, hi, whole) = segments.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine precision
            return Err(QuadError::SubdivisionLimit { value: total, err: total_err });
        }
        let left = gk15(f, lo, mid)?;
        let right = gk15(f, mid, hi)?;
        total += left.value + right.value - whole.value;
        total_err += left.err + right.err - whole.err;
        segments.push((lo, mid, left));
        segments.push((mid, hi, right));
        if total_err < 0.0 {
            total_err = segments.iter().map(|s| s.2.err).sum();
        }
    }
}

/// Solves `m(x) = y` for increasing `m` by bisection on `bracket`.
pub fn invert_monotone(m: &Expr, y: f64, bracket: (f64, f64)) -> Result<f64, QuadError> {
    let (mut lo, mut hi) = bracket;
    let m_lo = m.at(lo)?;
    let m_hi = m.at(hi)?;
    if !(m_lo <= y && y <= m_hi) {
        return Err(QuadError::Bracket { y, lo: m_lo, hi: m_hi });
    }
    let tol = 1e-10 * (1.0 + y.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = m.at(mid)?;
        if (v - y).abs() <= tol {
            return Ok(mid);
        }
        if v < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs() {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}
