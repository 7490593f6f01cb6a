use std::cell::{OnceCell, RefCell};

use super::{checked, integrate_limited, Integrand, QuadError};

/// Relative tolerance on the cumulative value at knot midpoints.
const KNOT_TOL: f64 = 1e-11;
const PIECE_TOL: f64 = 1e-13;
/// Pieces are short; a piece that needs more segments is resolving noise.
const PIECE_SEGMENTS: usize = 64;
/// Upper bound on knot spacing relative to the distance from the origin.
const MAX_REL_STEP: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy)]
struct Knot {
    t: f64,
    cum: f64,
    f: f64,
}

/// Knots on one side of the base point, ordered away from it.
#[derive(Debug)]
struct Branch {
    dir: f64,
    knots: Vec<Knot>,
    last_step: f64,
}

/// `t ↦ ∫_base^t f` on a lazily extended knot grid.
///
/// Each knot stores the cumulative value and the integrand value there, and
/// queries between knots use the cubic Hermite interpolant of those data.
/// Knot spacing is adapted so that the interpolant agrees with a direct
/// quadrature at each panel midpoint to about 1e-11 relative.
///
/// The cache lives in a `RefCell`, so a value is meant for one worker.
pub struct CumulativeIntegral<F> {
    f: F,
    base: f64,
    scale: f64,
    fwd: RefCell<Branch>,
    bwd: RefCell<Branch>,
}

impl<F: Integrand> CumulativeIntegral<F> {
    pub fn new(f: F, base: f64) -> Result<Self, QuadError> {
        let f0 = checked(&f, base)?;
        let scale = base.abs().max(1.0);
        let first = Knot { t: base, cum: 0.0, f: f0 };
        let step = 1e-3 * scale;
        Ok(Self {
            f,
            base,
            scale,
            fwd: RefCell::new(Branch { dir: 1.0, knots: vec![first], last_step: step }),
            bwd: RefCell::new(Branch { dir: -1.0, knots: vec![first], last_step: step }),
        })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn integrand(&self) -> &F {
        &self.f
    }

    /// `∫_base^t f`.
    pub fn value(&self, t: f64) -> Result<f64, QuadError> {
        if !t.is_finite() {
            return Err(QuadError::NonFinite { at: t });
        }
        let cell = if t >= self.base { &self.fwd } else { &self.bwd };
        let mut branch = cell.borrow_mut();
        self.extend_to(&mut branch, t)?;
        Ok(interpolate(&branch, t))
    }

    fn extend_to(&self, branch: &mut Branch, t: f64) -> Result<(), QuadError> {
        let dir = branch.dir;
        while dir * (t - branch.knots.last().expect("base knot").t) > 0.0 {
            let from = *branch.knots.last().expect("base knot");
            let cap = MAX_REL_STEP * from.t.abs().max(self.scale);
            let mut step = (2.0 * branch.last_step).min(cap);
            let min_step = 1e-9 * from.t.abs().max(self.scale);
            let knot = loop {
                let to = from.t + dir * step;
                let mid = from.t + dir * 0.5 * step;
                let first = integrate_limited(&self.f, from.t, mid, PIECE_TOL, PIECE_SEGMENTS).or_else(best_effort)?.value;
                let second = integrate_limited(&self.f, mid, to, PIECE_TOL, PIECE_SEGMENTS).or_else(best_effort)?.value;
                let f_to = checked(&self.f, to)?;
                let cum_to = from.cum + first + second;
                let candidate = Knot { t: to, cum: cum_to, f: f_to };
                let predicted = hermite(&from, &candidate, mid);
                let actual = from.cum + first;
                let ok = (predicted - actual).abs() <= KNOT_TOL * (1.0 + cum_to.abs());
                if ok || step <= min_step {
                    break candidate;
                }
                step *= 0.5;
            };
            branch.last_step = step;
            branch.knots.push(knot);
        }
        Ok(())
    }
}

fn best_effort(e: QuadError) -> Result<super::Integral, QuadError> {
    match e {
        QuadError::SubdivisionLimit { value, err } => Ok(super::Integral { value, err }),
        other => Err(other),
    }
}

fn hermite(a: &Knot, b: &Knot, t: f64) -> f64 {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * a.cum + h10 * h * a.f + h01 * b.cum + h11 * h * b.f
}

/// Index `j` of the panel `[knots[j], knots[j+1]]` holding `t`.
fn panel(branch: &Branch, t: f64) -> usize {
    let knots = &branch.knots;
    let dir = branch.dir;
    let j = knots.partition_point(|k| dir * (k.t - t) <= 0.0);
    j.saturating_sub(1).min(knots.len().saturating_sub(2))
}

fn interpolate(branch: &Branch, t: f64) -> f64 {
    let knots = &branch.knots;
    if knots.len() == 1 {
        return knots[0].cum;
    }
    let j = panel(branch, t);
    let (a, b) = (&knots[j], &knots[j + 1]);
    if t == a.t {
        return a.cum;
    }
    if t == b.t {
        return b.cum;
    }
    hermite(a, b, t)
}

impl<F: Integrand> Integrand for CumulativeIntegral<F> {
    fn eval(&self, t: f64) -> Result<f64, QuadError> {
        self.value(t)
    }
}

/// `t ↦ exp(-∫_base^t p)`.
pub struct ExpWeight<F> {
    cum: CumulativeIntegral<F>,
}

impl<F: Integrand> ExpWeight<F> {
    pub fn cumulative(&self) -> &CumulativeIntegral<F> {
        &self.cum
    }
}

impl<F: Integrand> Integrand for ExpWeight<F> {
    fn eval(&self, t: f64) -> Result<f64, QuadError> {
        Ok((-self.cum.value(t)?).exp())
    }
}

/// Exponential weight `exp(-∫_base^t p(s) ds)` backed by a cumulative cache.
pub fn exp_weight<F: Integrand>(p: F, base: f64) -> Result<ExpWeight<F>, QuadError> {
    Ok(ExpWeight { cum: CumulativeIntegral::new(p, base)? })
}

/// `t ↦ ∫_t^∞ f` for a convergent, eventually one-signed `f`.
///
/// Knots cover `[start, horizon]`; the remainder beyond the last knot is a
/// three-doubling geometric extrapolation. Values are assembled from suffix
/// sums so small tails do not suffer cancellation against the total.
pub struct TailIntegral<F> {
    cum: CumulativeIntegral<F>,
    horizon: f64,
    sealed: OnceCell<Sealed>,
}

struct Sealed {
    /// `suffix[j] = ∫_{knot_j}^∞ f` for knots up to the sealing point.
    suffix: Vec<f64>,
    last: Knot,
    remainder: f64,
}

impl<F: Integrand> TailIntegral<F> {
    pub fn new(f: F, start: f64, horizon: f64) -> Result<Self, QuadError> {
        Ok(Self { cum: CumulativeIntegral::new(f, start)?, horizon: horizon.max(start), sealed: OnceCell::new() })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn seal(&self) -> Result<&Sealed, QuadError> {
        if let Some(s) = self.sealed.get() {
            return Ok(s);
        }
        self.cum.value(self.horizon)?;
        let (knots, last) = {
            let branch = self.cum.fwd.borrow();
            (branch.knots.clone(), *branch.knots.last().expect("knot"))
        };
        let c1 = self.cum.value(2.0 * last.t)?;
        let c2 = self.cum.value(4.0 * last.t)?;
        let c3 = self.cum.value(8.0 * last.t)?;
        let d1 = c1 - last.cum;
        let d2 = c2 - c1;
        let d3 = c3 - c2;
        let remainder = if d3 == 0.0 {
            d1 + d2
        } else {
            let ratio = d3 / d2;
            if !(0.0..0.99).contains(&ratio) {
                return Err(QuadError::DivergentTail { from: last.t });
            }
            d1 + d2 + d3 + d3 * ratio / (1.0 - ratio)
        };
        let mut suffix = vec![0.0; knots.len()];
        let mut acc = remainder;
        for j in (0..knots.len()).rev() {
            suffix[j] = acc;
            if j > 0 {
                acc += knots[j].cum - knots[j - 1].cum;
            }
        }
        Ok(self.sealed.get_or_init(|| Sealed { suffix, last, remainder }))
    }

    /// `∫_t^∞ f`.
    pub fn value(&self, t: f64) -> Result<f64, QuadError> {
        let sealed = self.seal()?;
        let base = self.cum.base();
        if t < base {
            return Ok(sealed.suffix[0] - self.cum.value(t)?);
        }
        if t >= sealed.last.t {
            return Ok(sealed.remainder - (self.cum.value(t)? - sealed.last.cum));
        }
        let branch = self.cum.fwd.borrow();
        let j = panel(&branch, t);
        let next = &branch.knots[j + 1];
        let within = next.cum - interpolate(&branch, t);
        Ok(within + sealed.suffix[j + 1])
    }
}

impl<F: Integrand> Integrand for TailIntegral<F> {
    fn eval(&self, t: f64) -> Result<f64, QuadError> {
        self.value(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::plain;

    #[test]
    fn harmonic_weight_is_reciprocal() {
        let w = exp_weight(plain(|s| 1.0 / s), 1.0).unwrap();
        for t in [2.0, 10.0, 100.0] {
            let got = w.eval(t).unwrap();
            assert!((got * t - 1.0).abs() < 1e-6, "t={t} got {got}");
        }
    }

    #[test]
    fn zero_rate_gives_unit_weight() {
        let w = exp_weight(plain(|_| 0.0), 1.0).unwrap();
        for t in [1.0, 3.5, 1e4] {
            assert_eq!(w.eval(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn unit_rate_from_zero_is_exponential() {
        let w = exp_weight(plain(|_| 1.0), 0.0).unwrap();
        for t in [0.5, 1.0, 5.0, 20.0] {
            let got = w.eval(t).unwrap();
            assert!((got / (-t).exp() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn cumulative_interpolation_accuracy() {
        let c = CumulativeIntegral::new(plain(|s: f64| s.cos()), 0.0).unwrap();
        for i in 0..200 {
            let t = 0.37 * i as f64;
            let got = c.value(t).unwrap();
            assert!((got - t.sin()).abs() < 1e-9, "t={t}");
        }
        // queries below the base integrate backwards
        let got = c.value(-2.0).unwrap();
        assert!((got - (-2f64).sin()).abs() < 1e-9);
    }

    #[test]
    fn tail_of_inverse_square() {
        let tail = TailIntegral::new(plain(|s| 1.0 / (s * s)), 1.0, 1e5).unwrap();
        for t in [1.0, 1.5, 2.0, 10.0, 77.7, 100.0, 5e4] {
            let got = tail.value(t).unwrap();
            assert!((got * t - 1.0).abs() < 1e-6, "t={t} got {got}");
        }
        // beyond the horizon and below the start
        assert!((tail.value(2e5).unwrap() * 2e5 - 1.0).abs() < 1e-4);
        assert!((tail.value(0.5).unwrap() * 0.5 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn divergent_tail_is_rejected() {
        let tail = TailIntegral::new(plain(|s| 1.0 / s), 1.0, 100.0).unwrap();
        assert!(matches!(tail.value(2.0), Err(QuadError::DivergentTail { .. })));
    }
}
