use std::cell::OnceCell;
use std::rc::Rc;

use super::{Anchors, CriterionError, TuningParams};
use crate::expr::Var;
use crate::problem::ProblemSpec;
use crate::quad::{integrate, CumulativeIntegral, QuadError, TailIntegral};

type Fun = Box<dyn Fn(f64) -> Result<f64, QuadError>>;

const Q1_TOL: f64 = 1e-9;
const GOLDEN_ITERS: usize = 80;
/// Relative size under which `min p̂ − r'` is indistinguishable from zero.
const CANCEL_TOL: f64 = 1e-8;

struct Core {
    spec: ProblemSpec,
    params: TuningParams,
    anchors: Anchors,
    alpha: f64,
    x_range: (f64, f64),
    p_hat_in_x: bool,
}

impl Core {
    fn min_p_hat(&self, t: f64) -> Result<f64, QuadError> {
        if self.params.force_zero_damping {
            return Ok(0.0);
        }
        let p_hat = &self.spec.p_hat;
        let (lo, hi) = self.x_range;
        if !self.p_hat_in_x {
            return Ok(p_hat.at_xt(lo, t)?);
        }
        let n = self.params.x_grid;
        let dx = (hi - lo) / (n - 1) as f64;
        let mut best = (0, f64::INFINITY);
        for i in 0..n {
            let x = if i == n - 1 { hi } else { lo + i as f64 * dx };
            let v = p_hat.at_xt(x, t)?;
            if v < best.1 {
                best = (i, v);
            }
        }
        // golden-section refinement on the neighbouring cells
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |x: f64| p_hat.at_xt(x, t);
        let mut a = (lo + (best.0 as f64 - 1.0) * dx).max(lo);
        let mut b = (lo + (best.0 as f64 + 1.0) * dx).min(hi);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        for _ in 0..GOLDEN_ITERS {
            if b - a <= 1e-13 * (1.0 + a.abs()) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d)?;
            }
        }
        Ok(best.1.min(fc).min(fd))
    }

    fn r(&self, t: f64) -> Result<f64, QuadError> {
        Ok(self.spec.r.at(t)?)
    }

    fn q_star(&self, t: f64) -> Result<f64, QuadError> {
        let m = self.spec.m.at(t)?;
        Ok(self.alpha * self.spec.q.at(m)?)
    }

    fn q(&self, t: f64) -> Result<f64, QuadError> {
        Ok(self.q_star(t)? / self.r(t)?)
    }

    fn p1(&self, t: f64) -> Result<f64, QuadError> {
        Ok(self.min_p_hat(t)? / self.r(t)?)
    }

    fn h(&self, t: f64) -> Result<f64, QuadError> {
        let p = self.min_p_hat(t)?;
        let dr = self.spec.r.dt(t)?;
        let h = p - dr;
        // below the resolution of the central difference for r'
        if h.abs() <= CANCEL_TOL * (p.abs() + dr.abs()) {
            Ok(0.0)
        } else {
            Ok(h)
        }
    }

    fn h_over_r(&self, t: f64) -> Result<f64, QuadError> {
        Ok(self.h(t)? / self.r(t)?)
    }
}

fn lazy<T>(cell: &OnceCell<T>, make: impl FnOnce() -> Result<T, QuadError>) -> Result<&T, QuadError> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = make()?;
    Ok(cell.get_or_init(|| v))
}

/// Coefficient functions derived from a problem and tuning parameters.
///
/// ```text
/// Q(t)   = α q(m(t)) / r(t)          p1(t) = min_x p̂(x,t) / r(t)
/// Q*(t)  = α q(m(t))                 h(t)  = min_x p̂(x,t) − r'(t)
/// θ(t)   = ∫_t^∞ r(τ)⁻¹ exp(−∫_{T*}^τ h/r) dτ
/// Q0(t)  = min{Q(t), Q(τ(t)) τ'(t)²} Q1(t) = ∫_t^{t+β} Q0
/// ```
///
/// Cumulative integrals are cached lazily, so a value belongs to one thread.
pub struct DerivedCoefficients {
    core: Rc<Core>,
    p1_cum: OnceCell<CumulativeIntegral<Fun>>,
    h_cum: OnceCell<Rc<CumulativeIntegral<Fun>>>,
    theta: OnceCell<Rc<TailIntegral<Fun>>>,
    inner: OnceCell<CumulativeIntegral<Fun>>,
}

pub fn derive_coefficients(spec: &ProblemSpec, params: &TuningParams) -> Result<DerivedCoefficients, CriterionError> {
    spec.validate()?;
    params.validate()?;
    let anchors = params.anchors(spec)?;
    let core = Core {
        spec: spec.clone(),
        params: params.clone(),
        anchors,
        alpha: spec.alpha.value(),
        x_range: spec.domain.x_range(),
        p_hat_in_x: spec.p_hat.depends_on(Var::X),
    };
    Ok(DerivedCoefficients {
        core: Rc::new(core),
        p1_cum: OnceCell::new(),
        h_cum: OnceCell::new(),
        theta: OnceCell::new(),
        inner: OnceCell::new(),
    })
}

impl DerivedCoefficients {
    pub fn spec(&self) -> &ProblemSpec {
        &self.core.spec
    }

    pub fn params(&self) -> &TuningParams {
        &self.core.params
    }

    pub fn anchors(&self) -> Anchors {
        self.core.anchors
    }

    /// Largest geometric probe point from t0.
    pub fn t_max(&self) -> f64 {
        self.core.params.probes.t_max(self.core.anchors.t0)
    }

    pub fn min_p_hat(&self, t: f64) -> Result<f64, QuadError> {
        self.core.min_p_hat(t)
    }

    #[allow(non_snake_case)]
    pub fn Q(&self, t: f64) -> Result<f64, QuadError> {
        self.core.q(t)
    }

    pub fn q_star(&self, t: f64) -> Result<f64, QuadError> {
        self.core.q_star(t)
    }

    pub fn p1(&self, t: f64) -> Result<f64, QuadError> {
        self.core.p1(t)
    }

    pub fn h(&self, t: f64) -> Result<f64, QuadError> {
        self.core.h(t)
    }

    fn p1_cum(&self) -> Result<&CumulativeIntegral<Fun>, QuadError> {
        lazy(&self.p1_cum, || {
            let core = Rc::clone(&self.core);
            CumulativeIntegral::new(Box::new(move |t| core.p1(t)) as Fun, self.core.anchors.t0)
        })
    }

    fn h_cum(&self) -> Result<&Rc<CumulativeIntegral<Fun>>, QuadError> {
        lazy(&self.h_cum, || {
            let core = Rc::clone(&self.core);
            let f = Box::new(move |t| core.h_over_r(t)) as Fun;
            Ok(Rc::new(CumulativeIntegral::new(f, self.core.anchors.t_star)?))
        })
    }

    /// `exp(−∫_{t0}^t p1)`.
    pub fn damping_weight(&self, t: f64) -> Result<f64, QuadError> {
        Ok((-self.p1_cum()?.value(t)?).exp())
    }

    /// `∫_{T*}^t h/r`.
    pub fn h_integral(&self, t: f64) -> Result<f64, QuadError> {
        self.h_cum()?.value(t)
    }

    /// `r(t)⁻¹ exp(−∫_{T*}^t h/r)`, the integrand that selects the case of
    /// Theorem 2.4 and defines θ.
    pub fn reciprocal_weight(&self, t: f64) -> Result<f64, QuadError> {
        Ok((-self.h_integral(t)?).exp() / self.core.r(t)?)
    }

    fn theta_tail(&self) -> Result<&Rc<TailIntegral<Fun>>, QuadError> {
        lazy(&self.theta, || {
            let core = Rc::clone(&self.core);
            let h_cum = Rc::clone(self.h_cum()?);
            let f = Box::new(move |t: f64| Ok((-h_cum.value(t)?).exp() / core.r(t)?)) as Fun;
            let reach = self.core.params.probes.reach(self.core.anchors.t0);
            let horizon = self.core.spec.m.at(reach).unwrap_or(reach).max(reach);
            Ok(Rc::new(TailIntegral::new(f, self.core.anchors.t_star, horizon)?))
        })
    }

    pub fn theta(&self, t: f64) -> Result<f64, QuadError> {
        self.theta_tail()?.value(t)
    }

    /// `Q(t)` and `Q(τ(t)) τ'(t)²`, minimised.
    pub fn q0(&self, t: f64) -> Result<f64, QuadError> {
        let tau = &self.core.params.tau;
        let tt = tau.at(t)?;
        let d = tau.dt(t)?;
        Ok(self.core.q(t)?.min(self.core.q(tt)? * d * d))
    }

    pub fn q1(&self, t: f64) -> Result<f64, QuadError> {
        let beta = self.core.params.beta;
        // τ' is a central difference, so Q0 carries rounding noise near 1e-10
        match integrate(&|s| self.q0(s), t, t + beta, Q1_TOL) {
            Ok(i) => Ok(i.value),
            Err(QuadError::SubdivisionLimit { value, .. }) => Ok(value),
            Err(e) => Err(e),
        }
    }

    /// Integrand of the damped comparison condition of Theorem 2.3:
    /// `b Q − (b'/b − p1)² b / 4`.
    pub fn comparison_integrand(&self, s: f64) -> Result<f64, QuadError> {
        let b = self.core.params.b.at(s)?;
        let db = self.core.params.b.dt(s)?;
        let k = db / b - self.core.p1(s)?;
        Ok(b * self.core.q(s)? - k * k * b / 4.0)
    }

    /// Integrand of the Riccati condition of Theorem 2.4:
    /// `b Q* − r b (b'/b − h/r)² / 4`.
    pub fn riccati_integrand(&self, s: f64) -> Result<f64, QuadError> {
        let b = self.core.params.b.at(s)?;
        let db = self.core.params.b.dt(s)?;
        let r = self.core.r(s)?;
        let k = db / b - self.core.h(s)? / r;
        Ok(b * self.core.q_star(s)? - r * b * k * k / 4.0)
    }

    /// `Q*(s) θ(m(s)) exp(∫_{T*}^s h/r)`.
    pub fn nested_inner(&self, s: f64) -> Result<f64, QuadError> {
        let m = self.core.spec.m.at(s)?;
        Ok(self.core.q_star(s)? * self.theta(m)? * self.h_integral(s)?.exp())
    }

    fn inner_cum(&self) -> Result<&CumulativeIntegral<Fun>, QuadError> {
        lazy(&self.inner, || {
            let core = Rc::clone(&self.core);
            let theta = Rc::clone(self.theta_tail()?);
            let h_cum = Rc::clone(self.h_cum()?);
            let f = Box::new(move |s: f64| {
                let m = core.spec.m.at(s)?;
                Ok(core.q_star(s)? * theta.value(m)? * h_cum.value(s)?.exp())
            }) as Fun;
            CumulativeIntegral::new(f, self.core.anchors.t2)
        })
    }

    /// `exp(−∫_{T*}^τ h/r) / r(τ) · ∫_{T2}^τ nested_inner`.
    pub fn nested_outer(&self, tau: f64) -> Result<f64, QuadError> {
        Ok(self.reciprocal_weight(tau)? * self.inner_cum()?.value(tau)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::problem::builtin_example;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn example_3_1_coefficients() {
        let d = derive_coefficients(&builtin_example("3.1").unwrap(), &TuningParams::default()).unwrap();
        for t in [1.0, 2.5, 40.0] {
            assert!(rel(d.Q(t).unwrap(), 5.0 / t) < 1e-14);
            assert!(rel(d.p1(t).unwrap(), 1.0 / t) < 1e-14);
            assert_eq!(d.q_star(t).unwrap(), 5.0);
            assert!(d.h(t).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn example_3_2_coefficients() {
        let d = derive_coefficients(&builtin_example("3.2").unwrap(), &TuningParams::default()).unwrap();
        for t in [1.0, 3.0, 10.0, 100.0] {
            assert!(d.h(t).unwrap().abs() < 1e-6 * t);
            assert!(rel(d.q_star(t).unwrap(), 3.0 * (t + 1.0).powi(4)) < 1e-14);
            assert!(rel(d.theta(t).unwrap(), 1.0 / t) < 1e-6, "theta({t})");
        }
    }

    #[test]
    fn undamped_unit_leading_coefficient() {
        let mut spec = builtin_example("3.1").unwrap();
        spec.p_hat = Expr::parse("0").unwrap();
        spec.r = Expr::parse("1").unwrap();
        let d = derive_coefficients(&spec, &TuningParams::default()).unwrap();
        for t in [1.0, 7.0] {
            assert_eq!(d.p1(t).unwrap(), 0.0);
            assert_eq!(d.h(t).unwrap(), 0.0);
            assert_eq!(d.damping_weight(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn minimum_over_x_is_refined() {
        let mut spec = builtin_example("3.1").unwrap();
        // minimum 0.5 at x = 1/3, between coarse nodes
        spec.p_hat = Expr::parse("0.5 + (x - 1/3)^2").unwrap();
        let params = TuningParams { x_grid: 5, ..TuningParams::default() };
        let d = derive_coefficients(&spec, &params).unwrap();
        assert!((d.min_p_hat(2.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn q1_of_constant_q0() {
        let mut spec = builtin_example("3.1").unwrap();
        spec.r = Expr::parse("1").unwrap();
        spec.q = Expr::parse("0.4").unwrap();
        let params = TuningParams { beta: 2.0, ..TuningParams::default() };
        let d = derive_coefficients(&spec, &params).unwrap();
        // Q = 5·0.4 = 2, Q1 = 2β
        assert!((d.q1(3.0).unwrap() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn damping_weight_of_example_3_1() {
        let d = derive_coefficients(&builtin_example("3.1").unwrap(), &TuningParams::default()).unwrap();
        for t in [2.0, 10.0, 100.0] {
            assert!(rel(d.damping_weight(t).unwrap(), 1.0 / t) < 1e-9);
        }
    }
}
