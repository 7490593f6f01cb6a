use super::CriterionError;
use crate::expr::Expr;
use crate::problem::ProblemSpec;
use crate::sim::Trajectory;

/// Five-point central difference at node `i`.
fn d5(x: &[f64; 5], h: f64) -> f64 {
    (x[0] - 8.0 * x[1] + 8.0 * x[3] - x[4]) / (12.0 * h)
}

fn residual_at(v: &Trajectory, b: &Expr, spec: &ProblemSpec, i: usize) -> Result<f64, CriterionError> {
    let mut p = [0.0; 5];
    let mut q = [0.0; 5];
    for (j, idx) in (i - 2..=i + 2).enumerate() {
        let t = v.t[idx];
        if !(v.v[idx] > 0.0) {
            return Err(CriterionError::NonPositive { t, v: v.v[idx] });
        }
        p[j] = spec.r.at(t)? * v.vprime[idx];
        q[j] = b.at(t)? / v.v[idx];
    }
    let w: [f64; 5] = std::array::from_fn(|j| p[j] * q[j]);
    let h = v.dt;
    Ok(d5(&w, h) - (p[2] * d5(&q, h) + d5(&p, h) * q[2]))
}

/// `w'(t) − [r v' (b/v)' + (r v')' b/v](t)` for `w = b r v'/v`.
///
/// Derivatives are five-point differences on the trajectory grid; between
/// nodes the residual is interpolated linearly. The identity holds exactly,
/// so the result measures discretisation error only.
pub fn riccati_residual(v: &Trajectory, b: &Expr, spec: &ProblemSpec, t: f64) -> Result<f64, CriterionError> {
    let n = v.len();
    let out = || CriterionError::OutOfRange { t, start: v.start(), end: v.end() };
    if n < 6 {
        return Err(out());
    }
    let pos = (t - v.start()) / v.dt;
    let i = pos.floor();
    if !(i >= 2.0 && pos <= (n - 3) as f64) {
        return Err(out());
    }
    let i = i as usize;
    let frac = pos - i as f64;
    if frac <= 1e-9 || i + 1 > n - 3 {
        return residual_at(v, b, spec, i);
    }
    let lo = residual_at(v, b, spec, i)?;
    let hi = residual_at(v, b, spec, i + 1)?;
    Ok(lo + frac * (hi - lo))
}
