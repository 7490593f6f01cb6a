//! Spatial averaging of a field `u(x,t)` to the scalar `v(t)`:
//! `v = (1/α)∫u^α` for the Robin condition and `v = (1/α)∫φu^α` with the
//! first Dirichlet eigenfunction `φ` for the Dirichlet condition.

use thiserror::Error;

use crate::expr::spow;
use crate::problem::{Alpha, BoundaryCondition, Domain, ProblemError};
use crate::sim::{SimulationTrace, Trajectory};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error(transparent)]
    Domain(#[from] ProblemError),
    #[error("need at least {need} {what}, got {got}")]
    TooFewNodes { what: &'static str, need: usize, got: usize },
    #[error("trace row {row} has {got} values for {expected} grid nodes")]
    Shape { row: usize, got: usize, expected: usize },
}

/// First Dirichlet eigenpair of an interval or box, normalized to max φ = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenWeight {
    pub domain: Domain,
    pub lambda1: f64,
}

impl EigenWeight {
    /// `φ` at a point with one coordinate per axis.
    pub fn phi(&self, point: &[f64]) -> f64 {
        match &self.domain {
            Domain::Interval { lo, hi } => axis_sine(point[0], *lo, *hi),
            Domain::Box { lo, hi } => {
                lo.iter().zip(hi).zip(point).map(|((l, h), x)| axis_sine(*x, *l, *h)).product()
            }
        }
    }

    /// `φ` along the first axis, other axes at their midpoints.
    pub fn phi_x(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain.x_range();
        axis_sine(x, lo, hi)
    }
}

fn axis_sine(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo || x >= hi {
        return 0.0;
    }
    (std::f64::consts::PI * (x - lo) / (hi - lo)).sin()
}

pub fn dirichlet_weight(domain: &Domain) -> Result<EigenWeight, ReductionError> {
    domain.validate()?;
    let pi = std::f64::consts::PI;
    let lambda1 = match domain {
        Domain::Interval { lo, hi } => (pi / (hi - lo)).powi(2),
        Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| (pi / (h - l)).powi(2)).sum(),
    };
    Ok(EigenWeight { domain: domain.clone(), lambda1 })
}

/// Composite Simpson on uniform nodes; an even node count closes with the
/// 3/8 rule on the last three intervals.
pub fn simpson_uniform(y: &[f64], dx: f64) -> f64 {
    let n = y.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dx * (y[0] + y[1]),
        _ => {
            let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
            let mut s = 0.0;
            let mut i = 0;
            while i + 2 <= simpson_end {
                s += dx / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]);
                i += 2;
            }
            if n % 2 == 0 {
                let j = n - 4;
                s += 3.0 * dx / 8.0 * (y[j] + 3.0 * y[j + 1] + 3.0 * y[j + 2] + y[j + 3]);
            }
            s
        }
    }
}

/// Time derivative on a uniform grid: centered inside, second-order
/// one-sided at the ends.
pub(crate) fn differentiate(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    match n {
        0 => vec![],
        1 => vec![0.0],
        2 => vec![(v[1] - v[0]) / dt; 2],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
                } else if i == n - 1 {
                    (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt)
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

/// Reduces a 1-D trace to `v(t)` and `v'(t)` per stored time row.
pub fn reduce_trace(trace: &SimulationTrace, alpha: Alpha, bc: &BoundaryCondition) -> Result<Trajectory, ReductionError> {
    let nx = trace.x.len();
    if nx < 3 {
        return Err(ReductionError::TooFewNodes { what: "spatial nodes", need: 3, got: nx });
    }
    if trace.t.len() < 2 {
        return Err(ReductionError::TooFewNodes { what: "time rows", need: 2, got: trace.t.len() });
    }
    let (lo, hi) = (trace.x[0], trace.x[nx - 1]);
    let dx = (hi - lo) / (nx - 1) as f64;
    let weights: Vec<f64> = match bc {
        BoundaryCondition::Robin { .. } => vec![1.0; nx],
        BoundaryCondition::Dirichlet => {
            let w = dirichlet_weight(&Domain::Interval { lo, hi })?;
            trace.x.iter().map(|&x| w.phi_x(x)).collect()
        }
    };
    let a = alpha.value();
    let mut v = Vec::with_capacity(trace.t.len());
    let mut buf = vec![0.0; nx];
    for (row, u) in trace.u.iter().enumerate() {
        if u.len() != nx {
            return Err(ReductionError::Shape { row, got: u.len(), expected: nx });
        }
        for ((b, ui), w) in buf.iter_mut().zip(u).zip(&weights) {
            *b = w * spow(*ui, a);
        }
        v.push(simpson_uniform(&buf, dx) / a);
    }
    let dt = (trace.t[trace.t.len() - 1] - trace.t[0]) / (trace.t.len() - 1) as f64;
    let vp = differentiate(&v, dt);
    Ok(Trajectory::from_samples(trace.t[0], dt, v, vp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TraceScheme;
    use std::f64::consts::PI;

    fn trace(lo: f64, hi: f64, nx: usize, t: &[f64], u: impl Fn(f64, f64) -> f64) -> SimulationTrace {
        let x: Vec<f64> = (0..nx).map(|i| lo + (hi - lo) * i as f64 / (nx - 1) as f64).collect();
        let rows = t.iter().map(|&t| x.iter().map(|&x| u(x, t)).collect()).collect();
        SimulationTrace { x, t: t.to_vec(), u: rows, scheme: TraceScheme::default() }
    }

    #[test]
    fn interval_eigenpair() {
        let w = dirichlet_weight(&Domain::Interval { lo: 0.0, hi: PI }).unwrap();
        assert!((w.lambda1 - 1.0).abs() < 1e-15);
        let h = 1e-4;
        for x in [0.3, 1.0, 2.5] {
            let lap = (w.phi_x(x + h) - 2.0 * w.phi_x(x) + w.phi_x(x - h)) / (h * h);
            assert!((lap + w.lambda1 * w.phi_x(x)).abs() < 1e-6);
        }
        assert_eq!(w.phi_x(0.0), 0.0);
        assert!((w.phi_x(PI / 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn box_eigenvalue_sums_axes() {
        let w = dirichlet_weight(&Domain::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }).unwrap();
        assert!((w.lambda1 - 2.0 * PI * PI).abs() < 1e-12);
        assert!((w.phi(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        assert!(dirichlet_weight(&Domain::Interval { lo: 1.0, hi: 1.0 }).is_err());
    }

    #[test]
    fn simpson_rules_are_exact_on_cubics() {
        let f = |x: f64| 2.0 - x + 3.0 * x * x * x;
        let exact = 2.0 * 2.0 - 2.0 + 0.75 * 16.0;
        for n in [3, 4, 5, 8, 11] {
            let dx = 2.0 / (n - 1) as f64;
            let y: Vec<f64> = (0..n).map(|i| f(i as f64 * dx)).collect();
            assert!((simpson_uniform(&y, dx) - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn manufactured_dirichlet_case() {
        let t: Vec<f64> = (0..=20).map(|i| 1.0 + 0.05 * i as f64).collect();
        let g = |t: f64| 1.0 + 0.5 * t.sin();
        let alpha = Alpha::integer(3).unwrap();
        let err = |nx: usize| {
            let tr = trace(0.0, PI, nx, &t, |x, t| g(t) * x.sin());
            let v = reduce_trace(&tr, alpha, &BoundaryCondition::Dirichlet).unwrap();
            v.v.iter().zip(&t).map(|(v, t)| (v - PI / 8.0 * g(*t).powi(3)).abs()).fold(0.0, f64::max)
        };
        assert!(err(21) < 1e-10);
    }

    #[test]
    fn simpson_order_on_robin_case() {
        // u = g(t)e^x on [0,1], α = 5: v = g^5 (e^5 - 1)/25
        let t = [0.0, 0.5, 1.0];
        let g = |t: f64| 1.0 + t;
        let alpha = Alpha::integer(5).unwrap();
        let robin = BoundaryCondition::Robin { psi: crate::expr::Expr::constant(1.0) };
        let err = |nx: usize| {
            let tr = trace(0.0, 1.0, nx, &t, |x, t| g(t) * x.exp());
            let v = reduce_trace(&tr, alpha, &robin).unwrap();
            let exact = |t: f64| g(t).powi(5) * (5f64.exp() - 1.0) / 25.0;
            v.v.iter().zip(&t).map(|(v, t)| (v - exact(*t)).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(21), err(41));
        assert!(e1 / e2 > 14.0 && e1 / e2 < 18.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn trivial_fields() {
        let t = [0.0, 0.5, 1.0];
        let a5 = Alpha::integer(5).unwrap();
        let robin = BoundaryCondition::Robin { psi: crate::expr::Expr::constant(1.0) };
        let v = reduce_trace(&trace(0.0, 1.0, 11, &t, |_, _| 1.0), a5, &robin).unwrap();
        assert!(v.v.iter().all(|v| (v - 0.2).abs() < 1e-14));
        assert!(v.vprime.iter().all(|d| d.abs() < 1e-12));
        let z = reduce_trace(&trace(0.0, 1.0, 11, &t, |_, _| 0.0), a5, &robin).unwrap();
        assert!(z.v.iter().all(|v| *v == 0.0));
        assert!(matches!(
            reduce_trace(&trace(0.0, 1.0, 2, &t, |_, _| 1.0), a5, &robin),
            Err(ReductionError::TooFewNodes { .. })
        ));
    }
}
