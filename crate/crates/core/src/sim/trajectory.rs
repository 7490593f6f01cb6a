use serde::Serialize;

/// Relaxation bookkeeping attached to a simulated series.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct RelaxationInfo {
    pub method: String,
    pub iterations: usize,
    /// Sup-norm change produced by one more sweep from the final iterate.
    pub final_delta: f64,
    pub converged: bool,
    /// Per-iteration residual norms, in iteration order.
    pub history: Vec<f64>,
    /// How values beyond the window end are supplied.
    pub closure: String,
}

/// Reduced trajectory `v(t)`, `v'(t)` on a uniform grid.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub vprime: Vec<f64>,
    pub dt: f64,
    pub relaxation: RelaxationInfo,
}

impl Trajectory {
    /// Builds a trajectory on `t_i = t0 + i·dt` from sampled values.
    ///
    /// Panics if `v` and `vprime` differ in length or `dt` is not positive.
    pub fn from_samples(t0: f64, dt: f64, v: Vec<f64>, vprime: Vec<f64>) -> Self {
        assert!(dt > 0.0, "dt must be positive");
        assert_eq!(v.len(), vprime.len(), "v and v' lengths differ");
        let t = (0..v.len()).map(|i| t0 + i as f64 * dt).collect();
        Self { t, v, vprime, dt, relaxation: RelaxationInfo::default() }
    }

    /// Samples a closed-form pair `(v, v')` on `[t0, t1]`.
    pub fn from_fn(t0: f64, t1: f64, dt: f64, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let n = ((t1 - t0) / dt).round() as usize + 1;
        let (v, vp): (Vec<f64>, Vec<f64>) = (0..n).map(|i| f(t0 + i as f64 * dt)).unzip();
        Self::from_samples(t0, dt, v, vp)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        *self.t.last().expect("non-empty trajectory")
    }
}
