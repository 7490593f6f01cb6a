//! Method-of-lines simulation of the 1-D equation with RK4 in time.

use serde::{Deserialize, Serialize};

use super::accel::{anderson, sup_diff};
use super::history::{History, Stencil};
use super::reduced::{is_local, LINEAR_CLOSURE};
use super::{RelaxationInfo, SimError};
use crate::expr::{spow, Bindings, Expr, Var};
use crate::problem::{BoundaryCondition, Domain, ProblemSpec};
use crate::reduction::dirichlet_weight;

/// Variable integrated in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeForm {
    /// `w` when `p ≡ (α-1)r` on the sampled grid, `u` otherwise.
    #[default]
    Auto,
    U,
    /// `w = u^α`; requires `p ≡ (α-1)r`.
    W,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeOptions {
    pub form: PdeForm,
    /// Floor for `|u|^{α-1}` in the `u`-form divisor.
    pub epsilon: f64,
    pub anderson_depth: usize,
    /// Upper bound on stored time rows; the step count is rounded up to a
    /// multiple of the row stride.
    pub max_rows: usize,
    pub overflow_guard: f64,
    pub cfl_safety: f64,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self { form: PdeForm::Auto, epsilon: 1e-8, anderson_depth: 6, max_rows: 2000, overflow_guard: 1e8, cfl_safety: 1.0 }
    }
}

/// Stability estimate `dt ≤ safety·dx·√(r_min·u_scale^{α-1}/a_max)`,
/// recorded but not enforced.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CflRecord {
    pub safety: f64,
    pub r_min: f64,
    pub a_max: f64,
    pub u_scale: f64,
    pub dt_limit: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceScheme {
    pub dt: f64,
    pub dx: f64,
    pub nx: usize,
    pub record_stride: usize,
    pub form: String,
    pub epsilon: Option<f64>,
    pub boundary: String,
    pub relaxation: RelaxationInfo,
    pub cfl: CflRecord,
}

/// Field `u(x,t)` on a uniform grid, one row per stored time.
#[derive(Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub scheme: TraceScheme,
}

impl std::fmt::Debug for SimulationTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulationTrace")
            .field("nx", &self.x.len())
            .field("rows", &self.t.len())
            .field("t_end", &self.t.last())
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl SimulationTrace {
    pub fn max_abs(&self) -> f64 {
        self.u.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Default positive start: Robin `u0 = 0.5(1 + 0.5φ̂)`, Dirichlet
/// `u0 = 0.5φ̂`, with `φ̂` the normalized first Dirichlet eigenfunction and
/// `u0' = 0`.
pub fn default_initial_data(spec: &ProblemSpec) -> Result<impl Fn(f64) -> (f64, f64), SimError> {
    let w = dirichlet_weight(&spec.domain).map_err(|e| SimError::InvalidInput(e.to_string()))?;
    let robin = matches!(spec.bc, BoundaryCondition::Robin { .. });
    Ok(move |x: f64| {
        let phi = w.phi_x(x);
        (if robin { 0.5 * (1.0 + 0.5 * phi) } else { 0.5 * phi }, 0.0)
    })
}

#[derive(Debug, Clone, Copy)]
enum Read {
    Local,
    /// Before the window start: the initial profile.
    Pre,
    /// Already integrated in this sweep.
    Past(f64),
    /// From the previous iterate.
    Future(Stencil),
    /// Term absent.
    Unused,
}

/// Coefficient sampled at every stage time, optionally per node.
enum Field {
    T(Vec<f64>),
    XT(Vec<f64>),
}

impl Field {
    fn at(&self, stage: usize, i: usize, nx: usize) -> f64 {
        match self {
            Field::T(v) => v[stage],
            Field::XT(v) => v[stage * nx + i],
        }
    }

    fn build(e: &Expr, times: &[f64], x: &[f64]) -> Result<Self, SimError> {
        if e.depends_on(Var::X) {
            let mut v = Vec::with_capacity(times.len() * x.len());
            for &t in times {
                for &xi in x {
                    v.push(finite(e.at_xt(xi, t)?, "coefficient", t)?);
                }
            }
            Ok(Field::XT(v))
        } else {
            times.iter().map(|&t| finite(e.at(t)?, "coefficient", t)).collect::<Result<_, _>>().map(Field::T)
        }
    }
}

fn finite(v: f64, what: &'static str, t: f64) -> Result<f64, SimError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SimError::NonFinite { what, t })
    }
}

struct BlowUp {
    t: f64,
    rows: History,
}

struct Model {
    nx: usize,
    dx: f64,
    h: f64,
    stride: usize,
    steps: usize,
    t0: f64,
    w_form: bool,
    alpha: f64,
    eps: f64,
    guard: f64,
    dirichlet: bool,
    r: Vec<f64>,
    a: Vec<f64>,
    a_sum: Vec<f64>,
    f_coef: Vec<f64>,
    f_exp: f64,
    p: Field,
    p_hat: Field,
    /// ψ at (lo, t), (hi, t) and at (lo, η(t)), (hi, η(t)) per stage.
    psi: Vec<[f64; 4]>,
    read_eta: Vec<Read>,
    read_m: Vec<Read>,
    u0: Vec<f64>,
    q0: Vec<f64>,
    qd0: Vec<f64>,
}

impl Model {
    fn stage_time(&self, stage: usize) -> f64 {
        self.t0 + 0.5 * stage as f64 * self.h
    }

    fn to_u(&self, q: &[f64], out: &mut [f64]) {
        if self.w_form {
            let inv = 1.0 / self.alpha;
            out.iter_mut().zip(q).for_each(|(o, w)| *o = spow(*w, inv));
        } else {
            out.copy_from_slice(q);
        }
    }

    fn laplacian(&self, u: &[f64], psi_lo: f64, psi_hi: f64, out: &mut [f64]) {
        let n = self.nx;
        let idx2 = 1.0 / (self.dx * self.dx);
        for i in 1..n - 1 {
            out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * idx2;
        }
        if self.dirichlet {
            out[0] = 0.0;
            out[n - 1] = 0.0;
        } else {
            // ghost nodes from the Robin condition with outward normals
            let gl = u[1] - 2.0 * self.dx * psi_lo * u[0];
            let gr = u[n - 2] - 2.0 * self.dx * psi_hi * u[n - 1];
            out[0] = (gl - 2.0 * u[0] + u[1]) * idx2;
            out[n - 1] = (u[n - 2] - 2.0 * u[n - 1] + gr) * idx2;
        }
    }

    fn read(&self, r: &Read, stage_u: &[f64], fresh: &History, prev: &History, out: &mut [f64]) {
        match r {
            Read::Local => out.copy_from_slice(stage_u),
            Read::Pre => out.copy_from_slice(&self.u0),
            Read::Past(s) => fresh.read_into(&fresh.cubic(*s), out),
            Read::Future(st) => prev.read_into(st, out),
            Read::Unused => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// Time derivative of `(q, q_t)` at a stage.
    #[allow(clippy::too_many_arguments)]
    fn rhs(&self, stage: usize, q: &[f64], qd: &[f64], fresh: &History, prev: &History, s: &mut Scratch, out: &mut [f64]) {
        let n = self.nx;
        let Scratch { u, lap, ue, lap_e, um } = s;
        self.to_u(q, u);
        let [pl, ph, pel, peh] = self.psi[stage];
        self.laplacian(u, pl, ph, lap);
        self.read(&self.read_eta[stage], u, fresh, prev, ue);
        if matches!(self.read_eta[stage], Read::Unused) {
            lap_e.iter_mut().for_each(|v| *v = 0.0);
        } else {
            self.laplacian(ue, pel, peh, lap_e);
        }
        self.read(&self.read_m[stage], u, fresh, prev, um);
        let (r, a, asum, fc) = (self.r[stage], self.a[stage], self.a_sum[stage], self.f_coef[stage]);
        let al = self.alpha;
        let (dq, dqd) = out.split_at_mut(n);
        for i in 0..n {
            if self.dirichlet && (i == 0 || i == n - 1) {
                dq[i] = 0.0;
                dqd[i] = 0.0;
                continue;
            }
            let forcing = if fc == 0.0 { 0.0 } else { fc * spow(um[i], self.f_exp) };
            let ph_i = self.p_hat.at(stage, i, n);
            dq[i] = qd[i];
            dqd[i] = if self.w_form {
                (al * a * lap[i] + al * asum * lap_e[i] - ph_i * qd[i] - al * forcing) / r
            } else {
                let ui = u[i];
                let v = qd[i];
                let p_i = self.p.at(stage, i, n);
                let damp_sq = if p_i == 0.0 || v == 0.0 {
                    0.0
                } else {
                    let ureg = if ui.abs() < 1e-8 { 1e-8f64.copysign(ui) } else { ui };
                    p_i * spow(ureg, al - 2.0) * v * v
                };
                let ua = ui.abs().powf(al - 1.0);
                let num = a * lap[i] + asum * lap_e[i] - damp_sq - ph_i * ua * v - forcing;
                num / (r * ua.max(self.eps))
            };
        }
    }

    /// One RK4 pass over the window, advanced reads taken from `prev`.
    fn sweep(&self, prev: &History) -> Result<History, BlowUp> {
        let n = self.nx;
        let mut fresh = History::new(self.t0, self.h * self.stride as f64, n);
        let mut s = Scratch::new(n);
        let mut y = [self.q0.clone(), self.qd0.clone()].concat();
        let mut u = vec![0.0; n];
        self.to_u(&y[..n], &mut u);
        fresh.push(&u);
        let mut k = [vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n]];
        let mut tmp = vec![0.0; 2 * n];
        let h = self.h;
        for step in 0..self.steps {
            let st = 2 * step;
            let (kq, rest) = k.split_at_mut(1);
            self.rhs(st, &y[..n], &y[n..], &fresh, prev, &mut s, &mut kq[0]);
            axpy(&mut tmp, &y, 0.5 * h, &kq[0]);
            self.rhs(st + 1, &tmp[..n], &tmp[n..], &fresh, prev, &mut s, &mut rest[0]);
            axpy(&mut tmp, &y, 0.5 * h, &rest[0]);
            self.rhs(st + 1, &tmp[..n], &tmp[n..], &fresh, prev, &mut s, &mut rest[1]);
            axpy(&mut tmp, &y, h, &rest[1]);
            self.rhs(st + 2, &tmp[..n], &tmp[n..], &fresh, prev, &mut s, &mut rest[2]);
            for j in 0..2 * n {
                y[j] += h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
            }
            self.to_u(&y[..n], &mut u);
            if u.iter().any(|v| !(v.abs() <= self.guard)) {
                return Err(BlowUp { t: self.stage_time(st + 2), rows: fresh });
            }
            if (step + 1) % self.stride == 0 {
                fresh.push(&u);
            }
        }
        Ok(fresh)
    }
}

struct Scratch {
    u: Vec<f64>,
    lap: Vec<f64>,
    ue: Vec<f64>,
    lap_e: Vec<f64>,
    um: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { u: vec![0.0; n], lap: vec![0.0; n], ue: vec![0.0; n], lap_e: vec![0.0; n], um: vec![0.0; n] }
    }
}

fn axpy(out: &mut [f64], y: &[f64], c: f64, k: &[f64]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = a + c * b;
    }
}

/// Simulates the equation on `window` from `init(x) = (u0, u0')`, see
/// [`simulate_pde_with`].
#[allow(clippy::too_many_arguments)]
pub fn simulate_pde(
    spec: &ProblemSpec,
    nx: usize,
    dt: f64,
    window: (f64, f64),
    init: &dyn Fn(f64) -> (f64, f64),
    relax_tol: f64,
    max_iter: usize,
) -> Result<SimulationTrace, SimError> {
    simulate_pde_with(spec, nx, dt, window, init, relax_tol, max_iter, &PdeOptions::default())
}

/// Central differences in space with ghost nodes for the Robin condition
/// and pinned boundary values for the Dirichlet condition; RK4 in time.
///
/// Deviating arguments below the current time are read from the part of
/// the sweep already integrated (the initial profile before the window
/// start); arguments ahead of it come from the previous iterate of an
/// Anderson-accelerated whole-window relaxation, with linear extrapolation
/// beyond the window end. The nonlinearity is `coef(m(t))·u(x,m(t))^e`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_pde_with(
    spec: &ProblemSpec,
    nx: usize,
    dt: f64,
    window: (f64, f64),
    init: &dyn Fn(f64) -> (f64, f64),
    relax_tol: f64,
    max_iter: usize,
    opts: &PdeOptions,
) -> Result<SimulationTrace, SimError> {
    spec.validate()?;
    let (lo, hi) = match spec.domain {
        Domain::Interval { lo, hi } => (lo, hi),
        Domain::Box { .. } => return Err(SimError::InvalidInput("PDE simulation supports intervals only".into())),
    };
    let (t0, t1) = window;
    if !(t0 >= spec.t0 && t1 > t0 && t1.is_finite()) {
        return Err(SimError::InvalidInput(format!("window [{t0}, {t1}] must be nonempty and start at or after t0 = {}", spec.t0)));
    }
    if nx < 3 {
        return Err(SimError::InvalidInput(format!("nx = {nx} must be at least 3")));
    }
    if !(dt > 0.0 && dt <= t1 - t0) {
        return Err(SimError::InvalidInput(format!("dt = {dt} must lie in (0, {}]", t1 - t0)));
    }
    if !(relax_tol > 0.0) || max_iter == 0 || opts.max_rows < 2 || !(opts.epsilon > 0.0) {
        return Err(SimError::InvalidInput("relax_tol and epsilon must be positive, max_iter >= 1, max_rows >= 2".into()));
    }
    let dx = (hi - lo) / (nx - 1) as f64;
    let x: Vec<f64> = (0..nx).map(|i| lo + i as f64 * dx).collect();
    let raw_steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let stride = raw_steps.div_ceil(opts.max_rows - 1).max(1);
    let rows = raw_steps.div_ceil(stride);
    let steps = rows * stride;
    let h = (t1 - t0) / steps as f64;
    let stage_times: Vec<f64> = (0..=2 * steps).map(|j| t0 + 0.5 * j as f64 * h).collect();
    let alpha = spec.alpha.value();

    let matches_w = {
        let mut ok = true;
        'outer: for j in (0..stage_times.len()).step_by((stage_times.len() / 64).max(1)) {
            let t = stage_times[j];
            let target = (alpha - 1.0) * spec.r.at(t)?;
            for &xi in &x {
                let p = spec.p.at_xt(xi, t)?;
                if (p - target).abs() > 1e-12 * (1.0 + p.abs()) {
                    ok = false;
                    break 'outer;
                }
            }
        }
        ok
    };
    let w_form = match opts.form {
        PdeForm::Auto => matches_w,
        PdeForm::U => false,
        PdeForm::W if matches_w => true,
        PdeForm::W => return Err(SimError::InvalidInput("w-form needs p = (alpha-1) r".into())),
    };

    let dirichlet = matches!(spec.bc, BoundaryCondition::Dirichlet);
    let (init_u, init_v): (Vec<f64>, Vec<f64>) = x.iter().map(|&xi| init(xi)).unzip();
    let mut u0 = init_u;
    let mut v0 = init_v;
    if dirichlet {
        for e in [0, nx - 1] {
            u0[e] = 0.0;
            v0[e] = 0.0;
        }
    }
    let (q0, qd0) = if w_form {
        (
            u0.iter().map(|u| spow(*u, alpha)).collect(),
            u0.iter().zip(&v0).map(|(u, v)| alpha * u.abs().powf(alpha - 1.0) * v).collect(),
        )
    } else {
        (u0.clone(), v0.clone())
    };

    let rec = History::from_data(t0, h * stride as f64, nx, vec![0.0; (rows + 1) * nx]);
    let classify = |t: f64, s: f64| -> Read {
        if is_local(s, t) {
            Read::Local
        } else if s < t0 {
            Read::Pre
        } else if s < t {
            Read::Past(s)
        } else {
            Read::Future(rec.cubic_linear_tail(s))
        }
    };
    let mut r = Vec::with_capacity(stage_times.len());
    let mut a = Vec::with_capacity(stage_times.len());
    let mut a_sum = Vec::with_capacity(stage_times.len());
    let mut f_coef = Vec::with_capacity(stage_times.len());
    let mut psi = Vec::with_capacity(stage_times.len());
    let mut read_eta = Vec::with_capacity(stage_times.len());
    let mut read_m = Vec::with_capacity(stage_times.len());
    let coef = spec.f.coef();
    for &t in &stage_times {
        let m = spec.m.at(t)?;
        let eta = spec.eta.at(t)?;
        r.push(finite(spec.r.at(t)?, "r", t)?);
        a.push(finite(spec.a.at(t)?, "a", t)?);
        a_sum.push(finite(spec.a_sum(t)?, "a_k", t)?);
        f_coef.push(finite(coef.at(m)?, "f coefficient", t)?);
        psi.push(match &spec.bc {
            BoundaryCondition::Robin { psi } => {
                let ev = |x: f64, t: f64| psi.eval(&Bindings::xt(x, t));
                [ev(lo, t)?, ev(hi, t)?, ev(lo, eta)?, ev(hi, eta)?]
            }
            BoundaryCondition::Dirichlet => [0.0; 4],
        });
        read_eta.push(if spec.s == 0 { Read::Unused } else { classify(t, eta) });
        read_m.push(classify(t, m));
    }
    let p = Field::build(&spec.p, &stage_times, &x)?;
    let p_hat = Field::build(&spec.p_hat, &stage_times, &x)?;

    let cfl = {
        let r_min = r.iter().copied().fold(f64::INFINITY, f64::min);
        let a_max = a.iter().zip(&a_sum).map(|(a, s)| a + s.max(0.0)).fold(0.0, f64::max);
        let u_scale = u0.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let dt_limit = if a_max > 0.0 {
            opts.cfl_safety * dx * (r_min * u_scale.powf(alpha - 1.0) / a_max).max(0.0).sqrt()
        } else {
            f64::INFINITY
        };
        CflRecord { safety: opts.cfl_safety, r_min, a_max, u_scale, dt_limit, satisfied: h <= dt_limit }
    };

    let model = Model {
        nx,
        dx,
        h,
        stride,
        steps,
        t0,
        w_form,
        alpha,
        eps: opts.epsilon,
        guard: opts.overflow_guard,
        dirichlet,
        r,
        a,
        a_sum,
        f_coef,
        f_exp: spec.f.exponent(spec.alpha),
        p,
        p_hat,
        psi,
        read_eta,
        read_m,
        u0: u0.clone(),
        q0,
        qd0,
    };
    let advanced = model.read_eta.iter().chain(&model.read_m).any(|r| matches!(r, Read::Future(_)));

    let mut scheme = TraceScheme {
        dt: h,
        dx,
        nx,
        record_stride: stride,
        form: if w_form { "w".into() } else { "u".into() },
        epsilon: if w_form { None } else { Some(opts.epsilon) },
        boundary: if dirichlet { "dirichlet (pinned)".into() } else { "robin (ghost nodes)".into() },
        relaxation: RelaxationInfo::default(),
        cfl,
    };
    let blow_up = |b: BlowUp, scheme: &TraceScheme| SimError::BlowUp {
        t: b.t,
        guard: opts.overflow_guard,
        partial: Box::new(to_trace(&x, &b.rows, scheme.clone())),
    };

    let start = History::from_data(t0, rec.h, nx, u0.repeat(rows + 1));
    let (x_final, history, evaluations, method) = if !advanced {
        (start, vec![], 0, "none (no advanced reads)".to_string())
    } else {
        let g = |v: &[f64]| -> Result<Vec<f64>, BlowUp> {
            let prev = History::from_data(t0, rec.h, nx, v.to_vec());
            model.sweep(&prev).map(|h| h.data)
        };
        let out = match anderson(g, start.data, opts.anderson_depth, relax_tol, max_iter) {
            Ok(out) => out,
            Err(b) => return Err(blow_up(b, &scheme)),
        };
        let method = format!("anderson(depth={})", opts.anderson_depth);
        (History::from_data(t0, rec.h, nx, out.x), out.history, out.evaluations, method)
    };
    let result = match model.sweep(&x_final) {
        Ok(r) => r,
        Err(b) => return Err(blow_up(b, &scheme)),
    };
    let final_delta = if evaluations == 0 { 0.0 } else { sup_diff(&result.data, &x_final.data) };
    scheme.relaxation = RelaxationInfo {
        method,
        iterations: evaluations + 1,
        final_delta,
        converged: final_delta <= relax_tol,
        history,
        closure: LINEAR_CLOSURE.into(),
    };
    Ok(to_trace(&x, &result, scheme))
}

fn to_trace(x: &[f64], rows: &History, scheme: TraceScheme) -> SimulationTrace {
    let t = (0..rows.len()).map(|i| rows.time(i)).collect();
    let u = (0..rows.len()).map(|i| rows.node(i).to_vec()).collect();
    SimulationTrace { x: x.to_vec(), t, u, scheme }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Alpha, Nonlinearity};
    use std::f64::consts::PI;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn linear_spec() -> ProblemSpec {
        ProblemSpec {
            alpha: Alpha::integer(1).unwrap(),
            r: e("1"),
            p: e("0"),
            p_hat: e("0"),
            q: e("0"),
            f: Nonlinearity::PowerLaw { coef: e("0") },
            a: e("1"),
            a_k: e("0"),
            s: 0,
            m: e("t"),
            eta: e("t"),
            bc: BoundaryCondition::Dirichlet,
            domain: Domain::Interval { lo: 0.0, hi: PI },
            t0: 0.5,
        }
    }

    fn linear_error(nx: usize, dt: f64) -> f64 {
        let spec = linear_spec();
        let tr = simulate_pde(&spec, nx, dt, (0.5, 0.5 + PI), &|x| (x.sin(), 0.0), 1e-10, 5).unwrap();
        let last = tr.u.last().unwrap();
        tr.x.iter().zip(last).map(|(x, u)| (u + x.sin()).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn linear_standing_wave() {
        let err = linear_error(201, 1e-3);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn linear_error_shrinks_at_second_order() {
        let (e1, e2) = (linear_error(21, 1e-3), linear_error(41, 1e-3));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let spec = crate::problem::builtin_example("3.1").unwrap();
        let tr = simulate_pde(&spec, 21, 1e-3, (1.0, 1.5), &|_| (0.0, 0.0), 1e-10, 5).unwrap();
        assert_eq!(tr.max_abs(), 0.0);
        assert_eq!(tr.scheme.form, "u");
    }

    #[test]
    fn w_and_u_forms_agree() {
        // p = (α-1) r with α = 3, r = 1; positive solution on a short window
        let spec = ProblemSpec {
            alpha: Alpha::integer(3).unwrap(),
            r: e("1"),
            p: e("2"),
            p_hat: e("0.5"),
            q: e("1"),
            f: Nonlinearity::PowerLaw { coef: e("1") },
            a: e("1"),
            a_k: e("0.5"),
            s: 1,
            m: e("t"),
            eta: e("t/2"),
            bc: BoundaryCondition::Robin { psi: e("1") },
            domain: Domain::Interval { lo: 0.0, hi: 1.0 },
            t0: 1.0,
        };
        let init = default_initial_data(&spec).unwrap();
        let run = |form| {
            let opts = PdeOptions { form, ..PdeOptions::default() };
            simulate_pde_with(&spec, 41, 1e-3, (1.0, 1.2), &init, 1e-10, 5, &opts).unwrap()
        };
        let (w, u) = (run(PdeForm::Auto), run(PdeForm::U));
        assert_eq!(w.scheme.form, "w");
        assert!(u.u.iter().flatten().all(|v| v.abs() >= 0.1));
        let diff = w.u.iter().flatten().zip(u.u.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-3, "{diff}");
    }

    #[test]
    fn rejects_box_domain_and_early_window() {
        let mut spec = linear_spec();
        assert!(simulate_pde(&spec, 11, 1e-2, (0.0, 1.0), &|_| (0.0, 0.0), 1e-8, 3).is_err());
        spec.domain = Domain::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
        assert!(simulate_pde(&spec, 11, 1e-2, (1.0, 2.0), &|_| (0.0, 0.0), 1e-8, 3).is_err());
    }

    #[test]
    fn example_3_2_collapses_before_a_sign_change() {
        // u reaches zero near the boundary, where r u^{α-1} degenerates and
        // p u_t²/(r u) is singular; the explicit scheme stops there
        let spec = crate::problem::builtin_example("3.2").unwrap();
        let init = default_initial_data(&spec).unwrap();
        let stop = |dt: f64| match simulate_pde(&spec, 101, dt, (1.0, 6.0), &init, 1e-8, 60) {
            Err(SimError::BlowUp { t, partial, .. }) => {
                let v = crate::reduction::reduce_trace(&partial, spec.alpha, &spec.bc).unwrap();
                assert!(v.v.iter().all(|v| *v > 0.0));
                t
            }
            other => panic!("expected blow-up, got {other:?}"),
        };
        let (t1, t2) = (stop(1e-4), stop(5e-5));
        assert!(t1 < 1.2 && (t1 - t2).abs() / t2 < 0.01, "{t1} {t2}");
    }
}
