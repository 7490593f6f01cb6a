//! Fixed-point solvers for whole-window relaxation.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    /// Residual norm after every iteration, starting with the initial guess.
    pub history: Vec<f64>,
    /// Map evaluations spent.
    pub evaluations: usize,
}

/// Restarted GMRES for `A x = b`.
///
/// Stops when the 2-norm of the residual drops to `tol` or after `max_evals`
/// applications of `A`.
pub(crate) fn gmres<E>(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    restart: usize,
    max_evals: usize,
) -> Result<Outcome, E> {
    let n = b.len();
    let mut x = x0;
    let mut evals = 0;
    let mut history = Vec::new();
    loop {
        let ax = apply(&x)?;
        evals += 1;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if history.is_empty() {
            history.push(beta);
        } else if let Some(last) = history.last_mut() {
            // true residual replaces the recurrence estimate
            *last = beta;
        }
        if beta <= tol || evals >= max_evals || !beta.is_finite() {
            return Ok(Outcome { x, history, evaluations: evals });
        }
        let m = restart.min(max_evals - evals).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut hmat = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        for j in 0..m {
            let mut w = apply(&v[j])?;
            evals += 1;
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                hmat[i][j] = hij;
                w.iter_mut().zip(&v[i]).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let hnext = norm(&w);
            hmat[j + 1][j] = hnext;
            for i in 0..j {
                let tmp = cs[i] * hmat[i][j] + sn[i] * hmat[i + 1][j];
                hmat[i + 1][j] = -sn[i] * hmat[i][j] + cs[i] * hmat[i + 1][j];
                hmat[i][j] = tmp;
            }
            let denom = hmat[j][j].hypot(hmat[j + 1][j]);
            if denom == 0.0 {
                break;
            }
            cs[j] = hmat[j][j] / denom;
            sn[j] = hmat[j + 1][j] / denom;
            hmat[j][j] = denom;
            hmat[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k = j + 1;
            history.push(g[j + 1].abs());
            if g[j + 1].abs() <= tol || hnext <= 1e-14 * beta || evals >= max_evals {
                break;
            }
            v.push(w.iter().map(|wk| wk / hnext).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|l| hmat[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / hmat[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x.iter_mut().zip(&v[i]).take(n).for_each(|(xk, vk)| *xk += yi * vk);
        }
    }
}

/// Anderson-accelerated fixed-point iteration `x = g(x)` with mixing depth
/// `depth` (depth 0 is plain Picard iteration).
///
/// Convergence is declared when `sup |g(x) − x| ≤ tol`; the returned `x` is
/// then the last `g(x)`.
pub(crate) fn anderson<E>(
    mut g: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    x0: Vec<f64>,
    depth: usize,
    tol: f64,
    max_evals: usize,
) -> Result<Outcome, E> {
    let x = x0;
    let mut gx = g(&x)?;
    let mut evals = 1;
    let mut f: Vec<f64> = gx.iter().zip(&x).map(|(a, b)| a - b).collect();
    let mut history = vec![sup_diff(&gx, &x)];
    let mut df: Vec<Vec<f64>> = Vec::new();
    let mut dg: Vec<Vec<f64>> = Vec::new();
    loop {
        let delta = *history.last().expect("history");
        if delta <= tol || evals >= max_evals || !delta.is_finite() {
            return Ok(Outcome { x: gx, history, evaluations: evals });
        }
        let next = if df.is_empty() {
            gx.clone()
        } else {
            let gamma = least_squares(&df, &f);
            let mut next = gx.clone();
            for (c, col) in gamma.iter().zip(&dg) {
                next.iter_mut().zip(col).for_each(|(n, d)| *n -= c * d);
            }
            next
        };
        let g_next = g(&next)?;
        evals += 1;
        let f_next: Vec<f64> = g_next.iter().zip(&next).map(|(a, b)| a - b).collect();
        if depth > 0 {
            df.push(f_next.iter().zip(&f).map(|(a, b)| a - b).collect());
            dg.push(g_next.iter().zip(&gx).map(|(a, b)| a - b).collect());
            if df.len() > depth {
                df.remove(0);
                dg.remove(0);
            }
        }
        history.push(sup_diff(&g_next, &next));
        gx = g_next;
        f = f_next;
    }
}

/// `argmin_γ ‖f − Σ γ_j cols_j‖₂` by modified Gram–Schmidt QR. Columns
/// that are numerically dependent get a zero coefficient.
fn least_squares(cols: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    let mut keep = vec![true; k];
    for j in 0..k {
        let mut v = cols[j].clone();
        let scale = norm(&v);
        for (i, qi) in q.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            let rij = dot(qi, &v);
            r[i][j] = rij;
            v.iter_mut().zip(qi).for_each(|(a, b)| *a -= rij * b);
        }
        let nv = norm(&v);
        if nv <= 1e-12 * scale || nv == 0.0 {
            keep[j] = false;
            q.push(vec![0.0; v.len()]);
            continue;
        }
        r[j][j] = nv;
        q.push(v.iter().map(|a| a / nv).collect());
    }
    let qtf: Vec<f64> = q.iter().map(|qi| dot(qi, f)).collect();
    let mut gamma = vec![0.0; k];
    for i in (0..k).rev() {
        if !keep[i] {
            continue;
        }
        let s: f64 = (i + 1..k).filter(|&l| keep[l]).map(|l| r[i][l] * gamma[l]).sum();
        gamma[i] = (qtf[i] - s) / r[i][i];
    }
    gamma
}
