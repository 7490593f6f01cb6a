/// Uniformly sampled vector-valued history `t_i = t0 + i·h`.
#[derive(Debug, Clone)]
pub(crate) struct History {
    pub t0: f64,
    pub h: f64,
    pub dim: usize,
    pub data: Vec<f64>,
}

/// Up to four nodes and weights of an interpolation rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Stencil {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub len: usize,
}

impl Stencil {
    pub fn apply(&self, values: impl Fn(usize) -> f64) -> f64 {
        (0..self.len).map(|j| self.w[j] * values(self.idx[j])).sum()
    }
}

/// Lagrange weights on the integer nodes `j0..j0+k` at position `pos`.
fn lagrange(j0: usize, k: usize, pos: f64) -> Stencil {
    let mut s = Stencil { idx: [0; 4], w: [0.0; 4], len: k };
    for a in 0..k {
        let xa = (j0 + a) as f64;
        let mut w = 1.0;
        for b in 0..k {
            if a != b {
                let xb = (j0 + b) as f64;
                w *= (pos - xb) / (xa - xb);
            }
        }
        s.idx[a] = j0 + a;
        s.w[a] = w;
    }
    s
}

impl History {
    pub fn new(t0: f64, h: f64, dim: usize) -> Self {
        Self { t0, h, dim, data: Vec::new() }
    }

    pub fn from_data(t0: f64, h: f64, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        Self { t0, h, dim, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn push(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.dim);
        self.data.extend_from_slice(values);
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    /// Cubic Lagrange rule at `s` on the nearest four nodes, clamped to the
    /// stored range (so it extrapolates a little past either end).
    pub fn cubic(&self, s: f64) -> Stencil {
        let n = self.len();
        debug_assert!(n > 0);
        let k = n.min(4);
        let pos = (s - self.t0) / self.h;
        let j0 = (pos.floor() as i64 - 1).clamp(0, (n - k) as i64) as usize;
        lagrange(j0, k, pos)
    }

    /// Cubic inside the stored range, linear extrapolation from the last
    /// two nodes beyond it.
    pub fn cubic_linear_tail(&self, s: f64) -> Stencil {
        let n = self.len();
        let pos = (s - self.t0) / self.h;
        if n >= 2 && pos > (n - 1) as f64 {
            lagrange(n - 2, 2, pos)
        } else {
            self.cubic(s)
        }
    }

    pub fn read_into(&self, st: &Stencil, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..st.len {
            let node = self.node(st.idx[j]);
            let w = st.w[j];
            for (o, v) in out.iter_mut().zip(node) {
                *o += w * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let mut h = History::new(1.0, 0.1, 1);
        for i in 0..30 {
            h.push(&[f(1.0 + 0.1 * i as f64)]);
        }
        for s in [1.0, 1.03, 1.57, 3.8, 3.9] {
            let st = h.cubic(s);
            let got = st.apply(|i| h.node(i)[0]);
            assert!((got - f(s)).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn linear_tail_beyond_end() {
        let mut h = History::new(0.0, 1.0, 1);
        for v in [0.0, 1.0, 4.0, 9.0] {
            h.push(&[v]);
        }
        let st = h.cubic_linear_tail(5.0);
        assert_eq!(st.apply(|i| h.node(i)[0]), 19.0);
    }

    #[test]
    fn short_histories_lower_the_order() {
        let mut h = History::new(0.0, 1.0, 2);
        h.push(&[1.0, -1.0]);
        let mut out = [0.0; 2];
        h.read_into(&h.cubic(0.7), &mut out);
        assert_eq!(out, [1.0, -1.0]);
        h.push(&[3.0, 1.0]);
        h.read_into(&h.cubic(0.5), &mut out);
        assert_eq!(out, [2.0, 0.0]);
    }
}
