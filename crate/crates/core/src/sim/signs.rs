use serde::Serialize;

/// Sign changes of a sampled series.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SignChangeReport {
    /// Crossing times, strictly increasing.
    pub crossings: Vec<f64>,
    pub count: usize,
    pub first: Option<f64>,
}

pub const DEFAULT_SIGN_ATOL: f64 = 1e-12;

/// Locates strict sign changes of `v` sampled at `t`.
///
/// Samples with `|v| <= atol` are sign-indeterminate and skipped; a crossing
/// is placed by linear interpolation between the last determinate sample and
/// the next determinate sample of opposite sign.
pub fn detect_sign_changes(t: &[f64], v: &[f64], atol: f64) -> SignChangeReport {
    let mut crossings: Vec<f64> = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (&ti, &vi) in t.iter().zip(v) {
        if !(vi.abs() > atol) {
            continue;
        }
        if let Some((tp, vp)) = last {
            if vp.signum() != vi.signum() {
                let tc = tp + (ti - tp) * vp / (vp - vi);
                // guard against rounding pushing a crossing backwards
                let tc = crossings.last().map_or(tc, |&prev| tc.max(prev));
                if crossings.last() != Some(&tc) {
                    crossings.push(tc);
                }
            }
        }
        last = Some((ti, vi));
    }
    let first = crossings.first().copied();
    SignChangeReport { count: crossings.len(), first, crossings }
}

impl super::Trajectory {
    pub fn sign_changes(&self) -> SignChangeReport {
        detect_sign_changes(&self.t, &self.v, DEFAULT_SIGN_ATOL)
    }
}
