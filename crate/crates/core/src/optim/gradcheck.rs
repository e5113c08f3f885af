//! Central finite-difference check of analytic gradients.

use serde::Serialize;

/// Acceptance threshold on the relative error.
pub const GRADCHECK_TOL: f64 = 1e-4;
/// Entries whose gradient magnitude is at most this are not scored.
pub const MAGNITUDE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub scored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ParamCheck> {
        self.entries.iter().filter(|e| e.scored).max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// Compare `grad` with central differences of `loss` at `params`, using
/// step `h_fd·(1 + |θ_i|)` per coordinate.
pub fn gradcheck(loss: impl Fn(&[f64]) -> f64, params: &[f64], grad: &[f64], h_fd: f64) -> GradCheckReport {
    assert_eq!(params.len(), grad.len(), "gradient length");
    let mut entries = Vec::with_capacity(params.len());
    let mut x = params.to_vec();
    for i in 0..params.len() {
        let h = h_fd * (1.0 + params[i].abs());
        x[i] = params[i] + h;
        let fp = loss(&x);
        x[i] = params[i] - h;
        let fm = loss(&x);
        x[i] = params[i];
        let numeric = (fp - fm) / (2.0 * h);
        let analytic = grad[i];
        let mag = analytic.abs().max(numeric.abs());
        let scored = mag > MAGNITUDE_FLOOR || !numeric.is_finite();
        let rel_error = if mag > 0.0 { (analytic - numeric).abs() / mag } else { 0.0 };
        let rel_error = if rel_error.is_nan() { f64::INFINITY } else { rel_error };
        entries.push(ParamCheck { index: i, analytic, numeric, rel_error, scored });
    }
    let max_rel_error = entries.iter().filter(|e| e.scored).map(|e| e.rel_error).fold(0.0, f64::max);
    GradCheckReport { pass: max_rel_error < GRADCHECK_TOL, entries, max_rel_error }
}
