use super::AnalysisError;

/// Distance for `ds² = dz²/z² + dy²` on the strip `0 < z ≤ 1`.
///
/// Above the strip the metric is euclidean. A pair straddling `z = 1` is
/// joined through the point where the straight segment crosses `z = 1`:
/// hyperbolic on the lower leg, euclidean on the upper one.
pub fn hyperbolic_distance(p1: [f64; 2], p2: [f64; 2]) -> Result<f64, AnalysisError> {
    for p in [p1, p2] {
        if !(p[0] > 0.0) || !p[1].is_finite() || !p[0].is_finite() {
            return Err(AnalysisError::Domain(format!("point ({}, {}) is not in z > 0", p[0], p[1])));
        }
    }
    Ok(s_bar(p1[0], p1[0].ln(), p1[1], p2[0], p2[0].ln(), p2[1]))
}

/// `hyperbolic_distance + sqrt|Δt|` for points `(z, y, t)`.
pub fn parabolic_distance(p1: [f64; 3], p2: [f64; 3]) -> Result<f64, AnalysisError> {
    let s = hyperbolic_distance([p1[0], p1[1]], [p2[0], p2[1]])?;
    Ok(s + (p1[2] - p2[2]).abs().sqrt())
}

/// Unchecked kernel with precomputed logarithms, shared with the norm sweeps.
pub(crate) fn s_bar(z1: f64, l1: f64, y1: f64, z2: f64, l2: f64, y2: f64) -> f64 {
    let dy = y2 - y1;
    match (z1 <= 1.0, z2 <= 1.0) {
        (true, true) => (l1 - l2).hypot(dy),
        (false, false) => (z1 - z2).hypot(dy),
        (true, false) => split(z1, l1, y1, z2, y2),
        (false, true) => split(z2, l2, y2, z1, y1),
    }
}

fn split(z_lo: f64, l_lo: f64, y_lo: f64, z_hi: f64, y_hi: f64) -> f64 {
    let s = (1.0 - z_lo) / (z_hi - z_lo);
    let yc = y_lo + s * (y_hi - y_lo);
    l_lo.abs().hypot(yc - y_lo) + (z_hi - 1.0).hypot(y_hi - yc)
}
