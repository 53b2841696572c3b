use crate::error::{HanError, Result};

const MIN_DISTANCE: f64 = 1e-12;
/// Distances closer than this count as tied.
const TIE: f64 = 1e-12;

/// Knee of a curve sampled at evenly spaced x.
///
/// Both axes are normalized to `[0, 1]`; the knee is the point farthest
/// from the chord joining the first and last normalized points (vertical
/// distance, which for an increasing concave curve is `y_n - x_n`).
/// Decreasing curves have a falling chord, which is the same as flipping
/// them first. Ties go to the smaller index.
pub fn knee_point(curve: &[f64]) -> Result<usize> {
    if curve.len() < 3 {
        return Err(HanError::InvalidArgument(format!(
            "knee_point needs at least 3 points, got {}",
            curve.len()
        )));
    }
    if curve.iter().any(|v| !v.is_finite()) {
        return Err(HanError::NonFinite("knee_point"));
    }
    let lo = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Err(HanError::NoKnee);
    }
    let last = (curve.len() - 1) as f64;
    let y: Vec<f64> = curve.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let (y0, y1) = (y[0], y[y.len() - 1]);
    let mut best = (0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        let x = i as f64 / last;
        let dist = (yi - (y0 + (y1 - y0) * x)).abs();
        if dist > best.1 + TIE {
            best = (i, dist);
        }
    }
    if best.1 <= MIN_DISTANCE {
        return Err(HanError::NoKnee);
    }
    Ok(best.0)
}
