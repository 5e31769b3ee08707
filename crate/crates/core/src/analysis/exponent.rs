//! Sample Lyapunov exponents and convergence classification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::TrajectoryRecord;

/// Distances at or below this are treated as collapsed.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub window: [f64; 2],
    pub r_squared: f64,
}

/// Least-squares slope of `log d(t)` over the trailing window starting at
/// `window_fraction · T`. The window ends before the first sample at or
/// below [`DISTANCE_FLOOR`].
pub fn estimate_exponent_series(
    times: &[f64],
    distances: &[f64],
    window_fraction: f64,
) -> Result<ExponentEstimate> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "window fraction must lie in (0, 1), got {window_fraction}"
        )));
    }
    if times.len() != distances.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: distances.len(),
        });
    }
    let horizon = match times.last() {
        Some(&t) => t,
        None => return Err(Error::WindowEmpty { collapse_time: 0.0 }),
    };
    let collapse = distances
        .iter()
        .position(|&d| !(d > DISTANCE_FLOOR))
        .map(|i| times[i]);
    let start = window_fraction * horizon;
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(distances)
        .take_while(|(_, &d)| d > DISTANCE_FLOOR)
        .filter(|(&t, _)| t >= start)
        .map(|(&t, &d)| (t, d.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::WindowEmpty {
            collapse_time: collapse.unwrap_or(horizon),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(ExponentEstimate {
        slope,
        intercept: my - slope * mx,
        window: [xs[0], *xs.last().unwrap()],
        r_squared,
    })
}

pub fn estimate_exponent(
    record: &TrajectoryRecord,
    window_fraction: f64,
) -> Result<ExponentEstimate> {
    estimate_exponent_series(&record.times, &record.distance, window_fraction)
}

/// Index `n` with `ρ_nn(T) > threshold`, or `None` if undecided.
pub fn classify_populations(final_populations: &[f64], threshold: f64) -> Option<usize> {
    final_populations.iter().position(|&p| p > threshold)
}

pub fn classify_convergence(record: &TrajectoryRecord, threshold: f64) -> Option<usize> {
    classify_populations(record.final_populations(), threshold)
}
