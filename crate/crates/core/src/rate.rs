//! Empirical linear-rate fits on Lagrangian traces.
//!
//! Given `Delta_t = lagrangian_t - reference`, the plateau is the smallest
//! `Delta` over the tail of the trace, and the contraction factor is
//! `exp(slope)` of a least-squares line through `ln(Delta_t - plateau)` after
//! a burn-in.

use alloc::vec::Vec;

use crate::admm::RunTrace;
use crate::error::Error;

/// Residuals at or below this are treated as converged.
pub const EPS_FLOOR: f64 = 1e-14;
/// Traces shorter than this are rejected.
pub const MIN_TRACE_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Fitted per-iteration contraction factor, in `(0, 1)`.
    pub eta_hat: f64,
    pub plateau: f64,
    /// Index of the first fitted row.
    pub burn_in: usize,
    /// One past the last fitted row: the first row after the burn-in whose
    /// residual above the plateau reaches [`EPS_FLOOR`], or the trace length.
    pub window_end: usize,
    pub r_squared: f64,
    /// `log10` of the drop in `Delta - plateau` from the first row to the
    /// last fitted row.
    pub decay_decades: f64,
}

/// Rows in the plateau window: the last 20%, at least [`MIN_TRACE_LEN`].
pub fn tail_len(n: usize) -> usize {
    ((n + 4) / 5).max(MIN_TRACE_LEN).min(n)
}

/// Rows dropped before fitting: the first 10%.
pub fn burn_in_len(n: usize) -> usize {
    n / 10
}

/// Plateau of a sequence: its minimum over the tail window, clamped at zero.
pub fn plateau_of(values: &[f64]) -> f64 {
    let n = values.len();
    values[n - tail_len(n)..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Mean of a sequence over its tail window.
pub fn tail_mean(values: &[f64]) -> f64 {
    let n = values.len();
    let tail = &values[n - tail_len(n)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn fit_rate(trace: &RunTrace, reference: f64) -> Result<RateFit, Error> {
    fit_rate_values(&trace.lagrangians(), reference)
}

/// [`fit_rate`] on a raw sequence of Lagrangian values.
pub fn fit_rate_values(lagrangians: &[f64], reference: f64) -> Result<RateFit, Error> {
    let n = lagrangians.len();
    if n < MIN_TRACE_LEN {
        return Err(Error::DegenerateTrace("fewer than 10 rows"));
    }
    if lagrangians.iter().any(|v| !v.is_finite()) || !reference.is_finite() {
        return Err(Error::DegenerateTrace("non-finite values"));
    }
    let delta: Vec<f64> = lagrangians.iter().map(|v| v - reference).collect();
    let plateau = plateau_of(&delta);
    let excess: Vec<f64> = delta.iter().map(|d| d - plateau).collect();
    if excess.iter().all(|&e| e <= EPS_FLOOR) {
        return Err(Error::DegenerateTrace("no residual above the plateau"));
    }

    let burn_in = burn_in_len(n);
    let window_end = (burn_in..n).find(|&i| excess[i] <= EPS_FLOOR).unwrap_or(n);
    if window_end < burn_in + 3 {
        return Err(Error::DegenerateTrace("fewer than 3 rows in the fit window"));
    }

    let xs: Vec<f64> = (burn_in..window_end).map(|i| i as f64).collect();
    let ys: Vec<f64> = (burn_in..window_end)
        .map(|i| libm::log(excess[i].max(EPS_FLOOR)))
        .collect();
    let (slope, r_squared) = least_squares_line(&xs, &ys);
    if !(slope < 0.0) {
        return Err(Error::DegenerateTrace("no decay in the fit window"));
    }
    let first = excess[0].max(EPS_FLOOR);
    let last = excess[window_end - 1].max(EPS_FLOOR);
    Ok(RateFit {
        eta_hat: libm::exp(slope),
        plateau,
        burn_in,
        window_end,
        r_squared,
        decay_decades: libm::log10(first / last),
    })
}

/// Slope and coefficient of determination of the least-squares line.
fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - (syy - slope * sxy) / syy).clamp(0.0, 1.0)
    };
    (slope, r_squared)
}
