//! Log-log convergence-rate fits.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Errors below this are treated as the rounding floor and excluded.
pub const ROUNDING_FLOOR: f64 = 1e-13;

/// RMS log10 residual above which the two coarsest points are dropped.
pub const RESIDUAL_REFIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub params: Vec<f64>,
    pub errors: Vec<f64>,
    /// Fitted `log10(error) ≈ slope·log10(param) + intercept`.
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit, in decades.
    pub residual: f64,
    /// Indices (into `params`) left out of the fit.
    pub excluded: Vec<usize>,
    pub dropped_coarse: bool,
    /// Errors do not increase under refinement (decreasing `param`).
    pub monotone: bool,
    /// Slope clearly positive.
    pub converging: bool,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| libm::pow(b - slope * a - intercept, 2.0)).sum();
    (slope, intercept, libm::sqrt(rss / n))
}

/// Fits `error ≈ C·param^slope`. `params` must be strictly monotone and
/// shrink under refinement (step sizes, `1/n`, …).
pub fn fit_rate(params: &[f64], errors: &[f64]) -> Result<RateReport> {
    if params.len() != errors.len() || params.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs ≥ 4 matching points (got {} params, {} errors)",
            params.len(),
            errors.len()
        )));
    }
    if params.iter().any(|p| !(*p > 0.0)) || errors.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidArgument("rate fit needs positive parameters and non-negative errors".into()));
    }
    let inc = params.windows(2).all(|w| w[1] > w[0]);
    let dec = params.windows(2).all(|w| w[1] < w[0]);
    if !inc && !dec {
        return Err(Error::InvalidArgument("rate-fit grid must be strictly monotone".into()));
    }
    let mut order: Vec<usize> = (0..params.len()).collect();
    // coarsest first
    order.sort_by(|&a, &b| params[b].total_cmp(&params[a]));
    let monotone = order.windows(2).all(|w| errors[w[1]] <= errors[w[0]] * (1.0 + 1e-9));
    let mut excluded: Vec<usize> = order.iter().copied().filter(|&i| errors[i] < ROUNDING_FLOOR).collect();
    let mut used: Vec<usize> = order.iter().copied().filter(|&i| errors[i] >= ROUNDING_FLOOR).collect();
    if used.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} of {} errors at the rounding floor",
            excluded.len(),
            params.len()
        )));
    }
    let logs = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        (
            idx.iter().map(|&i| libm::log10(params[i])).collect(),
            idx.iter().map(|&i| libm::log10(errors[i])).collect(),
        )
    };
    let (x, y) = logs(&used);
    let (mut slope, mut intercept, mut residual) = least_squares(&x, &y);
    let mut dropped_coarse = false;
    if residual > RESIDUAL_REFIT && used.len() >= 5 {
        excluded.extend(used.drain(..2));
        let (x, y) = logs(&used);
        (slope, intercept, residual) = least_squares(&x, &y);
        dropped_coarse = true;
    }
    excluded.sort_unstable();
    Ok(RateReport {
        params: params.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept,
        residual,
        excluded,
        dropped_coarse,
        monotone,
        converging: slope > 0.1,
    })
}

/// Smallest `C` with `error ≤ C·param^p` at every point.
pub fn upper_bound_constant(params: &[f64], errors: &[f64], p: f64) -> f64 {
    params
        .iter()
        .zip(errors)
        .map(|(h, e)| e / libm::pow(*h, p))
        .fold(0.0, f64::max)
}

/// The curve is decreasing from some point on (in refinement order).
pub fn eventually_decreasing(errors_coarse_to_fine: &[f64], tail: usize) -> bool {
    let n = errors_coarse_to_fine.len();
    if n < 2 {
        return false;
    }
    let start = n.saturating_sub(tail.max(2));
    errors_coarse_to_fine[start..].windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_law() {
        let h = [1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        let r = fit_rate(&h, &e).unwrap();
        assert_abs_diff_eq!(r.slope, 2.0, epsilon = 1e-12);
        assert!(r.monotone && r.converging && !r.dropped_coarse);
    }

    #[test]
    fn constant_errors_flagged() {
        let r = fit_rate(&[1.0, 0.5, 0.25, 0.125], &[0.3; 4]).unwrap();
        assert_abs_diff_eq!(r.slope, 0.0, epsilon = 1e-12);
        assert!(!r.converging);
    }

    #[test]
    fn rounding_floor_and_bad_input() {
        assert!(matches!(
            fit_rate(&[1.0, 0.5, 0.25, 0.125], &[1e-3, 1e-14, 1e-15, 0.0]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(fit_rate(&[1.0, 0.5, 0.25], &[1.0, 0.5, 0.25]).is_err());
        assert!(fit_rate(&[1.0, 0.5, 0.7, 0.1], &[1.0; 4]).is_err());
    }

    #[test]
    fn preasymptotic_points_dropped() {
        let h = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];
        let mut e: Vec<f64> = h.iter().map(|h| h * h).collect();
        e[0] = 1e-4;
        e[1] = 1e-4;
        let r = fit_rate(&h, &e).unwrap();
        assert!(r.dropped_coarse);
        assert_abs_diff_eq!(r.slope, 2.0, epsilon = 1e-12);
        assert!(!r.monotone);
    }
}
