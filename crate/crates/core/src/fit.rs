//! Log-log least squares with a pairs-bootstrap confidence interval.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

/// RMS log-residual above which a fit is not treated as a power law.
pub const POWER_LAW_RESIDUAL: f64 = 0.05;
pub const BOOTSTRAP_REPLICATES: usize = 200;
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerFit {
    /// Slope of `ln y` against `ln x`.
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in natural-log units.
    pub residual: f64,
    /// 95% pairs-bootstrap interval for the slope.
    pub ci: (f64, f64),
    pub points: usize,
    pub window: (f64, f64),
}

impl PowerFit {
    /// Decay exponent `α̂ = −slope`.
    pub fn alpha(&self) -> f64 {
        -self.slope
    }

    /// Interval for `α̂`.
    pub fn alpha_ci(&self) -> (f64, f64) {
        (-self.ci.1, -self.ci.0)
    }

    pub fn is_power_law(&self) -> bool {
        self.residual <= POWER_LAW_RESIDUAL
    }
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    (slope, my - slope * mx)
}

/// Fits `y ≈ C x^slope` on positive data.
pub fn power_fit(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("{} abscissae but {} values", x.len(), y.len())));
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("need ≥ {MIN_FIT_POINTS} points in the fit window, got {}", x.len())));
    }
    if let Some((a, b)) = x.iter().zip(y).find(|(a, b)| !(**a > 0.0 && **b > 0.0) || !b.is_finite()) {
        return Err(Error::Fit(format!("nonpositive sample ({a}, {b}) in fit window")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = ols(&lx, &ly);
    if !slope.is_finite() {
        return Err(Error::Fit("fit window has a single abscissa".into()));
    }
    let residual =
        (lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / lx.len() as f64).sqrt();

    // deterministic bootstrap: the stream depends only on the data size
    let mut rng = stream(0xB007, lx.len() as u64, 0);
    let n = lx.len();
    let mut slopes = Vec::with_capacity(BOOTSTRAP_REPLICATES);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    while slopes.len() < BOOTSTRAP_REPLICATES {
        for i in 0..n {
            let j = rng.random_range(0..n);
            bx[i] = lx[j];
            by[i] = ly[j];
        }
        let (s, _) = ols(&bx, &by);
        if s.is_finite() {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let q = |p: f64| slopes[((p * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
    let window = (x.iter().copied().fold(f64::INFINITY, f64::min), x.iter().copied().fold(0.0, f64::max));
    Ok(PowerFit { slope, intercept, residual, ci: (q(0.025), q(0.975)), points: n, window })
}

/// Decay exponent fit of `v(t) ≈ C t^{−α}`.
pub fn decay_fit(times: &[f64], values: &[f64]) -> Result<PowerFit> {
    power_fit(times, values)
}

/// Log-spaced grid of `count` points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| if i + 1 == count { hi } else { lo * (r * i as f64).exp() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let t = geometric_grid(1.0, 100.0, 20);
        let v: Vec<f64> = t.iter().map(|t| t.powi(-2)).collect();
        let f = decay_fit(&t, &v).unwrap();
        assert!((f.alpha() - 2.0).abs() < 1e-6);
        assert!(f.is_power_law());
        let v: Vec<f64> = t.iter().map(|t| 3.0 / t.sqrt()).collect();
        let f = decay_fit(&t, &v).unwrap();
        assert!((f.alpha() - 0.5).abs() < 1e-9);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn exponential_flagged() {
        let t = geometric_grid(1.0, 10.0, 12);
        let v: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        assert!(!decay_fit(&t, &v).unwrap().is_power_law());
    }

    #[test]
    fn bootstrap_interval_covers_noisy_slope() {
        let t = geometric_grid(1.0, 1000.0, 30);
        let v: Vec<f64> = t.iter().enumerate().map(|(i, t)| t.powf(-1.5) * (1.0 + 0.05 * ((i * 7 % 5) as f64 - 2.0))).collect();
        let f = decay_fit(&t, &v).unwrap();
        let (lo, hi) = f.alpha_ci();
        assert!(lo <= f.alpha() && f.alpha() <= hi);
        assert!(hi - lo < 0.1);
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(decay_fit(&[1.0, 2.0], &[1.0, 0.5]).is_err());
        assert!(decay_fit(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 0.5, 0.0, 0.1, 0.1]).is_err());
    }
}
