//! Least-squares line fitting shared by the radius estimator and the
//! scaling experiments.

use crate::scalar::{real, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub slope_stderr: T,
    /// Root-mean-square of the fit residuals.
    pub residual_rms: T,
    pub n_points: usize,
}

/// Ordinary least squares for `y = slope * x + intercept`.
///
/// Returns `None` with fewer than two points or a degenerate x spread.
pub fn fit_line<T: Scalar>(xs: &[T], ys: &[T]) -> Option<LineFit<T>> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = real::<T>(n as f64);
    let mean_x = xs.iter().copied().sum::<T>() / nf;
    let mean_y = ys.iter().copied().sum::<T>() / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * (y - mean_y);
    }
    if sxx.is_zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss_res = ss_res + r * r;
    }
    let residual_rms = (ss_res / nf).sqrt();
    let slope_stderr = if n > 2 {
        (ss_res / (nf - real::<T>(2.0)) / sxx).sqrt()
    } else {
        T::zero()
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        residual_rms,
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x + 2.0).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.intercept, 2.0, epsilon = 1e-13);
        assert!(fit.residual_rms < 1e-13);
        assert!(fit.slope_stderr < 1e-13);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line::<f64>(&[1.0], &[2.0]).is_none());
        assert!(fit_line::<f64>(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn noisy_line_stderr_positive() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 3.0 * x + if i % 2 == 0 { 0.01 } else { -0.01 })
            .collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert_abs_diff_eq!(fit.slope, 3.0, epsilon = 0.02);
        assert!(fit.slope_stderr > 0.0);
        assert!(fit.residual_rms > 0.0);
    }
}
