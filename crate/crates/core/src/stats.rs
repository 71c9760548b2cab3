//! Small summary statistics shared by the evaluation and sweep layers.

use crate::error::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (zero for fewer than two values).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Ordinary least squares of `y` on `x`: `(slope, standard error of slope)`.
/// The standard error is zero for exactly two points.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::Input(format!(
            "least squares needs at least 2 paired points, got {n}"
        )));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Input(
            "least squares needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if n == 2 {
        return Ok((slope, 0.0));
    }
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok((slope, (rss / (n - 2) as f64 / sxx).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (slope, se) = ols_slope(&x, &y).unwrap();
        assert_abs_diff_eq!(slope, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(se, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn textbook_standard_error() {
        // y = (1, 3, 2, 4) on x = (1, 2, 3, 4): slope 0.8, residual SS 1.8, Sxx 5.
        let (slope, se) = ols_slope(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(slope, 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(se, (1.8f64 / 2.0 / 5.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(ols_slope(&[1.0], &[1.0]).is_err());
        assert!(ols_slope(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert_eq!(standard_error(&[4.0]), 0.0);
        assert_abs_diff_eq!(standard_error(&[1.0, 3.0]), 1.0, epsilon = 1e-15);
    }
}
