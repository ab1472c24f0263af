//! Log-log least-squares fits used to report growth and decay exponents.

use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};

/// Result of fitting `value ~ prefactor * scale^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
}

/// Fits `ln(value) = ln(prefactor) + exponent * ln(scale)` by ordinary least
/// squares. All inputs must be strictly positive and finite.
pub fn power_law_fit(scales: &[f64], values: &[f64]) -> Result<PowerFit> {
    if scales.len() != values.len() {
        return Err(KgError::InvalidArgument(format!(
            "fit needs equal lengths, got {} and {}",
            scales.len(),
            values.len()
        )));
    }
    if scales.len() < 2 {
        return Err(KgError::InvalidArgument(
            "fit needs at least two points".into(),
        ));
    }
    if scales
        .iter()
        .chain(values)
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(KgError::InvalidArgument(
            "fit needs strictly positive finite data".into(),
        ));
    }
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(KgError::InvalidArgument(
            "fit needs at least two distinct scales".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    Ok(PowerFit {
        exponent,
        prefactor: intercept.exp(),
        residual: (ss / n).sqrt(),
    })
}

/// Exponent between two consecutive measurements, `ln(v1/v0) / ln(s1/s0)`.
pub fn pairwise_exponent(s0: f64, v0: f64, s1: f64, v1: f64) -> f64 {
    (v1 / v0).ln() / (s1 / s0).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s = [1.0, 2.0, 4.0, 8.0];
        let v: Vec<f64> = s.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
        let fit = power_law_fit(&s, &v).unwrap();
        assert!((fit.exponent - 1.7).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(power_law_fit(&[1.0], &[1.0]).is_err());
        assert!(power_law_fit(&[1.0, 2.0], &[0.0, 1.0]).is_err());
        assert!(power_law_fit(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }
}
