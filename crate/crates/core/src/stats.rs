//! Small statistics helpers shared by the estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Linear-interpolated quantile of an unsorted sample, `p` in `[0, 1]`.
pub fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

pub fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Estimate with a standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Batch-means estimate of the mean of a stationary sequence.
pub fn batch_means(v: &[f64], n_batches: usize) -> Result<Estimate> {
    if n_batches < 2 || v.len() < n_batches {
        return Err(Error::Precondition(format!("{} values cannot form {n_batches} batches", v.len())));
    }
    let size = v.len() / n_batches;
    let b: Vec<f64> = (0..n_batches).map(|k| mean(&v[k * size..(k + 1) * size])).collect();
    Ok(Estimate { value: mean(v), std_err: (variance(&b) / n_batches as f64).sqrt() })
}

/// Batch-means estimate of `sum(num) / sum(den)`.
pub fn batch_ratio(num: &[f64], den: &[f64], n_batches: usize) -> Result<Estimate> {
    if num.len() != den.len() {
        return Err(Error::ShapeMismatch { expected: num.len(), got: den.len() });
    }
    if n_batches < 2 || num.len() < n_batches {
        return Err(Error::Precondition(format!("{} values cannot form {n_batches} batches", num.len())));
    }
    let size = num.len() / n_batches;
    let ratios: Vec<f64> = (0..n_batches)
        .map(|k| {
            let r = k * size..(k + 1) * size;
            num[r.clone()].iter().sum::<f64>() / den[r].iter().sum::<f64>()
        })
        .collect();
    let value = num.iter().sum::<f64>() / den.iter().sum::<f64>();
    Ok(Estimate { value, std_err: (variance(&ratios) / n_batches as f64).sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::ShapeMismatch { expected: n, got: y.len() });
    }
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {n}")));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = (sse / (n as f64 - 2.0) / sxx).sqrt();
    Ok(LineFit { slope, intercept, r2, slope_se })
}

/// Kendall rank correlation (tau-a) between two samples.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let p = (x[i] - x[j]) * (y[i] - y[j]);
            // f64::signum maps 0 to 1; ties must count as 0
            if p > 0.0 {
                s += 1.0;
            } else if p < 0.0 {
                s -= 1.0;
            }
        }
    }
    s / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kendall_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&a, &a), 1.0);
        assert_eq!(kendall_tau(&a, &[4.0, 3.0, 2.0, 1.0]), -1.0);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn batch_means_of_constant() {
        let e = batch_means(&[2.0; 100], 20).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.std_err, 0.0);
        let r = batch_ratio(&[3.0; 40], &[1.5; 40], 20).unwrap();
        assert_eq!(r.value, 2.0);
    }
}
