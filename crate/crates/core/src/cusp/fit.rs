//! Local exponent and slope estimates of a cusp map.

use serde::{Deserialize, Serialize};

use super::IntervalMap;
use crate::error::{Error, Result};
use crate::stats::{linear_fit, LineFit};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Windows are `[delta, 10 delta]` away from the cusp and the end points.
    pub delta: f64,
    /// Log-spaced abscissae per window.
    pub points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { delta: 1e-3, points: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub value: f64,
    /// 95% interval from the regression standard error.
    pub ci: (f64, f64),
    pub rms_residual: f64,
}

impl ParamEstimate {
    fn from_fit(value: f64, se: f64, rms: f64) -> Self {
        ParamEstimate { value, ci: (value - 1.96 * se, value + 1.96 * se), rms_residual: rms }
    }
}

/// Estimates of the constants in the four local expansions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchFit {
    /// Slope at `0+`.
    pub alpha_left: ParamEstimate,
    /// Slope magnitude at `1-`.
    pub alpha_right: ParamEstimate,
    /// Cusp exponent left of `x0`.
    pub b_left: ParamEstimate,
    /// Cusp exponent right of `x0`.
    pub b_right: ParamEstimate,
    pub x0: f64,
    pub config: FitConfig,
}

fn window(cfg: &FitConfig) -> Vec<f64> {
    let n = cfg.points;
    (0..n).map(|k| cfg.delta * 10f64.powf(k as f64 / (n - 1) as f64)).collect()
}

fn rms(fit: &LineFit, x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(a, b)| (b - fit.intercept - fit.slope * a).powi(2)).sum();
    (s / x.len() as f64).sqrt()
}

fn regress(x: Vec<f64>, y: Vec<f64>, what: &str) -> Result<(LineFit, f64)> {
    let (x, y): (Vec<f64>, Vec<f64>) = x.into_iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).unzip();
    if x.len() < 20 {
        return Err(Error::Fit(format!("{what}: only {} usable points", x.len())));
    }
    let f = linear_fit(&x, &y)?;
    let r = rms(&f, &x, &y);
    Ok((f, r))
}

/// Fits `alpha'`, `alpha`, `B'`, `B` on windows `[delta, 10 delta]`.
///
/// Cusp exponents come from the log-log slope of `peak - T` against the
/// distance to `x0`; end slopes from linear regression of `T` next to 0 and 1.
pub fn fit_branch_exponents(map: &dyn IntervalMap, cfg: &FitConfig) -> Result<BranchFit> {
    let x0 = map.cusp().ok_or_else(|| Error::Fit("map has no cusp".into()))?;
    if cfg.points < 3 || !(cfg.delta > 0.0) || 10.0 * cfg.delta >= x0.min(1.0 - x0) {
        return Err(Error::Fit(format!("window [{}, {}] does not fit beside the cusp", cfg.delta, 10.0 * cfg.delta)));
    }
    let top = map.peak_value();
    let w = window(cfg);
    let logd: Vec<f64> = w.iter().map(|d| d.ln()).collect();

    let cusp_fit = |branch: usize, sign: f64| -> Result<ParamEstimate> {
        let y: Vec<f64> = w.iter().map(|d| (top - map.eval_on(branch, x0 + sign * d)).ln()).collect();
        let (f, r) = regress(logd.clone(), y, "cusp exponent")?;
        Ok(ParamEstimate::from_fit(f.slope, f.slope_se, r))
    };
    let b_left = cusp_fit(0, -1.0)?;
    let b_right = cusp_fit(1, 1.0)?;

    let last = map.branch_count() - 1;
    let y: Vec<f64> = w.iter().map(|x| map.eval_on(0, *x)).collect();
    let (f, r) = regress(w.clone(), y, "slope at 0")?;
    let alpha_left = ParamEstimate::from_fit(f.slope, f.slope_se, r);
    let xs: Vec<f64> = w.iter().map(|u| 1.0 - u).collect();
    let y: Vec<f64> = xs.iter().map(|x| map.eval_on(last, *x)).collect();
    let (f, r) = regress(xs, y, "slope at 1")?;
    let alpha_right = ParamEstimate::from_fit(-f.slope, f.slope_se, r);

    Ok(BranchFit { alpha_left, alpha_right, b_left, b_right, x0, config: *cfg })
}

/// Constants of `|T'(x) - T'(y)| <= C_h |T'(x)| |T'(y)| |x - y|^iota` on same-branch pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub c_h: f64,
    pub iota: f64,
    pub pairs: usize,
}

impl HolderFit {
    /// Ratio of the left side to the bound at `(x, y)`; at most 1 where the bound holds.
    pub fn ratio(&self, map: &dyn IntervalMap, branch: usize, x: f64, y: f64) -> f64 {
        let (dx, dy) = (map.derivative_on(branch, x), map.derivative_on(branch, y));
        (dx - dy).abs() / (self.c_h * dx.abs() * dy.abs() * (x - y).abs().powf(self.iota))
    }
}

/// Fits `C_h` for the exponent `iota` as the largest ratio over a grid of
/// same-branch pairs graded toward the branch ends, with a small safety margin.
pub fn fit_holder(map: &dyn IntervalMap, iota: f64, grid: usize) -> Result<HolderFit> {
    if !(iota > 0.0 && iota <= 1.0) {
        return Err(Error::Domain(format!("Hölder exponent must be in (0, 1], got {iota}")));
    }
    let bp = map.breakpoints();
    let mut c: f64 = 0.0;
    let mut pairs = 0;
    for b in 0..bp.len() - 1 {
        let (lo, hi) = (bp[b], bp[b + 1]);
        // graded nodes: dense near both ends of the branch, open at the ends
        let nodes: Vec<f64> = (1..grid)
            .map(|k| {
                let s = k as f64 / grid as f64;
                let g = 0.5 - 0.5 * (std::f64::consts::PI * s).cos();
                lo + (hi - lo) * g.clamp(1e-9, 1.0 - 1e-9)
            })
            .collect();
        // 1 / T' is the quantity whose Hölder constant this is
        let inv: Vec<f64> = nodes.iter().map(|x| 1.0 / map.derivative_on(b, *x)).collect();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let r = (inv[i] - inv[j]).abs() / (nodes[j] - nodes[i]).powf(iota);
                if r.is_finite() {
                    c = c.max(r);
                }
                pairs += 1;
            }
        }
    }
    Ok(HolderFit { c_h: 1.05 * c, iota, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::{CuspParams, SyntheticCusp};

    #[test]
    fn recovers_synthetic_constants() {
        let t = SyntheticCusp::default();
        let f = fit_branch_exponents(&t, &FitConfig::default()).unwrap();
        assert!((f.b_right.value - 0.6).abs() < 0.05, "{:?}", f.b_right);
        assert!((f.b_left.value - 0.7).abs() < 0.05, "{:?}", f.b_left);
        assert!((f.alpha_left.value - 1.8).abs() < 0.1);
        assert!((f.alpha_right.value - 0.5).abs() < 0.1);
    }

    #[test]
    fn error_shrinks_with_the_window() {
        let p = CuspParams { b_right: 0.5, b_left: 0.8, ..CuspParams::default() };
        let t = SyntheticCusp::new(p).unwrap();
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|d| {
                let f = fit_branch_exponents(&t, &FitConfig { delta: *d, points: 40 }).unwrap();
                (f.b_right.value - 0.5).abs() + (f.b_left.value - 0.8).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn window_must_fit() {
        let t = SyntheticCusp::default();
        assert!(fit_branch_exponents(&t, &FitConfig { delta: 0.1, points: 40 }).is_err());
        assert!(matches!(fit_branch_exponents(&t, &FitConfig { delta: 1e-3, points: 10 }), Err(Error::Fit(_))));
    }
}
