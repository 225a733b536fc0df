//! Smooth change of coordinates `W` with density `N e^{-g x} x^b (1 - x)^b`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{invert_monotone, IntervalMap, MapKind, SharedMap};
use crate::error::{Error, Result};

const CELLS: usize = 4096;

// 8-point Gauss–Legendre on [-1, 1]
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// A distribution function on `[0, 1]` with density `N e^{-gamma_bar x} x^beta_bar (1 - x)^beta_bar`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugationW {
    pub gamma_bar: f64,
    pub beta_bar: f64,
    /// `N`, so that the density integrates to 1.
    pub norm: f64,
    cumulative: Vec<f64>,
}

impl ConjugationW {
    pub fn new(gamma_bar: f64, beta_bar: f64) -> Result<Self> {
        if !gamma_bar.is_finite() || !(beta_bar.is_finite() && beta_bar >= 0.0) {
            return Err(Error::Domain(format!("invalid conjugation parameters ({gamma_bar}, {beta_bar})")));
        }
        let mut w = ConjugationW { gamma_bar, beta_bar, norm: 1.0, cumulative: Vec::new() };
        let mut cum = Vec::with_capacity(CELLS + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..CELLS {
            acc += w.raw_integral(k as f64 / CELLS as f64, (k + 1) as f64 / CELLS as f64);
            cum.push(acc);
        }
        w.norm = 1.0 / acc;
        w.cumulative = cum.into_iter().map(|c| c / acc).collect();
        Ok(w)
    }

    pub fn identity() -> Self {
        ConjugationW::new(0.0, 0.0).expect("valid")
    }

    fn raw_density(&self, x: f64) -> f64 {
        if self.beta_bar == 0.0 {
            (-self.gamma_bar * x).exp()
        } else {
            (-self.gamma_bar * x).exp() * (x * (1.0 - x)).max(0.0).powf(self.beta_bar)
        }
    }

    fn raw_integral(&self, a: f64, b: f64) -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut s = 0.0;
        for (x, w) in GL_X.iter().zip(GL_W) {
            s += w * (self.raw_density(m - h * x) + self.raw_density(m + h * x));
        }
        s * h
    }

    /// `W'(x)`.
    pub fn density(&self, x: f64) -> f64 {
        self.norm * self.raw_density(x)
    }

    /// `W(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let k = ((x * CELLS as f64) as usize).min(CELLS - 1);
        let a = k as f64 / CELLS as f64;
        (self.cumulative[k] + self.norm * self.raw_integral(a, x)).clamp(0.0, 1.0)
    }

    /// `W^{-1}(w)` by monotone root finding inside the bracketing cell.
    pub fn inverse(&self, w: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain(format!("W^-1 needs a value in [0, 1], got {w}")));
        }
        if w == 0.0 || w == 1.0 {
            return Ok(w);
        }
        let k = (self.cumulative.partition_point(|c| *c <= w) - 1).min(CELLS - 1);
        let (a, b) = (k as f64 / CELLS as f64, (k + 1) as f64 / CELLS as f64);
        let (fa, fb) = (self.cdf(a), self.cdf(b));
        let target = w.clamp(fa.min(fb), fa.max(fb));
        let x = invert_monotone(|x| self.cdf(x), |x| self.density(x), a, b, target)
            .ok_or_else(|| Error::Numerical(format!("W^-1({w}) not bracketed")))?;
        if (self.cdf(x) - target).abs() > 1e-12 {
            return Err(Error::Numerical(format!("W^-1({w}) did not converge")));
        }
        Ok(x)
    }

    fn inverse_or_clamp(&self, w: f64) -> f64 {
        self.inverse(w.clamp(0.0, 1.0)).unwrap_or(w.clamp(0.0, 1.0))
    }
}

/// `W o T o W^{-1}`.
#[derive(Clone, Debug)]
pub struct ConjugatedMap {
    base: SharedMap,
    w: Arc<ConjugationW>,
    breakpoints: Vec<f64>,
    /// Infimum of `|T̄'|` over the grid used at construction.
    pub inf_derivative: f64,
}

impl ConjugatedMap {
    pub fn w(&self) -> &ConjugationW {
        &self.w
    }

    /// Infimum of `|T̄'|` over `n` interior grid points, skipping cusp neighborhoods where it is infinite.
    pub fn grid_inf_derivative(&self, n: usize) -> f64 {
        let mut inf = f64::INFINITY;
        for k in 1..n {
            let xb = k as f64 / n as f64;
            let b = self.branch_of(xb);
            let d = self.derivative_on(b, xb).abs();
            if d.is_finite() {
                inf = inf.min(d);
            }
        }
        inf
    }
}

impl IntervalMap for ConjugatedMap {
    fn kind(&self) -> MapKind {
        MapKind::Derived
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn eval_on(&self, branch: usize, x: f64) -> f64 {
        let u = self.w.inverse_or_clamp(x);
        self.w.cdf(self.base.eval_on(branch, u))
    }

    fn derivative_on(&self, branch: usize, x: f64) -> f64 {
        let u = self.w.inverse_or_clamp(x).clamp(1e-12, 1.0 - 1e-12);
        let t = self.base.eval_on(branch, u);
        let td = self.base.derivative_on(branch, u);
        let num = self.w.density(t.clamp(1e-12, 1.0 - 1e-12));
        num * td / self.w.density(u)
    }

    fn cusp(&self) -> Option<f64> {
        self.base.cusp().map(|c| self.w.cdf(c))
    }

    fn peak_value(&self) -> f64 {
        self.w.cdf(self.base.peak_value())
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind(),
            "x0": self.cusp(),
            "gamma_bar": self.w.gamma_bar,
            "beta_bar": self.w.beta_bar,
            "inf_derivative": self.inf_derivative,
            "base": self.base.to_json(),
        })
    }
}

/// Builds `W o T o W^{-1}` and records the grid infimum of `|T̄'|`.
pub fn conjugate_map(map: SharedMap, w: ConjugationW) -> Result<ConjugatedMap> {
    let w = Arc::new(w);
    let breakpoints = map.breakpoints().iter().map(|b| w.cdf(*b)).collect();
    let mut out = ConjugatedMap { base: map, w, breakpoints, inf_derivative: 0.0 };
    out.inf_derivative = out.grid_inf_derivative(2000);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugationSearch {
    pub gamma_bar: f64,
    pub beta_bar: f64,
    pub inf_derivative: f64,
    /// Every `(gamma_bar, beta_bar, inf |T̄'|)` tried.
    pub table: Vec<(f64, f64, f64)>,
}

/// Grid search for the `(gamma_bar, beta_bar)` maximizing `inf |T̄'|`.
pub fn search_conjugation(map: SharedMap, gammas: &[f64], betas: &[f64], grid: usize) -> Result<ConjugationSearch> {
    let mut table = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for &g in gammas {
        for &b in betas {
            let c = conjugate_map(map.clone(), ConjugationW::new(g, b)?)?;
            let inf = c.grid_inf_derivative(grid);
            table.push((g, b, inf));
            if inf > best.0 {
                best = (inf, g, b);
            }
        }
    }
    if table.is_empty() {
        return Err(Error::Precondition("empty search grid".into()));
    }
    Ok(ConjugationSearch { gamma_bar: best.1, beta_bar: best.2, inf_derivative: best.0, table })
}
