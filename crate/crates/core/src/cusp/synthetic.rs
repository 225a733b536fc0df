//! A closed-form cusp map with prescribed behavior at 0, 1 and the cusp.
//!
//! With `d = x0 - x`, `e = x - x0`, `L = 1 - x0` the branches are
//!
//! ```text
//! left:  1 - A' d^B' + beta' x^(1+psi) (d / x0)^2 + d^2 (p0 + p1 d + p2 d^2)
//! right: 1 - A  e^B  + beta~ (1-x)^(1+kappa) (e / L)^2 + e^2 (q0 + q1 e + q2 e^2)
//! ```
//!
//! The cusp terms are exact. The end terms are switched off quadratically at
//! the cusp, and the polynomial corrections vanish to second order there, so
//! the cusp behavior is untouched up to `O(d^2)`. The three polynomial
//! coefficients per branch are fixed by the end conditions `T(0) = 0`,
//! `T'(0) = alpha'`, `T''(0) = 0` (resp. `T(1) = 0`, `T'(1) = -alpha`,
//! `T''(1) = 0`), which leaves `alpha' x + beta' x^(1+psi)` and
//! `alpha (1-x) + beta~ (1-x)^(1+kappa)` as the end expansions. Monotonicity of
//! the result is checked, not assumed.

use serde::{Deserialize, Serialize};

use super::{IntervalMap, MapKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspParams {
    pub x0: f64,
    /// Slope at 0, `> 1`.
    pub alpha_left: f64,
    pub beta_left: f64,
    pub psi: f64,
    /// Slope magnitude at 1, in `(0, 1)`.
    pub alpha_right: f64,
    pub beta_right: f64,
    pub kappa: f64,
    /// Cusp constant `A'` (left of `x0`).
    pub a_left: f64,
    /// Cusp exponent `B'` (left of `x0`).
    pub b_left: f64,
    /// Cusp constant `A` (right of `x0`).
    pub a_right: f64,
    /// Cusp exponent `B` (right of `x0`).
    pub b_right: f64,
}

impl Default for CuspParams {
    fn default() -> Self {
        CuspParams {
            x0: 0.4,
            alpha_left: 1.8,
            beta_left: 0.5,
            psi: 1.5,
            alpha_right: 0.5,
            beta_right: 0.5,
            kappa: 1.5,
            a_left: 1.9,
            b_left: 0.7,
            a_right: 1.6,
            b_right: 0.6,
        }
    }
}

impl CuspParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.x0 > 0.0 && self.x0 < 1.0, "x0 in (0, 1)"),
            (self.alpha_left > 1.0, "alpha' > 1"),
            (self.beta_left > 0.0, "beta' > 0"),
            (self.psi > 1.0, "psi > 1"),
            (self.alpha_right > 0.0 && self.alpha_right < 1.0, "alpha in (0, 1)"),
            (self.beta_right > 0.0, "beta~ > 0"),
            (self.kappa > 1.0, "kappa > 1"),
            (self.a_left > 0.0 && self.a_right > 0.0, "A, A' > 0"),
            (self.b_left > 0.0 && self.b_left < 1.0, "B' in (0, 1)"),
            (self.b_right > 0.0 && self.b_right < 1.0, "B in (0, 1)"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::Domain(format!("cusp parameters violate {what}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCusp {
    params: CuspParams,
    left_poly: [f64; 3],
    right_poly: [f64; 3],
}

/// Solves the 3x3 system for the coefficients of `s^2 (c0 + c1 s + c2 s^2)`
/// given its value, first and second `s`-derivatives at `s = h`.
fn end_polynomial(h: f64, value: f64, d1: f64, d2: f64) -> Result<[f64; 3]> {
    let m = [[h * h, h.powi(3), h.powi(4)], [2.0 * h, 3.0 * h * h, 4.0 * h.powi(3)], [2.0, 6.0 * h, 12.0 * h * h]];
    let r = [value, d1, d2];
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 {
        return Err(Error::Construction("singular end-condition system".into()));
    }
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][c] = r[row];
        }
        *slot = det(&mc) / d;
    }
    Ok(out)
}

impl SyntheticCusp {
    pub fn new(params: CuspParams) -> Result<Self> {
        params.validate()?;
        let p = &params;
        // left branch in the variable d = x0 - x; x = 0 is d = x0.
        // T(d) = 1 - A' d^B' + poly(d); dT/dx = -dT/dd; d2T/dx2 = d2T/dd2.
        let h = p.x0;
        let (a, b) = (p.a_left, p.b_left);
        let left_poly = end_polynomial(
            h,
            -(1.0 - a * h.powf(b)),
            -p.alpha_left + a * b * h.powf(b - 1.0),
            a * b * (b - 1.0) * h.powf(b - 2.0),
        )?;
        // right branch in e = x - x0; x = 1 is e = 1 - x0.
        let h = 1.0 - p.x0;
        let (a, b) = (p.a_right, p.b_right);
        let right_poly = end_polynomial(
            h,
            -(1.0 - a * h.powf(b)),
            -p.alpha_right + a * b * h.powf(b - 1.0),
            a * b * (b - 1.0) * h.powf(b - 2.0),
        )?;
        let map = SyntheticCusp { params, left_poly, right_poly };
        map.check_monotone()?;
        Ok(map)
    }

    pub fn params(&self) -> &CuspParams {
        &self.params
    }

    fn check_monotone(&self) -> Result<()> {
        let x0 = self.params.x0;
        let n = 4096;
        for k in 0..=n {
            // denser toward both ends of each branch
            let s = 0.5 - 0.5 * (std::f64::consts::PI * k as f64 / n as f64).cos();
            let xl = s * x0;
            let xr = x0 + s * (1.0 - x0);
            if xl < x0 && self.left_derivative(xl) <= 0.0 {
                return Err(Error::Construction(format!("left branch not increasing at x = {xl}")));
            }
            if xr > x0 && self.right_derivative(xr) >= 0.0 {
                return Err(Error::Construction(format!("right branch not decreasing at x = {xr}")));
            }
        }
        for (branch, x) in [(0, 0.0), (1, 1.0)] {
            let v = self.eval_on(branch, x);
            if v.abs() > 1e-12 {
                return Err(Error::Construction(format!("branch {branch} misses 0 at the end point ({v})")));
            }
        }
        Ok(())
    }

    fn left(&self, x: f64) -> f64 {
        let p = &self.params;
        let d = (p.x0 - x).max(0.0);
        let [c0, c1, c2] = self.left_poly;
        1.0 - p.a_left * d.powf(p.b_left)
            + d * d * (c0 + d * (c1 + d * c2))
            + p.beta_left * x.max(0.0).powf(1.0 + p.psi) * (d / p.x0).powi(2)
    }

    fn left_derivative(&self, x: f64) -> f64 {
        let p = &self.params;
        let d = p.x0 - x;
        if d <= 0.0 {
            return f64::INFINITY;
        }
        let [c0, c1, c2] = self.left_poly;
        let x = x.max(0.0);
        let w = (d / p.x0).powi(2);
        let dw = -2.0 * d / (p.x0 * p.x0);
        p.a_left * p.b_left * d.powf(p.b_left - 1.0) - d * (2.0 * c0 + d * (3.0 * c1 + d * 4.0 * c2))
            + p.beta_left * ((1.0 + p.psi) * x.powf(p.psi) * w + x.powf(1.0 + p.psi) * dw)
    }

    fn right(&self, x: f64) -> f64 {
        let p = &self.params;
        let e = (x - p.x0).max(0.0);
        let l = 1.0 - p.x0;
        let u = (1.0 - x).max(0.0);
        let [c0, c1, c2] = self.right_poly;
        1.0 - p.a_right * e.powf(p.b_right)
            + e * e * (c0 + e * (c1 + e * c2))
            + p.beta_right * u.powf(1.0 + p.kappa) * (e / l).powi(2)
    }

    fn right_derivative(&self, x: f64) -> f64 {
        let p = &self.params;
        let e = x - p.x0;
        if e <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let l = 1.0 - p.x0;
        let u = (1.0 - x).max(0.0);
        let [c0, c1, c2] = self.right_poly;
        let w = (e / l).powi(2);
        let dw = 2.0 * e / (l * l);
        -p.a_right * p.b_right * e.powf(p.b_right - 1.0)
            + e * (2.0 * c0 + e * (3.0 * c1 + e * 4.0 * c2))
            + p.beta_right * (-(1.0 + p.kappa) * u.powf(p.kappa) * w + u.powf(1.0 + p.kappa) * dw)
    }
}

impl Default for SyntheticCusp {
    fn default() -> Self {
        SyntheticCusp::new(CuspParams::default()).expect("default parameters are valid")
    }
}

impl IntervalMap for SyntheticCusp {
    fn kind(&self) -> MapKind {
        MapKind::Synthetic
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.params.x0, 1.0]
    }

    fn eval_on(&self, branch: usize, x: f64) -> f64 {
        if branch == 0 {
            self.left(x)
        } else {
            self.right(x)
        }
    }

    fn derivative_on(&self, branch: usize, x: f64) -> f64 {
        if branch == 0 {
            self.left_derivative(x)
        } else {
            self.right_derivative(x)
        }
    }

    fn cusp(&self) -> Option<f64> {
        Some(self.params.x0)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "kind": self.kind(), "x0": self.params.x0, "params": self.params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn end_values_and_slopes() {
        let t = SyntheticCusp::default();
        let p = *t.params();
        assert!(t.eval(0.0).abs() < 1e-14);
        assert!(t.eval(1.0).abs() < 1e-14);
        assert!((t.derivative(0.0).unwrap() - p.alpha_left).abs() < 1e-12);
        assert!((t.derivative(1.0).unwrap() + p.alpha_right).abs() < 1e-12);
        assert_eq!(t.eval(p.x0), 1.0);
    }

    #[test]
    fn cusp_value_is_approached() {
        let t = SyntheticCusp::default();
        let x0 = t.params().x0;
        assert!(t.eval(x0 - 1e-8) > 1.0 - 1e-4);
        assert!(t.eval(x0 + 1e-8) > 1.0 - 1e-4);
        assert!(matches!(t.derivative(x0), Err(Error::SingularPoint(_))));
    }

    #[test]
    fn derivative_matches_central_differences() {
        let t = SyntheticCusp::default();
        for k in 1..200 {
            let x = k as f64 / 200.0;
            if (x - 0.4).abs() < 0.01 {
                continue;
            }
            let h = 1e-6;
            let fd = (t.eval(x + h) - t.eval(x - h)) / (2.0 * h);
            let d = t.derivative(x).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "x = {x}: {d} vs {fd}");
        }
    }

    #[test]
    fn second_derivative_vanishes_at_the_ends() {
        let t = SyntheticCusp::default();
        let h = 1e-4;
        let d2_0 = (t.eval(2.0 * h) - 2.0 * t.eval(h) + t.eval(0.0)) / (h * h);
        let d2_1 = (t.eval(1.0 - 2.0 * h) - 2.0 * t.eval(1.0 - h) + t.eval(1.0)) / (h * h);
        assert!(d2_0.abs() < 0.1 && d2_1.abs() < 0.1, "{d2_0} {d2_1}");
    }

    #[test]
    fn rejects_out_of_range_exponents() {
        let bad = CuspParams { b_right: 1.2, ..CuspParams::default() };
        assert!(SyntheticCusp::new(bad).is_err());
        let bad = CuspParams { alpha_left: 0.9, ..CuspParams::default() };
        assert!(SyntheticCusp::new(bad).is_err());
    }

    #[test]
    fn non_monotone_construction_fails() {
        let bad = CuspParams { a_left: 8.0, ..CuspParams::default() };
        assert!(matches!(SyntheticCusp::new(bad), Err(Error::Construction(_))));
    }
}
