//! One-dimensional piecewise-monotone maps of the unit interval.
//!
//! The main object is the cusp map: an increasing branch on `[0, x0]` and a
//! decreasing branch on `[x0, 1]`, both reaching 1 at `x0` with infinite slope.
//! Closed-form reference maps (doubling, tent, logistic) share the same trait
//! so the transfer-operator code can be checked on known densities.

mod conjugation;
mod empirical;
mod fit;
mod perturb;
mod reference;
mod synthetic;

use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conjugation::{conjugate_map, search_conjugation, ConjugatedMap, ConjugationSearch, ConjugationW};
pub use empirical::{build_empirical_map, build_empirical_map_from_pairs, EmpiricalConfig, EmpiricalMap, Normalization};
pub use fit::{fit_branch_exponents, fit_holder, BranchFit, FitConfig, HolderFit, ParamEstimate};
pub use perturb::{audit_assumptions, make_perturbed_family, AuditEntry, AuditReport, CrossingBranches, PerturbMode,
    Reparametrized};
pub use reference::{Doubling, Logistic, Tent};
pub use synthetic::{CuspParams, SyntheticCusp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MapKind {
    Empirical,
    Synthetic,
    /// Built from another map (conjugation, perturbation).
    Derived,
    Reference,
}

/// A piecewise-monotone map of `[0, 1]`.
///
/// Branch `k` lives on `[b_k, b_{k+1}]` where `b = breakpoints()`. Evaluation
/// through a branch index is what lets a map take different one-sided values at
/// a breakpoint (the doubling map at `1/2`, say).
pub trait IntervalMap: Send + Sync + Debug {
    fn kind(&self) -> MapKind;

    /// `0 = b_0 < b_1 < ... < b_m = 1`.
    fn breakpoints(&self) -> Vec<f64>;

    /// The branch formula, valid on the closed branch interval.
    fn eval_on(&self, branch: usize, x: f64) -> f64;

    /// Derivative of the branch formula; may be infinite at a cusp.
    fn derivative_on(&self, branch: usize, x: f64) -> f64;

    /// Point where the derivative blows up, if any.
    fn cusp(&self) -> Option<f64> {
        None
    }

    /// Value approached at the cusp (1 for normalized maps).
    fn peak_value(&self) -> f64 {
        1.0
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "kind": self.kind(), "x0": self.cusp(), "breakpoints": self.breakpoints() })
    }

    fn branch_count(&self) -> usize {
        self.breakpoints().len() - 1
    }

    fn branch_of(&self, x: f64) -> usize {
        let bp = self.breakpoints();
        let m = bp.len() - 1;
        bp[1..m].partition_point(|b| *b <= x)
    }

    fn eval(&self, x: f64) -> f64 {
        self.eval_on(self.branch_of(x), x)
    }

    fn derivative(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
        }
        if self.cusp() == Some(x) {
            return Err(Error::SingularPoint(x));
        }
        Ok(self.derivative_on(self.branch_of(x), x))
    }

    /// Whether branch `k` increases.
    fn increasing(&self, branch: usize) -> bool {
        let bp = self.breakpoints();
        self.eval_on(branch, bp[branch + 1]) > self.eval_on(branch, bp[branch])
    }

    /// The preimage of `y` under branch `k`, or `None` when `y` is not in its image.
    fn inverse_on(&self, branch: usize, y: f64) -> Option<f64> {
        let bp = self.breakpoints();
        invert_monotone(|x| self.eval_on(branch, x), |x| self.derivative_on(branch, x), bp[branch], bp[branch + 1], y)
    }
}

pub type SharedMap = Arc<dyn IntervalMap>;

/// Solves `f(x) = y` on `[lo, hi]` for monotone `f` by Newton steps kept inside
/// a shrinking bracket.
pub fn invert_monotone(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    y: f64,
) -> Option<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    let inc = fhi >= flo;
    let (ymin, ymax) = if inc { (flo, fhi) } else { (fhi, flo) };
    if !(y >= ymin && y <= ymax) {
        return None;
    }
    if y == flo {
        return Some(lo);
    }
    if y == fhi {
        return Some(hi);
    }
    // g is increasing with a sign change on [a, b]
    let g = |x: f64| if inc { f(x) - y } else { y - f(x) };
    let (mut a, mut b) = (lo, hi);
    let mut x = lo + (hi - lo) * (y - flo) / (fhi - flo);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return Some(x);
        }
        if gx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        if b - a <= 2.0 * f64::EPSILON * b.abs().max(1e-300) {
            break;
        }
        let d = if inc { df(x) } else { -df(x) };
        let newton = x - gx / d;
        x = if d.is_finite() && d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (x - a).min(b - x) <= 0.0 {
            x = 0.5 * (a + b);
        }
    }
    Some(x)
}

/// Scatter of successive values as CSV `m_n,m_next`.
pub fn write_scatter_csv<W: Write>(pairs: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "m_n,m_next")?;
    for (a, b) in pairs {
        writeln!(w, "{},{}", crate::dynamics::fmt17(*a), crate::dynamics::fmt17(*b))?;
    }
    Ok(())
}

/// Orbit `x, T x, T^2 x, ...` of length `n`.
pub fn orbit(map: &dyn IntervalMap, x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut v = x;
    for _ in 0..n {
        out.push(v);
        v = map.eval(v);
    }
    out
}

/// Uniform-grid sup distance `max |f(x) - g(x)|` over `n + 1` points.
pub fn sup_distance(f: &dyn IntervalMap, g: &dyn IntervalMap, n: usize) -> f64 {
    (0..=n)
        .map(|k| {
            let x = k as f64 / n as f64;
            (f.eval(x) - g.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}
