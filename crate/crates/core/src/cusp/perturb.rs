//! Perturbed cusp maps and the audit of the closeness assumptions.
//!
//! The default deformation is a reparametrization `T_eps = T o phi` with
//! `phi(x) = x + s x (1 - x)`, `s = -k eps`. It moves the cusp by about
//! `k eps x0 (1 - x0)`, scales the cusp constants by `phi'(x_eps)^B`, the end
//! slopes by `1 +- s`, and keeps every branch on the same side of the
//! unperturbed one, so the branches meet only at 0 and 1. The same formula with
//! `eps` replaced by a signed noise value gives the random family.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fit_holder, CuspParams, IntervalMap, MapKind, SharedMap, SyntheticCusp};
use crate::error::{Error, Result};

/// `T o phi_s` with `phi_s(x) = x + s x (1 - x)`, `|s| < 1`.
#[derive(Clone, Debug)]
pub struct Reparametrized {
    base: SharedMap,
    s: f64,
    breakpoints: Vec<f64>,
}

impl Reparametrized {
    pub fn new(base: SharedMap, s: f64) -> Result<Self> {
        if !(s.abs() < 1.0) {
            return Err(Error::Construction(format!("reparametrization needs |s| < 1, got {s}")));
        }
        let mut r = Reparametrized { base, s, breakpoints: Vec::new() };
        r.breakpoints = r.base.breakpoints().iter().map(|b| r.phi_inv(*b)).collect();
        Ok(r)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn phi(&self, x: f64) -> f64 {
        x + self.s * x * (1.0 - x)
    }

    pub fn phi_inv(&self, u: f64) -> f64 {
        if self.s == 0.0 {
            return u;
        }
        // root of s x^2 - (1 + s) x + u = 0 in [0, 1], written without cancellation
        let a = 1.0 + self.s;
        2.0 * u / (a + (a * a - 4.0 * self.s * u).max(0.0).sqrt())
    }
}

impl IntervalMap for Reparametrized {
    fn kind(&self) -> MapKind {
        if self.s == 0.0 {
            self.base.kind()
        } else {
            MapKind::Derived
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn eval_on(&self, branch: usize, x: f64) -> f64 {
        self.base.eval_on(branch, self.phi(x))
    }

    fn derivative_on(&self, branch: usize, x: f64) -> f64 {
        self.base.derivative_on(branch, self.phi(x)) * (1.0 + self.s * (1.0 - 2.0 * x))
    }

    fn cusp(&self) -> Option<f64> {
        self.base.cusp().map(|c| self.phi_inv(c))
    }

    fn peak_value(&self) -> f64 {
        self.base.peak_value()
    }

    fn inverse_on(&self, branch: usize, y: f64) -> Option<f64> {
        self.base.inverse_on(branch, y).map(|u| self.phi_inv(u))
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "kind": self.kind(), "x0": self.cusp(), "s": self.s, "base": self.base.to_json() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PerturbMode {
    /// `T o phi_s` with `s = -k eps`.
    Reparametrize { k: f64 },
    /// Rebuild the synthetic map with `x0 + dx0 eps` and every constant scaled by `1 + dconst eps`.
    Parametric { dx0: f64, dconst: f64 },
}

impl Default for PerturbMode {
    fn default() -> Self {
        PerturbMode::Reparametrize { k: 1.0 }
    }
}

/// `T_eps` from a synthetic base map.
pub fn make_perturbed_family(base: &SyntheticCusp, eps: f64, mode: PerturbMode) -> Result<SharedMap> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("perturbation size must be non-negative, got {eps}")));
    }
    match mode {
        PerturbMode::Reparametrize { k } => {
            let shared: SharedMap = Arc::new(base.clone());
            Ok(Arc::new(Reparametrized::new(shared, -k * eps)?))
        }
        PerturbMode::Parametric { dx0, dconst } => {
            let p = base.params();
            let f = 1.0 + dconst * eps;
            let q = CuspParams {
                x0: p.x0 + dx0 * eps,
                alpha_left: p.alpha_left * f,
                alpha_right: p.alpha_right * f,
                a_left: p.a_left * f,
                a_right: p.a_right * f,
                ..*p
            };
            Ok(Arc::new(SyntheticCusp::new(q).map_err(|e| Error::Construction(e.to_string()))?))
        }
    }
}

/// A map whose left branch is bent across the unperturbed one; used to show the
/// non-intersection audit failing.
#[derive(Clone, Debug)]
pub struct CrossingBranches {
    base: SharedMap,
    amp: f64,
}

impl CrossingBranches {
    pub fn new(base: SharedMap, amp: f64) -> Self {
        CrossingBranches { base, amp }
    }

    fn bump(&self, x: f64) -> (f64, f64) {
        let c = self.base.cusp().unwrap_or(0.5);
        let m = 0.5 * c;
        (self.amp * x * (x - c) * (x - m), self.amp * (3.0 * x * x - 2.0 * x * (c + m) + c * m))
    }
}

impl IntervalMap for CrossingBranches {
    fn kind(&self) -> MapKind {
        MapKind::Derived
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
    fn eval_on(&self, branch: usize, x: f64) -> f64 {
        let v = self.base.eval_on(branch, x);
        if branch == 0 {
            v + self.bump(x).0
        } else {
            v
        }
    }
    fn derivative_on(&self, branch: usize, x: f64) -> f64 {
        let d = self.base.derivative_on(branch, x);
        if branch == 0 {
            d + self.bump(x).1
        } else {
            d
        }
    }
    fn cusp(&self) -> Option<f64> {
        self.base.cusp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub pass: bool,
    /// The audited quantity (a distance, an infimum, a fitted constant).
    pub value: f64,
    /// Distance from the unperturbed value or from the threshold, whichever the assumption is about.
    pub margin: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub eps: f64,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Slack allowed in the closeness checks, per unit of `eps`.
const CLOSENESS_PER_EPS: f64 = 50.0;
const GRID: usize = 10_000;

fn expansion_on_first_cylinder(map: &dyn IntervalMap) -> Option<f64> {
    let x0 = map.cusp()?;
    let last = map.branch_count() - 1;
    let a0 = map.inverse_on(last, x0)?;
    let b1 = map.inverse_on(last, a0)?;
    let (lo, hi) = if b1 < a0 { (b1, a0) } else { (a0, b1) };
    let n = 2000;
    Some((0..=n).map(|k| map.derivative_on(last, lo + (hi - lo) * k as f64 / n as f64).abs()).fold(f64::INFINITY, f64::min))
}

/// Checks the perturbed map against the closeness, regularity and expansion assumptions.
pub fn audit_assumptions(base: &dyn IntervalMap, pert: &dyn IntervalMap, eps: f64) -> AuditReport {
    let mut entries = Vec::new();
    let slack = CLOSENESS_PER_EPS * eps + 1e-9;
    let mut push = |name: &str, pass: bool, value: f64, margin: f64, note: &str| {
        entries.push(AuditEntry { name: name.into(), pass, value, margin, note: note.into() })
    };
    let grid: Vec<f64> = (0..=GRID).map(|k| k as f64 / GRID as f64).collect();

    // A: each branch onto [0, 1]
    let bp = pert.breakpoints();
    let mut onto: f64 = 0.0;
    for b in 0..bp.len() - 1 {
        let (u, v) = (pert.eval_on(b, bp[b]), pert.eval_on(b, bp[b + 1]));
        onto = onto.max(u.min(v).abs()).max((pert.peak_value() - u.max(v)).abs());
    }
    let monotone = (0..bp.len() - 1).all(|b| {
        let inc = pert.increasing(b);
        (1..200).all(|k| {
            let x = bp[b] + (bp[b + 1] - bp[b]) * k as f64 / 200.0;
            let d = pert.derivative_on(b, x);
            if inc {
                d > 0.0
            } else {
                d < 0.0
            }
        })
    });
    push("A_full_branches", onto <= 1e-9 && monotone, onto, onto, "branch images cover [0, 1]; branches strictly monotone");

    // B: C0 closeness
    let c0 = grid.iter().map(|x| (pert.eval(*x) - base.eval(*x)).abs()).fold(0.0, f64::max);
    push("B_c0_distance", c0.is_finite(), c0, c0, "reported; scales like eps^min(B, B') because the cusp moves");

    // B: derivative convergence away from the cusp, and A7 outside an eps-sized ball
    let x0 = base.cusp().unwrap_or(0.5);
    let xe = pert.cusp().unwrap_or(0.5);
    let rel_deriv = |radius: f64| {
        grid.iter()
            .filter(|x| (**x - x0).abs() > radius && (**x - xe).abs() > radius && **x > 0.0 && **x < 1.0)
            .filter(|x| base.branch_of(**x) == pert.branch_of(**x))
            .map(|x| {
                let d0 = base.derivative_on(base.branch_of(*x), *x);
                let d1 = pert.derivative_on(pert.branch_of(*x), *x);
                (d1 / d0 - 1.0).abs()
            })
            .fold(0.0, f64::max)
    };
    let fixed = rel_deriv(0.05);
    push("B_derivative_ratio", fixed <= slack, fixed, fixed, "max |DT_eps / DT - 1| off a 0.05-ball around the cusp");
    let ball = 10.0 * (xe - x0).abs() + 1e-3;
    let a7 = rel_deriv(ball);
    push("A7_vertical_derivatives", a7 <= slack, a7, a7, "max |DT_eps / DT - 1| outside a ball of 10x the cusp shift");

    // C: Hölder constants of the derivative, report only
    let (hb, hp) = (fit_holder(base, 0.25, 160), fit_holder(pert, 0.25, 160));
    let (cb, cp) = (hb.map(|h| h.c_h).unwrap_or(f64::NAN), hp.map(|h| h.c_h).unwrap_or(f64::NAN));
    push("C_holder_constant", cp.is_finite(), cp, (cp - cb).abs(), "fitted C_h at iota = 1/4; no threshold");

    // D: expansion on (b_1, a_0)
    let db = expansion_on_first_cylinder(base).unwrap_or(f64::NAN);
    let dp = expansion_on_first_cylinder(pert).unwrap_or(f64::NAN);
    push("D_expansion", dp > 1.0, dp, dp - 1.0, "inf |DT_eps| on (b_1, a_0) must exceed 1");
    push("D_expansion_change", (dp - db).abs() <= slack, (dp - db).abs(), (dp - db).abs(), "|d_(1,0) - d_(eps,1,0)|");

    // horizontal closeness of inverse branches
    let nb = base.branch_count().min(pert.branch_count());
    let mut horiz: f64 = 0.0;
    for b in 0..nb {
        for k in 0..=1000 {
            let y = k as f64 / 1000.0 * base.peak_value().min(pert.peak_value());
            if let (Some(u), Some(v)) = (base.inverse_on(b, y), pert.inverse_on(b, y)) {
                horiz = horiz.max((u - v).abs());
            }
        }
    }
    push("horizontal_closeness", horiz <= slack, horiz, horiz, "sup |T_eps,k^-1 - T_k^-1|");

    // A8: same-index branches do not cross inside their common domain
    let bpb = base.breakpoints();
    let mut crossings = 0;
    let mut separation = f64::INFINITY;
    for b in 0..nb {
        let lo = bpb[b].max(bp[b]);
        let hi = bpb[b + 1].min(bp[b + 1]);
        let mut sign = 0.0;
        for k in 1..2000 {
            let x = lo + (hi - lo) * k as f64 / 2000.0;
            let diff = pert.eval_on(b, x) - base.eval_on(b, x);
            separation = separation.min(diff.abs());
            if diff.abs() <= 1e-12 {
                continue;
            }
            if sign != 0.0 && diff.signum() != sign {
                crossings += 1;
            }
            sign = diff.signum();
        }
    }
    push("A8_no_branch_crossing", crossings == 0, crossings as f64, separation, "branches meet only at 0 and 1");

    AuditReport { eps, entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_perturbation_is_identity() {
        let base = SyntheticCusp::default();
        let p = make_perturbed_family(&base, 0.0, PerturbMode::default()).unwrap();
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            assert_eq!(p.eval(x), base.eval(x));
        }
    }

    #[test]
    fn phi_inverse_roundtrip() {
        let base: SharedMap = Arc::new(SyntheticCusp::default());
        for s in [-0.3, -0.01, 0.02, 0.5] {
            let r = Reparametrized::new(base.clone(), s).unwrap();
            for k in 0..=20 {
                let x = k as f64 / 20.0;
                assert!((r.phi_inv(r.phi(x)) - x).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn audit_of_identical_maps_passes_with_zero_margins() {
        let base = SyntheticCusp::default();
        let r = audit_assumptions(&base, &base, 0.0);
        assert!(r.all_pass(), "{r:?}");
        for name in ["B_c0_distance", "B_derivative_ratio", "A7_vertical_derivatives", "horizontal_closeness"] {
            assert_eq!(r.get(name).unwrap().margin, 0.0);
        }
    }

    #[test]
    fn small_perturbation_passes_audit() {
        let base = SyntheticCusp::default();
        let p = make_perturbed_family(&base, 0.01, PerturbMode::default()).unwrap();
        let r = audit_assumptions(&base, p.as_ref(), 0.01);
        assert!(r.all_pass(), "{r:#?}");
    }

    #[test]
    fn crossing_branches_fail_a8() {
        let base: SharedMap = Arc::new(SyntheticCusp::default());
        let bad = CrossingBranches::new(base.clone(), 0.5);
        let r = audit_assumptions(base.as_ref(), &bad, 0.01);
        assert!(!r.get("A8_no_branch_crossing").unwrap().pass);
        assert!(r.get("D_expansion").unwrap().pass);
    }

    #[test]
    fn too_large_reparametrization_is_rejected() {
        let base = SyntheticCusp::default();
        assert!(matches!(
            make_perturbed_family(&base, 2.0, PerturbMode::Reparametrize { k: 1.0 }),
            Err(Error::Construction(_))
        ));
    }
}
