//! Drift inequalities for the Casimir along the embedded chain.

use serde::{Deserialize, Serialize};

use crate::dynamics::{casimir, Frame, PhaseState};
use crate::error::{Error, Result};
use crate::noise::NoiseLaw;
use crate::section::MarkovRenewalTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub a_eps: f64,
    pub k_eps: f64,
    /// `(1 - a) + K (1 + a)`, the constant of the `(1 + C)` form.
    pub k_bar: f64,
    /// Smallest sojourn in the trace; the true infimum is unknown.
    pub empirical_inf_tau: f64,
    pub transitions: usize,
    /// Indices violating `C(x_{n+1}) <= a C(x_n) + K (1 + a)`.
    pub violations_ly1: Vec<usize>,
    /// Indices violating `1 + C(x_{n+1}) <= a (1 + C(x_n)) + K_bar`.
    pub violations_wd: Vec<usize>,
    /// Largest `lhs / rhs` over both forms.
    pub worst_ratio: f64,
    pub caveat: String,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.violations_ly1.is_empty() && self.violations_wd.is_empty()
    }
}

/// `sup_eta |H0 + eta H|^2 / m^2` over the support of `law`.
pub fn drift_constant(trace_field: &crate::dynamics::FieldSpec, law: &NoiseLaw) -> f64 {
    let m = trace_field.dissipation_rate();
    let etas: Vec<f64> = match law {
        NoiseLaw::Discrete { support, .. } => support.clone(),
        _ => vec![-law.eps(), 0.0, law.eps()],
    };
    // |H0 + eta H|^2 is convex in eta, so endpoints of the support suffice.
    etas.iter()
        .map(|&e| trace_field.with_eta(e).h_eta().norm_sq())
        .fold(0.0, f64::max)
        / (m * m)
}

pub fn drift_check(law: &NoiseLaw, trace: &MarkovRenewalTrace) -> Result<DriftReport> {
    let field = &trace.field;
    if field.frame != Frame::YFrame {
        return Err(Error::Precondition("the drift inequalities are stated for the additive Y-frame scheme".into()));
    }
    if trace.entries.is_empty() {
        return Err(Error::Precondition("empty trace".into()));
    }
    let m = field.dissipation_rate();
    let tol = trace.section.tol;
    let inf_tau = trace.entries.iter().map(|e| e.tau).fold(f64::INFINITY, f64::min);
    let a = (-m * (inf_tau - tol).max(0.0)).exp();
    let k = drift_constant(field, law);
    let k_bar = (1.0 - a) + k * (1.0 + a);
    let next = |i: usize| -> PhaseState {
        trace.entries.get(i + 1).map_or(trace.end.y, |e| e.x.y)
    };
    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    let mut worst = 0.0f64;
    for (i, e) in trace.entries.iter().enumerate() {
        let c0 = casimir(&e.x.y);
        let c1 = casimir(&next(i));
        let rhs1 = a * c0 + k * (1.0 + a);
        let (lhs2, rhs2) = (1.0 + c1, a * (1.0 + c0) + k_bar);
        let slack = 1e-9;
        if c1 > rhs1 * (1.0 + slack) {
            v1.push(i);
        }
        if lhs2 > rhs2 * (1.0 + slack) {
            v2.push(i);
        }
        worst = worst.max(c1 / rhs1).max(lhs2 / rhs2);
    }
    Ok(DriftReport {
        a_eps: a,
        k_eps: k,
        k_bar,
        empirical_inf_tau: inf_tau,
        transitions: trace.entries.len(),
        violations_ly1: v1,
        violations_wd: v2,
        worst_ratio: worst,
        caveat: "a_eps uses the empirical minimum sojourn minus the integrator tolerance".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FieldSpec;
    use crate::section::{attractor_point, next_crossing, sample_chain, SectionSpec};

    #[test]
    fn unperturbed_constant() {
        let f = FieldSpec::classical(Frame::YFrame);
        let k = drift_constant(&f, &NoiseLaw::DeltaZero);
        assert!((k - (304.0f64 / 3.0).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn chain_satisfies_both_forms() {
        let f = FieldSpec::classical(Frame::YFrame);
        let s = SectionSpec::new(&f, 30.0);
        let x0 = next_crossing(&f, &s, attractor_point(&f, 20.0).unwrap()).unwrap();
        let law = NoiseLaw::uniform(0.05);
        let tr = sample_chain(&f, &law, &s, x0, 300, 4).unwrap();
        let r = drift_check(&law, &tr).unwrap();
        assert!(r.a_eps > 0.0 && r.a_eps < 1.0);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn x_frame_is_rejected() {
        let f = FieldSpec::classical(Frame::YFrame);
        let s = SectionSpec::new(&f, 30.0);
        let x0 = next_crossing(&f, &s, attractor_point(&f, 20.0).unwrap()).unwrap();
        let mut tr = sample_chain(&f, &NoiseLaw::DeltaZero, &s, x0, 5, 4).unwrap();
        tr.field.frame = Frame::XFrame;
        assert!(matches!(drift_check(&NoiseLaw::DeltaZero, &tr), Err(Error::Precondition(_))));
    }
}
