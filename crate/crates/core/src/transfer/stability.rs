//! Convergence of the perturbed invariant densities along a ladder of
//! deterministic perturbation sizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_ulam, l1_distance, stationary_density, Density};
use crate::cusp::{audit_assumptions, make_perturbed_family, AuditReport, PerturbMode, SyntheticCusp};
use crate::error::{Error, Result};
use crate::stats::kendall_tau;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub eps: f64,
    pub distance: f64,
    pub audit: AuditReport,
    /// Set when the audit fails or the distance is not below the previous entry's.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n_bins: usize,
    pub mode: PerturbMode,
    pub entries: Vec<StabilityEntry>,
    /// Kendall tau between `eps` and the distance.
    pub kendall_tau: f64,
    pub monotone: bool,
    #[serde(skip)]
    pub base_density: Option<Density>,
    #[serde(skip)]
    pub densities: Vec<Density>,
}

impl StabilityReport {
    pub fn final_distance(&self) -> f64 {
        self.entries.last().map_or(f64::NAN, |e| e.distance)
    }
}

pub fn statistical_stability_experiment(
    base: &SyntheticCusp,
    ladder: &[f64],
    n_bins: usize,
    mode: PerturbMode,
) -> Result<StabilityReport> {
    if ladder.is_empty() {
        return Err(Error::Precondition("empty perturbation ladder".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("perturbation ladder must be strictly decreasing".into()));
    }
    if let Some(e) = ladder.iter().find(|e| !(**e == 0.0 || (**e >= 1e-4 && e.is_finite()))) {
        return Err(Error::Precondition(format!("perturbation size {e} is neither 0 nor >= 1e-4")));
    }
    let rho = stationary_density(&build_ulam(base, n_bins)?, 1e-12)?;
    let runs: Vec<(StabilityEntry, Density)> = ladder
        .par_iter()
        .map(|&eps| {
            let t = make_perturbed_family(base, eps, mode)?;
            let audit = audit_assumptions(base, t.as_ref(), eps);
            let rho_eps = stationary_density(&build_ulam(t.as_ref(), n_bins)?, 1e-12)?;
            let distance = l1_distance(&rho, &rho_eps)?;
            let flagged = !audit.all_pass();
            Ok((StabilityEntry { eps, distance, audit, flagged }, rho_eps))
        })
        .collect::<Result<_>>()?;
    let (mut entries, densities): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut monotone = true;
    for k in 1..entries.len() {
        if !(entries[k].distance < entries[k - 1].distance) {
            entries[k].flagged = true;
            monotone = false;
        }
    }
    let eps: Vec<f64> = entries.iter().map(|e| e.eps).collect();
    let dist: Vec<f64> = entries.iter().map(|e| e.distance).collect();
    Ok(StabilityReport {
        n_bins,
        mode,
        kendall_tau: kendall_tau(&eps, &dist),
        monotone,
        entries,
        base_density: Some(rho),
        densities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_perturbation_gives_zero_distance() {
        let r = statistical_stability_experiment(&SyntheticCusp::default(), &[0.05, 0.0], 256, PerturbMode::default())
            .unwrap();
        assert!(r.entries[1].distance <= 1e-8);
        assert!(r.entries[0].distance > 0.0);
    }

    #[test]
    fn ladder_must_decrease() {
        let b = SyntheticCusp::default();
        assert!(statistical_stability_experiment(&b, &[0.01, 0.05], 64, PerturbMode::default()).is_err());
        assert!(statistical_stability_experiment(&b, &[0.01, 1e-5], 64, PerturbMode::default()).is_err());
    }
}
