//! Inducing a cusp map on `I = (a'_0, a_0) \ {x0}` and rebuilding the global
//! invariant measure from the induced one.
//!
//! With `T_1` the increasing and `T_2` the decreasing branch:
//! `a'_0 = T_1^-1 x0`, `a_0 = T_2^-1 x0`, `a'_p = T_1^-1 a'_{p-1}`,
//! `a_p = T_2^-1 a'_{p-1}`, and `b'_p`, `b_p` are the left and right preimages
//! of `a_{p-1}`. The cylinder `Z_i = (b'_{i-1}, b'_i) u (b_i, b_{i-1})` (with
//! `b'_0 = a'_0`, `b_0 = a_0`) returns to `I` after exactly `i` steps.

use serde::{Deserialize, Serialize};

use super::{bin_index, build_ulam, l1_distance, stationary_density, Density};
use crate::cusp::IntervalMap;
use crate::error::{Error, Result};
use crate::stats::{batch_means, linear_fit, LineFit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducedScheme {
    pub x0: f64,
    pub a0_prime: f64,
    pub a0: f64,
    /// `a_p` for `p = 0, 1, ...`.
    pub a: Vec<f64>,
    pub a_prime: Vec<f64>,
    /// `b_p` for `p = 1, 2, ...` (index 0 holds `b_1`).
    pub b: Vec<f64>,
    pub b_prime: Vec<f64>,
}

fn inverse(map: &dyn IntervalMap, branch: usize, y: f64, what: &str) -> Result<f64> {
    match map.inverse_on(branch, y) {
        Some(x) if x > 0.0 && x < 1.0 => Ok(x),
        other => Err(Error::Construction(format!("{what}: inverse branch {branch} of {y} gave {other:?}"))),
    }
}

impl InducedScheme {
    /// Builds the sequences until `x0 - b'_p` falls below `floor` or `p_max` is reached.
    pub fn new(map: &dyn IntervalMap, p_max: usize, floor: f64) -> Result<Self> {
        let x0 = map.cusp().ok_or_else(|| Error::Precondition("map has no cusp".into()))?;
        if map.branch_count() != 2 || !map.increasing(0) || map.increasing(1) {
            return Err(Error::Precondition("inducing needs an increasing then a decreasing branch".into()));
        }
        let a0_prime = inverse(map, 0, x0, "a'_0")?;
        let a0 = inverse(map, 1, x0, "a_0")?;
        let (mut a, mut a_prime, mut b, mut b_prime) = (vec![a0], vec![a0_prime], Vec::new(), Vec::new());
        for p in 1..=p_max {
            let prev_a = a[p - 1];
            let bp_left = inverse(map, 0, prev_a, "b'_p")?;
            let bp_right = inverse(map, 1, prev_a, "b_p")?;
            if x0 - bp_left < floor || bp_right - x0 < floor {
                break;
            }
            b_prime.push(bp_left);
            b.push(bp_right);
            a.push(inverse(map, 1, a_prime[p - 1], "a_p")?);
            a_prime.push(inverse(map, 0, a_prime[p - 1], "a'_p")?);
        }
        if b.len() < 2 {
            return Err(Error::Construction("cylinder sequences are too short".into()));
        }
        Ok(InducedScheme { x0, a0_prime, a0, a, a_prime, b, b_prime })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.a0_prime && x < self.a0 && x != self.x0
    }

    /// Index `i` of the cylinder `Z_i` holding `x`, if resolved by the computed sequences.
    pub fn cylinder_of(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        if x < self.x0 {
            // b'_1 < b'_2 < ... increase to x0
            let k = self.b_prime.partition_point(|b| *b <= x);
            (k < self.b_prime.len()).then_some(k + 1)
        } else {
            // b_1 > b_2 > ... decrease to x0
            let k = self.b.partition_point(|b| *b >= x);
            (k < self.b.len()).then_some(k + 1)
        }
    }

    /// Fit of `ln(x0 - b'_p)` (left) or `ln(b_p - x0)` (right) against `p`,
    /// skipping the first `skip` terms.
    pub fn scaling_fit(&self, right: bool, skip: usize) -> Result<LineFit> {
        let seq = if right { &self.b } else { &self.b_prime };
        let (p, y): (Vec<f64>, Vec<f64>) =
            seq.iter().enumerate().skip(skip).map(|(k, b)| ((k + 1) as f64, (b - self.x0).abs().ln())).unzip();
        linear_fit(&p, &y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PianigianiConfig {
    pub n_orbit: usize,
    pub n_bins: usize,
    pub burn_in: usize,
    pub x_start: f64,
    pub capture: f64,
    pub max_deficit: f64,
    pub n_batches: usize,
    /// Leading terms dropped from the scaling regression.
    pub skip: usize,
}

impl Default for PianigianiConfig {
    fn default() -> Self {
        PianigianiConfig {
            n_orbit: 1_000_000,
            n_bins: 512,
            burn_in: 1000,
            x_start: 0.123_456_789,
            capture: 0.995,
            max_deficit: 0.01,
            n_batches: 20,
            skip: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PianigianiReport {
    pub scheme: InducedScheme,
    pub n_returns: usize,
    /// `(tau_i, mu_I(Z_i))`.
    pub cylinder_masses: Vec<(usize, f64)>,
    /// Returns whose observed time disagrees with the cylinder found from the sequences.
    pub cylinder_mismatches: usize,
    pub tau_max: usize,
    /// Share of the reconstructed measure lost by truncating at `tau_max`.
    pub deficit: f64,
    pub truncation_warning: bool,
    /// `C_r = 1 / sum_i tau_i mu_I(Z_i)`.
    pub c_r: f64,
    pub c_r_std_err: f64,
    /// `mu(I)` from the Ulam density.
    pub mu_i_ulam: f64,
    /// `C_r sum_i tau_i mu_I(Z_i)`.
    pub normalization: f64,
    pub kac_z: f64,
    pub reconstruction_l1: f64,
    pub slope_left: LineFit,
    pub slope_left_expected: Option<f64>,
    pub slope_right: LineFit,
    #[serde(skip)]
    pub reconstructed: Vec<f64>,
    #[serde(skip)]
    pub ulam: Option<Density>,
}

/// Induced-measure reconstruction against the Ulam density. `expected_slope`
/// is `-ln(alpha') / B'` when the branch constants are known.
pub fn pianigiani_check(
    map: &dyn IntervalMap,
    cfg: &PianigianiConfig,
    expected_slope: Option<f64>,
) -> Result<PianigianiReport> {
    let scheme = InducedScheme::new(map, 200, 1e-12)?;
    let n = cfg.n_bins;
    let ulam = stationary_density(&build_ulam(map, n)?, 1e-12)?;

    let mut x = cfg.x_start;
    for _ in 0..cfg.burn_in {
        x = map.eval(x);
    }
    let mut orbit = Vec::with_capacity(cfg.n_orbit);
    for _ in 0..cfg.n_orbit {
        if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
            return Err(Error::Numerical(format!("orbit left the interval: {x}")));
        }
        orbit.push(x);
        x = map.eval(x);
    }
    let visits: Vec<usize> = (0..orbit.len()).filter(|&k| scheme.contains(orbit[k])).collect();
    if visits.len() < cfg.n_batches + 1 {
        return Err(Error::Numerical(format!("only {} returns to the inducing interval", visits.len())));
    }
    let taus: Vec<usize> = visits.windows(2).map(|w| w[1] - w[0]).collect();
    let n_ret = taus.len();
    let mut mismatches = 0;
    let max_tau = *taus.iter().max().unwrap();
    let mut counts = vec![0usize; max_tau + 1];
    for (k, &t) in taus.iter().enumerate() {
        counts[t] += 1;
        if scheme.cylinder_of(orbit[visits[k]]).is_some_and(|i| i != t) {
            mismatches += 1;
        }
    }
    let cylinder_masses: Vec<(usize, f64)> =
        (1..=max_tau).filter(|t| counts[*t] > 0).map(|t| (t, counts[t] as f64 / n_ret as f64)).collect();

    let mut acc = 0.0;
    let mut tau_max = max_tau;
    for (t, m) in &cylinder_masses {
        acc += m;
        if acc >= cfg.capture {
            tau_max = *t;
            break;
        }
    }

    let total_time: usize = taus.iter().sum();
    let c_r = n_ret as f64 / total_time as f64;
    let tau_f: Vec<f64> = taus.iter().map(|t| *t as f64).collect();
    let mean_tau = batch_means(&tau_f, cfg.n_batches)?;
    let c_r_std_err = mean_tau.std_err / (mean_tau.value * mean_tau.value);
    let normalization = c_r * cylinder_masses.iter().map(|(t, m)| *t as f64 * m).sum::<f64>();

    // mu(B) = C_r sum_i sum_{j < tau_i} mu_I(T^-j B n Z_i), with mu_I the empirical return measure
    let mut hist = vec![0.0; n];
    let mut lost = 0usize;
    for (k, &t) in taus.iter().enumerate() {
        if t > tau_max {
            lost += t;
            continue;
        }
        for j in 0..t {
            hist[bin_index(orbit[visits[k] + j], n)] += 1.0;
        }
    }
    let scale = c_r / n_ret as f64 * n as f64;
    let reconstructed: Vec<f64> = hist.iter().map(|h| h * scale).collect();
    let deficit = lost as f64 / total_time as f64;
    let reconstruction_l1 = reconstructed.iter().zip(ulam.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
    let mu_i_ulam = ulam.mass_of(scheme.a0_prime, scheme.a0);

    let slope_left = scheme.scaling_fit(false, cfg.skip)?;
    let slope_right = scheme.scaling_fit(true, cfg.skip)?;
    Ok(PianigianiReport {
        n_returns: n_ret,
        cylinder_masses,
        cylinder_mismatches: mismatches,
        tau_max,
        deficit,
        truncation_warning: deficit > cfg.max_deficit,
        c_r,
        c_r_std_err,
        mu_i_ulam,
        normalization,
        kac_z: (c_r - mu_i_ulam).abs() / c_r_std_err,
        reconstruction_l1,
        slope_left,
        slope_left_expected: expected_slope,
        slope_right,
        scheme,
        reconstructed,
        ulam: Some(ulam),
    })
}

/// L1 distance between the reconstruction and the Ulam density, renormalized.
pub fn renormalized_l1(report: &PianigianiReport) -> Result<f64> {
    let ulam = report.ulam.as_ref().ok_or_else(|| Error::Precondition("report has no Ulam density".into()))?;
    l1_distance(&Density::new(report.reconstructed.clone())?, ulam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::{CuspParams, SyntheticCusp, Tent};

    #[test]
    fn sequences_are_ordered() {
        let t = SyntheticCusp::default();
        let s = InducedScheme::new(&t, 200, 1e-12).unwrap();
        assert!(s.a0_prime < s.x0 && s.x0 < s.a0);
        assert!(s.b_prime.windows(2).all(|w| w[0] < w[1]) && s.b_prime.iter().all(|b| *b > s.a0_prime && *b < s.x0));
        assert!(s.b.windows(2).all(|w| w[0] > w[1]) && s.b.iter().all(|b| *b > s.x0 && *b < s.a0));
        assert!(s.a_prime.windows(2).all(|w| w[0] > w[1]));
        assert!(s.a.windows(2).all(|w| w[0] < w[1]));
        // T b'_p = T b_p = a_{p-1}
        for p in 1..s.b.len() {
            assert!((t.eval(s.b[p - 1]) - s.a[p - 1]).abs() < 1e-9);
            assert!((t.eval(s.b_prime[p - 1]) - s.a[p - 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn cylinders_have_their_return_times() {
        let t = SyntheticCusp::default();
        let s = InducedScheme::new(&t, 200, 1e-12).unwrap();
        for i in 1..8 {
            let (l, r) = if i == 1 { (s.a0_prime, s.b_prime[0]) } else { (s.b_prime[i - 2], s.b_prime[i - 1]) };
            for x in [l + 0.3 * (r - l), l + 0.7 * (r - l)] {
                assert_eq!(s.cylinder_of(x), Some(i));
                let mut y = t.eval(x);
                let mut k = 1;
                while !s.contains(y) {
                    y = t.eval(y);
                    k += 1;
                }
                assert_eq!(k, i, "x = {x}");
            }
        }
    }

    #[test]
    fn needs_a_cusp_map() {
        assert!(InducedScheme::new(&Tent, 50, 1e-12).is_err());
    }

    #[test]
    fn short_orbit_check_runs() {
        let p = CuspParams { b_left: 0.7, b_right: 0.6, ..CuspParams::default() };
        let t = SyntheticCusp::new(p).unwrap();
        let cfg = PianigianiConfig { n_orbit: 100_000, n_bins: 128, ..PianigianiConfig::default() };
        let r = pianigiani_check(&t, &cfg, None).unwrap();
        assert!((r.normalization - 1.0).abs() < 1e-12);
        assert_eq!(r.cylinder_mismatches, 0);
        assert!(r.reconstruction_l1 < 0.1, "{}", r.reconstruction_l1);
    }
}
