//! Quasi-Hölder norms of piecewise-constant functions, the operator-distance
//! dictionary, and the Lasota-Yorke probe.
//!
//! `|h|_a = sup_r r^-a * int osc(h, B_r(x)) dx` with `B_r(x)` the open ball cut
//! to `[0, 1]`. For a function constant on `n` bins the oscillation only
//! changes where `x +- r` crosses a bin edge, so the integral is an exact sum
//! over those breakpoints with range max/min from sparse tables.

use serde::{Deserialize, Serialize};

use super::{l1_norm, l1_norm_diff, Density, UlamMatrix};
use crate::error::{Error, Result};

/// Bumped whenever the dictionary contents change.
pub const DICTIONARY_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiHolder {
    pub seminorm: f64,
    /// `seminorm + ||h||_1`.
    pub norm: f64,
    /// Radius attaining the sup.
    pub radius: f64,
}

struct SparseTable {
    max: Vec<Vec<f64>>,
    min: Vec<Vec<f64>>,
}

impl SparseTable {
    fn new(v: &[f64]) -> Self {
        let mut max = vec![v.to_vec()];
        let mut min = vec![v.to_vec()];
        let mut w = 1;
        while 2 * w <= v.len() {
            let (pm, pn) = (max.last().unwrap(), min.last().unwrap());
            let m: Vec<f64> = (0..=v.len() - 2 * w).map(|i| pm[i].max(pm[i + w])).collect();
            let n: Vec<f64> = (0..=v.len() - 2 * w).map(|i| pn[i].min(pn[i + w])).collect();
            max.push(m);
            min.push(n);
            w *= 2;
        }
        SparseTable { max, min }
    }

    /// `max - min` over `v[lo..=hi]`.
    fn osc(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let a = self.max[k][lo].max(self.max[k][hi + 1 - (1 << k)]);
        let b = self.min[k][lo].min(self.min[k][hi + 1 - (1 << k)]);
        a - b
    }
}

fn check_params(alpha: f64, eps0: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
    }
    if !(eps0 > 0.0 && eps0 <= 0.5) {
        return Err(Error::Domain(format!("largest radius must lie in (0, 1/2], got {eps0}")));
    }
    Ok(())
}

/// `int_0^1 osc(h, B_r(x)) dx`, exact for piecewise-constant `h`.
fn osc_integral(table: &SparseTable, n: usize, r: f64) -> f64 {
    let nf = n as f64;
    // breakpoints k/n - r and k/n + r, merged with 0 and 1
    let mut pts = Vec::with_capacity(2 * n + 4);
    pts.push(0.0);
    let (mut a, mut b) = (0usize, 0usize);
    while a <= n || b <= n {
        let xa = if a <= n { a as f64 / nf - r } else { f64::INFINITY };
        let xb = if b <= n { b as f64 / nf + r } else { f64::INFINITY };
        let x = if xa <= xb {
            a += 1;
            xa
        } else {
            b += 1;
            xb
        };
        if x > 0.0 && x < 1.0 {
            pts.push(x);
        }
    }
    pts.push(1.0);
    let mut total = 0.0;
    for w in pts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let m = 0.5 * (w[0] + w[1]);
        let lo = ((nf * (m - r)).floor().max(0.0) as usize).min(n - 1);
        let hi = (((nf * (m + r)).ceil() as usize).max(1) - 1).min(n - 1);
        total += (w[1] - w[0]) * table.osc(lo, hi.max(lo));
    }
    total
}

/// Quasi-Hölder seminorm over the radii `eps0, eps0/2, ...` down to the bin width.
pub fn quasi_holder_seminorm(values: &[f64], alpha: f64, eps0: f64) -> Result<QuasiHolder> {
    check_params(alpha, eps0)?;
    if values.is_empty() {
        return Err(Error::Precondition("empty function".into()));
    }
    let n = values.len();
    let table = SparseTable::new(values);
    let width = 1.0 / n as f64;
    let mut r = eps0;
    let mut best = (0.0, eps0);
    loop {
        let v = osc_integral(&table, n, r) / r.powf(alpha);
        if v > best.0 {
            best = (v, r);
        }
        r *= 0.5;
        if r < width * (1.0 - 1e-12) {
            break;
        }
    }
    Ok(QuasiHolder { seminorm: best.0, norm: best.0 + l1_norm(values), radius: best.1 })
}

pub fn quasi_holder_norm(values: &[f64], alpha: f64, eps0: f64) -> Result<f64> {
    Ok(quasi_holder_seminorm(values, alpha, eps0)?.norm)
}

/// Embedding constant `C_s = max(1, eps0^a) / eps0` in `||h||_inf <= C_s ||h||_a`.
pub fn sup_norm_bound(alpha: f64, eps0: f64) -> f64 {
    1f64.max(eps0.powf(alpha)) / eps0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub name: String,
    pub values: Vec<f64>,
}

/// The fixed test set: constant, `x^1..x^5`, indicators of thirteen intervals of
/// width 0.1 centred at `k/14`, and (if given) the stationary density; each
/// scaled to unit quasi-Hölder norm.
pub fn standard_dictionary(
    n_bins: usize,
    stationary: Option<&Density>,
    alpha: f64,
    eps0: f64,
) -> Result<Vec<DictionaryEntry>> {
    check_params(alpha, eps0)?;
    let mut raw: Vec<(String, Vec<f64>)> = vec![("constant".into(), vec![1.0; n_bins])];
    for p in 1..=5 {
        // exact bin averages of x^p
        let v = (0..n_bins)
            .map(|i| {
                let (l, r) = (i as f64 / n_bins as f64, (i + 1) as f64 / n_bins as f64);
                (r.powi(p + 1) - l.powi(p + 1)) / ((p + 1) as f64 * (r - l))
            })
            .collect();
        raw.push((format!("power_{p}"), v));
    }
    for k in 1..=13 {
        let c = k as f64 / 14.0;
        let (a, b) = (c - 0.05, c + 0.05);
        let v = (0..n_bins)
            .map(|i| {
                let (l, r) = (i as f64 / n_bins as f64, (i + 1) as f64 / n_bins as f64);
                (r.min(b) - l.max(a)).max(0.0) * n_bins as f64
            })
            .collect();
        raw.push((format!("indicator_{k:02}"), v));
    }
    if let Some(d) = stationary {
        if d.n_bins() != n_bins {
            return Err(Error::ShapeMismatch { expected: n_bins, got: d.n_bins() });
        }
        raw.push(("stationary".into(), d.values().to_vec()));
    }
    raw.into_iter()
        .map(|(name, v)| {
            let norm = quasi_holder_norm(&v, alpha, eps0)?;
            Ok(DictionaryEntry { name, values: v.iter().map(|x| x / norm).collect() })
        })
        .collect()
}

/// `max_f ||f P - f P_eps||_1` over the dictionary: a lower bound on the
/// operator distance from the strong norm to L1.
pub fn operator_distance(p: &UlamMatrix, p_eps: &UlamMatrix, dictionary: &[DictionaryEntry]) -> Result<f64> {
    if p.n_bins() != p_eps.n_bins() {
        return Err(Error::ShapeMismatch { expected: p.n_bins(), got: p_eps.n_bins() });
    }
    let mut best: f64 = 0.0;
    for f in dictionary {
        best = best.max(l1_norm_diff(&p.apply(&f.values)?, &p_eps.apply(&f.values)?)?);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub kappa: f64,
    pub d: f64,
    pub contracting: bool,
    pub n_points: usize,
    pub rms_residual: f64,
}

/// Least-squares fit of `||f P||_B = kappa ||f||_B + D ||f||_1` over iterates
/// of the dictionary.
pub fn lasota_yorke_probe(p: &UlamMatrix, alpha: f64, eps0: f64, n_iter: usize) -> Result<ProbeReport> {
    if n_iter < 10 {
        return Err(Error::Precondition(format!("need at least 10 iterates, got {n_iter}")));
    }
    let dict = standard_dictionary(p.n_bins(), None, alpha, eps0)?;
    let mut rows = Vec::new();
    for f in dict.iter().skip(1) {
        let mut g = f.values.clone();
        let mut gb = quasi_holder_norm(&g, alpha, eps0)?;
        for _ in 0..n_iter {
            let next = p.apply(&g)?;
            let nb = quasi_holder_norm(&next, alpha, eps0)?;
            rows.push((gb, l1_norm(&g), nb));
            g = next;
            gb = nb;
        }
    }
    let (mut sxx, mut sxz, mut szz, mut sxy, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, z, y) in &rows {
        sxx += x * x;
        sxz += x * z;
        szz += z * z;
        sxy += x * y;
        szy += z * y;
    }
    let det = sxx * szz - sxz * sxz;
    let (kappa, d) = if det.abs() > 1e-14 * sxx * szz {
        ((sxy * szz - szy * sxz) / det, (sxx * szy - sxz * sxy) / det)
    } else {
        // collinear data: all the spread is along one direction
        let k = (sxy + szy) / (sxx + szz + 2.0 * sxz);
        (k, 0.0)
    };
    let rss: f64 = rows.iter().map(|(x, z, y)| (y - kappa * x - d * z).powi(2)).sum();
    Ok(ProbeReport {
        kappa,
        d,
        contracting: kappa < 1.0 - 1e-9,
        n_points: rows.len(),
        rms_residual: (rss / rows.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::Doubling;
    use crate::transfer::build_ulam;

    /// Direct oscillation integral on a fine x-grid, for small inputs.
    fn brute_osc_integral(v: &[f64], r: f64, grid: usize) -> f64 {
        let n = v.len() as f64;
        (0..grid)
            .map(|k| {
                let x = (k as f64 + 0.5) / grid as f64;
                let vals: Vec<f64> = v
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (*i as f64 + 1.0) / n > x - r && (*i as f64) / n < x + r)
                    .map(|(_, y)| *y)
                    .collect();
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                (hi - lo) / grid as f64
            })
            .sum()
    }

    #[test]
    fn constant_has_zero_seminorm() {
        let q = quasi_holder_seminorm(&[2.0; 64], 0.5, 0.25).unwrap();
        assert_eq!(q.seminorm, 0.0);
        assert!((q.norm - 2.0).abs() < 1e-15);
    }

    #[test]
    fn half_indicator() {
        let v: Vec<f64> = (0..256).map(|i| if i < 128 { 1.0 } else { 0.0 }).collect();
        for (alpha, eps0) in [(0.5, 0.25), (0.3, 0.5), (0.9, 0.1)] {
            let q = quasi_holder_seminorm(&v, alpha, eps0).unwrap();
            assert!((q.seminorm - 2.0 * eps0.powf(1.0 - alpha)).abs() < 1e-12, "{q:?}");
            assert_eq!(q.radius, eps0);
        }
    }

    #[test]
    fn exact_integral_matches_brute_force() {
        let v = [0.3, 1.7, 0.2, 0.9, 2.5, 0.0, 1.1, 0.4, 0.8, 1.9, 0.6, 0.05, 1.3, 0.7, 2.2, 0.1];
        let t = SparseTable::new(&v);
        for r in [0.5, 0.23, 0.0625, 0.04] {
            let exact = osc_integral(&t, v.len(), r);
            let brute = brute_osc_integral(&v, r, 200_000);
            assert!((exact - brute).abs() < 1e-4, "r {r}: {exact} vs {brute}");
        }
    }

    #[test]
    fn bad_exponent_is_domain_error() {
        assert!(matches!(quasi_holder_seminorm(&[1.0; 16], 1.5, 0.25), Err(Error::Domain(_))));
        assert!(matches!(quasi_holder_seminorm(&[1.0; 16], 0.0, 0.25), Err(Error::Domain(_))));
        assert!(matches!(quasi_holder_seminorm(&[1.0; 16], 0.5, 0.75), Err(Error::Domain(_))));
    }

    #[test]
    fn dictionary_is_normalized() {
        let d = standard_dictionary(512, Some(&Density::uniform(512)), 0.5, 0.25).unwrap();
        assert_eq!(d.len(), 20);
        for e in &d {
            assert!((quasi_holder_norm(&e.values, 0.5, 0.25).unwrap() - 1.0).abs() < 1e-12, "{}", e.name);
        }
    }

    #[test]
    fn operator_distance_of_equal_operators_is_zero() {
        let p = build_ulam(&Doubling, 64).unwrap();
        let d = standard_dictionary(64, None, 0.5, 0.25).unwrap();
        assert_eq!(operator_distance(&p, &p, &d).unwrap(), 0.0);
    }

    #[test]
    fn doubling_contracts_by_one_half() {
        let p = build_ulam(&Doubling, 1024).unwrap();
        let r = lasota_yorke_probe(&p, 1.0, 0.25, 10).unwrap();
        assert!((r.kappa - 0.5).abs() < 0.1, "{r:?}");
        assert!(r.contracting);
    }

    #[test]
    fn identity_is_flagged() {
        let r = lasota_yorke_probe(&UlamMatrix::identity(256), 0.5, 0.25, 10).unwrap();
        assert!((r.kappa - 1.0).abs() < 1e-9 && !r.contracting, "{r:?}");
    }
}
