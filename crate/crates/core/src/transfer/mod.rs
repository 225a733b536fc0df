//! Ulam discretization of transfer operators on `[0, 1]`.
//!
//! Densities are piecewise constant on `n` equal bins. The matrix row for bin
//! `i` holds the fractions of that bin carried into each bin `j`, so pushing a
//! density forward is a vector-matrix product `rho P`.

mod holder;
mod pianigiani;
mod stability;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusp::{IntervalMap, Reparametrized, SharedMap};
use crate::dynamics::fmt17;
use crate::error::{Error, Result};
use crate::noise::NoiseLaw;

pub use holder::{
    lasota_yorke_probe, operator_distance, quasi_holder_norm, quasi_holder_seminorm, standard_dictionary, sup_norm_bound,
    DictionaryEntry, ProbeReport, QuasiHolder, DICTIONARY_VERSION,
};
pub use pianigiani::{pianigiani_check, renormalized_l1, InducedScheme, PianigianiConfig, PianigianiReport};
pub use stability::{statistical_stability_experiment, StabilityEntry, StabilityReport};

/// Piecewise-constant probability density on `n` equal bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    values: Vec<f64>,
}

impl Density {
    /// Normalizes non-negative bin values to unit mass.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("density needs at least one bin".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("density values must be finite and non-negative".into()));
        }
        let n = values.len() as f64;
        let mass: f64 = values.iter().sum::<f64>() / n;
        if mass <= 0.0 {
            return Err(Error::Domain("density has zero mass".into()));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Density { values })
    }

    pub fn uniform(n_bins: usize) -> Self {
        Density { values: vec![1.0; n_bins] }
    }

    /// Bin averages of `f`, by 8-point Gauss-Legendre on each bin, then normalized.
    pub fn from_fn(n_bins: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Density::new(bin_averages(n_bins, f))
    }

    /// Bin masses `F(x_{i+1}) - F(x_i)` of a distribution function.
    pub fn from_cdf(n_bins: usize, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let v = (0..n_bins)
            .map(|i| (cdf((i + 1) as f64 / n_bins as f64) - cdf(i as f64 / n_bins as f64)).max(0.0) * n_bins as f64)
            .collect();
        Density::new(v)
    }

    /// Normalized histogram of points in `[0, 1]`.
    pub fn histogram(points: &[f64], n_bins: usize) -> Result<Self> {
        let mut counts = vec![0.0; n_bins];
        for &x in points {
            counts[bin_index(x, n_bins)] += 1.0;
        }
        Density::new(counts)
    }

    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.values.len() as f64
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Mass of `[a, b]`, with partial bins counted proportionally.
    pub fn mass_of(&self, a: f64, b: f64) -> f64 {
        let n = self.values.len();
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        let w = 1.0 / n as f64;
        let (i0, i1) = (bin_index(a, n), bin_index(b, n));
        (i0..=i1)
            .map(|i| {
                let (l, r) = (i as f64 * w, (i + 1) as f64 * w);
                (r.min(b) - l.max(a)).max(0.0) * self.values[i]
            })
            .sum()
    }

    /// Averages adjacent pairs of bins.
    pub fn coarsen(&self) -> Result<Density> {
        if self.values.len() % 2 != 0 {
            return Err(Error::Precondition("coarsening needs an even bin count".into()));
        }
        Density::new(self.values.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect())
    }

    /// `max |rho_{i+1} - rho_i| * n`, a discrete Lipschitz constant.
    pub fn lipschitz_estimate(&self) -> f64 {
        let n = self.values.len() as f64;
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max) * n
    }

    /// CSV `bin_center,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_center,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", fmt17(self.bin_center(i)), fmt17(*v))?;
        }
        Ok(())
    }
}

pub(crate) fn bin_index(x: f64, n: usize) -> usize {
    let k = (x * n as f64).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(n - 1)
    }
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

pub(crate) fn bin_averages(n_bins: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let w = 1.0 / n_bins as f64;
    (0..n_bins)
        .map(|i| {
            let c = (i as f64 + 0.5) * w;
            GL8.iter().map(|(x, wt)| 0.5 * wt * (f(c - 0.5 * w * x) + f(c + 0.5 * w * x))).sum()
        })
        .collect()
}

/// `sum |d1 - d2| / n`.
pub fn l1_distance(d1: &Density, d2: &Density) -> Result<f64> {
    l1_norm_diff(d1.values(), d2.values())
}

pub(crate) fn l1_norm_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

pub(crate) fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum::<f64>() / a.len() as f64
}

/// Sparse row-stochastic matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct UlamMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl UlamMatrix {
    /// Rows as `(column, value)` lists. Duplicate columns are summed; each row
    /// must have positive total and is rescaled to sum to 1.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: rows.len() });
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let total: f64 = row.iter().map(|e| e.1).sum();
            if !(total > 0.0) || row.iter().any(|e| e.0 >= n || !(e.1 >= 0.0)) {
                return Err(Error::Numerical(format!("row {i} is not a valid probability row")));
            }
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if v == 0.0 {
                    continue;
                }
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v / total;
                } else {
                    cols.push(j);
                    vals.push(v / total);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(UlamMatrix { n, row_ptr, cols, vals })
    }

    pub fn identity(n: usize) -> Self {
        UlamMatrix { n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), vals: vec![1.0; n] }
    }

    pub fn n_bins(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// Largest `|sum_j P_ij - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.n).map(|i| (self.row(i).map(|e| e.1).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Push-forward `(f P)_j = sum_i f_i P_ij`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n {
            return Err(Error::ShapeMismatch { expected: self.n, got: f.len() });
        }
        let mut out = vec![0.0; self.n];
        self.apply_into(f, &mut out);
        Ok(out)
    }

    fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, fi) in f.iter().enumerate() {
            if *fi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k]] += fi * self.vals[k];
            }
        }
    }

    /// `sum_k w_k P_k` for matrices of equal size and weights summing to 1.
    pub fn convex_combination(parts: &[(f64, UlamMatrix)]) -> Result<UlamMatrix> {
        let n = parts.first().ok_or_else(|| Error::Precondition("no matrices to combine".into()))?.1.n;
        if let Some(p) = parts.iter().find(|p| p.1.n != n) {
            return Err(Error::ShapeMismatch { expected: n, got: p.1.n });
        }
        let wsum: f64 = parts.iter().map(|p| p.0).sum();
        if (wsum - 1.0).abs() > 1e-12 || parts.iter().any(|p| !(p.0 >= 0.0)) {
            return Err(Error::Precondition(format!("weights must be non-negative and sum to 1, got {wsum}")));
        }
        let rows = (0..n)
            .into_par_iter()
            .map(|i| parts.iter().flat_map(|(w, m)| m.row(i).map(move |(j, v)| (j, w * v))).collect())
            .collect();
        UlamMatrix::from_rows(n, rows)
    }

    /// Coordinate-list CSV `i,j,p_ij`.
    pub fn write_coo_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,p_ij")?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i},{j},{}", fmt17(v))?;
            }
        }
        Ok(())
    }
}

/// How bin-to-bin transition mass is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UlamMethod {
    /// Preimages of bin edges through each inverse branch; exact up to root-finding.
    Exact,
    /// Forward images of `m` stratified points per bin.
    Subsample { m: usize },
}

impl Default for UlamMethod {
    fn default() -> Self {
        UlamMethod::Exact
    }
}

pub fn build_ulam(map: &dyn IntervalMap, n_bins: usize) -> Result<UlamMatrix> {
    build_ulam_with(map, n_bins, UlamMethod::Exact)
}

pub fn build_ulam_with(map: &dyn IntervalMap, n_bins: usize, method: UlamMethod) -> Result<UlamMatrix> {
    if n_bins < 16 {
        return Err(Error::Precondition(format!("Ulam matrix needs at least 16 bins, got {n_bins}")));
    }
    match method {
        UlamMethod::Exact => build_exact(map, n_bins),
        UlamMethod::Subsample { m } => build_subsampled(map, n_bins, m),
    }
}

fn build_subsampled(map: &dyn IntervalMap, n: usize, m: usize) -> Result<UlamMatrix> {
    if m == 0 {
        return Err(Error::Precondition("need at least one sub-sample per bin".into()));
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|s| {
                    let x = (i as f64 + (s as f64 + 0.5) / m as f64) / n as f64;
                    let y = map.eval(x);
                    if y.is_finite() {
                        Ok((bin_index(y, n), 1.0))
                    } else {
                        Err(Error::Numerical(format!("map value {y} at x = {x}")))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    UlamMatrix::from_rows(n, rows)
}

/// Monotone extension of the inverse of one branch to all of `[0, 1]`: values
/// below (above) the branch image go to the endpoint where the branch is
/// smallest (largest).
struct BranchInverse {
    lo: f64,
    hi: f64,
    vmin: f64,
    vmax: f64,
    increasing: bool,
    edges: Vec<f64>,
}

impl BranchInverse {
    fn new(map: &dyn IntervalMap, k: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let (va, vb) = (map.eval_on(k, lo), map.eval_on(k, hi));
        if !(va.is_finite() && vb.is_finite()) {
            return Err(Error::Numerical(format!("branch {k} is not finite at its ends")));
        }
        let increasing = vb >= va;
        let (vmin, vmax) = if increasing { (va, vb) } else { (vb, va) };
        let mut inv = BranchInverse { lo, hi, vmin, vmax, increasing, edges: Vec::new() };
        inv.edges = (0..=n)
            .into_par_iter()
            .map(|j| inv.solve(map, k, j as f64 / n as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(inv)
    }

    fn solve(&self, map: &dyn IntervalMap, k: usize, y: f64) -> Result<f64> {
        let (at_min, at_max) = if self.increasing { (self.lo, self.hi) } else { (self.hi, self.lo) };
        if y <= self.vmin {
            return Ok(at_min);
        }
        if y >= self.vmax {
            return Ok(at_max);
        }
        map.inverse_on(k, y)
            .map(|x| x.clamp(self.lo, self.hi))
            .ok_or_else(|| Error::Numerical(format!("branch {k} could not be inverted at y = {y}")))
    }
}

fn build_exact(map: &dyn IntervalMap, n: usize) -> Result<UlamMatrix> {
    let bp = map.breakpoints();
    let inverses: Vec<BranchInverse> =
        (0..bp.len() - 1).map(|k| BranchInverse::new(map, k, bp[k], bp[k + 1], n)).collect::<Result<_>>()?;
    let w = 1.0 / n as f64;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (l, r) = (i as f64 * w, (i + 1) as f64 * w);
            let mut row = Vec::new();
            for (k, inv) in inverses.iter().enumerate() {
                let (a, b) = (l.max(inv.lo), r.min(inv.hi));
                if b <= a {
                    continue;
                }
                let (ya, yb) = (map.eval_on(k, a), map.eval_on(k, b));
                let (ymin, ymax) = (ya.min(yb).clamp(0.0, 1.0), ya.max(yb).clamp(0.0, 1.0));
                let jlo = bin_index(ymin, n);
                let jhi = (((ymax * n as f64).ceil() as usize).max(jlo + 1) - 1).min(n - 1);
                for j in jlo..=jhi {
                    let (p, q) = (inv.edges[j], inv.edges[j + 1]);
                    let (p, q) = if p <= q { (p, q) } else { (q, p) };
                    let overlap = q.min(b) - p.max(a);
                    if overlap > 0.0 {
                        row.push((j, overlap));
                    }
                }
            }
            if row.is_empty() {
                // a bin mapped entirely onto a bin edge; fall back to the image of its midpoint
                row.push((bin_index(map.eval(0.5 * (l + r)), n), w));
            }
            row
        })
        .collect();
    UlamMatrix::from_rows(n, rows)
}

/// Power iteration from the uniform density until the L1 increment drops below `tol`.
pub fn stationary_density(p: &UlamMatrix, tol: f64) -> Result<Density> {
    stationary_density_with(p, tol, 100_000)
}

pub fn stationary_density_with(p: &UlamMatrix, tol: f64, max_iter: usize) -> Result<Density> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    if p.row_sum_error() > 1e-8 {
        return Err(Error::Precondition("matrix is not row-stochastic".into()));
    }
    let n = p.n;
    let mut cur = vec![1.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        p.apply_into(&cur, &mut next);
        let mass = next.iter().sum::<f64>() / n as f64;
        next.iter_mut().for_each(|v| *v /= mass);
        let diff = l1_norm_diff(&cur, &next)?;
        std::mem::swap(&mut cur, &mut next);
        if diff < tol {
            return Density::new(cur);
        }
    }
    Err(Error::Spectral(format!("power iteration did not reach {tol} in {max_iter} iterations")))
}

/// `sum_q w_q P(T_{eta_q})` over the law's quadrature nodes.
pub fn averaged_transfer_operator(
    family: &(dyn Fn(f64) -> Result<SharedMap> + Sync),
    law: &NoiseLaw,
    n_bins: usize,
    n_quad: usize,
) -> Result<UlamMatrix> {
    law.validate()?;
    if law.is_degenerate() {
        return build_ulam(family(0.0)?.as_ref(), n_bins);
    }
    if n_quad < 8 && !matches!(law, NoiseLaw::Discrete { .. }) {
        return Err(Error::Precondition(format!("need at least 8 quadrature nodes, got {n_quad}")));
    }
    let parts = law
        .quadrature(n_quad)
        .into_iter()
        .map(|(eta, w)| Ok((w, build_ulam(family(eta)?.as_ref(), n_bins)?)))
        .collect::<Result<Vec<_>>>()?;
    UlamMatrix::convex_combination(&parts)
}

/// The random family `eta -> T o phi_{-k eta}`.
pub fn reparametrized_family(base: SharedMap, k: f64) -> impl Fn(f64) -> Result<SharedMap> + Sync {
    move |eta| Ok(Arc::new(Reparametrized::new(base.clone(), -k * eta)?) as SharedMap)
}

/// Histogram of `n` orbit points after `burn_in` iterates from `x`.
pub fn birkhoff_histogram(map: &dyn IntervalMap, x: f64, burn_in: usize, n: usize, n_bins: usize) -> Result<Density> {
    let mut v = x;
    for _ in 0..burn_in {
        v = map.eval(v);
    }
    let mut counts = vec![0.0; n_bins];
    for _ in 0..n {
        if !v.is_finite() {
            return Err(Error::Numerical("orbit left the interval".into()));
        }
        counts[bin_index(v, n_bins)] += 1.0;
        v = map.eval(v);
    }
    Density::new(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::{Doubling, Logistic, SyntheticCusp, Tent};

    #[test]
    fn l1_distance_examples() {
        let u = Density::uniform(64);
        assert_eq!(l1_distance(&u, &u).unwrap(), 0.0);
        let half = Density::new((0..64).map(|i| if i < 32 { 2.0 } else { 0.0 }).collect()).unwrap();
        assert!((l1_distance(&u, &half).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(l1_distance(&u, &half).unwrap(), l1_distance(&half, &u).unwrap());
        assert!(matches!(l1_distance(&u, &Density::uniform(32)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn density_is_normalized() {
        let d = Density::new(vec![1.0, 3.0, 0.0, 4.0]).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-15);
        assert!(Density::new(vec![1.0, -1.0]).is_err());
        assert!((d.mass_of(0.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn doubling_and_tent_keep_lebesgue() {
        for n in [16, 64, 1024] {
            for p in [build_ulam(&Doubling, n).unwrap(), build_ulam(&Tent, n).unwrap()] {
                assert!(p.row_sum_error() < 1e-12);
                let d = stationary_density(&p, 1e-12).unwrap();
                assert!(l1_distance(&d, &Density::uniform(n)).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn doubling_rows_are_exact() {
        let p = build_ulam(&Doubling, 32).unwrap();
        assert!((p.get(3, 6) - 0.5).abs() < 1e-15 && (p.get(3, 7) - 0.5).abs() < 1e-15);
        assert!((p.get(20, 8) - 0.5).abs() < 1e-15);
        let s = build_ulam_with(&Doubling, 32, UlamMethod::Subsample { m: 64 }).unwrap();
        assert!((s.get(3, 6) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_approaches_arcsine_density() {
        // the endpoint singularities make the Ulam error decay slowly, about n^-0.43
        let err = |n: usize| {
            let d = stationary_density(&build_ulam(&Logistic, n).unwrap(), 1e-12).unwrap();
            l1_distance(&d, &Density::from_cdf(n, Logistic::cdf).unwrap()).unwrap()
        };
        let (e10, e12) = (err(1 << 10), err(1 << 12));
        assert!(e12 < e10 && e12 < 0.025, "{e10} {e12}");
    }

    #[test]
    fn identity_matrix_has_uniform_fixed_point() {
        let p = UlamMatrix::identity(16);
        let d = stationary_density(&p, 1e-12).unwrap();
        assert_eq!(d, Density::uniform(16));
    }

    #[test]
    fn near_decomposable_chain_is_a_spectral_error() {
        let n = 16;
        let rows = (0..n).map(|i| if i == 0 { vec![(0, 1.0)] } else { vec![(i, 1.0 - 1e-6), (0, 1e-6)] }).collect();
        let p = UlamMatrix::from_rows(n, rows).unwrap();
        assert!(matches!(stationary_density_with(&p, 1e-12, 100), Err(Error::Spectral(_))));
    }

    #[test]
    fn averaged_operator_with_delta_law_is_plain_ulam() {
        let base: SharedMap = Arc::new(SyntheticCusp::default());
        let fam = reparametrized_family(base.clone(), 1.0);
        let a = averaged_transfer_operator(&fam, &NoiseLaw::DeltaZero, 64, 8).unwrap();
        assert_eq!(a, build_ulam(base.as_ref(), 64).unwrap());
        let u = averaged_transfer_operator(&fam, &NoiseLaw::uniform(0.05), 64, 8).unwrap();
        assert!(u.row_sum_error() < 1e-10);
        assert!(averaged_transfer_operator(&fam, &NoiseLaw::uniform(0.05), 64, 4).is_err());
    }

    #[test]
    fn mass_is_conserved() {
        let p = build_ulam(&SyntheticCusp::default(), 256).unwrap();
        let f: Vec<f64> = (0..256).map(|i| ((i * 37) % 11) as f64).collect();
        let g = p.apply(&f).unwrap();
        assert!((g.iter().sum::<f64>() - f.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn too_few_bins_is_rejected() {
        assert!(matches!(build_ulam(&Doubling, 8), Err(Error::Precondition(_))));
    }
}
