//! The cusp map read off a scatter of successive Casimir maxima.
//!
//! Values are normalized affinely, sorted, and split into an increasing and a
//! decreasing part by unimodal least squares: every split point is tried and
//! the one minimizing the combined isotonic residual wins. The cusp sits
//! between the two samples at the split. Each branch is the monotone PCHIP
//! interpolant through its isotonic blocks, with the peak value attached at
//! the cusp.

use serde::{Deserialize, Serialize};

use super::{IntervalMap, MapKind};
use crate::error::{Error, Result};
use crate::section::ReturnSample;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Normalization {
    /// Sample minimum and maximum.
    MinMax,
    /// Lower and upper quantiles.
    Quantile { lower: f64, upper: f64 },
    /// Explicit affine range.
    Fixed { lo: f64, hi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub normalization: Normalization,
    pub min_samples: usize,
    /// Number of bins of the median profile used for the unimodality check.
    pub shape_bins: usize,
    /// A secondary local maximum of the profile more prominent than this is a shape error.
    pub shape_prominence: f64,
    /// Adjacent isotonic blocks are pooled until each knot carries at least this many samples.
    pub min_knot_samples: usize,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        EmpiricalConfig {
            normalization: Normalization::Quantile { lower: 0.001, upper: 0.999 },
            min_samples: 1000,
            shape_bins: 40,
            shape_prominence: 0.05,
            min_knot_samples: 25,
        }
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut d = vec![0.0; n];
        if n == 2 {
            let s = (y[1] - y[0]) / (x[1] - x[0]);
            return Pchip { x, y, d: vec![s, s] };
        }
        let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        for k in 1..n - 1 {
            if del[k - 1] * del[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
            }
        }
        let end = |h0: f64, h1: f64, m0: f64, m1: f64| {
            let s = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
            if s * m0 <= 0.0 {
                0.0
            } else if m0 * m1 <= 0.0 && s.abs() > 3.0 * m0.abs() {
                3.0 * m0
            } else {
                s
            }
        };
        d[0] = end(h[0], h[1], del[0], del[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        Pchip { x, y, d }
    }

    fn segment(&self, t: f64) -> usize {
        self.x[1..self.x.len() - 1].partition_point(|v| *v <= t)
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.d[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (t - self.x[n - 1]);
        }
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h00, h10, h01, h11) =
            (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    fn derivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.d[0];
        }
        if t >= self.x[n - 1] {
            return self.d[n - 1];
        }
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (g00, g10, g01, g11) = (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        (g00 * self.y[k] + g01 * self.y[k + 1]) / h + g10 * self.d[k] + g11 * self.d[k + 1]
    }
}

/// Pool-adjacent-violators block for increasing isotonic regression.
#[derive(Clone, Copy, Debug)]
struct Block {
    n: f64,
    sx: f64,
    sy: f64,
    syy: f64,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sy / self.n
    }
    fn sse(&self) -> f64 {
        (self.syy - self.sy * self.sy / self.n).max(0.0)
    }
    fn merge(self, o: Block) -> Block {
        Block { n: self.n + o.n, sx: self.sx + o.sx, sy: self.sy + o.sy, syy: self.syy + o.syy }
    }
}

/// Pools consecutive blocks until each holds at least `min` samples; the
/// remainder joins the last full group.
fn pool_blocks(blocks: &[Block], min: usize) -> Vec<Block> {
    if min <= 1 {
        return blocks.to_vec();
    }
    let mut out: Vec<Block> = Vec::new();
    let mut cur: Option<Block> = None;
    for b in blocks {
        let m = cur.map_or(*b, |c| c.merge(*b));
        if m.n >= min as f64 {
            out.push(m);
            cur = None;
        } else {
            cur = Some(m);
        }
    }
    if let Some(c) = cur {
        match out.pop() {
            Some(last) => out.push(last.merge(c)),
            None => out.push(c),
        }
    }
    out
}

/// Increasing isotonic fit of `y` in the given order; returns the blocks and,
/// for every prefix length, the residual sum of squares.
fn pava_with_prefix_sse(x: &[f64], y: &[f64]) -> (Vec<Block>, Vec<f64>) {
    let mut stack: Vec<Block> = Vec::with_capacity(y.len());
    let mut total = 0.0;
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    for (xi, yi) in x.iter().zip(y) {
        let mut b = Block { n: 1.0, sx: *xi, sy: *yi, syy: yi * yi };
        while let Some(top) = stack.last() {
            if top.mean() >= b.mean() {
                let top = stack.pop().expect("non-empty");
                total -= top.sse();
                b = top.merge(b);
            } else {
                break;
            }
        }
        total += b.sse();
        stack.push(b);
        prefix.push(total);
    }
    (stack, prefix)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMap {
    x0: f64,
    top: f64,
    lo: f64,
    hi: f64,
    left: Pchip,
    right: Pchip,
    n_samples: usize,
}

impl EmpiricalMap {
    /// Affine range `(lo, hi)` that was mapped onto `[0, 1]`.
    pub fn normalization(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn normalize(&self, m: f64) -> f64 {
        ((m - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Interpolation knots of the two branches.
    pub fn knots(&self) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let z = |p: &Pchip| p.x.iter().copied().zip(p.y.iter().copied()).collect();
        (z(&self.left), z(&self.right))
    }
}

impl IntervalMap for EmpiricalMap {
    fn kind(&self) -> MapKind {
        MapKind::Empirical
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.x0, 1.0]
    }

    fn eval_on(&self, branch: usize, x: f64) -> f64 {
        let v = if branch == 0 { self.left.eval(x) } else { self.right.eval(x) };
        v.clamp(0.0, 1.0)
    }

    fn derivative_on(&self, branch: usize, x: f64) -> f64 {
        if branch == 0 {
            self.left.derivative(x)
        } else {
            self.right.derivative(x)
        }
    }

    fn cusp(&self) -> Option<f64> {
        Some(self.x0)
    }

    fn peak_value(&self) -> f64 {
        self.top
    }

    fn to_json(&self) -> serde_json::Value {
        let (l, r) = self.knots();
        serde_json::json!({
            "kind": self.kind(),
            "x0": self.x0,
            "peak": self.top,
            "normalization": [self.lo, self.hi],
            "knots": { "left": l, "right": r },
        })
    }
}

/// Builds the map from return samples, pairing the Casimir values of `x` and `x_next`.
pub fn build_empirical_map(samples: &[ReturnSample], cfg: &EmpiricalConfig) -> Result<EmpiricalMap> {
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.x.casimir, s.x_next.casimir)).collect();
    build_empirical_map_from_pairs(&pairs, cfg)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    stats::quantile_sorted(v, 0.5)
}

/// Fails when the binned median profile has more than one prominent interior maximum.
fn check_unimodal(x: &[f64], y: &[f64], bins: usize, prominence: f64) -> Result<()> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for (xi, yi) in x.iter().zip(y) {
        let k = ((xi.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        groups[k].push(*yi);
    }
    let profile: Vec<f64> = groups.iter_mut().filter(|g| g.len() >= 3).map(|g| median(g)).collect();
    let n = profile.len();
    if n < 3 {
        return Err(Error::Shape("too few occupied bins to judge the shape".into()));
    }
    // count local maxima whose drop to the lowest point on either side until a higher value exceeds `prominence`
    let mut peaks = 0;
    for i in 0..n {
        let v = profile[i];
        let left_higher = profile[..i].iter().rposition(|p| *p > v);
        let right_higher = profile[i + 1..].iter().position(|p| *p > v).map(|j| j + i + 1);
        let left_min = profile[left_higher.map_or(0, |j| j)..i].iter().copied().fold(v, f64::min);
        let right_min = profile[i + 1..right_higher.unwrap_or(n)].iter().copied().fold(v, f64::min);
        let is_peak = (i == 0 || profile[i - 1] < v) && (i == n - 1 || profile[i + 1] <= v);
        if !is_peak {
            continue;
        }
        let drop_left = if i == 0 { f64::INFINITY } else { v - left_min };
        let drop_right = if i == n - 1 { f64::INFINITY } else { v - right_min };
        let interior = i > 0 && i < n - 1;
        if interior && drop_left.min(drop_right) > prominence {
            peaks += 1;
        }
    }
    if peaks > 1 {
        return Err(Error::Shape(format!("{peaks} interior maxima in the return scatter")));
    }
    Ok(())
}

/// Builds the map from raw pairs `(m_n, m_{n+1})`.
pub fn build_empirical_map_from_pairs(pairs: &[(f64, f64)], cfg: &EmpiricalConfig) -> Result<EmpiricalMap> {
    if pairs.len() < cfg.min_samples {
        return Err(Error::Precondition(format!("{} samples, at least {} required", pairs.len(), cfg.min_samples)));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let all: Vec<f64> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
    let (lo, hi) = match cfg.normalization {
        Normalization::MinMax => {
            (all.iter().copied().fold(f64::INFINITY, f64::min), all.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        }
        Normalization::Quantile { lower, upper } => (stats::quantile(&all, lower), stats::quantile(&all, upper)),
        Normalization::Fixed { lo, hi } => (lo, hi),
    };
    if !(hi > lo) {
        return Err(Error::Shape("degenerate sample range".into()));
    }
    // samples beyond the range keep their values; only the map's output is clamped
    let norm = |m: f64| (m - lo) / (hi - lo);
    let mut pts: Vec<(f64, f64)> = pairs.iter().map(|(a, b)| (norm(*a), norm(*b))).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    check_unimodal(&xs, &ys, cfg.shape_bins, cfg.shape_prominence)?;

    let n = xs.len();
    let (_, left_sse) = pava_with_prefix_sse(&xs, &ys);
    let rx: Vec<f64> = xs.iter().rev().copied().collect();
    let ry: Vec<f64> = ys.iter().rev().copied().collect();
    let (_, right_sse_rev) = pava_with_prefix_sse(&rx, &ry);
    // split s: [0, s) increasing, [s, n) decreasing; both sides need a few points
    let min_side = 4;
    let mut best = (f64::INFINITY, 0usize);
    for s in min_side..=n - min_side {
        if xs[s - 1] == xs[s] {
            continue;
        }
        let sse = left_sse[s] + right_sse_rev[n - s];
        if sse < best.0 {
            best = (sse, s);
        }
    }
    let s = best.1;
    if s == 0 {
        return Err(Error::Shape("no admissible split into two monotone branches".into()));
    }
    let x0 = 0.5 * (xs[s - 1] + xs[s]);

    let (lblocks, _) = pava_with_prefix_sse(&xs[..s], &ys[..s]);
    let (rblocks_rev, _) = pava_with_prefix_sse(&rx[..n - s], &ry[..n - s]);
    let lblocks = pool_blocks(&lblocks, cfg.min_knot_samples);
    let rblocks_rev = pool_blocks(&rblocks_rev, cfg.min_knot_samples);
    let mut lk: Vec<(f64, f64)> = lblocks.iter().map(|b| (b.sx / b.n, b.mean())).collect();
    let mut rk: Vec<(f64, f64)> = rblocks_rev.iter().rev().map(|b| (b.sx / b.n, b.mean())).collect();
    let top = lk.last().map_or(0.0, |p| p.1).max(rk.first().map_or(0.0, |p| p.1));
    lk.push((x0, top));
    rk.insert(0, (x0, top));
    let dedup = |v: Vec<(f64, f64)>| {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for p in v {
            match out.last() {
                Some(q) if p.0 <= q.0 => continue,
                _ => out.push(p),
            }
        }
        out
    };
    // keep the cusp knot when deduplicating the right branch from the left end
    let lk = dedup(lk.into_iter().rev().map(|(x, y)| (-x, y)).collect())
        .into_iter()
        .rev()
        .map(|(x, y)| (-x, y))
        .collect::<Vec<_>>();
    let rk = dedup(rk);
    if lk.len() < 2 || rk.len() < 2 {
        return Err(Error::Shape("a branch has fewer than two distinct knots".into()));
    }
    let unzip = |v: Vec<(f64, f64)>| v.into_iter().unzip::<f64, f64, Vec<f64>, Vec<f64>>();
    let (lx, ly) = unzip(lk);
    let (rx, ry) = unzip(rk);
    Ok(EmpiricalMap { x0, top, lo, hi, left: Pchip::new(lx, ly), right: Pchip::new(rx, ry), n_samples: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::{orbit, sup_distance, SyntheticCusp};

    #[test]
    fn pchip_is_monotone_and_interpolates() {
        let x = vec![0.0, 0.1, 0.5, 0.6, 1.0];
        let y = vec![0.0, 0.5, 0.55, 0.9, 1.0];
        let p = Pchip::new(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert!((p.eval(*a) - b).abs() < 1e-15);
        }
        let mut prev = -1.0;
        for k in 0..=1000 {
            let v = p.eval(k as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn pava_pools_violators() {
        let (blocks, sse) = pava_with_prefix_sse(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]);
        let means: Vec<f64> = blocks.iter().map(|b| b.mean()).collect();
        assert_eq!(means, vec![1.0, 2.5, 4.0]);
        assert!((sse[4] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let pairs = vec![(0.1, 0.2); 10];
        assert!(matches!(build_empirical_map_from_pairs(&pairs, &EmpiricalConfig::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn bimodal_scatter_is_rejected() {
        let pairs: Vec<(f64, f64)> = (0..5000)
            .map(|k| {
                let x = k as f64 / 5000.0;
                (x, (4.0 * std::f64::consts::PI * x).sin().abs())
            })
            .collect();
        let cfg = EmpiricalConfig { normalization: Normalization::Fixed { lo: 0.0, hi: 1.0 }, ..Default::default() };
        assert!(matches!(build_empirical_map_from_pairs(&pairs, &cfg), Err(Error::Shape(_))));
    }

    #[test]
    fn rebuilds_synthetic_map_from_its_orbit() {
        let t = SyntheticCusp::default();
        let o = orbit(&t, 0.123456, 20001);
        let pairs: Vec<(f64, f64)> = o.windows(2).map(|w| (w[0], w[1])).collect();
        // noiseless pairs need no pooling
        let cfg = EmpiricalConfig {
            normalization: Normalization::Fixed { lo: 0.0, hi: 1.0 },
            min_knot_samples: 1,
            ..Default::default()
        };
        let m = build_empirical_map_from_pairs(&pairs, &cfg).unwrap();
        assert!((m.cusp().unwrap() - 0.4).abs() < 1e-3);
        let d = sup_distance(&t, &m, 10_000);
        assert!(d <= 0.01, "sup distance {d}");
    }
}
