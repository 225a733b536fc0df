use super::{IntervalMap, MapKind};

/// `x -> 2x mod 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Doubling;

impl IntervalMap for Doubling {
    fn kind(&self) -> MapKind {
        MapKind::Reference
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, 0.5, 1.0]
    }
    fn eval_on(&self, branch: usize, x: f64) -> f64 {
        2.0 * x - branch as f64
    }
    fn derivative_on(&self, _branch: usize, _x: f64) -> f64 {
        2.0
    }
    fn inverse_on(&self, branch: usize, y: f64) -> Option<f64> {
        (0.0..=1.0).contains(&y).then(|| (y + branch as f64) * 0.5)
    }
}

/// `x -> 1 - |1 - 2x|`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Tent;

impl IntervalMap for Tent {
    fn kind(&self) -> MapKind {
        MapKind::Reference
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, 0.5, 1.0]
    }
    fn eval_on(&self, branch: usize, x: f64) -> f64 {
        if branch == 0 {
            2.0 * x
        } else {
            2.0 - 2.0 * x
        }
    }
    fn derivative_on(&self, branch: usize, _x: f64) -> f64 {
        if branch == 0 {
            2.0
        } else {
            -2.0
        }
    }
    fn inverse_on(&self, branch: usize, y: f64) -> Option<f64> {
        (0.0..=1.0).contains(&y).then(|| if branch == 0 { 0.5 * y } else { 1.0 - 0.5 * y })
    }
}

/// `x -> 4 x (1 - x)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Logistic;

impl Logistic {
    /// Invariant density `1 / (pi sqrt(x (1 - x)))`.
    pub fn density(x: f64) -> f64 {
        1.0 / (std::f64::consts::PI * (x * (1.0 - x)).sqrt())
    }

    /// Its distribution function.
    pub fn cdf(x: f64) -> f64 {
        2.0 / std::f64::consts::PI * x.sqrt().asin()
    }
}

impl IntervalMap for Logistic {
    fn kind(&self) -> MapKind {
        MapKind::Reference
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, 0.5, 1.0]
    }
    fn eval_on(&self, _branch: usize, x: f64) -> f64 {
        4.0 * x * (1.0 - x)
    }
    fn derivative_on(&self, _branch: usize, x: f64) -> f64 {
        4.0 - 8.0 * x
    }
    fn inverse_on(&self, branch: usize, y: f64) -> Option<f64> {
        if !(0.0..=1.0).contains(&y) {
            return None;
        }
        // 1/2 - sqrt(1 - y)/2 without the cancellation near y = 0
        let small = 0.5 * y / (1.0 + (1.0 - y).sqrt());
        Some(if branch == 0 { small } else { 1.0 - small })
    }
}
