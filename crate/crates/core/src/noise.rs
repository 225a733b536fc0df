//! Noise laws on `[-eps, eps]` and seeded, randomly addressable noise streams.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseLaw {
    DeltaZero,
    Uniform { eps: f64 },
    Discrete { support: Vec<f64>, weights: Vec<f64> },
    TruncGauss { sigma: f64, eps: f64 },
}

impl NoiseLaw {
    pub fn uniform(eps: f64) -> Self {
        NoiseLaw::Uniform { eps }
    }

    /// Half-width of the support.
    pub fn eps(&self) -> f64 {
        match self {
            NoiseLaw::DeltaZero => 0.0,
            NoiseLaw::Uniform { eps } | NoiseLaw::TruncGauss { eps, .. } => *eps,
            NoiseLaw::Discrete { support, .. } => support.iter().fold(0.0, |m, s| m.max(s.abs())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseLaw::DeltaZero => Ok(()),
            NoiseLaw::Uniform { eps } => {
                if !(eps.is_finite() && *eps >= 0.0) {
                    return Err(Error::Domain(format!("noise amplitude must be non-negative, got {eps}")));
                }
                Ok(())
            }
            NoiseLaw::TruncGauss { sigma, eps } => {
                if !(eps.is_finite() && *eps >= 0.0 && sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::Domain(format!("invalid truncated Gaussian (sigma {sigma}, eps {eps})")));
                }
                Ok(())
            }
            NoiseLaw::Discrete { support, weights } => {
                if support.is_empty() || support.len() != weights.len() {
                    return Err(Error::Domain("discrete law needs matching, non-empty support and weights".into()));
                }
                if support.iter().chain(weights).any(|v| !v.is_finite()) || weights.iter().any(|w| *w < 0.0) {
                    return Err(Error::Domain("discrete law has invalid entries".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("discrete weights sum to {total}")));
                }
                Ok(())
            }
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.eps() == 0.0
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseLaw::DeltaZero => 0.0,
            NoiseLaw::Uniform { eps } => {
                if *eps == 0.0 {
                    0.0
                } else {
                    Uniform::new_inclusive(-eps, eps).sample(rng)
                }
            }
            NoiseLaw::TruncGauss { sigma, eps } => {
                if *eps == 0.0 {
                    return 0.0;
                }
                let n = Normal::new(0.0, *sigma).expect("validated sigma");
                loop {
                    let v = n.sample(rng);
                    if v.abs() <= *eps {
                        return v;
                    }
                }
            }
            NoiseLaw::Discrete { support, weights } => {
                let idx = WeightedIndex::new(weights).expect("validated weights");
                support[idx.sample(rng)]
            }
        }
    }

    /// Quadrature nodes and weights for integrals against the law.
    pub fn quadrature(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            NoiseLaw::DeltaZero => vec![(0.0, 1.0)],
            NoiseLaw::Discrete { support, weights } => support.iter().copied().zip(weights.iter().copied()).collect(),
            NoiseLaw::Uniform { eps } => {
                if *eps == 0.0 {
                    return vec![(0.0, 1.0)];
                }
                (0..n).map(|k| (-eps + 2.0 * eps * (k as f64 + 0.5) / n as f64, 1.0 / n as f64)).collect()
            }
            NoiseLaw::TruncGauss { sigma, eps } => {
                if *eps == 0.0 {
                    return vec![(0.0, 1.0)];
                }
                let nodes: Vec<f64> = (0..n).map(|k| -eps + 2.0 * eps * (k as f64 + 0.5) / n as f64).collect();
                let w: Vec<f64> = nodes.iter().map(|x| (-0.5 * (x / sigma).powi(2)).exp()).collect();
                let total: f64 = w.iter().sum();
                nodes.into_iter().zip(w.into_iter().map(|v| v / total)).collect()
            }
        }
    }
}

/// The i.i.d. sequence `omega = (eta_0, eta_1, ...)` with left shift.
///
/// Entry `k` is drawn from its own ChaCha stream, so any entry and any shift
/// is available in O(1) without materializing the prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSequence {
    law: NoiseLaw,
    seed: u64,
    offset: u64,
}

impl NoiseSequence {
    pub fn new(law: NoiseLaw, seed: u64) -> Self {
        NoiseSequence { law, seed, offset: 0 }
    }

    pub fn law(&self) -> &NoiseLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `eta_k` of this (possibly shifted) sequence.
    pub fn get(&self, k: u64) -> f64 {
        if self.law.is_degenerate() {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.offset + k);
        self.law.sample(&mut rng)
    }

    /// First coordinate, `pi(omega)`.
    pub fn first(&self) -> f64 {
        self.get(0)
    }

    /// `theta^n omega`.
    pub fn shift(&self, n: u64) -> NoiseSequence {
        NoiseSequence { law: self.law.clone(), seed: self.seed, offset: self.offset + n }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_moves_first_coordinate() {
        let w = NoiseSequence::new(NoiseLaw::uniform(0.1), 7);
        for n in 0..20 {
            assert_eq!(w.shift(n).first(), w.get(n));
            assert_eq!(w.shift(n).shift(3).first(), w.get(n + 3));
        }
    }

    #[test]
    fn samples_stay_in_support() {
        let laws = [
            NoiseLaw::uniform(0.05),
            NoiseLaw::TruncGauss { sigma: 0.1, eps: 0.02 },
            NoiseLaw::Discrete { support: vec![-0.01, 0.01], weights: vec![0.5, 0.5] },
        ];
        for law in laws {
            let w = NoiseSequence::new(law.clone(), 3);
            for k in 0..500 {
                assert!(w.get(k).abs() <= law.eps());
            }
        }
    }

    #[test]
    fn degenerate_law_is_zero() {
        let w = NoiseSequence::new(NoiseLaw::DeltaZero, 1);
        assert_eq!(w.get(12), 0.0);
        assert_eq!(NoiseSequence::new(NoiseLaw::uniform(0.0), 1).get(4), 0.0);
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        for law in [NoiseLaw::uniform(0.1), NoiseLaw::TruncGauss { sigma: 0.05, eps: 0.1 }] {
            let q = law.quadrature(16);
            let s: f64 = q.iter().map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-14);
            assert!(q.iter().all(|(x, _)| x.abs() <= 0.1));
        }
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(NoiseLaw::uniform(-0.1).validate().is_err());
        assert!(NoiseLaw::Discrete { support: vec![0.0], weights: vec![0.5] }.validate().is_err());
    }
}
