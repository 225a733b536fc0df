//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use lorenz_stab::{FieldSpec, Frame, NoiseLaw};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub zeta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub direction: [f64; 3],
    pub tolerance: f64,
    pub epsilon_box: f64,
    pub horizon: f64,
    pub seed: u64,

    pub t_attractor: f64,
    pub lyapunov_samples: usize,

    pub n_returns: usize,
    pub burn_in: usize,
    pub min_knot_samples: usize,
    pub fit_delta: f64,

    pub ladder: Vec<f64>,
    pub n_bins: usize,
    pub perturb_k: f64,
    pub boundary_bins: usize,
    pub reference_bins: usize,
    pub logistic_bins: usize,
    pub pianigiani_orbit: usize,
    pub pianigiani_bins: usize,
    pub opdist_bins: usize,
    pub opdist_eps: Vec<f64>,
    pub alpha: f64,
    pub eps0: f64,
    pub quad_nodes: usize,
    pub embedding_samples: usize,

    pub noise: String,
    pub sigma: f64,
    pub eps: f64,
    pub t_total: f64,
    pub conjugation_probes: usize,
    pub conjugation_tolerance: f64,
    pub duality_eps: Vec<f64>,
    pub stability_eps: Vec<f64>,
    pub replicas: usize,
    pub t_replica: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            zeta: 10.0,
            gamma: 28.0,
            beta: 8.0 / 3.0,
            direction: [0.0, 0.0, 1.0],
            tolerance: 1e-10,
            epsilon_box: 0.0,
            horizon: 100.0,
            seed: 42,
            t_attractor: 100.0,
            lyapunov_samples: 10_000,
            n_returns: 20_000,
            burn_in: 1000,
            min_knot_samples: 25,
            fit_delta: 1e-3,
            ladder: vec![0.1, 0.05, 0.02, 0.01, 0.005],
            n_bins: 1024,
            perturb_k: 1.0,
            boundary_bins: 512,
            reference_bins: 1024,
            logistic_bins: 4096,
            pianigiani_orbit: 1_000_000,
            pianigiani_bins: 512,
            opdist_bins: 16384,
            opdist_eps: vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
            alpha: 0.5,
            eps0: 0.25,
            quad_nodes: 8,
            embedding_samples: 100,
            noise: "uniform".into(),
            sigma: 0.5,
            eps: 0.05,
            t_total: 8500.0,
            conjugation_probes: 100,
            conjugation_tolerance: 1e-12,
            duality_eps: vec![0.0, 0.02, 0.05],
            stability_eps: vec![0.1, 0.05, 0.02, 0.01],
            replicas: 4,
            t_replica: 20_000.0,
        }
    }
}

const DOCS: &[(&str, &str)] = &[
    ("zeta", "Prandtl-type parameter"),
    ("gamma", "Rayleigh-type parameter"),
    ("beta", "geometric parameter"),
    ("direction", "unit perturbation direction H, three comma-separated components"),
    ("tolerance", "integrator tolerance"),
    ("epsilon_box", "section box half-width; 0 calibrates from the attractor"),
    ("horizon", "give up on a crossing after this much flow time"),
    ("seed", "master seed"),
    ("t_attractor", "length of the stored attractor trajectory"),
    ("lyapunov_samples", "random (y0, t, eta) triples for the Casimir bound sweep"),
    ("n_returns", "return samples for the empirical cusp map"),
    ("burn_in", "crossings discarded before chain statistics"),
    ("min_knot_samples", "samples pooled per knot of the empirical map"),
    ("fit_delta", "exponent fits use windows [delta, 10 delta]"),
    ("ladder", "perturbation sizes for the statistical stability ladder, decreasing"),
    ("n_bins", "Ulam bins for the stability ladder"),
    ("perturb_k", "perturbed maps are T o phi_s with s = -k eps"),
    ("boundary_bins", "coarsest grid of the boundary-vanishing refinement (three doublings)"),
    ("reference_bins", "Ulam bins for the doubling and tent maps"),
    ("logistic_bins", "Ulam bins for the logistic map"),
    ("pianigiani_orbit", "orbit length for the induced-measure reconstruction"),
    ("pianigiani_bins", "bins for the induced-measure reconstruction"),
    ("opdist_bins", "Ulam bins for the operator-distance sweep"),
    ("opdist_eps", "noise amplitudes for the operator-distance sweep"),
    ("alpha", "quasi-Hoelder exponent"),
    ("eps0", "quasi-Hoelder radius"),
    ("quad_nodes", "quadrature nodes of the averaged transfer operator"),
    ("embedding_samples", "random piecewise densities for the sup-norm embedding check"),
    ("noise", "noise law: uniform, trunc_gauss or delta"),
    ("sigma", "standard deviation of trunc_gauss, relative to eps"),
    ("eps", "noise amplitude for the pdmp experiment"),
    ("t_total", "simulated time per pdmp run"),
    ("conjugation_probes", "probes of the suspension conjugation check"),
    ("conjugation_tolerance", "integrator tolerance of the conjugation check"),
    ("duality_eps", "noise amplitudes for the estimator-duality sweep"),
    ("stability_eps", "noise amplitudes for the ergodic-average convergence sweep, decreasing"),
    ("replicas", "independent replicas per amplitude in the convergence sweep"),
    ("t_replica", "simulated time per replica"),
];

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("{key}: `{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, CliError> {
    let v = v.trim().replace('_', "");
    v.parse::<usize>().map_err(|_| CliError::Config(format!("{key}: `{v}` is not a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Config {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        DOCS.iter().map(|(k, _)| *k)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let k = key.trim();
        let v = value.trim();
        match k {
            "zeta" => self.zeta = parse_f64(k, v)?,
            "gamma" => self.gamma = parse_f64(k, v)?,
            "beta" => self.beta = parse_f64(k, v)?,
            "direction" => {
                let d = parse_list(k, v)?;
                if d.len() != 3 {
                    return Err(CliError::Config(format!("direction needs 3 components, got {}", d.len())));
                }
                self.direction = [d[0], d[1], d[2]];
            }
            "tolerance" => self.tolerance = parse_f64(k, v)?,
            "epsilon_box" => self.epsilon_box = parse_f64(k, v)?,
            "horizon" => self.horizon = parse_f64(k, v)?,
            "seed" => self.seed = v.parse().map_err(|_| CliError::Config(format!("seed: `{v}` is not an integer")))?,
            "t_attractor" => self.t_attractor = parse_f64(k, v)?,
            "lyapunov_samples" => self.lyapunov_samples = parse_usize(k, v)?,
            "n_returns" => self.n_returns = parse_usize(k, v)?,
            "burn_in" => self.burn_in = parse_usize(k, v)?,
            "min_knot_samples" => self.min_knot_samples = parse_usize(k, v)?,
            "fit_delta" => self.fit_delta = parse_f64(k, v)?,
            "ladder" => self.ladder = parse_list(k, v)?,
            "n_bins" => self.n_bins = parse_usize(k, v)?,
            "perturb_k" => self.perturb_k = parse_f64(k, v)?,
            "boundary_bins" => self.boundary_bins = parse_usize(k, v)?,
            "reference_bins" => self.reference_bins = parse_usize(k, v)?,
            "logistic_bins" => self.logistic_bins = parse_usize(k, v)?,
            "pianigiani_orbit" => self.pianigiani_orbit = parse_usize(k, v)?,
            "pianigiani_bins" => self.pianigiani_bins = parse_usize(k, v)?,
            "opdist_bins" => self.opdist_bins = parse_usize(k, v)?,
            "opdist_eps" => self.opdist_eps = parse_list(k, v)?,
            "alpha" => self.alpha = parse_f64(k, v)?,
            "eps0" => self.eps0 = parse_f64(k, v)?,
            "quad_nodes" => self.quad_nodes = parse_usize(k, v)?,
            "embedding_samples" => self.embedding_samples = parse_usize(k, v)?,
            "noise" => self.noise = v.to_ascii_lowercase(),
            "sigma" => self.sigma = parse_f64(k, v)?,
            "eps" => self.eps = parse_f64(k, v)?,
            "t_total" => self.t_total = parse_f64(k, v)?,
            "conjugation_probes" => self.conjugation_probes = parse_usize(k, v)?,
            "conjugation_tolerance" => self.conjugation_tolerance = parse_f64(k, v)?,
            "duality_eps" => self.duality_eps = parse_list(k, v)?,
            "stability_eps" => self.stability_eps = parse_list(k, v)?,
            "replicas" => self.replicas = parse_usize(k, v)?,
            "t_replica" => self.t_replica = parse_f64(k, v)?,
            _ => return Err(CliError::Config(format!("unknown key `{k}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "zeta" => self.zeta.to_string(),
            "gamma" => self.gamma.to_string(),
            "beta" => self.beta.to_string(),
            "direction" => fmt_list(&self.direction),
            "tolerance" => self.tolerance.to_string(),
            "epsilon_box" => self.epsilon_box.to_string(),
            "horizon" => self.horizon.to_string(),
            "seed" => self.seed.to_string(),
            "t_attractor" => self.t_attractor.to_string(),
            "lyapunov_samples" => self.lyapunov_samples.to_string(),
            "n_returns" => self.n_returns.to_string(),
            "burn_in" => self.burn_in.to_string(),
            "min_knot_samples" => self.min_knot_samples.to_string(),
            "fit_delta" => self.fit_delta.to_string(),
            "ladder" => fmt_list(&self.ladder),
            "n_bins" => self.n_bins.to_string(),
            "perturb_k" => self.perturb_k.to_string(),
            "boundary_bins" => self.boundary_bins.to_string(),
            "reference_bins" => self.reference_bins.to_string(),
            "logistic_bins" => self.logistic_bins.to_string(),
            "pianigiani_orbit" => self.pianigiani_orbit.to_string(),
            "pianigiani_bins" => self.pianigiani_bins.to_string(),
            "opdist_bins" => self.opdist_bins.to_string(),
            "opdist_eps" => fmt_list(&self.opdist_eps),
            "alpha" => self.alpha.to_string(),
            "eps0" => self.eps0.to_string(),
            "quad_nodes" => self.quad_nodes.to_string(),
            "embedding_samples" => self.embedding_samples.to_string(),
            "noise" => self.noise.clone(),
            "sigma" => self.sigma.to_string(),
            "eps" => self.eps.to_string(),
            "t_total" => self.t_total.to_string(),
            "conjugation_probes" => self.conjugation_probes.to_string(),
            "conjugation_tolerance" => self.conjugation_tolerance.to_string(),
            "duality_eps" => fmt_list(&self.duality_eps),
            "stability_eps" => fmt_list(&self.stability_eps),
            "replicas" => self.replicas.to_string(),
            "t_replica" => self.t_replica.to_string(),
            _ => return None,
        })
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Config, CliError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("override `{kv}` is not key=value")))?;
        self.set(k, v)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        Config::keys().map(|k| (k.to_string(), self.get(k).expect("documented key"))).collect()
    }

    /// The full configuration with one comment line per key; parses back to `self`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, doc) in DOCS {
            let _ = writeln!(s, "# {doc}\n{k} = {}", self.get(k).expect("documented key"));
        }
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.field().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let dn = self.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (dn - 1.0).abs() > 1e-12 {
            return bad(format!("direction must be a unit vector, |H| = {dn}"));
        }
        let positive = [
            ("tolerance", self.tolerance),
            ("horizon", self.horizon),
            ("t_attractor", self.t_attractor),
            ("fit_delta", self.fit_delta),
            ("perturb_k", self.perturb_k),
            ("t_total", self.t_total),
            ("conjugation_tolerance", self.conjugation_tolerance),
            ("t_replica", self.t_replica),
            ("sigma", self.sigma),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        if !(self.epsilon_box >= 0.0 && self.epsilon_box.is_finite()) {
            return bad(format!("epsilon_box must be non-negative, got {}", self.epsilon_box));
        }
        if !(self.eps >= 0.0 && self.eps <= 1.0) {
            return bad(format!("eps must lie in [0, 1], got {}", self.eps));
        }
        for (k, list) in [("ladder", &self.ladder), ("opdist_eps", &self.opdist_eps), ("duality_eps", &self.duality_eps), ("stability_eps", &self.stability_eps)] {
            if list.is_empty() {
                return bad(format!("{k} is empty"));
            }
            if let Some(e) = list.iter().find(|e| !(**e >= 0.0 && **e <= 1.0)) {
                return bad(format!("{k}: amplitude {e} outside [0, 1]"));
            }
        }
        for (k, list) in [("ladder", &self.ladder), ("stability_eps", &self.stability_eps)] {
            if list.windows(2).any(|w| !(w[1] < w[0])) {
                return bad(format!("{k} must be strictly decreasing"));
            }
        }
        if self.opdist_eps.iter().any(|e| *e == 0.0) || self.opdist_eps.len() < 3 {
            return bad("opdist_eps needs at least 3 positive amplitudes".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.eps0 > 0.0 && self.eps0 <= 0.5) {
            return bad(format!("need alpha in (0, 1] and eps0 in (0, 1/2], got {} and {}", self.alpha, self.eps0));
        }
        let mins = [
            ("n_bins", self.n_bins, 16),
            ("boundary_bins", self.boundary_bins, 16),
            ("reference_bins", self.reference_bins, 16),
            ("logistic_bins", self.logistic_bins, 16),
            ("pianigiani_bins", self.pianigiani_bins, 16),
            ("opdist_bins", self.opdist_bins, 16),
            ("n_returns", self.n_returns, 1000),
            ("conjugation_probes", self.conjugation_probes, 100),
            ("quad_nodes", self.quad_nodes, 8),
            ("replicas", self.replicas, 2),
            ("min_knot_samples", self.min_knot_samples, 1),
        ];
        for (k, v, lo) in mins {
            if v < lo {
                return bad(format!("{k} must be at least {lo}, got {v}"));
            }
        }
        self.noise_law(self.eps)?;
        Ok(())
    }

    pub fn field(&self) -> FieldSpec {
        FieldSpec { zeta: self.zeta, gamma: self.gamma, beta: self.beta, ..FieldSpec::classical(Frame::YFrame) }
            .with_direction(self.direction)
    }

    /// The configured noise law at amplitude `eps`; amplitude 0 is the point mass.
    pub fn noise_law(&self, eps: f64) -> Result<NoiseLaw, CliError> {
        let law = match (self.noise.as_str(), eps) {
            (_, e) if e == 0.0 => NoiseLaw::DeltaZero,
            ("delta", _) => NoiseLaw::DeltaZero,
            ("uniform", e) => NoiseLaw::uniform(e),
            ("trunc_gauss", e) => NoiseLaw::TruncGauss { sigma: self.sigma * e, eps: e },
            (other, _) => return Err(CliError::Config(format!("unknown noise law `{other}`"))),
        };
        law.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(law)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendered_defaults_parse_back() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.render()).unwrap(), c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(Config::parse("zeta = 10\nwhatever = 1"), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_and_comments() {
        let mut c = Config::parse("# comment\nladder = 0.2, 0.1  # trailing\n").unwrap();
        assert_eq!(c.ladder, vec![0.2, 0.1]);
        c.apply_override("n_bins=2048").unwrap();
        assert_eq!(c.n_bins, 2048);
        assert!(c.apply_override("n_bins").is_err());
    }

    #[test]
    fn negative_amplitude_fails_validation() {
        let mut c = Config::default();
        c.set("eps", "-0.1").unwrap();
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.set("ladder", "0.1,-0.05").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn ladder_must_decrease() {
        let mut c = Config::default();
        c.set("ladder", "0.01,0.1").unwrap();
        assert!(c.validate().is_err());
    }
}
