//! The piecewise-deterministic process that follows `phi_eta` between
//! section crossings and redraws `eta` at each crossing.
//!
//! Noise bookkeeping: `omega = (eta_0, eta_1, ...)`. The flow from the start
//! point to the first crossing uses `eta_0 = pi(omega)`; the embedded chain
//! then runs on `theta omega`, so trace entry `n` carries `eta_{n+1}`.

mod drift;
mod suspension;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{casimir, flow, DenseSegment, FieldSpec, PhaseState};
use crate::error::{Error, Result};
use crate::noise::{NoiseLaw, NoiseSequence};
use crate::section::{flow_to_section, MarkovRenewalTrace, SectionSpec, StartMode, TraceEntry};
use crate::stats::{batch_means, batch_ratio, Estimate};

pub use drift::{drift_check, DriftReport};
pub use suspension::{suspension_conjugation_check, ConjugationReport, SuspensionPoint};

/// Largest quadrature step along the path.
pub const QUAD_STEP: f64 = 1e-2;
pub const DEFAULT_BURN_IN: usize = 1000;
pub const N_BATCHES: usize = 20;

/// Observables on phase space used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Observable {
    One,
    Casimir,
    /// `1{y3 < level}`.
    Y3Below { level: f64 },
    AbsY1,
    Coordinate { index: usize },
}

impl Observable {
    pub fn eval(&self, y: &PhaseState) -> f64 {
        match *self {
            Observable::One => 1.0,
            Observable::Casimir => casimir(y),
            Observable::Y3Below { level } => {
                if y.0[2] < level {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::AbsY1 => y.0[0].abs(),
            Observable::Coordinate { index } => y.0[index.min(2)],
        }
    }

    pub fn name(&self) -> String {
        match self {
            Observable::One => "one".into(),
            Observable::Casimir => "casimir".into(),
            Observable::Y3Below { .. } => "y3_below".into(),
            Observable::AbsY1 => "abs_y1".into(),
            Observable::Coordinate { index } => format!("y{}", index + 1),
        }
    }
}

/// Trapezoid rule for `sum_f int f(y(t)) dt` over `[a, b]` on one dense step.
fn integrate_piece(dense: &DenseSegment, a: f64, b: f64, obs: &[Observable], out: &mut [f64]) {
    if !(b > a) {
        return;
    }
    let m = ((b - a) / QUAD_STEP).ceil().max(1.0) as usize;
    let h = (b - a) / m as f64;
    let mut prev: Vec<f64> = obs.iter().map(|f| f.eval(&dense.at(a))).collect();
    for k in 1..=m {
        let t = if k == m { b } else { a + k as f64 * h };
        let y = dense.at(t);
        for (i, f) in obs.iter().enumerate() {
            let v = f.eval(&y);
            out[i] += 0.5 * h * (prev[i] + v);
            prev[i] = v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdmpConfig {
    /// Parameters and perturbation direction; `eta` is ignored.
    pub field: FieldSpec,
    pub law: NoiseLaw,
    pub section: SectionSpec,
    /// Simulated time `T`.
    pub t_total: f64,
    pub seed: u64,
    /// Sampling step for the stored path, if any.
    pub sample_dt: Option<f64>,
}

impl PdmpConfig {
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.field.with_eta(self.law.eps()).validate()?;
        self.law.validate()?;
        self.section.validate()?;
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(Error::Precondition(format!("simulated time must be positive, got {}", self.t_total)));
        }
        if let Some(dt) = self.sample_dt {
            if !(dt > 0.0) {
                return Err(Error::Precondition(format!("sampling step must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn omega(&self) -> NoiseSequence {
        NoiseSequence::new(self.law.clone(), self.seed)
    }
}

/// State of the process at a given time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdmpState {
    pub t: f64,
    pub position: PhaseState,
    pub active_eta: f64,
    /// Index of the current sojourn, `max{n : sigma_n <= t}`; 0 before the first hit.
    pub n_t: usize,
    /// `t - sigma_{N_t}`, or `t` before the first hit.
    pub age: f64,
    pub sigma0: f64,
    pub approaching: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdmpRun {
    pub config: PdmpConfig,
    pub y0: PhaseState,
    pub eta_approach: f64,
    pub sigma0: f64,
    pub trace: MarkovRenewalTrace,
    pub observables: Vec<Observable>,
    /// `int_{sigma_n}^{sigma_{n+1}} f(u_t) dt` per entry and observable.
    pub sojourn_integrals: Vec<Vec<f64>>,
    /// The same integrals cut at `T` (differs from the above only on the last entry).
    pub clipped_integrals: Vec<Vec<f64>>,
    /// Integrals over `[0, sigma0]`.
    pub approach_integrals: Vec<f64>,
    /// `(t, u_t)` on the sampling grid.
    pub samples: Vec<(f64, PhaseState)>,
}

struct PathRecorder<'a> {
    t_total: f64,
    obs: &'a [Observable],
    full: Vec<f64>,
    clipped: Vec<f64>,
    sample_dt: Option<f64>,
    next_sample: f64,
    samples: Vec<(f64, PhaseState)>,
}

impl PathRecorder<'_> {
    fn visit(&mut self, dense: &DenseSegment, a: f64, b: f64) {
        integrate_piece(dense, a, b, self.obs, &mut self.full);
        integrate_piece(dense, a, b.min(self.t_total), self.obs, &mut self.clipped);
        if let Some(dt) = self.sample_dt {
            while self.next_sample <= b && self.next_sample <= self.t_total {
                if self.next_sample >= a {
                    self.samples.push((self.next_sample, dense.at(self.next_sample)));
                }
                self.next_sample = (self.samples.len() as f64) * dt;
            }
        }
    }

    fn take(&mut self) -> (Vec<f64>, Vec<f64>) {
        let z = vec![0.0; self.obs.len()];
        (std::mem::replace(&mut self.full, z.clone()), std::mem::replace(&mut self.clipped, z))
    }
}

/// Runs the process from `y0` for time `T`, integrating the observables along the path.
///
/// The last trace entry is the sojourn containing `T`; it is completed so the
/// trace holds whole transitions.
pub fn simulate_pdmp(cfg: &PdmpConfig, y0: PhaseState, observables: &[Observable]) -> Result<PdmpRun> {
    cfg.validate()?;
    let omega = cfg.omega();
    let chain_noise = omega.shift(1);
    let eta_approach = omega.first();
    let approach_field = cfg.field.with_eta(eta_approach);
    let mut rec = PathRecorder {
        t_total: cfg.t_total,
        obs: observables,
        full: vec![0.0; observables.len()],
        clipped: vec![0.0; observables.len()],
        sample_dt: cfg.sample_dt,
        next_sample: 0.0,
        samples: Vec::new(),
    };
    let first = {
        let mut v = |d: &DenseSegment, a: f64, b: f64| rec.visit(d, a, b);
        flow_to_section(&approach_field, eta_approach, &cfg.section, y0, 0.0, StartMode::Inclusive, Some(&mut v))?
    };
    let approach_integrals = rec.take().1;
    let sigma0 = first.t;
    let mut entries = Vec::new();
    let mut sojourn_integrals = Vec::new();
    let mut clipped_integrals = Vec::new();
    let mut x = first;
    let mut n = 0usize;
    while x.t <= cfg.t_total {
        let eta = chain_noise.get(n as u64);
        let field = cfg.field.with_eta(eta);
        let next = {
            let mut v = |d: &DenseSegment, a: f64, b: f64| rec.visit(d, a, b);
            flow_to_section(&field, eta, &cfg.section, x.y, x.t, StartMode::Exclusive, Some(&mut v))
        };
        let next = next.map_err(|e| Error::Integration { t: x.t, reason: format!("transition {n}: {e}") })?;
        entries.push(TraceEntry { n, x, eta, tau: next.t - x.t, sigma: x.t });
        let (full, clipped) = rec.take();
        sojourn_integrals.push(full);
        clipped_integrals.push(clipped);
        x = next;
        n += 1;
    }
    let trace = MarkovRenewalTrace {
        seed: cfg.seed,
        law: cfg.law.clone(),
        field: cfg.field.with_eta(0.0),
        section: cfg.section,
        entries,
        end: x,
        failure: None,
    };
    Ok(PdmpRun {
        config: cfg.clone(),
        y0,
        eta_approach,
        sigma0,
        trace,
        observables: observables.to_vec(),
        sojourn_integrals,
        clipped_integrals,
        approach_integrals,
        samples: rec.samples,
    })
}

impl PdmpRun {
    /// `N_T`: crossings after the first hit up to `T`.
    pub fn n_crossings(&self) -> usize {
        self.trace.entries.len().saturating_sub(1)
    }

    /// Re-integrates from the last crossing before `t`.
    pub fn state_at(&self, t: f64) -> Result<PdmpState> {
        if !(t >= 0.0 && t <= self.config.t_total) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.config.t_total)));
        }
        let tol = self.config.section.tol;
        if t < self.sigma0 || self.trace.entries.is_empty() {
            let field = self.config.field.with_eta(self.eta_approach);
            return Ok(PdmpState {
                t,
                position: flow(&field, self.y0, t, tol)?,
                active_eta: self.eta_approach,
                n_t: 0,
                age: t,
                sigma0: self.sigma0,
                approaching: true,
            });
        }
        let e = &self.trace.entries;
        let n = e.partition_point(|en| en.sigma <= t) - 1;
        let entry = &e[n];
        let field = self.config.field.with_eta(entry.eta);
        let age = t - entry.sigma;
        Ok(PdmpState {
            t,
            position: flow(&field, entry.x.y, age, tol)?,
            active_eta: entry.eta,
            n_t: n,
            age,
            sigma0: self.sigma0,
            approaching: false,
        })
    }

    fn observable_index(&self, f: &Observable) -> Result<usize> {
        self.observables
            .iter()
            .position(|o| o == f)
            .ok_or_else(|| Error::Precondition(format!("observable {} was not integrated", f.name())))
    }

    /// `(1/(T - sigma_b)) int_{sigma_b}^T f(u_t) dt` with `b = burn_in`, and a
    /// batch-means error from 20 time batches.
    pub fn time_average(&self, f: &Observable, burn_in: usize) -> Result<Estimate> {
        let i = self.observable_index(f)?;
        let e = &self.trace.entries;
        if e.len() < burn_in + N_BATCHES {
            return Err(Error::Precondition(format!("{} transitions do not cover burn-in {burn_in}", e.len())));
        }
        let t_start = e[burn_in].sigma;
        let span = self.config.t_total - t_start;
        let mut sums = vec![0.0; N_BATCHES];
        let mut lens = vec![0.0; N_BATCHES];
        for (k, en) in e.iter().enumerate().skip(burn_in) {
            let b = (((en.sigma - t_start) / span * N_BATCHES as f64) as usize).min(N_BATCHES - 1);
            sums[b] += self.clipped_integrals[k][i];
            lens[b] += en.tau.min(self.config.t_total - en.sigma);
        }
        let total: f64 = sums.iter().sum();
        let est = batch_ratio(&sums, &lens, N_BATCHES)?;
        Ok(Estimate { value: total / span, std_err: est.std_err })
    }

    /// Average over `[0, T]` including the approach to the section.
    pub fn full_time_average(&self, f: &Observable) -> Result<f64> {
        let i = self.observable_index(f)?;
        let s: f64 = self.approach_integrals[i] + self.clipped_integrals.iter().map(|v| v[i]).sum::<f64>();
        Ok(s / self.config.t_total)
    }
}

/// Time average of `f` along one simulated path.
pub fn time_average(cfg: &PdmpConfig, y0: PhaseState, f: Observable, burn_in: usize) -> Result<Estimate> {
    simulate_pdmp(cfg, y0, &[f])?.time_average(&f, burn_in)
}

/// Ratio-formula estimate
/// `E[int_0^{t_n} f(Phi_{eta_n}^s x_n) ds] / E[t_n]`
/// over the stationary part of the trace, re-integrating every sojourn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub std_err: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub n: usize,
}

fn sojourn_integral(
    field: &FieldSpec,
    section: &SectionSpec,
    eta: f64,
    x: &crate::section::SectionEvent,
    obs: &[Observable],
) -> Result<(Vec<f64>, f64)> {
    let f = field.with_eta(eta);
    let mut acc = vec![0.0; obs.len()];
    let end = {
        let mut v = |d: &DenseSegment, a: f64, b: f64| integrate_piece(d, a, b, obs, &mut acc);
        flow_to_section(&f, eta, section, x.y, x.t, StartMode::Exclusive, Some(&mut v))?
    };
    Ok((acc, end.t - x.t))
}

fn check_stationary_len(trace: &MarkovRenewalTrace, burn_in: usize) -> Result<()> {
    if trace.entries.is_empty() {
        return Err(Error::Precondition("empty trace".into()));
    }
    let n = trace.entries.len().saturating_sub(burn_in);
    if n < 1000 {
        return Err(Error::Precondition(format!("need at least 1000 transitions after burn-in, have {n}")));
    }
    Ok(())
}

pub fn ratio_formula_estimate(
    trace: &MarkovRenewalTrace,
    observables: &[Observable],
    burn_in: usize,
) -> Result<Vec<RatioEstimate>> {
    check_stationary_len(trace, burn_in)?;
    let per: Vec<(Vec<f64>, f64)> = trace
        .stationary(burn_in)
        .par_iter()
        .map(|e| sojourn_integral(&trace.field, &trace.section, e.eta, &e.x, observables))
        .collect::<Result<_>>()?;
    let den: Vec<f64> = per.iter().map(|p| p.1).collect();
    (0..observables.len())
        .map(|i| {
            let num: Vec<f64> = per.iter().map(|p| p.0[i]).collect();
            let est = batch_ratio(&num, &den, N_BATCHES)?;
            Ok(RatioEstimate {
                value: est.value,
                std_err: est.std_err,
                numerator: num.iter().sum::<f64>() / num.len() as f64,
                denominator: den.iter().sum::<f64>() / den.len() as f64,
                n: num.len(),
            })
        })
        .collect()
}

/// `(int t dmu_R)^-1 int dmu_R int_0^t f o S^s ds` with `mu_R` the empirical
/// measure of the lifted chain `(x_n, theta^n omega)`; the roof and the noise
/// come from the suspension coordinates rather than from the trace records.
pub fn lifted_measure_probe(
    trace: &MarkovRenewalTrace,
    observables: &[Observable],
    burn_in: usize,
) -> Result<Vec<f64>> {
    check_stationary_len(trace, burn_in)?;
    let chain_noise = NoiseSequence::new(trace.law.clone(), trace.seed).shift(1);
    let per: Vec<(Vec<f64>, f64)> = (burn_in..trace.entries.len())
        .into_par_iter()
        .map(|n| {
            let p = SuspensionPoint { x: trace.entries[n].x, omega: chain_noise.shift(n as u64), s: 0.0 };
            let eta = p.omega.first();
            sojourn_integral(&trace.field, &trace.section, eta, &p.x, observables)
        })
        .collect::<Result<_>>()?;
    let roof: f64 = per.iter().map(|p| p.1).sum();
    Ok((0..observables.len()).map(|i| per.iter().map(|p| p.0[i]).sum::<f64>() / roof).collect())
}

/// Empirical stationary measure of the embedded chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMeasure {
    pub states: Vec<PhaseState>,
    pub sojourns: Vec<f64>,
}

impl ChainMeasure {
    pub fn mass(&self) -> f64 {
        if self.states.is_empty() {
            0.0
        } else {
            1.0
        }
    }

    pub fn integrate(&self, f: impl Fn(&PhaseState) -> f64) -> f64 {
        self.states.iter().map(f).sum::<f64>() / self.states.len() as f64
    }

    pub fn integrate_with_error(&self, f: impl Fn(&PhaseState) -> f64) -> Result<Estimate> {
        let v: Vec<f64> = self.states.iter().map(f).collect();
        batch_means(&v, N_BATCHES)
    }

    /// Pooled sojourn distribution `F(t) = P(t_n <= t)`.
    pub fn sojourn_cdf(&self, t: f64) -> f64 {
        self.sojourns.iter().filter(|s| **s <= t).count() as f64 / self.sojourns.len() as f64
    }

    /// `int_0^inf (1 - F(s)) ds`, which is the mean sojourn.
    pub fn mean_sojourn(&self) -> f64 {
        let mut s = self.sojourns.clone();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let mut prev = 0.0;
        let mut acc = 0.0;
        for (k, v) in s.iter().enumerate() {
            acc += (v - prev) * (1.0 - k as f64 / n);
            prev = *v;
        }
        acc
    }
}

pub fn empirical_stationary_measure(trace: &MarkovRenewalTrace, burn_in: usize) -> ChainMeasure {
    let st = trace.stationary(burn_in);
    ChainMeasure { states: st.iter().map(|e| e.x.y).collect(), sojourns: st.iter().map(|e| e.tau).collect() }
}

/// Five Lipschitz functions on the section for weak-convergence probes.
pub fn lipschitz_test_functions() -> Vec<(&'static str, fn(&PhaseState) -> f64)> {
    vec![
        ("casimir_scaled", |y| casimir(y) / 1000.0),
        ("tanh_y1", |y| (y.0[0] / 10.0).tanh()),
        ("tanh_y2", |y| (y.0[1] / 10.0).tanh()),
        ("y3_scaled", |y| y.0[2] / 50.0),
        ("abs_y1_scaled", |y| y.0[0].abs() / 20.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Frame;
    use crate::section::attractor_point;

    fn config(law: NoiseLaw, t_total: f64, seed: u64) -> (PdmpConfig, PhaseState) {
        let field = FieldSpec::classical(Frame::YFrame);
        let section = SectionSpec::new(&field, 30.0);
        let y0 = attractor_point(&field, 20.0).unwrap();
        (PdmpConfig { field, law, section, t_total, seed, sample_dt: Some(0.05) }, y0)
    }

    #[test]
    fn degenerate_noise_follows_the_deterministic_flow() {
        let (cfg, y0) = config(NoiseLaw::DeltaZero, 10.0, 1);
        let run = simulate_pdmp(&cfg, y0, &[Observable::One]).unwrap();
        for &(t, y) in run.samples.iter().step_by(10) {
            let exact = flow(&cfg.field, y0, t, 1e-12).unwrap();
            // chaotic growth over t <= 10 amplifies tolerance-level differences
            assert!(y.max_abs_diff(&exact) < 1e-4 * (1.0 + t).powi(2), "t = {t}: {:?} vs {:?}", y.0, exact.0);
        }
    }

    #[test]
    fn renewal_bookkeeping() {
        let (cfg, y0) = config(NoiseLaw::uniform(0.05), 40.0, 7);
        let run = simulate_pdmp(&cfg, y0, &[Observable::One]).unwrap();
        let e = &run.trace.entries;
        assert!(e.last().unwrap().sigma <= cfg.t_total && run.trace.end.t > cfg.t_total);
        assert_eq!(run.n_crossings(), e.iter().filter(|en| en.sigma > run.sigma0 && en.sigma <= cfg.t_total).count());
        for w in e.windows(2) {
            assert!((w[1].sigma - w[0].sigma - w[0].tau).abs() < 1e-12 && w[0].tau > 0.0);
        }
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        for _ in 0..100 {
            let t = rand::Rng::gen_range(&mut rng, run.sigma0..cfg.t_total);
            let s = run.state_at(t).unwrap();
            let en = &e[s.n_t];
            assert!(en.sigma <= t && t < en.sigma + en.tau);
            assert!(s.age >= 0.0 && s.age < en.tau);
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let (cfg, y0) = config(NoiseLaw::uniform(0.05), 20.0, 11);
        let a = simulate_pdmp(&cfg, y0, &[Observable::Casimir]).unwrap();
        let b = simulate_pdmp(&cfg, y0, &[Observable::Casimir]).unwrap();
        assert_eq!(a, b);
        let (cfg2, _) = config(NoiseLaw::uniform(0.05), 20.0, 12);
        let c = simulate_pdmp(&cfg2, y0, &[Observable::Casimir]).unwrap();
        assert_ne!(a.trace.entries, c.trace.entries);
    }

    #[test]
    fn start_outside_basin_is_rejected() {
        let (mut cfg, _) = config(NoiseLaw::DeltaZero, 10.0, 1);
        cfg.section = cfg.section.with_horizon(2.0);
        // on the invariant axis C grows monotonically and never peaks
        let eq = cfg.field.x_to_y(&PhaseState::new(0.0, 0.0, 10.0));
        let r = simulate_pdmp(&cfg, eq, &[]);
        assert!(matches!(r, Err(Error::HorizonExceeded { .. })), "{r:?}");
    }

    #[test]
    fn constant_observable_is_normalized() {
        let (cfg, y0) = config(NoiseLaw::uniform(0.05), 900.0, 5);
        let run = simulate_pdmp(&cfg, y0, &[Observable::One]).unwrap();
        assert!((run.full_time_average(&Observable::One).unwrap() - 1.0).abs() < 1e-12);
        assert!((run.time_average(&Observable::One, 100).unwrap().value - 1.0).abs() < 1e-12);
        let r = ratio_formula_estimate(&run.trace, &[Observable::One], 100).unwrap();
        assert!((r[0].value - 1.0).abs() < 1e-12);
        let l = lifted_measure_probe(&run.trace, &[Observable::One], 100).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-12);
        let m = empirical_stationary_measure(&run.trace, 100);
        assert_eq!(m.mass(), 1.0);
        let mean = m.sojourns.iter().sum::<f64>() / m.sojourns.len() as f64;
        assert!((m.mean_sojourn() - mean).abs() < 1e-12);
    }

    #[test]
    fn lifted_probe_matches_ratio_formula() {
        let (cfg, y0) = config(NoiseLaw::uniform(0.05), 900.0, 9);
        let run = simulate_pdmp(&cfg, y0, &[]).unwrap();
        let obs = [Observable::Casimir, Observable::AbsY1];
        let r = ratio_formula_estimate(&run.trace, &obs, 100).unwrap();
        let l = lifted_measure_probe(&run.trace, &obs, 100).unwrap();
        for (a, b) in r.iter().zip(&l) {
            assert!((a.value - b).abs() <= 1e-12 * a.value.abs(), "{} vs {b}", a.value);
        }
    }

    #[test]
    fn short_trace_is_rejected() {
        let (cfg, y0) = config(NoiseLaw::DeltaZero, 20.0, 1);
        let run = simulate_pdmp(&cfg, y0, &[]).unwrap();
        assert!(matches!(ratio_formula_estimate(&run.trace, &[Observable::One], 0), Err(Error::Precondition(_))));
    }
}
