//! Crossings of the Casimir-maximum surface and the return map on it.
//!
//! The surface is `{C' = 0, C'' <= 0}`, with `C'` taken along the unperturbed
//! field so that all perturbed flows share it, restricted to the box
//! `|y1| <= eps, |y2| <= eps, y3 + (gamma + zeta) in [0, eps]`. Crossings are
//! sign changes of `C'` from positive to non-positive between accepted
//! integrator steps, refined on the step's dense output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{casimir, section_function, section_rate, DenseSegment, Dop853, FieldSpec, PhaseState,
    StepperConfig, VectorField};
use crate::error::{Error, Result};
use crate::noise::{NoiseLaw, NoiseSequence};
use crate::stats;

/// Where the section lives and how hard to look for it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    /// Half-width of the box around `c0`.
    pub epsilon_box: f64,
    /// `gamma + zeta`; the box sits at `y3 = -anchor`.
    pub anchor: f64,
    /// Give up after this much flow time without a crossing.
    pub horizon: f64,
    /// Target for `|C'|` at a located crossing.
    pub root_tol: f64,
    /// Integrator tolerance.
    pub tol: f64,
    /// Largest integrator step; keeps pairs of nearby extrema from hiding in one step.
    pub h_max: f64,
}

impl SectionSpec {
    pub fn new(field: &FieldSpec, epsilon_box: f64) -> Self {
        SectionSpec {
            epsilon_box,
            anchor: field.gamma + field.zeta,
            horizon: 100.0,
            root_tol: 1e-9,
            tol: 1e-10,
            h_max: 0.05,
        }
    }

    /// Accepts every Casimir maximum; used for calibration.
    pub fn unbounded(field: &FieldSpec) -> Self {
        SectionSpec::new(field, f64::INFINITY)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_box > 0.0) {
            return Err(Error::Domain(format!("epsilon_box must be positive, got {}", self.epsilon_box)));
        }
        if !(self.horizon > 0.0 && self.tol > 0.0 && self.root_tol > 0.0 && self.h_max > 0.0) {
            return Err(Error::Domain("horizon, tolerances and h_max must be positive".into()));
        }
        Ok(())
    }

    /// Smallest box half-width containing `y`; infinite below the box floor.
    pub fn box_radius(&self, y: &PhaseState) -> f64 {
        let up = y.0[2] + self.anchor;
        if up < 0.0 {
            return f64::INFINITY;
        }
        y.0[0].abs().max(y.0[1].abs()).max(up)
    }

    pub fn contains(&self, y: &PhaseState) -> bool {
        self.box_radius(y) <= self.epsilon_box
    }

    fn stepper_config(&self) -> StepperConfig {
        StepperConfig { h_max: self.h_max, ..StepperConfig::with_tolerance(self.tol) }
    }
}

/// A located crossing of the section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionEvent {
    pub t: f64,
    pub y: PhaseState,
    pub casimir: f64,
    /// Noise value of the field that produced the crossing.
    pub eta: f64,
    /// Rate of `C'_0` along the active flow at the crossing (`C''` when `eta = 0`).
    pub ddc: f64,
    /// Set when `C''` is too close to zero for the crossing to be transversal.
    pub tangency: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub x: SectionEvent,
    pub tau: f64,
    pub x_next: SectionEvent,
}

/// Whether a start point already on the section counts as a crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartMode {
    Inclusive,
    Exclusive,
}

/// Receives the flowed path piece by piece: the dense interpolant and the
/// covered time interval.
pub type PathVisitor<'v> = &'v mut dyn FnMut(&DenseSegment, f64, f64);

fn make_event<F: VectorField + ?Sized>(field: &F, eta: f64, t: f64, y: PhaseState) -> SectionEvent {
    let (_, ddc) = section_function(field, &y);
    let v = field.velocity(&y);
    let tangency = ddc.abs() <= 1e-6 * (1.0 + 2.0 * v.norm_sq());
    SectionEvent { t, y, casimir: casimir(&y), eta, ddc, tangency }
}

/// Root of `C'` on a step with `C'(0) > 0 >= C'(1)`, Illinois-style regula falsi.
fn refine_root<F: VectorField + ?Sized>(field: &F, dense: &DenseSegment, g0: f64, g1: f64, tol: f64) -> f64 {
    let g = |s: f64| section_rate(field, &dense.at_fraction(s));
    let (mut a, mut b, mut ga, mut gb) = (0.0f64, 1.0f64, g0, g1);
    if gb == 0.0 {
        return 1.0;
    }
    let mut side = 0i8;
    let mut best = (b, gb.abs());
    for _ in 0..200 {
        let mut s = b - gb * (b - a) / (gb - ga);
        if !(s > a && s < b) {
            s = 0.5 * (a + b);
        }
        let gs = g(s);
        if gs.abs() < best.1 {
            best = (s, gs.abs());
        }
        if gs.abs() <= tol * 0.01 || (b - a) < 4.0 * f64::EPSILON {
            break;
        }
        if gs > 0.0 {
            a = s;
            ga = gs;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = s;
            gb = gs;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    best.0
}

/// Flows from `(t0, y0)` to the next section crossing, reporting the path to `visit`.
pub fn flow_to_section<F: VectorField + ?Sized>(
    field: &F,
    eta: f64,
    section: &SectionSpec,
    y0: PhaseState,
    t0: f64,
    mode: StartMode,
    mut visit: Option<PathVisitor<'_>>,
) -> Result<SectionEvent> {
    if !y0.is_finite() {
        return Err(Error::Domain("non-finite start point".into()));
    }
    let mut g_prev = section_rate(field, &y0);
    if mode == StartMode::Inclusive && g_prev.abs() <= section.root_tol && section.contains(&y0) {
        let ev = make_event(field, eta, t0, y0);
        if ev.ddc <= section.root_tol {
            return Ok(ev);
        }
    }
    if mode == StartMode::Exclusive && g_prev > 0.0 && g_prev < 1e-6 {
        g_prev = 0.0;
    }
    let t_end = t0 + section.horizon;
    let mut stepper = Dop853::new(field, t0, y0, section.stepper_config());
    while stepper.t() < t_end {
        let seg = stepper.step_until(t_end)?;
        let g1 = section_rate(field, &seg.y1);
        if g_prev > 0.0 && g1 <= 0.0 {
            let dense = seg.dense(field);
            let s = refine_root(field, &dense, g_prev, g1, section.root_tol);
            let y = dense.at_fraction(s);
            let t = seg.t0 + s * seg.h;
            if section.contains(&y) {
                if let Some(v) = visit.as_mut() {
                    v(&dense, seg.t0, t);
                }
                return Ok(make_event(field, eta, t, y));
            }
            if let Some(v) = visit.as_mut() {
                v(&dense, seg.t0, seg.t1());
            }
        } else if let Some(v) = visit.as_mut() {
            v(&seg.dense(field), seg.t0, seg.t1());
        }
        g_prev = g1;
    }
    Err(Error::HorizonExceeded { t_start: t0, horizon: section.horizon })
}

/// First crossing of the section from `y0` (a point already on it counts, at `t = 0`).
pub fn next_crossing(spec: &FieldSpec, section: &SectionSpec, y0: PhaseState) -> Result<SectionEvent> {
    spec.validate()?;
    section.validate()?;
    flow_to_section(spec, spec.eta, section, y0, 0.0, StartMode::Inclusive, None)
}

/// `next_crossing` for an arbitrary field.
pub fn next_crossing_with<F: VectorField + ?Sized>(
    field: &F,
    section: &SectionSpec,
    y0: PhaseState,
) -> Result<SectionEvent> {
    section.validate()?;
    flow_to_section(field, 0.0, section, y0, 0.0, StartMode::Inclusive, None)
}

/// `R_eta(x)` and `tau_eta(x)` under the field `spec`.
pub fn return_map(spec: &FieldSpec, section: &SectionSpec, x: &SectionEvent) -> Result<ReturnSample> {
    let x_next = flow_to_section(spec, spec.eta, section, x.y, x.t, StartMode::Exclusive, None)?;
    Ok(ReturnSample { x: *x, tau: x_next.t - x.t, x_next })
}

/// A point on the attractor: the classical seed `(1, 1, 1)` (X frame) flowed for `transient`.
pub fn attractor_point(spec: &FieldSpec, transient: f64) -> Result<PhaseState> {
    let seed = match spec.frame {
        crate::dynamics::Frame::XFrame => PhaseState::new(1.0, 1.0, 1.0),
        crate::dynamics::Frame::YFrame => spec.x_to_y(&PhaseState::new(1.0, 1.0, 1.0)),
    };
    crate::dynamics::flow(spec, seed, transient, 1e-10)
}

/// Smallest box half-width holding the `quantile` fraction of `n` consecutive
/// Casimir maxima starting from `y0`.
pub fn calibrate_box(spec: &FieldSpec, y0: PhaseState, n: usize, quantile: f64) -> Result<f64> {
    let section = SectionSpec::unbounded(spec);
    let mut x = next_crossing(spec, &section, y0)?;
    let mut radii = Vec::with_capacity(n);
    for _ in 0..n {
        radii.push(section.box_radius(&x.y));
        x = return_map(spec, &section, &x)?.x_next;
    }
    Ok(stats::quantile(&radii, quantile))
}

/// One transition of the Markov renewal process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub n: usize,
    /// Chain state `x_n`.
    pub x: SectionEvent,
    /// `eta_n`, the field used from `x_n` on.
    pub eta: f64,
    /// Sojourn `t_n = tau_{eta_n}(x_n)`.
    pub tau: f64,
    /// `sigma_n`, absolute time of `x_n`.
    pub sigma: f64,
}

/// The sequence `(x_n, eta_n, t_n, sigma_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovRenewalTrace {
    pub seed: u64,
    pub law: NoiseLaw,
    pub field: FieldSpec,
    pub section: SectionSpec,
    pub entries: Vec<TraceEntry>,
    /// State reached after the last entry.
    pub end: SectionEvent,
    /// `None` when complete; the failure message when the chain was cut short.
    pub failure: Option<String>,
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    n: usize,
    t_abs: f64,
    tau: f64,
    eta: f64,
    y: &'a [f64; 3],
    casimir: f64,
}

impl MarkovRenewalTrace {
    pub fn is_valid(&self) -> bool {
        self.failure.is_none()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries after discarding the first `burn_in`.
    pub fn stationary(&self, burn_in: usize) -> &[TraceEntry] {
        &self.entries[burn_in.min(self.entries.len())..]
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            let rec = JsonRecord { n: e.n, t_abs: e.sigma, tau: e.tau, eta: e.eta, y: &e.x.y.0, casimir: e.x.casimir };
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,tau,casimir")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.n, crate::dynamics::fmt17(e.tau), crate::dynamics::fmt17(e.x.casimir))?;
        }
        Ok(())
    }
}

/// Runs the embedded chain `x_{n+1} = R_{eta_n}(x_n)` for `n` transitions.
///
/// `base` supplies the parameters and the direction `H`; its own `eta` is ignored.
pub fn sample_chain(
    base: &FieldSpec,
    law: &NoiseLaw,
    section: &SectionSpec,
    x0: SectionEvent,
    n: usize,
    seed: u64,
) -> Result<MarkovRenewalTrace> {
    if n == 0 {
        return Err(Error::Precondition("chain length must be at least 1".into()));
    }
    law.validate()?;
    base.with_eta(law.eps()).validate()?;
    section.validate()?;
    let omega = NoiseSequence::new(law.clone(), seed);
    let mut entries = Vec::with_capacity(n);
    let mut x = x0;
    let mut failure = None;
    for k in 0..n {
        let eta = omega.get(k as u64);
        let field = base.with_eta(eta);
        match return_map(&field, section, &x) {
            Ok(r) => {
                entries.push(TraceEntry { n: k, x, eta, tau: r.tau, sigma: x.t });
                x = r.x_next;
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    Ok(MarkovRenewalTrace {
        seed,
        law: law.clone(),
        field: base.with_eta(0.0),
        section: *section,
        entries,
        end: x,
        failure,
    })
}
