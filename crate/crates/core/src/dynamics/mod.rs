//! Lorenz vector fields, the Casimir function and integration of the flow.
//!
//! Two coordinate frames are supported. The X frame is the classical system
//!
//! ```text
//! x1' = -zeta x1 + zeta x2
//! x2' = -x1 x3 + gamma x1 - x2
//! x3' =  x1 x2 - beta x3
//! ```
//!
//! and the Y frame is its translate `y = x - (0, 0, gamma + zeta)`:
//!
//! ```text
//! y1' = -zeta y1 + zeta y2
//! y2' = -y1 y3 - zeta y1 - y2
//! y3' =  y1 y2 - beta y3 - beta (gamma + zeta)
//! ```
//!
//! Note the `-zeta y1` term in the second equation: it is what the translation
//! produces, and it keeps `c0 = (0, 0, -(gamma + zeta))` the image of the
//! origin. In the Y frame the derivative of the Casimir `C(y) = |y|^2` along
//! the unperturbed field has no cubic terms.

mod dop853;
mod rk4;

pub use dop853::{DenseSegment, Dop853, Segment, StepperConfig};
pub use rk4::rk4_integrate;

use std::io::Write;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of phase space.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState(pub [f64; 3]);

impl PhaseState {
    pub const ORIGIN: PhaseState = PhaseState([0.0; 3]);

    pub fn new(y1: f64, y2: f64, y3: f64) -> Self {
        PhaseState([y1, y2, y3])
    }

    pub fn dot(&self, other: &PhaseState) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &PhaseState) -> f64 {
        (0..3)
            .map(|i| (self.0[i] - other.0[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for PhaseState {
    type Output = PhaseState;
    fn add(self, o: PhaseState) -> PhaseState {
        PhaseState([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for PhaseState {
    type Output = PhaseState;
    fn sub(self, o: PhaseState) -> PhaseState {
        PhaseState([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for PhaseState {
    type Output = PhaseState;
    fn mul(self, s: f64) -> PhaseState {
        PhaseState([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for PhaseState {
    type Output = PhaseState;
    fn neg(self) -> PhaseState {
        self * -1.0
    }
}

/// Anything the integrator and the section detector can flow along.
pub trait VectorField: Sync {
    fn velocity(&self, y: &PhaseState) -> PhaseState;

    /// Jacobian row-major: `jac[i][j] = d v_i / d y_j`.
    fn jacobian(&self, y: &PhaseState) -> [[f64; 3]; 3];

    /// Field whose Casimir maxima define the section. Perturbed fields keep
    /// the unperturbed surface, so every `R_eta` maps one fixed surface.
    fn section_velocity(&self, y: &PhaseState) -> PhaseState {
        self.velocity(y)
    }
}

/// Linear field `y' = rate * y`, handy as a closed-form test flow.
#[derive(Clone, Copy, Debug)]
pub struct LinearField {
    pub rate: f64,
}

impl VectorField for LinearField {
    fn velocity(&self, y: &PhaseState) -> PhaseState {
        *y * self.rate
    }

    fn jacobian(&self, _y: &PhaseState) -> [[f64; 3]; 3] {
        let r = self.rate;
        [[r, 0.0, 0.0], [0.0, r, 0.0], [0.0, 0.0, r]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Frame {
    /// Classical coordinates, equilibrium at the origin.
    XFrame,
    /// Translated coordinates, `y3 = x3 - (gamma + zeta)`.
    YFrame,
}

/// Parameters of a (possibly perturbed) Lorenz field `phi_eta = phi_0 + eta H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub zeta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub frame: Frame,
    pub eta: f64,
    pub direction: [f64; 3],
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::classical(Frame::YFrame)
    }
}

impl FieldSpec {
    /// `zeta = 10, gamma = 28, beta = 8/3`, unperturbed.
    pub fn classical(frame: Frame) -> Self {
        FieldSpec {
            zeta: 10.0,
            gamma: 28.0,
            beta: 8.0 / 3.0,
            frame,
            eta: 0.0,
            direction: [0.0, 0.0, 1.0],
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_direction(mut self, h: [f64; 3]) -> Self {
        self.direction = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("zeta", self.zeta), ("gamma", self.gamma), ("beta", self.beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.eta.is_finite() || self.direction.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite perturbation".into()));
        }
        if self.eta != 0.0 {
            let n = PhaseState(self.direction).norm();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("perturbation direction must be a unit vector, |H| = {n}")));
            }
        }
        Ok(())
    }

    /// `min(1, zeta, beta)`, the dissipation rate in the Casimir estimate.
    pub fn dissipation_rate(&self) -> f64 {
        1.0f64.min(self.zeta).min(self.beta)
    }

    /// `H0 = (0, 0, -beta (zeta + gamma))`, the constant part of the Y-frame field.
    pub fn h0(&self) -> PhaseState {
        PhaseState([0.0, 0.0, -self.beta * (self.zeta + self.gamma)])
    }

    /// `H_eta = eta H + H0`.
    pub fn h_eta(&self) -> PhaseState {
        PhaseState(self.direction) * self.eta + self.h0()
    }

    /// Unperturbed field.
    pub fn base_velocity(&self, y: &PhaseState) -> PhaseState {
        let [y1, y2, y3] = y.0;
        let (z, g, b) = (self.zeta, self.gamma, self.beta);
        match self.frame {
            Frame::XFrame => PhaseState([-z * y1 + z * y2, -y1 * y3 + g * y1 - y2, y1 * y2 - b * y3]),
            Frame::YFrame => PhaseState([
                -z * y1 + z * y2,
                -y1 * y3 - z * y1 - y2,
                y1 * y2 - b * y3 - b * (g + z),
            ]),
        }
    }

    /// Offset taking X-frame coordinates to Y-frame coordinates.
    pub fn frame_shift(&self) -> PhaseState {
        PhaseState([0.0, 0.0, -(self.gamma + self.zeta)])
    }

    pub fn x_to_y(&self, x: &PhaseState) -> PhaseState {
        *x + self.frame_shift()
    }

    pub fn y_to_x(&self, y: &PhaseState) -> PhaseState {
        *y - self.frame_shift()
    }
}

impl VectorField for FieldSpec {
    fn velocity(&self, y: &PhaseState) -> PhaseState {
        let v = self.base_velocity(y);
        if self.eta == 0.0 {
            v
        } else {
            v + PhaseState(self.direction) * self.eta
        }
    }

    fn jacobian(&self, y: &PhaseState) -> [[f64; 3]; 3] {
        let [y1, y2, y3] = y.0;
        let (z, g, b) = (self.zeta, self.gamma, self.beta);
        let row2 = match self.frame {
            Frame::XFrame => [-y3 + g, -1.0, -y1],
            Frame::YFrame => [-y3 - z, -1.0, -y1],
        };
        [[-z, z, 0.0], row2, [y2, y1, -b]]
    }

    fn section_velocity(&self, y: &PhaseState) -> PhaseState {
        self.base_velocity(y)
    }
}

/// `phi_eta(y)`, checked.
pub fn eval_field(spec: &FieldSpec, y: &PhaseState) -> Result<PhaseState> {
    spec.validate()?;
    if !y.is_finite() {
        return Err(Error::Domain(format!("non-finite state {:?}", y.0)));
    }
    Ok(spec.velocity(y))
}

/// `C(y) = |y|^2`.
pub fn casimir(y: &PhaseState) -> f64 {
    y.norm_sq()
}

/// First and second time derivatives of `C` along `field`, closed form.
///
/// `C' = 2 <v, y>` and `C'' = 2 (<J v, y> + |v|^2)`.
pub fn casimir_derivatives<F: VectorField + ?Sized>(field: &F, y: &PhaseState) -> (f64, f64) {
    let v = field.velocity(y);
    let j = field.jacobian(y);
    let jv = PhaseState([
        j[0][0] * v.0[0] + j[0][1] * v.0[1] + j[0][2] * v.0[2],
        j[1][0] * v.0[0] + j[1][1] * v.0[1] + j[1][2] * v.0[2],
        j[2][0] * v.0[0] + j[2][1] * v.0[1] + j[2][2] * v.0[2],
    ]);
    (2.0 * v.dot(y), 2.0 * (jv.dot(y) + v.norm_sq()))
}

/// `C'` only.
pub fn casimir_rate<F: VectorField + ?Sized>(field: &F, y: &PhaseState) -> f64 {
    2.0 * field.velocity(y).dot(y)
}

/// Event function of the section, `g = 2 <phi_0(y), y>`, and its rate of
/// change along `field`. For an unperturbed field these are `C'` and `C''`.
pub fn section_function<F: VectorField + ?Sized>(field: &F, y: &PhaseState) -> (f64, f64) {
    let v0 = field.section_velocity(y);
    let v = field.velocity(y);
    let j = field.jacobian(y);
    let jv = PhaseState([
        j[0][0] * v.0[0] + j[0][1] * v.0[1] + j[0][2] * v.0[2],
        j[1][0] * v.0[0] + j[1][1] * v.0[1] + j[1][2] * v.0[2],
        j[2][0] * v.0[0] + j[2][1] * v.0[1] + j[2][2] * v.0[2],
    ]);
    (2.0 * v0.dot(y), 2.0 * (jv.dot(y) + v0.dot(&v)))
}

pub fn section_rate<F: VectorField + ?Sized>(field: &F, y: &PhaseState) -> f64 {
    2.0 * field.section_velocity(y).dot(y)
}

/// Time-stamped samples of an integrated orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, PhaseState)>,
    pub tolerance: f64,
}

impl Trajectory {
    pub fn last(&self) -> (f64, PhaseState) {
        *self.samples.last().expect("trajectory is never empty")
    }

    /// CSV with columns `t,y1,y2,y3,C`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y1,y2,y3,C")?;
        for (t, y) in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(*t),
                fmt17(y.0[0]),
                fmt17(y.0[1]),
                fmt17(y.0[2]),
                fmt17(casimir(y))
            )?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Adaptive integration over `[0, t_end]`, recording every accepted step.
pub fn integrate<F: VectorField + ?Sized>(field: &F, y0: PhaseState, t_end: f64, tol: f64) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(t_end > 0.0) {
        return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
    }
    if !y0.is_finite() {
        return Err(Error::Domain("non-finite initial state".into()));
    }
    let mut stepper = Dop853::new(field, 0.0, y0, StepperConfig::with_tolerance(tol));
    let mut samples = vec![(0.0, y0)];
    while stepper.t() < t_end {
        let seg = stepper.step_until(t_end)?;
        samples.push((seg.t1(), seg.y1));
    }
    Ok(Trajectory { samples, tolerance: tol })
}

/// State at `t_end` without storing the path.
pub fn flow<F: VectorField + ?Sized>(field: &F, y0: PhaseState, t_end: f64, tol: f64) -> Result<PhaseState> {
    if t_end == 0.0 {
        return Ok(y0);
    }
    if !(t_end > 0.0) {
        return Err(Error::Domain(format!("t_end must be non-negative, got {t_end}")));
    }
    let mut stepper = Dop853::new(field, 0.0, y0, StepperConfig::with_tolerance(tol));
    while stepper.t() < t_end {
        stepper.step_until(t_end)?;
    }
    Ok(stepper.y())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Checks `C(Phi^t u) <= C(u) e^{-m t} + |H_eta|^2 / m^2 (1 + e^{-m t})`
/// with `m = min(1, zeta, beta)`.
pub fn check_lyapunov_bound(spec: &FieldSpec, y0: PhaseState, t: f64, tol: f64) -> Result<BoundReport> {
    if spec.frame != Frame::YFrame {
        return Err(Error::Precondition("the Casimir bound is stated in the Y frame".into()));
    }
    spec.validate()?;
    let end = flow(spec, y0, t, tol)?;
    let lhs = casimir(&end);
    let rhs = lyapunov_rhs(spec, casimir(&y0), t);
    Ok(BoundReport { lhs, rhs, satisfied: lhs <= rhs })
}

pub fn lyapunov_rhs(spec: &FieldSpec, c0: f64, t: f64) -> f64 {
    let m = spec.dissipation_rate();
    let decay = (-t * m).exp();
    c0 * decay + spec.h_eta().norm_sq() / (m * m) * (1.0 + decay)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_frame_origin_velocity() {
        let spec = FieldSpec::classical(Frame::YFrame);
        let v = eval_field(&spec, &PhaseState::ORIGIN).unwrap();
        assert_eq!(v.0[0], 0.0);
        assert_eq!(v.0[1], 0.0);
        assert!((v.0[2] + 304.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn x_frame_equilibria() {
        let spec = FieldSpec::classical(Frame::XFrame);
        assert_eq!(eval_field(&spec, &PhaseState::ORIGIN).unwrap(), PhaseState::ORIGIN);
        let s = 72f64.sqrt();
        let v = eval_field(&spec, &PhaseState::new(s, s, 27.0)).unwrap();
        assert!(v.norm() < 1e-12, "{v:?}");
    }

    #[test]
    fn non_finite_rejected() {
        let spec = FieldSpec::classical(Frame::YFrame);
        assert!(matches!(
            eval_field(&spec, &PhaseState::new(f64::NAN, 0.0, 0.0)),
            Err(Error::Domain(_))
        ));
        let bad = FieldSpec { zeta: -1.0, ..spec };
        assert!(eval_field(&bad, &PhaseState::ORIGIN).is_err());
        let unnormalized = spec.with_eta(0.1).with_direction([1.0, 1.0, 0.0]);
        assert!(eval_field(&unnormalized, &PhaseState::ORIGIN).is_err());
    }

    #[test]
    fn casimir_values() {
        assert_eq!(casimir(&PhaseState::ORIGIN), 0.0);
        assert_eq!(casimir(&PhaseState::new(0.0, 0.0, -38.0)), 1444.0);
        assert_eq!(casimir(&PhaseState::new(1.0, 2.0, 2.0)), 9.0);
    }

    #[test]
    fn casimir_rate_vanishes_on_orthogonal_velocity() {
        // At the critical point c0 the velocity vanishes.
        let spec = FieldSpec::classical(Frame::YFrame);
        let c0 = PhaseState::new(0.0, 0.0, -38.0);
        let (dc, _) = casimir_derivatives(&spec, &c0);
        assert_eq!(dc, 0.0);
    }

    #[test]
    fn unperturbed_casimir_rate_has_no_cubic_terms() {
        let spec = FieldSpec::classical(Frame::YFrame);
        let y = PhaseState::new(3.0, -7.0, 11.0);
        let expected = -2.0
            * (spec.zeta * 9.0 + 49.0 + spec.beta * 121.0 + spec.beta * (spec.gamma + spec.zeta) * 11.0);
        assert!((casimir_rate(&spec, &y) - expected).abs() < 1e-9);
    }

    #[test]
    fn h0_norm() {
        let spec = FieldSpec::classical(Frame::YFrame);
        assert!((spec.h0().norm_sq() - (304.0f64 / 3.0).powi(2)).abs() < 1e-9);
        assert_eq!(spec.dissipation_rate(), 1.0);
        let slow = FieldSpec { beta: 0.5, ..spec };
        assert_eq!(slow.dissipation_rate(), 0.5);
    }

    #[test]
    fn csv_header_and_precision() {
        let traj = Trajectory { samples: vec![(0.0, PhaseState::new(1.0, 2.0, 2.0))], tolerance: 1e-10 };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,y1,y2,y3,C");
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 1.0, 2.0, 2.0, 9.0]);
    }
}
