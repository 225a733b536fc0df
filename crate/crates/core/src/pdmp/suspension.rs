//! The random suspension semi-flow over the section, its projection `V` to
//! phase space, and the random flow `X^t`. Classes of the suspension are
//! represented by `(x, omega, s)` with `0 <= s < t(x, omega)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow, FieldSpec, PhaseState};
use crate::error::{Error, Result};
use crate::noise::{NoiseLaw, NoiseSequence};
use crate::section::{flow_to_section, SectionEvent, SectionSpec, StartMode};

#[derive(Clone, Debug, PartialEq)]
pub struct SuspensionPoint {
    pub x: SectionEvent,
    pub omega: NoiseSequence,
    pub s: f64,
}

/// Next crossing from `y` under `phi_{pi(omega)}`, with time measured from `y`.
fn hit(field: &FieldSpec, section: &SectionSpec, omega: &NoiseSequence, y: PhaseState) -> Result<SectionEvent> {
    let eta = omega.first();
    flow_to_section(&field.with_eta(eta), eta, section, y, 0.0, StartMode::Exclusive, None)
}

/// Roof `t(x, omega) = tau_{pi(omega)}(x)` and the landing point `R_{pi(omega)}(x)`.
pub fn roof(field: &FieldSpec, section: &SectionSpec, x: &SectionEvent, omega: &NoiseSequence) -> Result<(f64, SectionEvent)> {
    let ev = hit(field, section, omega, x.y)?;
    Ok((ev.t, ev))
}

/// `S^t(x, omega, s)`, reducing `s + t` modulo successive roofs. Also returns
/// the number of roofs crossed and whether any crossing was tangential.
pub fn suspension_flow(
    field: &FieldSpec,
    section: &SectionSpec,
    p: &SuspensionPoint,
    t: f64,
) -> Result<(SuspensionPoint, usize, bool)> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("semi-flow time must be non-negative, got {t}")));
    }
    let mut u = p.s + t;
    let mut x = p.x;
    let mut omega = p.omega.clone();
    let mut k = 0;
    let mut tangency = false;
    loop {
        let (r, next) = roof(field, section, &x, &omega)?;
        if u < r {
            return Ok((SuspensionPoint { x, omega, s: u }, k, tangency));
        }
        u -= r;
        tangency |= next.tangency;
        x = next;
        omega = omega.shift(1);
        k += 1;
    }
}

/// `V(x, omega, s) = (Phi_{pi(omega)}^s(x), omega)`.
pub fn project(field: &FieldSpec, section: &SectionSpec, p: &SuspensionPoint) -> Result<(PhaseState, NoiseSequence)> {
    let y = flow(&field.with_eta(p.omega.first()), p.x.y, p.s, section.tol)?;
    Ok((y, p.omega.clone()))
}

/// `X^t(y, omega)`: flow with `pi(omega)` until the section is hit, then shift
/// the noise and continue from the hitting point.
pub fn random_flow(
    field: &FieldSpec,
    section: &SectionSpec,
    y: PhaseState,
    omega: &NoiseSequence,
    t: f64,
) -> Result<(PhaseState, NoiseSequence, bool)> {
    let mut rem = t;
    let mut y = y;
    let mut omega = omega.clone();
    let mut tangency = false;
    loop {
        let ev = hit(field, section, &omega, y)?;
        if rem < ev.t {
            let end = flow(&field.with_eta(omega.first()), y, rem, section.tol)?;
            return Ok((end, omega, tangency));
        }
        rem -= ev.t;
        tangency |= ev.tangency;
        y = ev.y;
        omega = omega.shift(1);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugationReport {
    pub probes: usize,
    pub skipped_tangency: usize,
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
    /// Probes whose noise bookkeeping differed between the two sides.
    pub shift_mismatches: usize,
    pub min_crossings: usize,
    pub integrator_tolerance: f64,
}

impl ConjugationReport {
    pub fn passed(&self, bound: f64) -> bool {
        self.shift_mismatches == 0 && self.max_discrepancy <= bound
    }
}

/// Compares `V o S^t` with `X^t o V` on random `(s, t)`, each probe starting
/// from a successive chain point and spanning two to four crossings.
pub fn suspension_conjugation_check(
    field: &FieldSpec,
    section: &SectionSpec,
    law: &NoiseLaw,
    x: &SectionEvent,
    seed: u64,
    probes: usize,
) -> Result<ConjugationReport> {
    if probes < 100 {
        return Err(Error::Precondition(format!("need at least 100 probes, got {probes}")));
    }
    law.validate()?;
    field.with_eta(law.eps()).validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let mut base = SuspensionPoint { x: SectionEvent { t: 0.0, ..*x }, omega: NoiseSequence::new(law.clone(), seed), s: 0.0 };
    let mut done = 0;
    let mut skipped = 0;
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    let mut total = 0.0;
    let mut min_k = usize::MAX;
    while done < probes {
        let span = rng.gen_range(2..=4usize);
        let mut roofs = Vec::with_capacity(span + 1);
        let mut q = base.clone();
        let mut first_next = None;
        for _ in 0..=span {
            let (r, next) = roof(field, section, &q.x, &q.omega)?;
            roofs.push(r);
            first_next.get_or_insert(next);
            q = SuspensionPoint { x: SectionEvent { t: 0.0, ..next }, omega: q.omega.shift(1), s: 0.0 };
        }
        let s = rng.gen::<f64>() * roofs[0];
        let target = roofs[..span].iter().sum::<f64>() + rng.gen::<f64>() * roofs[span];
        let t = target - s;
        let p = SuspensionPoint { s, ..base.clone() };

        let (moved, k, tan_s) = suspension_flow(field, section, &p, t)?;
        let (lhs, omega_l) = project(field, section, &moved)?;
        let (y, omega) = project(field, section, &p)?;
        let (rhs, omega_r, tan_x) = random_flow(field, section, y, &omega, t)?;

        let next_x = first_next.expect("at least one roof");
        base = SuspensionPoint { x: SectionEvent { t: 0.0, ..next_x }, omega: base.omega.shift(1), s: 0.0 };
        if tan_s || tan_x {
            skipped += 1;
            continue;
        }
        if omega_l != omega_r {
            mismatches += 1;
        }
        let d = lhs.max_abs_diff(&rhs);
        worst = worst.max(d);
        total += d;
        min_k = min_k.min(k);
        done += 1;
    }
    Ok(ConjugationReport {
        probes: done,
        skipped_tangency: skipped,
        max_discrepancy: worst,
        mean_discrepancy: total / done as f64,
        shift_mismatches: mismatches,
        min_crossings: min_k,
        integrator_tolerance: section.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Frame;
    use crate::section::{attractor_point, next_crossing};

    fn setup() -> (FieldSpec, SectionSpec, SectionEvent) {
        let f = FieldSpec::classical(Frame::YFrame);
        let s = SectionSpec::new(&f, 30.0);
        let x = next_crossing(&f, &s, attractor_point(&f, 20.0).unwrap()).unwrap();
        (f, s, x)
    }

    #[test]
    fn within_one_roof_both_sides_are_the_flow() {
        let (f, sec, x) = setup();
        let omega = NoiseSequence::new(NoiseLaw::uniform(0.05), 3);
        let (r, _) = roof(&f, &sec, &x, &omega).unwrap();
        let p = SuspensionPoint { x, omega: omega.clone(), s: 0.3 * r };
        let t = 0.5 * r;
        let (moved, k, _) = suspension_flow(&f, &sec, &p, t).unwrap();
        assert_eq!(k, 0);
        assert_eq!(moved.omega, omega);
        assert!((moved.s - 0.8 * r).abs() < 1e-15);
        let direct = flow(&f.with_eta(omega.first()), x.y, 0.8 * r, sec.tol).unwrap();
        let (lhs, _) = project(&f, &sec, &moved).unwrap();
        let (y, _) = project(&f, &sec, &p).unwrap();
        let (rhs, om, _) = random_flow(&f, &sec, y, &omega, t).unwrap();
        assert_eq!(om, omega);
        assert!(lhs.max_abs_diff(&direct) < 1e-12);
        assert!(rhs.max_abs_diff(&direct) < 1e-8);
    }

    #[test]
    fn zero_time_is_the_identity() {
        let (f, sec, x) = setup();
        let omega = NoiseSequence::new(NoiseLaw::uniform(0.05), 5);
        let p = SuspensionPoint { x, omega: omega.clone(), s: 0.2 };
        let (moved, k, _) = suspension_flow(&f, &sec, &p, 0.0).unwrap();
        assert_eq!((moved.clone(), k), (p.clone(), 0));
        let (y, _) = project(&f, &sec, &p).unwrap();
        let (rhs, _, _) = random_flow(&f, &sec, y, &omega, 0.0).unwrap();
        assert_eq!(rhs, y);
    }

    #[test]
    fn two_crossings_shift_the_noise_twice() {
        let (f, sec, x) = setup();
        let omega = NoiseSequence::new(NoiseLaw::uniform(0.05), 8);
        let (r0, x1) = roof(&f, &sec, &x, &omega).unwrap();
        let x1 = SectionEvent { t: 0.0, ..x1 };
        let (r1, _) = roof(&f, &sec, &x1, &omega.shift(1)).unwrap();
        let p = SuspensionPoint { x, omega: omega.clone(), s: 0.0 };
        let (moved, k, _) = suspension_flow(&f, &sec, &p, r0 + r1 + 0.1).unwrap();
        assert_eq!(k, 2);
        assert_eq!(moved.omega, omega.shift(2));
        assert!((moved.s - 0.1).abs() < 1e-9);
    }

    #[test]
    fn conjugation_holds_on_probes() {
        let (f, sec, x) = setup();
        let sec = sec.with_tolerance(1e-12);
        let r = suspension_conjugation_check(&f, &sec, &NoiseLaw::uniform(0.05), &x, 1, 100).unwrap();
        assert!(r.min_crossings >= 2);
        assert!(r.passed(1e-7), "{r:?}");
    }

    #[test]
    fn too_few_probes() {
        let (f, sec, x) = setup();
        assert!(suspension_conjugation_check(&f, &sec, &NoiseLaw::DeltaZero, &x, 1, 10).is_err());
    }
}
