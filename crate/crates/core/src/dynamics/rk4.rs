use super::{PhaseState, VectorField};

/// Classical fixed-step RK4, used as an independent cross-check.
pub fn rk4_integrate<F: VectorField + ?Sized>(field: &F, y0: PhaseState, t_end: f64, n_steps: usize) -> PhaseState {
    let h = t_end / n_steps as f64;
    let mut y = y0;
    for _ in 0..n_steps {
        let k1 = field.velocity(&y);
        let k2 = field.velocity(&(y + k1 * (0.5 * h)));
        let k3 = field.velocity(&(y + k2 * (0.5 * h)));
        let k4 = field.velocity(&(y + k3 * h));
        y = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}
