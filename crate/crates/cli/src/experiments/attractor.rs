use lorenz_stab::dynamics::{check_lyapunov_bound, integrate, section_function};
use lorenz_stab::section::{next_crossing, return_map};
use lorenz_stab::PhaseState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{section_setup, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{Check, RunDir};
use crate::plot::{emit_plot, PlotKind};

const SECTION_EVENTS: usize = 500;

pub(super) fn run(cfg: &Config, dir: &mut RunDir) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let field = cfg.field();
    let (y0, section) = section_setup(cfg, &field)?;

    let traj = integrate(&field, y0, cfg.t_attractor, cfg.tolerance)?;
    dir.write_with("data/trajectory.csv", |w| traj.write_csv(w))?;
    let proj: Vec<(f64, f64)> = traj.samples.iter().map(|(_, y)| (y.0[0], y.0[2])).collect();
    let svg = emit_plot(&proj, PlotKind::Line, "Attractor, (y1, y3) projection", "y1", "y3")?;
    dir.write_bytes("plots/attractor.svg", svg.as_bytes())?;

    // (y0, t, eta) drawn from stream i of the seed so that the sweep is order independent
    let sweep: Vec<(f64, f64, f64, f64)> = (0..cfg.lyapunov_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let y = PhaseState::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-80.0..10.0));
            let t = rng.gen_range(0.0..=10.0);
            let eta = rng.gen_range(-0.1..=0.1);
            let r = check_lyapunov_bound(&field.with_eta(eta), y, t, cfg.tolerance)?;
            Ok((t, eta, r.lhs, r.rhs))
        })
        .collect::<Result<_, CliError>>()?;
    let violations = sweep.iter().filter(|s| s.2 > s.3).count();
    let worst = sweep.iter().map(|s| s.2 / s.3).fold(0.0, f64::max);
    dir.write_csv("data/lyapunov_sweep.csv", &["t", "eta", "lhs", "rhs"], sweep.iter().map(|s| vec![s.0, s.1, s.2, s.3]))?;
    out.checks.push(Check::at_most("lyapunov_bound_sweep", violations as f64, 0.0));
    out.result("lyapunov_samples", sweep.len())?;
    out.result("lyapunov_worst_ratio", worst)?;

    let mut x = next_crossing(&field, &section, y0)?;
    let mut rows = Vec::with_capacity(SECTION_EVENTS);
    let mut worst_rate: f64 = 0.0;
    let mut worst_curv = f64::NEG_INFINITY;
    let mut tangencies = 0;
    for _ in 0..SECTION_EVENTS {
        let (g, _) = section_function(&field, &x.y);
        worst_rate = worst_rate.max(g.abs());
        worst_curv = worst_curv.max(x.ddc);
        tangencies += usize::from(x.tangency);
        rows.push(vec![x.t, x.y.0[0], x.y.0[1], x.y.0[2], x.casimir, x.ddc]);
        x = return_map(&field, &section, &x)?.x_next;
    }
    dir.write_csv("data/section_events.csv", &["t", "y1", "y2", "y3", "casimir", "ddc"], rows)?;
    out.checks.push(Check::at_most("section_rate_at_events", worst_rate, 1e-9));
    out.checks.push(Check::at_most("section_curvature_at_events", worst_curv, 1e-9));
    out.result("epsilon_box", section.epsilon_box)?;
    out.result("tangent_events", tangencies)?;
    Ok(out)
}
