use std::sync::Arc;

use lorenz_stab::cusp::{make_perturbed_family, Doubling, IntervalMap, Logistic, PerturbMode, SharedMap, SyntheticCusp, Tent};
use lorenz_stab::stats::{kendall_tau, linear_fit};
use lorenz_stab::transfer::{
    averaged_transfer_operator, build_ulam, l1_distance, lasota_yorke_probe, operator_distance, pianigiani_check,
    quasi_holder_norm, reparametrized_family, standard_dictionary, stationary_density, statistical_stability_experiment,
    sup_norm_bound, PianigianiConfig,
};
use lorenz_stab::Density;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Outcome;
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{Check, RunDir};
use crate::plot::{emit_plot, render_svg, Chart, PlotKind, Series};

const POWER_TOL: f64 = 1e-12;

fn density_points(d: &Density) -> Vec<(f64, f64)> {
    (0..d.n_bins()).map(|i| (d.bin_center(i), d.values()[i])).collect()
}

fn reference_maps(cfg: &Config, dir: &mut RunDir, out: &mut Outcome) -> Result<(), CliError> {
    let n = cfg.reference_bins;
    let uniform = Density::uniform(n);
    for (name, map) in [("doubling", &Doubling as &dyn IntervalMap), ("tent", &Tent)] {
        let rho = stationary_density(&build_ulam(map, n)?, POWER_TOL)?;
        out.checks.push(Check::at_most(&format!("ulam_{name}_uniform"), l1_distance(&rho, &uniform)?, 1e-10));
    }
    let n = cfg.logistic_bins;
    let rho = stationary_density(&build_ulam(&Logistic, n)?, POWER_TOL)?;
    let exact = Density::from_cdf(n, Logistic::cdf)?;
    out.checks.push(Check::at_most("ulam_logistic_arcsine", l1_distance(&rho, &exact)?, 0.02));
    dir.write_with("data/logistic_density.csv", |w| rho.write_csv(w))?;
    Ok(())
}

fn boundary(cfg: &Config, base: &SyntheticCusp, dir: &mut RunDir, out: &mut Outcome) -> Result<(), CliError> {
    let grids: Vec<usize> = (0..4).map(|k| cfg.boundary_bins << k).collect();
    let dens: Vec<Density> = grids
        .par_iter()
        .map(|&n| Ok(stationary_density(&build_ulam(base, n)?, POWER_TOL)?))
        .collect::<Result<_, CliError>>()?;
    let first: Vec<f64> = dens.iter().map(|d| d.values()[0]).collect();
    let last: Vec<f64> = dens.iter().map(|d| d.values()[d.n_bins() - 1]).collect();
    let bad = |v: &[f64]| v.windows(2).filter(|w| !(w[1] < w[0])).count() as f64;
    out.checks.push(Check::at_most("boundary_first_bin_decreasing", bad(&first), 0.0));
    out.checks.push(Check::at_most("boundary_last_bin_decreasing", bad(&last), 0.0));
    dir.write_csv(
        "data/boundary_bins.csv",
        &["n_bins", "first_bin", "last_bin", "lipschitz_estimate"],
        grids.iter().zip(&dens).map(|(n, d)| vec![*n as f64, d.values()[0], d.values()[d.n_bins() - 1], d.lipschitz_estimate()]),
    )?;
    let finest = dens.last().expect("four grids");
    dir.write_with("data/synthetic_density.csv", |w| finest.write_csv(w))?;
    let svg = emit_plot(&density_points(finest), PlotKind::Line, "Invariant density of the synthetic cusp map", "x", "density")?;
    dir.write_bytes("plots/synthetic_density.svg", svg.as_bytes())?;
    Ok(())
}

fn ladder(cfg: &Config, base: &SyntheticCusp, dir: &mut RunDir, out: &mut Outcome) -> Result<(), CliError> {
    let mode = PerturbMode::Reparametrize { k: cfg.perturb_k };
    let rep = statistical_stability_experiment(base, &cfg.ladder, cfg.n_bins, mode)?;
    out.checks.push(Check::greater("stability_kendall_tau", rep.kendall_tau, 0.8));
    out.checks.push(Check::at_most("stability_final_l1", rep.final_distance(), 0.05));
    dir.write_csv(
        "data/stability.csv",
        &["eps", "l1_distance", "audit_pass", "flagged"],
        rep.entries.iter().map(|e| vec![e.eps, e.distance, f64::from(u8::from(e.audit.all_pass())), f64::from(u8::from(e.flagged))]),
    )?;
    dir.write_json("data/stability_audits.json", &rep.entries.iter().map(|e| &e.audit).collect::<Vec<_>>())?;
    let pts: Vec<(f64, f64)> = rep.entries.iter().map(|e| (e.eps, e.distance)).collect();
    let svg = emit_plot(&pts, PlotKind::LogLog, "L1 distance of perturbed invariant densities", "eps", "||rho - rho_eps||_1")?;
    dir.write_bytes("plots/stability_l1.svg", svg.as_bytes())?;

    let mut series = vec![];
    for &eps in &cfg.ladder {
        let t = make_perturbed_family(base, eps, mode)?;
        series.push(Series::new("", (0..=500).map(|k| k as f64 / 500.0).map(|x| (x, t.eval(x))).collect(), "#bbbbbb", PlotKind::Line));
    }
    series.push(Series::new("T", (0..=500).map(|k| k as f64 / 500.0).map(|x| (x, base.eval(x))).collect(), "#000000", PlotKind::Line));
    let svg = render_svg(&Chart { title: "Cusp map and its perturbations".into(), x_label: "x".into(), y_label: "T(x)".into(), log: false, series })?;
    dir.write_bytes("plots/perturbed_maps.svg", svg.as_bytes())?;
    if let Some(rho) = &rep.base_density {
        let mut series = vec![Series::new("rho", density_points(rho), "#000000", PlotKind::Line)];
        for d in &rep.densities {
            series.push(Series::new("", density_points(d), "#bbbbbb", PlotKind::Line));
        }
        series.rotate_left(1);
        let svg = render_svg(&Chart { title: "Perturbed invariant densities".into(), x_label: "x".into(), y_label: "density".into(), log: false, series })?;
        dir.write_bytes("plots/stability_densities.svg", svg.as_bytes())?;
    }
    out.result("stability", &rep)?;
    Ok(())
}

fn pianigiani(cfg: &Config, base: &SyntheticCusp, dir: &mut RunDir, out: &mut Outcome) -> Result<(), CliError> {
    let p = base.params();
    let expected = -p.alpha_left.ln() / p.b_left;
    let pc = PianigianiConfig { n_orbit: cfg.pianigiani_orbit, n_bins: cfg.pianigiani_bins, ..PianigianiConfig::default() };
    let rep = pianigiani_check(base, &pc, Some(expected))?;
    out.checks.push(Check::at_most("pianigiani_l1", rep.reconstruction_l1, 0.05));
    out.checks.push(Check::at_most("pianigiani_kac_z", rep.kac_z.abs(), 3.0));
    out.checks.push(Check::near("pianigiani_scaling_slope", rep.slope_left.slope, expected, 0.1 * expected.abs()));
    if let Some(ulam) = &rep.ulam {
        let n = ulam.n_bins();
        dir.write_csv(
            "data/pianigiani_density.csv",
            &["bin_center", "reconstructed", "ulam"],
            (0..n).map(|i| vec![ulam.bin_center(i), rep.reconstructed[i], ulam.values()[i]]),
        )?;
    }
    dir.write_json("data/pianigiani.json", &rep)?;
    out.result("pianigiani", serde_json::json!({
        "reconstruction_l1": rep.reconstruction_l1,
        "kac_z": rep.kac_z,
        "slope_left": rep.slope_left.slope,
        "slope_expected": expected,
        "tau_max": rep.tau_max,
        "deficit": rep.deficit,
        "truncation_warning": rep.truncation_warning,
    }))?;
    Ok(())
}

fn operator_sweep(cfg: &Config, base: &SyntheticCusp, dir: &mut RunDir, out: &mut Outcome) -> Result<(), CliError> {
    let n = cfg.opdist_bins;
    let shared: SharedMap = Arc::new(base.clone());
    let p = build_ulam(base, n)?;
    let h = stationary_density(&p, POWER_TOL)?;
    let dict = standard_dictionary(n, Some(&h), cfg.alpha, cfg.eps0)?;
    let family = reparametrized_family(shared, cfg.perturb_k);
    let mut eps = cfg.opdist_eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<(f64, f64, f64)> = eps
        .iter()
        .map(|&e| {
            let law = cfg.noise_law(e)?;
            let pe = averaged_transfer_operator(&family, &law, n, cfg.quad_nodes)?;
            let d = operator_distance(&p, &pe, &dict)?;
            let he = stationary_density(&pe, POWER_TOL)?;
            Ok((e, d, l1_distance(&h, &he)?))
        })
        .collect::<Result<_, CliError>>()?;
    let lx: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let fit = linear_fit(&lx, &ly)?;
    out.checks.push(Check::between("operator_distance_slope", fit.slope, 0.8, 1.2));
    out.checks.push(Check::greater("operator_distance_r2", fit.r2, 0.9));
    let hd: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let rises = hd.windows(2).filter(|w| w[1] > w[0]).count();
    out.checks.push(Check::at_most("averaged_density_decreasing", rises as f64, 0.0));
    out.checks.push(Check::at_most("averaged_density_final_l1", *hd.last().expect("non-empty"), 0.05));
    out.result("operator_distance_kendall_tau", kendall_tau(&rows.iter().map(|r| r.0).collect::<Vec<_>>(), &hd))?;
    dir.write_csv("data/operator_distance.csv", &["eps", "operator_distance", "density_l1"], rows.iter().map(|r| vec![r.0, r.1, r.2]))?;
    let svg = render_svg(&Chart {
        title: "Averaged transfer operator vs unperturbed".into(),
        x_label: "eps".into(),
        y_label: "distance".into(),
        log: true,
        series: vec![
            Series::new("max ||(P - P_eps) f||_1", rows.iter().map(|r| (r.0, r.1)).collect(), "#1f4e9c", PlotKind::Line),
            Series::new("||h - h_eps||_1", rows.iter().map(|r| (r.0, r.2)).collect(), "#c0392b", PlotKind::Line),
        ],
    })?;
    dir.write_bytes("plots/operator_distance.svg", svg.as_bytes())?;
    out.result("operator_distance_fit", fit)?;
    let probe = lasota_yorke_probe(&build_ulam(base, cfg.n_bins)?, cfg.alpha, cfg.eps0, 10)?;
    out.result("lasota_yorke_probe", probe)?;
    Ok(())
}

/// Random step densities on a uniform grid.
fn random_step_density(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let pieces = rng.gen_range(1..=12);
    let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| rng.gen::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let heights: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.0..5.0)).collect();
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            heights[cuts.partition_point(|c| *c <= x)]
        })
        .collect();
    let mass: f64 = v.iter().sum::<f64>() / n as f64;
    if mass > 0.0 {
        v.iter_mut().for_each(|x| *x /= mass);
    }
    v
}

fn embedding(cfg: &Config, dir: &mut RunDir, out: &mut Outcome) -> Result<(), CliError> {
    let cs = sup_norm_bound(cfg.alpha, cfg.eps0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.embedding_samples);
    for _ in 0..cfg.embedding_samples {
        let v = random_step_density(&mut rng, 1024);
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let norm = quasi_holder_norm(&v, cfg.alpha, cfg.eps0)?;
        rows.push(vec![sup, norm, cs * norm]);
    }
    let violations = rows.iter().filter(|r| r[0] > r[2] * (1.0 + 1e-12)).count();
    out.checks.push(Check::at_most("quasi_holder_embedding", violations as f64, 0.0));
    out.result("embedding_constant", cs)?;
    out.result("embedding_worst_ratio", rows.iter().map(|r| r[0] / r[2]).fold(0.0, f64::max))?;
    dir.write_csv("data/embedding.csv", &["sup_norm", "quasi_holder_norm", "bound"], rows)?;
    Ok(())
}

pub(super) fn run(cfg: &Config, dir: &mut RunDir) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let base = SyntheticCusp::default();
    reference_maps(cfg, dir, &mut out)?;
    boundary(cfg, &base, dir, &mut out)?;
    ladder(cfg, &base, dir, &mut out)?;
    pianigiani(cfg, &base, dir, &mut out)?;
    operator_sweep(cfg, &base, dir, &mut out)?;
    embedding(cfg, dir, &mut out)?;
    Ok(out)
}
