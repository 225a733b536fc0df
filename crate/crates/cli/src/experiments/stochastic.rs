use lorenz_stab::dynamics::flow;
use lorenz_stab::pdmp::{empirical_stationary_measure, lipschitz_test_functions, simulate_pdmp, Observable, PdmpConfig};
use lorenz_stab::stats;
use rayon::prelude::*;

use super::{section_setup, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{Check, RunDir};
use crate::plot::{render_svg, Chart, PlotKind, Series};

struct Replica {
    casimir: f64,
    lipschitz: Vec<f64>,
    mean_sojourn: f64,
}

/// Ergodic averages of `C` over replicas, with `eps = 0` as the reference.
/// Replica `r` starts from the same point and uses seed `seed + r` at every
/// `eps`, so the comparison is between fixed noise realizations.
pub(super) fn run(cfg: &Config, dir: &mut RunDir) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let field = cfg.field();
    let (y0, section) = section_setup(cfg, &field)?;
    let starts: Vec<_> = (0..cfg.replicas).map(|r| flow(&field, y0, 10.0 + r as f64, cfg.tolerance)).collect::<Result<_, _>>()?;
    let tests = lipschitz_test_functions();

    let mut levels = vec![0.0];
    levels.extend(&cfg.stability_eps);
    let jobs: Vec<(usize, usize)> = (0..levels.len()).flat_map(|e| (0..cfg.replicas).map(move |r| (e, r))).collect();
    let reps = jobs
        .par_iter()
        .map(|&(e, r)| {
            let pc = PdmpConfig {
                field,
                law: cfg.noise_law(levels[e])?,
                section,
                t_total: cfg.t_replica,
                seed: cfg.seed + r as u64,
                sample_dt: None,
            };
            let run = simulate_pdmp(&pc, starts[r], &[Observable::Casimir])?;
            let chain = empirical_stationary_measure(&run.trace, cfg.burn_in);
            Ok(Replica {
                casimir: run.time_average(&Observable::Casimir, cfg.burn_in)?.value,
                lipschitz: tests.iter().map(|(_, f)| chain.integrate(f)).collect(),
                mean_sojourn: chain.mean_sojourn(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let per_level = |e: usize| &reps[e * cfg.replicas..(e + 1) * cfg.replicas];
    let summary: Vec<(f64, f64, f64, Vec<f64>, f64)> = (0..levels.len())
        .map(|e| {
            let rs = per_level(e);
            let c: Vec<f64> = rs.iter().map(|r| r.casimir).collect();
            let se = (stats::variance(&c) / c.len() as f64).sqrt();
            let lip = (0..tests.len()).map(|k| stats::mean(&rs.iter().map(|r| r.lipschitz[k]).collect::<Vec<_>>())).collect();
            let soj = stats::mean(&rs.iter().map(|r| r.mean_sojourn).collect::<Vec<_>>());
            (levels[e], stats::mean(&c), se, lip, soj)
        })
        .collect();
    let mu0 = summary[0].1;
    let diffs: Vec<(f64, f64)> = summary[1..].iter().map(|s| (s.0, (s.1 - mu0).abs())).collect();
    let rises = diffs.windows(2).filter(|w| !(w[1].1 < w[0].1)).count();
    out.checks.push(Check::at_most("ergodic_average_decreasing", rises as f64, 0.0));
    out.result("mu0_casimir", mu0)?;
    out.result("mu0_std_err", summary[0].2)?;

    let weak: Vec<f64> = summary[1..]
        .iter()
        .map(|s| s.3.iter().zip(&summary[0].3).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let mut header = vec!["eps", "casimir_mean", "casimir_se", "abs_diff", "lipschitz_sup_diff", "mean_sojourn"];
    header.extend(tests.iter().map(|t| t.0));
    dir.write_csv(
        "data/stochastic_stability.csv",
        &header,
        summary.iter().enumerate().map(|(e, s)| {
            let (d, w) = if e == 0 { (0.0, 0.0) } else { (diffs[e - 1].1, weak[e - 1]) };
            let mut row = vec![s.0, s.1, s.2, d, w, s.4];
            row.extend(&s.3);
            row
        }),
    )?;
    dir.write_csv(
        "data/replicas.csv",
        &["eps", "replica", "casimir"],
        jobs.iter().zip(&reps).map(|(&(e, r), rep)| vec![levels[e], r as f64, rep.casimir]),
    )?;
    let svg = render_svg(&Chart {
        title: "Ergodic averages against the unperturbed flow".into(),
        x_label: "eps".into(),
        y_label: "difference".into(),
        log: true,
        series: vec![
            Series::new("|mu_eps(C) - mu_0(C)|", diffs.clone(), "#1f4e9c", PlotKind::Line),
            Series::new("sup over Lipschitz tests", summary[1..].iter().map(|s| s.0).zip(weak.iter().copied()).collect(), "#c0392b", PlotKind::Line),
        ],
    })?;
    dir.write_bytes("plots/stochastic_stability.svg", svg.as_bytes())?;
    out.result("abs_diff", diffs)?;
    out.result("lipschitz_sup_diff", weak)?;
    Ok(out)
}
