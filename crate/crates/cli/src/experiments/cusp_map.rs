use std::sync::Arc;

use lorenz_stab::cusp::{
    build_empirical_map, fit_branch_exponents, search_conjugation, BranchFit, EmpiricalConfig, FitConfig, IntervalMap,
    SharedMap, SyntheticCusp,
};
use lorenz_stab::section::{next_crossing, sample_chain};
use lorenz_stab::{Error, NoiseLaw, ReturnSample};

use super::{section_setup, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{Check, RunDir};
use crate::plot::{render_svg, Chart, PlotKind, Series};

const GAMMAS: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
const BETAS: [f64; 3] = [0.0, 0.25, 0.5];

fn curve(map: &dyn IntervalMap, n: usize) -> Vec<(f64, f64)> {
    (0..=n).map(|k| k as f64 / n as f64).map(|x| (x, map.eval(x))).collect()
}

fn fit_checks(prefix: &str, fit: &BranchFit) -> Vec<Check> {
    vec![
        Check::greater(&format!("{prefix}_alpha_left"), fit.alpha_left.value, 1.0),
        Check::inside(&format!("{prefix}_alpha_right"), fit.alpha_right.value, 0.0, 1.0),
        Check::inside(&format!("{prefix}_b_left"), fit.b_left.value, 0.0, 1.0),
        Check::inside(&format!("{prefix}_b_right"), fit.b_right.value, 0.0, 1.0),
    ]
}

pub(super) fn run(cfg: &Config, dir: &mut RunDir) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let field = cfg.field();
    let (y0, section) = section_setup(cfg, &field)?;
    let x0 = next_crossing(&field, &section, y0)?;
    let trace = sample_chain(&field, &NoiseLaw::DeltaZero, &section, x0, cfg.burn_in + cfg.n_returns, cfg.seed)?;
    if let Some(f) = &trace.failure {
        return Err(CliError::Core(Error::Integration { t: trace.end.t, reason: f.clone() }));
    }
    let e = &trace.entries;
    let samples: Vec<ReturnSample> = (cfg.burn_in..e.len())
        .map(|i| ReturnSample { x: e[i].x, tau: e[i].tau, x_next: e.get(i + 1).map_or(trace.end, |n| n.x) })
        .collect();
    out.result("return_samples", samples.len())?;
    out.result("epsilon_box", section.epsilon_box)?;

    let emp_cfg = EmpiricalConfig { min_knot_samples: cfg.min_knot_samples, ..EmpiricalConfig::default() };
    let fit_cfg = FitConfig { delta: cfg.fit_delta, ..FitConfig::default() };
    match build_empirical_map(&samples, &emp_cfg) {
        Ok(map) => {
            out.checks.push(Check::holds("empirical_unimodal", true, 1.0, "one interior maximum"));
            let pts: Vec<(f64, f64)> = samples.iter().map(|s| (map.normalize(s.x.casimir), map.normalize(s.x_next.casimir))).collect();
            dir.write_csv(
                "data/returns.csv",
                &["m_n", "m_next", "u_n", "u_next", "tau"],
                samples.iter().zip(&pts).map(|(s, p)| vec![s.x.casimir, s.x_next.casimir, p.0, p.1, s.tau]),
            )?;
            let line = curve(&map, 1000);
            dir.write_csv("data/empirical_map.csv", &["x", "t_x"], line.iter().map(|p| vec![p.0, p.1]))?;
            dir.write_json("data/empirical_map.json", &map.to_json())?;
            let svg = render_svg(&Chart {
                title: "Successive Casimir maxima, normalized".into(),
                x_label: "u_n".into(),
                y_label: "u_{n+1}".into(),
                log: false,
                series: vec![
                    Series::new("returns", pts, "#777777", PlotKind::Scatter),
                    Series::new("fitted map", line, "#c0392b", PlotKind::Line),
                ],
            })?;
            dir.write_bytes("plots/cusp_map.svg", svg.as_bytes())?;
            match fit_branch_exponents(&map, &fit_cfg) {
                Ok(fit) => {
                    out.checks.extend(fit_checks("empirical", &fit));
                    dir.write_json("data/empirical_fit.json", &fit)?;
                    out.result("empirical_fit", fit)?;
                }
                Err(e @ Error::Fit(_)) => out.checks.push(Check::holds("empirical_fit", false, f64::NAN, &e.to_string())),
                Err(e) => return Err(e.into()),
            }
            let shared: SharedMap = Arc::new(map);
            let search = search_conjugation(shared, &GAMMAS, &BETAS, 2000)?;
            out.result("empirical_conjugation_inf_derivative", search.inf_derivative)?;
            dir.write_json("data/empirical_conjugation.json", &search.table)?;
        }
        Err(e @ Error::Shape(_)) => out.checks.push(Check::holds("empirical_unimodal", false, 0.0, &e.to_string())),
        Err(e) => return Err(e.into()),
    }

    let synthetic = SyntheticCusp::default();
    let p = *synthetic.params();
    let fit = fit_branch_exponents(&synthetic, &fit_cfg)?;
    out.checks.push(Check::near("synthetic_b_right", fit.b_right.value, p.b_right, 0.05));
    out.checks.push(Check::near("synthetic_b_left", fit.b_left.value, p.b_left, 0.05));
    out.checks.push(Check::near("synthetic_alpha_left", fit.alpha_left.value, p.alpha_left, 0.05));
    dir.write_json("data/synthetic_fit.json", &fit)?;
    dir.write_csv("data/synthetic_map.csv", &["x", "t_x"], curve(&synthetic, 1000).iter().map(|p| vec![p.0, p.1]))?;
    let search = search_conjugation(Arc::new(synthetic), &GAMMAS, &BETAS, 2000)?;
    out.result("synthetic_conjugation", serde_json::json!({
        "gamma_bar": search.gamma_bar,
        "beta_bar": search.beta_bar,
        "inf_derivative": search.inf_derivative,
    }))?;
    out.result("synthetic_fit", fit)?;
    Ok(out)
}
