use lorenz_stab::pdmp::{
    drift_check, empirical_stationary_measure, lifted_measure_probe, ratio_formula_estimate, simulate_pdmp,
    suspension_conjugation_check, Observable, PdmpConfig,
};
use lorenz_stab::section::{next_crossing, sample_chain};
use lorenz_stab::{stats, NoiseLaw};
use rayon::prelude::*;

use super::{section_setup, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{Check, RunDir};
use crate::plot::{emit_plot, PlotKind};

const PILOT_T: f64 = 500.0;
const PILOT_DT: f64 = 0.01;
const DRIFT_TRANSITIONS: usize = 10_000;

fn eps_tag(eps: f64) -> String {
    format!("eps{eps}")
}

pub(super) fn run(cfg: &Config, dir: &mut RunDir) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let field = cfg.field();
    let (y0, section) = section_setup(cfg, &field)?;

    // the indicator level is the median of y3 along an unperturbed path
    let pilot = PdmpConfig { field, law: NoiseLaw::DeltaZero, section, t_total: PILOT_T, seed: cfg.seed, sample_dt: Some(PILOT_DT) };
    let pilot = simulate_pdmp(&pilot, y0, &[])?;
    let y3: Vec<f64> = pilot.samples.iter().map(|s| s.1 .0[2]).collect();
    let level = stats::quantile(&y3, 0.5);
    dir.write_csv("data/path_samples.csv", &["t", "y1", "y2", "y3"], pilot.samples.iter().map(|(t, y)| vec![*t, y.0[0], y.0[1], y.0[2]]))?;
    let ts: Vec<(f64, f64)> = pilot.samples.iter().take(5000).map(|(t, y)| (*t, y.0[2])).collect();
    dir.write_bytes("plots/path_y3.svg", emit_plot(&ts, PlotKind::Line, "Unperturbed path", "t", "y3")?.as_bytes())?;
    out.result("y3_level", level)?;

    let obs = [Observable::Casimir, Observable::Y3Below { level }, Observable::AbsY1];
    let runs = cfg
        .duality_eps
        .par_iter()
        .map(|&eps| {
            let pc = PdmpConfig { field, law: cfg.noise_law(eps)?, section, t_total: cfg.t_total, seed: cfg.seed, sample_dt: None };
            let run = simulate_pdmp(&pc, y0, &obs)?;
            let ratio = ratio_formula_estimate(&run.trace, &obs, cfg.burn_in)?;
            let lifted = lifted_measure_probe(&run.trace, &obs, cfg.burn_in)?;
            let time: Vec<_> = obs.iter().map(|f| run.time_average(f, cfg.burn_in)).collect::<Result<_, _>>()?;
            Ok((eps, run, ratio, lifted, time))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut rows = Vec::new();
    let mut report = Vec::new();
    for (eps, run, ratio, lifted, time) in &runs {
        let tag = eps_tag(*eps);
        out.checks.push(Check::greater(&format!("pdmp_crossings_{tag}"), run.n_crossings() as f64, 9999.0));
        for (i, f) in obs.iter().enumerate() {
            let (t, r) = (&time[i], &ratio[i]);
            let se = t.std_err.hypot(r.std_err);
            let z = if se > 0.0 { (t.value - r.value) / se } else if t.value == r.value { 0.0 } else { f64::INFINITY };
            out.checks.push(Check::at_most(&format!("duality_{}_{tag}", f.name()), z.abs(), 3.0));
            let rel = (lifted[i] - r.value).abs() / r.value.abs().max(1e-300);
            out.checks.push(Check::at_most(&format!("lifted_{}_{tag}", f.name()), rel, 1e-9));
            rows.push(vec![*eps, i as f64, t.value, t.std_err, r.value, r.std_err, z, lifted[i]]);
        }
        let chain = empirical_stationary_measure(&run.trace, cfg.burn_in);
        report.push(serde_json::json!({
            "eps": eps,
            "crossings": run.n_crossings(),
            "sigma0": run.sigma0,
            "mean_sojourn": chain.mean_sojourn(),
            "ratio_denominator": ratio[0].denominator,
            "time_averages": obs.iter().zip(time).map(|(f, t)| (f.name(), serde_json::Value::from(t.value))).collect::<serde_json::Map<_, _>>(),
        }));
    }
    dir.write_csv(
        "data/duality.csv",
        &["eps", "observable", "time_average", "time_se", "ratio", "ratio_se", "z", "lifted"],
        rows,
    )?;
    out.result("observables", obs.iter().map(|f| f.name()).collect::<Vec<_>>())?;
    out.result("runs", report)?;
    if let Some((_, run, ..)) = runs.iter().find(|r| r.0 == cfg.eps) {
        dir.write_with("data/trace.jsonl", |w| run.trace.write_jsonl(w))?;
    }

    let law = cfg.noise_law(cfg.eps)?;
    let x0 = next_crossing(&field, &section, y0)?;
    let chain = sample_chain(&field, &law, &section, x0, DRIFT_TRANSITIONS, cfg.seed)?;
    let drift = drift_check(&law, &chain)?;
    let violations = (drift.violations_ly1.len() + drift.violations_wd.len()) as f64;
    out.checks.push(Check::at_most("drift_violations", violations, 0.0));
    out.checks.push(Check::greater("drift_transitions", drift.transitions as f64, DRIFT_TRANSITIONS as f64 - 1.0));
    dir.write_json("data/drift.json", &drift)?;
    out.result("drift", &drift)?;

    let conj_section = section.with_tolerance(cfg.conjugation_tolerance);
    let conj = suspension_conjugation_check(&field, &conj_section, &law, &x0, cfg.seed, cfg.conjugation_probes)?;
    out.checks.push(Check::at_most("conjugation_max_discrepancy", conj.max_discrepancy, 1e-7));
    out.checks.push(Check::at_most("conjugation_shift_mismatches", conj.shift_mismatches as f64, 0.0));
    out.checks.push(Check::greater("conjugation_min_crossings", conj.min_crossings as f64, 1.0));
    dir.write_json("data/conjugation.json", &conj)?;
    out.result("conjugation", &conj)?;
    Ok(out)
}
