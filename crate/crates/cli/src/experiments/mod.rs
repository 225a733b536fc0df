//! Named experiment pipelines.

mod attractor;
mod cusp_map;
mod pdmp;
mod stat_stability;
mod stochastic;

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use lorenz_stab::section::{attractor_point, calibrate_box};
use lorenz_stab::{FieldSpec, PhaseState, SectionSpec};
use serde_json::{Map, Value};

use crate::config::Config;
use crate::error::CliError;
use crate::manifest::{Check, RunDir, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Attractor,
    CuspMap,
    StatStability,
    Pdmp,
    StochasticStability,
    FullSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Attractor,
        Experiment::CuspMap,
        Experiment::StatStability,
        Experiment::Pdmp,
        Experiment::StochasticStability,
        Experiment::FullSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Attractor => "attractor",
            Experiment::CuspMap => "cusp-map",
            Experiment::StatStability => "stat-stability",
            Experiment::Pdmp => "pdmp",
            Experiment::StochasticStability => "stochastic-stability",
            Experiment::FullSuite => "full-suite",
        }
    }

    pub fn parse(s: &str) -> Result<Experiment, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Checks and free-form results of one pipeline.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub results: Map<String, Value>,
}

impl Outcome {
    fn result(&mut self, key: &str, v: impl serde::Serialize) -> Result<(), CliError> {
        self.results.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }
}

/// Start point on the attractor and a section for `field`.
pub(crate) fn section_setup(cfg: &Config, field: &FieldSpec) -> Result<(PhaseState, SectionSpec), CliError> {
    let y0 = attractor_point(field, 20.0)?;
    let eps_box = if cfg.epsilon_box > 0.0 { cfg.epsilon_box } else { calibrate_box(field, y0, 2000, 0.99)? };
    let section = SectionSpec::new(field, eps_box).with_tolerance(cfg.tolerance).with_horizon(cfg.horizon);
    Ok((y0, section))
}

fn run_single(exp: Experiment, cfg: &Config, dir: &mut RunDir) -> Result<Outcome, CliError> {
    match exp {
        Experiment::Attractor => attractor::run(cfg, dir),
        Experiment::CuspMap => cusp_map::run(cfg, dir),
        Experiment::StatStability => stat_stability::run(cfg, dir),
        Experiment::Pdmp => pdmp::run(cfg, dir),
        Experiment::StochasticStability => stochastic::run(cfg, dir),
        Experiment::FullSuite => {
            let mut all = Outcome::default();
            for part in &Experiment::ALL[..5] {
                let mut sub = dir.nested(part.name())?;
                let out = run_single(*part, cfg, &mut sub);
                dir.absorb(sub);
                let out = out?;
                all.checks.extend(out.checks.into_iter().map(|c| Check { name: format!("{}/{}", part.name(), c.name), ..c }));
                all.results.insert(part.name().into(), Value::Object(out.results));
            }
            Ok(all)
        }
    }
}

/// Runs `exp` into `out` and writes `manifest.json` there. A run that stops
/// early still leaves a manifest with status `error`.
pub fn run_experiment(exp: Experiment, cfg: &Config, out: &Path) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut dir = RunDir::create(out)?;
    let res = run_single(exp, cfg, &mut dir);
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: exp.name().into(),
        seed: cfg.seed,
        config: cfg.to_map(),
        started_unix,
        wall_clock_s: 0.0,
        status: String::new(),
        error: None,
        checks: Vec::new(),
        results: Value::Null,
        files: dir.files().to_vec(),
    };
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    match res {
        Ok(o) => {
            manifest.status = if o.checks.iter().all(|c| c.passed) { "passed" } else { "failed" }.into();
            manifest.checks = o.checks;
            manifest.results = Value::Object(o.results);
            dir.write_manifest(&manifest)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = "error".into();
            manifest.error = Some(e.to_string());
            dir.write_manifest(&manifest)?;
            Err(e)
        }
    }
}
