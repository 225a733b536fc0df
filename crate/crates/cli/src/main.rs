use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lorenz_stab_cli::{run_experiment, CliError, Config, Experiment};

#[derive(Parser)]
#[command(name = "lorenz-stab", version, about = "Stability experiments for the randomly perturbed Lorenz flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (attractor, cusp-map, stat-stability, pdmp, stochastic-stability, full-suite).
    Run {
        experiment: String,
        /// `key = value` file; see `print-config`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one key, e.g. `--set eps=0.02`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Run directory. Defaults to `<root>/<experiment>-<seed>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Root for default run directories.
        #[arg(long, env = "LORENZ_STAB_OUT", default_value = "runs")]
        out_root: PathBuf,
    },
    /// Print every configuration key with its default.
    PrintConfig,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::PrintConfig => {
            print!("{}", Config::default().render());
            Ok(true)
        }
        Command::Run { experiment, config, overrides, out, seed, jobs, out_root } => {
            let exp = Experiment::parse(&experiment)?;
            let mut cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    Config::parse(&text)?
                }
                None => Config::default(),
            };
            for kv in &overrides {
                cfg.apply_override(kv)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            if jobs > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                    .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            }
            let out = out.unwrap_or_else(|| out_root.join(format!("{}-{}", exp.name(), cfg.seed)));
            let manifest = run_experiment(exp, &cfg, &out)?;
            for c in &manifest.checks {
                println!("{} {} = {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            println!("manifest: {}", out.join("manifest.json").display());
            Ok(manifest.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
