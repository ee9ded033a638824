//! `simulate`: runs an open-loop or controlled progression scenario and
//! writes trajectory, decision and report files.
//!
//! Exit codes: 0 success, 1 invalid configuration or I/O failure, 2 numerical
//! fault (integration blow-up, every controller candidate diverged, or a
//! non-reproducible rerun under `--seed-check`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use t2d_mpc::scenario::{self, Mode, ScenarioConfig};
use t2d_mpc::ScenarioError;

#[derive(Debug, Parser)]
#[command(name = "simulate", version, about = "Diabetes progression under receding-horizon exercise control")]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario's mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the scenario twice and fail unless the outputs are byte-identical.
    #[arg(long)]
    seed_check: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn run(args: &Args) -> Result<(), ScenarioError> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(mode) = args.mode {
        cfg = cfg.with_mode(mode)?;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }

    let output = scenario::run_scenario(&cfg)?;
    let rendered = scenario::render_outputs(&output);
    if args.seed_check {
        let again = scenario::render_outputs(&scenario::run_scenario(&cfg)?);
        if let Some(file) = rendered.first_difference(&again) {
            return Err(ScenarioError::NotReproducible(file.to_string()));
        }
        eprintln!("seed-check: rerun is byte-identical");
    }
    let written = scenario::write_outputs(&rendered, &cfg.output_dir)?;

    let r = &output.report;
    println!(
        "{} ({}): {} samples over {} d, final G = {:.2} mg/dl, G range [{:.2}, {:.2}]",
        r.scenario, r.mode, r.samples, r.final_t_days, r.final_g, r.min_g, r.max_g
    );
    if r.periods > 0 {
        println!(
            "{} control periods, {:.0} min of exercise prescribed in total",
            r.periods, r.total_prescribed_min
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
