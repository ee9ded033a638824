//! Scenario files, runs, and CSV / JSON outputs.
//!
//! A scenario file is TOML:
//!
//! ```toml
//! name = "closed-loop"
//! mode = "mpc"                 # or "open-loop"
//! duration_days = 365.0
//! step_days = 0.005            # optional
//! params = "my-params.toml"    # optional, relative to this file
//! output_dir = "out/mpc"       # optional, relative to this file
//!
//! [initial_state]
//! G = 100.0
//! I = 10.0
//! beta = 300.0
//! S_I = 0.72
//! V_l = 0.0
//!
//! [controller]                 # required in mpc mode
//! horizon_periods = 20
//! period_days = 2.0
//! lambda = 60.0
//! u_eq_max = 3.0
//!
//! [program]                    # optional; used to display sessions
//! intensity_percent = 50.0
//! period_days = 2.0
//! ```
//!
//! Outputs, written atomically into the output directory:
//!
//! * `trajectory.csv`: `t_days,G,I,beta,S_I,V_l,u_eq_applied`
//! * `decisions.csv`: `k,t_days,u_eq_star,cost_star,delta_min,weekly_dose_min`
//! * `report.json`: [`RunReport`]

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, ScenarioError};
use crate::integrator::{self, InputSchedule, TimeGrid, Trajectory};
use crate::model::StateVector;
use crate::mpc::{self, ControlDecision, ControllerConfig, SolverSettings};
use crate::params::{self, ParameterSet, DEFAULT_PARAMS_TOML};
use crate::prescription::{PrescriptionMapper, Recommendation};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DECISIONS_FILE: &str = "decisions.csv";
pub const REPORT_FILE: &str = "report.json";

pub const TRAJECTORY_HEADER: &str = "t_days,G,I,beta,S_I,V_l,u_eq_applied";
pub const DECISIONS_HEADER: &str = "k,t_days,u_eq_star,cost_star,delta_min,weekly_dose_min";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    OpenLoop,
    Mpc,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "open-loop" => Ok(Self::OpenLoop),
            "mpc" => Ok(Self::Mpc),
            other => Err(format!("unknown mode `{other}` (expected open-loop or mpc)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::OpenLoop => "open-loop",
            Self::Mpc => "mpc",
        })
    }
}

/// Intensity and period used to express decisions as session lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgramDisplay {
    pub intensity_percent: f64,
    pub period_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub params_sha256: String,
    pub params_source: String,
    pub version: String,
}

/// Fully validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub initial_state: StateVector,
    pub duration_days: f64,
    pub step_days: f64,
    pub params: ParameterSet,
    pub controller: Option<ControllerConfig>,
    pub program: ProgramDisplay,
    pub output_dir: PathBuf,
    pub provenance: Provenance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    mode: Mode,
    initial_state: StateVector,
    duration_days: f64,
    step_days: Option<f64>,
    params: Option<String>,
    output_dir: Option<String>,
    controller: Option<RawController>,
    program: Option<RawProgram>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    horizon_periods: usize,
    period_days: f64,
    lambda: f64,
    u_eq_max: f64,
    solver: Option<RawSolver>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    grid_points: Option<usize>,
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProgram {
    intensity_percent: Option<f64>,
    period_days: Option<f64>,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    /// Reads and validates a scenario file. Relative paths inside it resolve
    /// against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base_dir: &Path, origin: &str) -> Result<Self, ConfigError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| params::toml_error(&e, text, origin))?;

        let step_days = raw.step_days.unwrap_or(integrator::DEFAULT_STEP_DAYS);
        if !(step_days.is_finite() && step_days > 0.0) {
            return Err(invalid("step_days", format!("must be > 0, got {step_days}")));
        }
        if !(raw.duration_days.is_finite() && raw.duration_days > 0.0) {
            return Err(invalid("duration_days", format!("must be > 0, got {}", raw.duration_days)));
        }
        TimeGrid::new(0.0, raw.duration_days, step_days).map_err(|e| invalid("step_days", e.to_string()))?;
        raw.initial_state
            .validate()
            .map_err(|e| invalid("initial_state", e.to_string()))?;

        let (params, params_text, params_source) = match &raw.params {
            None => (ParameterSet::defaults(), DEFAULT_PARAMS_TOML.to_string(), "<default>".to_string()),
            Some(rel) => {
                let p = base_dir.join(rel);
                if !p.is_file() {
                    return Err(invalid("params", format!("file {} does not exist", p.display())));
                }
                let text = std::fs::read_to_string(&p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                let set = ParameterSet::parse(&text, &p.display().to_string())?;
                (set, text, rel.clone())
            }
        };

        let controller = match raw.controller {
            None => None,
            Some(c) => {
                let defaults = SolverSettings::default();
                let solver = c.solver.map_or(
                    SolverSettings {
                        step_days,
                        ..defaults
                    },
                    |s| SolverSettings {
                        grid_points: s.grid_points.unwrap_or(defaults.grid_points),
                        tolerance: s.tolerance.unwrap_or(defaults.tolerance),
                        step_days,
                    },
                );
                let cfg = ControllerConfig {
                    horizon_periods: c.horizon_periods,
                    period_days: c.period_days,
                    lambda: c.lambda,
                    u_eq_max: c.u_eq_max,
                    solver,
                };
                cfg.validate().map_err(|e| invalid("controller", e.to_string()))?;
                Some(cfg)
            }
        };

        let default_period = controller.map_or(2.0, |c| c.period_days);
        let program = match raw.program {
            None => ProgramDisplay {
                intensity_percent: 50.0,
                period_days: default_period,
            },
            Some(p) => ProgramDisplay {
                intensity_percent: p.intensity_percent.unwrap_or(50.0),
                period_days: p.period_days.unwrap_or(default_period),
            },
        };
        if !(program.intensity_percent > 0.0 && program.intensity_percent <= 100.0) {
            return Err(invalid(
                "program.intensity_percent",
                format!("must be in (0, 100], got {}", program.intensity_percent),
            ));
        }
        if !(program.period_days.is_finite() && program.period_days > 0.0) {
            return Err(invalid(
                "program.period_days",
                format!("must be > 0, got {}", program.period_days),
            ));
        }

        let name = raw.name.unwrap_or_else(|| raw.mode.to_string());
        let output_dir = base_dir.join(raw.output_dir.unwrap_or_else(|| format!("out/{name}")));

        let cfg = Self {
            name,
            mode: raw.mode,
            initial_state: raw.initial_state,
            duration_days: raw.duration_days,
            step_days,
            params,
            controller,
            program,
            output_dir,
            provenance: Provenance {
                config_sha256: sha256_hex(text.as_bytes()),
                params_sha256: sha256_hex(params_text.as_bytes()),
                params_source,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
        };
        cfg.check_mode()?;
        Ok(cfg)
    }

    /// One-year run from the onset state with the shipped defaults and the
    /// reference controller (`N = 20`, `T = 2 d`, `lambda = 60`,
    /// `u_eq_max = 3`), sessions shown at 50 % intensity.
    pub fn reference(mode: Mode) -> Self {
        let controller = ControllerConfig::default();
        let mut cfg = Self {
            name: mode.to_string(),
            mode,
            initial_state: StateVector::onset(),
            duration_days: 365.0,
            step_days: integrator::DEFAULT_STEP_DAYS,
            params: ParameterSet::defaults(),
            controller: Some(controller),
            program: ProgramDisplay {
                intensity_percent: 50.0,
                period_days: controller.period_days,
            },
            output_dir: PathBuf::from(format!("out/{mode}")),
            provenance: Provenance {
                config_sha256: String::new(),
                params_sha256: sha256_hex(DEFAULT_PARAMS_TOML.as_bytes()),
                params_source: "<default>".into(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
        };
        cfg.refresh_config_hash();
        cfg
    }

    /// Recomputes the config hash from the serialized config, for configs
    /// built or edited in code.
    pub fn refresh_config_hash(&mut self) {
        self.provenance.config_sha256.clear();
        let json = serde_json::to_vec(self).expect("config serializes");
        self.provenance.config_sha256 = sha256_hex(&json);
    }

    /// Switches mode, e.g. from a command-line override.
    pub fn with_mode(mut self, mode: Mode) -> Result<Self, ConfigError> {
        self.mode = mode;
        self.check_mode()?;
        Ok(self)
    }

    fn check_mode(&self) -> Result<(), ConfigError> {
        if self.mode == Mode::Mpc && self.controller.is_none() {
            return Err(invalid("controller", "section is required in mpc mode"));
        }
        Ok(())
    }

    pub fn mapper(&self) -> PrescriptionMapper {
        PrescriptionMapper::new(self.params.duration_calibration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRow {
    pub k: usize,
    pub t_days: f64,
    pub u_eq_star: f64,
    pub cost_star: f64,
    pub delta_min: f64,
    pub weekly_dose_min: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub samples: usize,
    pub final_t_days: f64,
    pub final_g: f64,
    pub min_g: f64,
    pub max_g: f64,
    /// Trapezoid integral of G^2 over the trajectory samples.
    pub glucose_square_integral: f64,
    pub periods: usize,
    pub total_prescribed_min: f64,
    pub periods_meeting_guideline: usize,
    pub clamped_periods: usize,
    pub decisions: Vec<DecisionRow>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub decisions: Vec<ControlDecision>,
    pub report: RunReport,
}

/// Runs a scenario: zero input in open-loop mode, the receding-horizon
/// controller in mpc mode.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    let (trajectory, decisions) = match cfg.mode {
        Mode::OpenLoop => {
            let grid = TimeGrid::new(0.0, cfg.duration_days, cfg.step_days).map_err(|source| {
                ScenarioError::Integration {
                    scenario: cfg.name.clone(),
                    source,
                }
            })?;
            let traj = integrator::integrate(cfg.initial_state, &InputSchedule::constant(0.0), &grid, &cfg.params.model)
                .map_err(|source| ScenarioError::Integration {
                    scenario: cfg.name.clone(),
                    source,
                })?;
            (traj, Vec::new())
        }
        Mode::Mpc => {
            let mut controller = cfg.controller.ok_or_else(|| {
                ScenarioError::Config(invalid("controller", "section is required in mpc mode"))
            })?;
            controller.solver.step_days = cfg.step_days;
            mpc::run_closed_loop(cfg.initial_state, &controller, &cfg.params.model, cfg.duration_days).map_err(
                |source| ScenarioError::Control {
                    scenario: cfg.name.clone(),
                    source,
                },
            )?
        }
    };
    let report = build_report(cfg, &trajectory, &decisions)?;
    Ok(RunOutput {
        trajectory,
        decisions,
        report,
    })
}

fn recommendation(cfg: &ScenarioConfig, u_eq: f64) -> Result<Recommendation, ScenarioError> {
    cfg.mapper()
        .recommend(u_eq, cfg.program.intensity_percent, cfg.program.period_days)
        .map_err(|e| ScenarioError::Config(invalid("program", e.to_string())))
}

fn build_report(
    cfg: &ScenarioConfig,
    trajectory: &Trajectory,
    decisions: &[ControlDecision],
) -> Result<RunReport, ScenarioError> {
    let rows = decisions
        .iter()
        .map(|d| {
            let rec = recommendation(cfg, d.u_eq_star)?;
            Ok(DecisionRow {
                k: d.period,
                t_days: d.t_apply,
                u_eq_star: d.u_eq_star,
                cost_star: d.cost_star,
                delta_min: rec.delta_min,
                weekly_dose_min: rec.weekly_dose.minutes_per_week,
                clamped: rec.is_clamped(),
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let last = trajectory.last().expect("trajectory has samples");
    Ok(RunReport {
        scenario: cfg.name.clone(),
        mode: cfg.mode,
        samples: trajectory.len(),
        final_t_days: last.t,
        final_g: last.x.glucose,
        min_g: trajectory.glucose().fold(f64::INFINITY, f64::min),
        max_g: trajectory.glucose().fold(f64::NEG_INFINITY, f64::max),
        glucose_square_integral: trajectory.glucose_square_integral(),
        periods: rows.len(),
        total_prescribed_min: rows.iter().map(|r| r.delta_min).sum(),
        periods_meeting_guideline: rows
            .iter()
            .filter(|r| r.weekly_dose_min >= crate::prescription::GUIDELINE_MINIMUM_MIN_PER_WEEK)
            .count(),
        clamped_periods: rows.iter().filter(|r| r.clamped).count(),
        decisions: rows,
        provenance: cfg.provenance.clone(),
    })
}

/// The three output documents, rendered in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedOutputs {
    pub trajectory_csv: String,
    pub decisions_csv: String,
    pub report_json: String,
}

impl RenderedOutputs {
    fn files(&self) -> [(&'static str, &str); 3] {
        [
            (TRAJECTORY_FILE, &self.trajectory_csv),
            (DECISIONS_FILE, &self.decisions_csv),
            (REPORT_FILE, &self.report_json),
        ]
    }

    /// Name of the first document that differs from `other`.
    pub fn first_difference(&self, other: &Self) -> Option<&'static str> {
        self.files()
            .iter()
            .zip(other.files())
            .find(|(a, b)| a.1 != b.1)
            .map(|(a, _)| a.0)
    }
}

pub fn render_outputs(output: &RunOutput) -> RenderedOutputs {
    let mut traj = String::with_capacity(output.trajectory.len() * 96);
    traj.push_str(TRAJECTORY_HEADER);
    traj.push('\n');
    for s in &output.trajectory.samples {
        let x = s.x;
        let _ = writeln!(
            traj,
            "{},{},{},{},{},{},{}",
            s.t, x.glucose, x.insulin, x.beta, x.sensitivity, x.exercise_effect, s.u
        );
    }

    let mut dec = String::from(DECISIONS_HEADER);
    dec.push('\n');
    for r in &output.report.decisions {
        let _ = writeln!(
            dec,
            "{},{},{},{},{},{}",
            r.k, r.t_days, r.u_eq_star, r.cost_star, r.delta_min, r.weekly_dose_min
        );
    }

    let mut report = serde_json::to_string_pretty(&output.report).expect("report serializes");
    report.push('\n');

    RenderedOutputs {
        trajectory_csv: traj,
        decisions_csv: dec,
        report_json: report,
    }
}

/// Writes the documents into `dir`. Every file is staged in a temporary file
/// first and only renamed into place once all three are complete.
pub fn write_outputs(rendered: &RenderedOutputs, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| ScenarioError::Output { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut staged = Vec::new();
    for (name, body) in rendered.files() {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
        tmp.write_all(body.as_bytes()).map_err(io_err(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io_err(tmp.path()))?;
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::new();
    for (tmp, dest) in staged {
        tmp.persist(&dest).map_err(|e| ScenarioError::Output {
            path: dest.display().to_string(),
            source: e.error,
        })?;
        written.push(dest);
    }
    Ok(written)
}

/// Renders and writes a run into the scenario's output directory.
pub fn emit_outputs(output: &RunOutput, cfg: &ScenarioConfig) -> Result<Vec<PathBuf>, ScenarioError> {
    write_outputs(&render_outputs(output), &cfg.output_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPEN_LOOP: &str = r#"
mode = "open-loop"
duration_days = 10.0
[initial_state]
G = 100.0
I = 10.0
beta = 300.0
S_I = 0.72
V_l = 0.0
"#;

    fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::parse(text, Path::new("/tmp"), "test")
    }

    #[test]
    fn minimal_open_loop_materializes_defaults() {
        let cfg = parse(OPEN_LOOP).unwrap();
        assert_eq!(cfg.mode, Mode::OpenLoop);
        assert_eq!(cfg.initial_state, StateVector::onset());
        assert_eq!(cfg.step_days, integrator::DEFAULT_STEP_DAYS);
        assert_eq!(cfg.params, ParameterSet::defaults());
        assert_eq!(cfg.program.intensity_percent, 50.0);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/out/open-loop"));
        assert_eq!(cfg.provenance.config_sha256.len(), 64);
    }

    #[test]
    fn mpc_without_controller_is_rejected() {
        let text = OPEN_LOOP.replace("open-loop", "mpc");
        match parse(&text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "controller"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse(OPEN_LOOP).unwrap().with_mode(Mode::Mpc).is_err());
    }

    #[test]
    fn negative_step_is_rejected() {
        let text = OPEN_LOOP.replace("duration_days = 10.0", "duration_days = 10.0\nstep_days = -0.01");
        match parse(&text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "step_days"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_params_file_is_rejected() {
        let text = OPEN_LOOP.replace("duration_days = 10.0", "duration_days = 10.0\nparams = \"nope.toml\"");
        match parse(&text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "params"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{OPEN_LOOP}\nextra = 1\n");
        match parse(&text) {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert!(line > 1);
                assert!(message.contains("extra"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solver_step_follows_scenario_step() {
        let text = format!(
            "{}\n[controller]\nhorizon_periods = 2\nperiod_days = 1.0\nlambda = 1.0\nu_eq_max = 2.0\n[controller.solver]\ngrid_points = 11\n",
            OPEN_LOOP.replace("duration_days = 10.0", "duration_days = 10.0\nstep_days = 0.004")
        );
        let c = parse(&text).unwrap().controller.unwrap();
        assert_eq!(c.solver.step_days, 0.004);
        assert_eq!(c.solver.grid_points, 11);
        assert_eq!(c.solver.tolerance, 1e-4);
    }

    #[test]
    fn reference_config_hash_is_stable() {
        let a = ScenarioConfig::reference(Mode::Mpc);
        let b = ScenarioConfig::reference(Mode::Mpc);
        assert_eq!(a.provenance.config_sha256, b.provenance.config_sha256);
        assert_ne!(
            a.provenance.config_sha256,
            ScenarioConfig::reference(Mode::OpenLoop).provenance.config_sha256
        );
    }

    #[test]
    fn short_open_loop_run_renders() {
        let cfg = parse(OPEN_LOOP).unwrap();
        let out = run_scenario(&cfg).unwrap();
        let r = render_outputs(&out);
        assert_eq!(r.trajectory_csv.lines().count(), out.trajectory.len() + 1);
        assert_eq!(r.decisions_csv, format!("{DECISIONS_HEADER}\n"));
        assert_eq!(out.report.periods, 0);
    }
}
