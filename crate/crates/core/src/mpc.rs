//! Receding-horizon exercise controller.
//!
//! At every period boundary `kT` the controller picks one scalar input
//! `u_eq` in `[0, u_eq_max]`, holds it over the whole prediction window of
//! `N` periods, and scores it by
//!
//! ```text
//! J(u_eq) = ∫_{kT}^{(k+N)T} G(s)^2 + lambda u_eq^2 ds
//! ```
//!
//! The minimizer is applied for one period, then the problem is re-solved
//! from the new state. The 1-D search is a uniform grid scan followed by a
//! golden-section refinement of the best grid bracket.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ControlError, IntegrationError};
use crate::integrator::{self, check_state, rk4_step, Sample, TimeGrid, Trajectory};
use crate::model::{ModelParams, StateVector};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Points of the initial uniform scan over `[0, u_eq_max]`.
    pub grid_points: usize,
    /// Golden-section stops once the bracket is narrower than this.
    pub tolerance: f64,
    /// Integration step of the prediction model, days.
    pub step_days: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            grid_points: 61,
            tolerance: 1e-4,
            step_days: integrator::DEFAULT_STEP_DAYS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Prediction window, in control periods.
    pub horizon_periods: usize,
    /// Control period, days.
    pub period_days: f64,
    /// Input penalty weight.
    pub lambda: f64,
    pub u_eq_max: f64,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            horizon_periods: 20,
            period_days: 2.0,
            lambda: 60.0,
            u_eq_max: 3.0,
            solver: SolverSettings::default(),
        }
    }
}

impl ControllerConfig {
    pub fn horizon_days(&self) -> f64 {
        self.horizon_periods as f64 * self.period_days
    }

    /// `u_eq_max = 0` is accepted as the degenerate singleton bound.
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::InvalidConfig(m));
        if self.horizon_periods < 1 {
            return bad("horizon_periods must be >= 1".into());
        }
        if !(self.period_days.is_finite() && self.period_days > 0.0) {
            return bad(format!("period_days = {} must be > 0", self.period_days));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda = {} must be >= 0", self.lambda));
        }
        if !(self.u_eq_max.is_finite() && self.u_eq_max >= 0.0) {
            return bad(format!("u_eq_max = {} must be >= 0", self.u_eq_max));
        }
        if self.solver.grid_points < 2 {
            return bad("solver.grid_points must be >= 2".into());
        }
        if !(self.solver.tolerance.is_finite() && self.solver.tolerance > 0.0) {
            return bad(format!("solver.tolerance = {} must be > 0", self.solver.tolerance));
        }
        if !(self.solver.step_days.is_finite() && self.solver.step_days > 0.0) {
            return bad(format!("solver.step_days = {} must be > 0", self.solver.step_days));
        }
        if self.solver.step_days > self.period_days {
            return bad("solver.step_days must not exceed period_days".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlDecision {
    /// Period index `k`.
    pub period: usize,
    /// Start of the period, days.
    pub t_apply: f64,
    pub u_eq_star: f64,
    pub cost_star: f64,
    /// Every `(u_eq, cost)` pair evaluated, grid scan first, in evaluation
    /// order. Diverged candidates carry `+inf`.
    pub cost_curve: Vec<(f64, f64)>,
    pub diverged_candidates: usize,
}

/// Prediction of the window cost for constant inputs from one state. Holds
/// the step sequence so repeated candidates share it.
struct HorizonModel<'a> {
    steps: Vec<f64>,
    x0: StateVector,
    cfg: &'a ControllerConfig,
    params: &'a ModelParams,
}

impl<'a> HorizonModel<'a> {
    fn new(x0: StateVector, cfg: &'a ControllerConfig, params: &'a ModelParams) -> Result<Self, IntegrationError> {
        let grid = TimeGrid::new(0.0, cfg.horizon_days(), cfg.solver.step_days)?;
        let steps = grid.points(&[]).windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { steps, x0, cfg, params })
    }

    fn cost(&self, u_eq: f64) -> Result<f64, IntegrationError> {
        check_state(&self.x0, 0.0)?;
        let mut x = self.x0;
        let mut g2 = x.glucose * x.glucose;
        let mut t = 0.0;
        let mut acc = 0.0;
        for &h in &self.steps {
            x = rk4_step(&x, u_eq, h, self.params);
            t += h;
            check_state(&x, t)?;
            let next = x.glucose * x.glucose;
            acc += 0.5 * h * (g2 + next);
            g2 = next;
        }
        Ok(acc + self.cfg.lambda * u_eq * u_eq * self.cfg.horizon_days())
    }

    fn sentinel_cost(&self, u_eq: f64) -> f64 {
        self.cost(u_eq).unwrap_or(f64::INFINITY)
    }
}

/// Window cost of holding `u_eq` for `N T` days from `x`. Glucose enters
/// through the trapezoid rule on the RK4 samples; the penalty is integrated
/// exactly.
pub fn horizon_cost(
    x: &StateVector,
    u_eq: f64,
    cfg: &ControllerConfig,
    p: &ModelParams,
) -> Result<f64, IntegrationError> {
    HorizonModel::new(*x, cfg, p)?.cost(u_eq)
}

/// Lower cost wins; equal costs go to the smaller input.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1 < b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Optimal input for the period starting at the current state.
pub fn solve_period(x: &StateVector, cfg: &ControllerConfig, p: &ModelParams) -> Result<ControlDecision, ControlError> {
    solve_period_at(x, 0, 0.0, cfg, p)
}

fn solve_period_at(
    x: &StateVector,
    period: usize,
    t_apply: f64,
    cfg: &ControllerConfig,
    p: &ModelParams,
) -> Result<ControlDecision, ControlError> {
    cfg.validate()?;
    let model = HorizonModel::new(*x, cfg, p)?;

    let n = if cfg.u_eq_max == 0.0 { 1 } else { cfg.solver.grid_points };
    let spacing = if n > 1 { cfg.u_eq_max / (n - 1) as f64 } else { 0.0 };
    let grid: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { cfg.u_eq_max } else { i as f64 * spacing })
        .collect();
    // Ordered collect keeps the reduction independent of thread scheduling.
    let mut curve: Vec<(f64, f64)> = grid.par_iter().map(|&u| (u, model.sentinel_cost(u))).collect();

    let best_idx = curve
        .iter()
        .enumerate()
        .filter(|(_, c)| c.1.is_finite())
        .fold(None::<usize>, |best, (i, c)| match best {
            Some(b) if !better(*c, curve[b]) => Some(b),
            _ => Some(i),
        })
        .ok_or(ControlError::AllCandidatesDiverged { period })?;

    if n > 1 {
        let lo = grid[best_idx.saturating_sub(1)];
        let hi = grid[(best_idx + 1).min(n - 1)];
        golden_section(&model, lo, hi, cfg.solver.tolerance, &mut curve);
    }

    let best = curve
        .iter()
        .copied()
        .filter(|c| c.1.is_finite())
        .fold(curve[best_idx], |b, c| if better(c, b) { c } else { b });
    let diverged_candidates = curve.iter().filter(|c| !c.1.is_finite()).count();

    Ok(ControlDecision {
        period,
        t_apply,
        u_eq_star: best.0,
        cost_star: best.1,
        cost_curve: curve,
        diverged_candidates,
    })
}

fn golden_section(model: &HorizonModel<'_>, mut a: f64, mut b: f64, tol: f64, curve: &mut Vec<(f64, f64)>) {
    let eval = |u: f64, curve: &mut Vec<(f64, f64)>| {
        let c = model.sentinel_cost(u);
        curve.push((u, c));
        c
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, curve);
    let mut fd = eval(d, curve);
    while b - a > tol {
        // Ties keep the left part of the bracket.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, curve);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, curve);
        }
    }
}

/// Closed loop over `[0, duration]`: solve, hold the optimum for one period,
/// integrate the plant, repeat. A trailing partial period is controlled like
/// a full one.
pub fn run_closed_loop(
    x0: StateVector,
    cfg: &ControllerConfig,
    p: &ModelParams,
    duration: f64,
) -> Result<(Trajectory, Vec<ControlDecision>), ControlError> {
    cfg.validate()?;
    let period = cfg.period_days;
    if !(duration.is_finite() && duration >= period * (1.0 - 1e-12)) {
        return Err(ControlError::InvalidConfig(format!(
            "duration {duration} d is shorter than one control period ({period} d)"
        )));
    }
    let grid = TimeGrid::new(0.0, duration, cfg.solver.step_days)?;
    let n_periods = ((duration / period) - 1e-9).ceil().max(1.0) as usize;
    let breakpoints: Vec<f64> = (1..n_periods).map(|k| k as f64 * period).collect();
    let times = grid.points(&breakpoints);

    // Index of each period boundary in `times`.
    let tol = cfg.solver.step_days * 1e-6;
    let mut bounds = vec![0usize];
    for &b in &breakpoints {
        let i = times.partition_point(|&t| t < b - tol);
        bounds.push(i);
    }
    bounds.push(times.len() - 1);

    check_state(&x0, 0.0).map_err(|source| ControlError::Period { period: 0, source })?;
    let mut samples: Vec<Sample> = Vec::with_capacity(times.len());
    samples.push(Sample { t: times[0], x: x0, u: 0.0 });
    let mut decisions = Vec::with_capacity(n_periods);
    let mut x = x0;
    for k in 0..n_periods {
        let t_apply = times[bounds[k]];
        let decision = solve_period_at(&x, k, t_apply, cfg, p)?;
        let u = decision.u_eq_star;
        samples.last_mut().expect("at least one sample").u = u;
        x = integrator::advance(x, u, &times[bounds[k]..=bounds[k + 1]], p, &mut samples)
            .map_err(|source| ControlError::Period { period: k, source })?;
        decisions.push(decision);
    }
    Ok((Trajectory { samples }, decisions))
}
