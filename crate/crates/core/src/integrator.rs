//! Fixed-step classical Runge–Kutta integration under a piecewise-constant
//! input, with trajectory recording.

use serde::Serialize;

use crate::error::IntegrationError;
use crate::model::{derivative, ModelParams, StateVector};

/// Default step, days. RK4 on the insulin clearance mode (`k = 432 / d`) is
/// stable only for `k h < 2.78`.
pub const DEFAULT_STEP_DAYS: f64 = 0.005;

/// How far below zero a physiological state may dip before it is a fault.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-9;

const MAX_STEPS: f64 = 1e9;

/// Relative (to `h`) distance under which two grid times are merged.
const MERGE_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, h: f64) -> Result<Self, IntegrationError> {
        if !(t0.is_finite() && t1.is_finite() && h.is_finite()) {
            return Err(IntegrationError::InvalidGrid("non-finite bound or step".into()));
        }
        if t1 <= t0 {
            return Err(IntegrationError::InvalidGrid(format!("t1 = {t1} must exceed t0 = {t0}")));
        }
        if h <= 0.0 {
            return Err(IntegrationError::InvalidGrid(format!("step h = {h} must be > 0")));
        }
        if (t1 - t0) / h >= MAX_STEPS {
            return Err(IntegrationError::InvalidGrid(format!(
                "{} steps exceeds the limit of {MAX_STEPS:e}",
                (t1 - t0) / h
            )));
        }
        Ok(Self { t0, t1, h })
    }

    fn merge_tol(&self) -> f64 {
        self.h * MERGE_FRACTION
    }

    /// Uniform sample times `t0 + i h`, closed with `t1`, plus every
    /// breakpoint in `(t0, t1)`. Breakpoints within `1e-6 h` of a uniform
    /// time reuse that time.
    pub fn points(&self, breakpoints: &[f64]) -> Vec<f64> {
        let tol = self.merge_tol();
        let n = ((self.t1 - self.t0) / self.h).ceil() as usize;
        let mut pts: Vec<f64> = (0..n)
            .map(|i| self.t0 + i as f64 * self.h)
            .filter(|&t| t < self.t1 - tol)
            .collect();
        pts.push(self.t1);
        let mut extra: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > self.t0 + tol && b < self.t1 - tol)
            .filter(|&b| {
                let i = ((b - self.t0) / self.h).round();
                (self.t0 + i * self.h - b).abs() > tol
            })
            .collect();
        if !extra.is_empty() {
            pts.append(&mut extra);
            pts.sort_by(|a, b| a.total_cmp(b));
            pts.dedup_by(|b, a| (*b - *a).abs() <= tol);
        }
        pts
    }
}

/// Piecewise-constant input: segment `i` holds `value` from `start` until the
/// next segment's start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSchedule {
    segments: Vec<(f64, f64)>,
}

impl InputSchedule {
    pub fn constant(u_eq: f64) -> Self {
        Self {
            segments: vec![(f64::NEG_INFINITY, u_eq)],
        }
    }

    /// Segments as `(start, value)` pairs; starts must be strictly increasing.
    pub fn piecewise(segments: Vec<(f64, f64)>) -> Result<Self, IntegrationError> {
        if segments.is_empty() {
            return Err(IntegrationError::InvalidSchedule("no segments".into()));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(IntegrationError::InvalidSchedule(
                "segment starts must be strictly increasing".into(),
            ));
        }
        if segments.iter().any(|&(t, u)| t.is_nan() || !u.is_finite() || u < 0.0) {
            return Err(IntegrationError::InvalidSchedule(
                "inputs must be finite and non-negative".into(),
            ));
        }
        Ok(Self { segments })
    }

    pub fn start(&self) -> f64 {
        self.segments[0].0
    }

    /// Segment start times (excluding an unbounded first start).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments
            .iter()
            .map(|s| s.0)
            .filter(|t| t.is_finite())
            .collect()
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|s| s.0 <= t);
        self.segments[idx.saturating_sub(1)].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: StateVector,
    /// Input held from this sample to the next.
    pub u: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn final_state(&self) -> Option<StateVector> {
        self.last().map(|s| s.x)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn glucose(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.x.glucose)
    }

    /// Trapezoid rule for the integral of G^2 over the trajectory.
    pub fn glucose_square_integral(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].x.glucose.powi(2) + w[1].x.glucose.powi(2)))
            .sum()
    }

    /// First sample time at which glucose exceeds `level`.
    pub fn first_glucose_above(&self, level: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.x.glucose > level).map(|s| s.t)
    }

    /// Glucose at the sample nearest to `t`.
    pub fn glucose_at(&self, t: f64) -> Option<f64> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|s| s.x.glucose)
    }
}

/// One unchecked classical RK4 step.
#[inline]
pub fn rk4_step(x: &StateVector, u_eq: f64, h: f64, p: &ModelParams) -> StateVector {
    let k1 = derivative(x, u_eq, p);
    let k2 = derivative(&(*x + (0.5 * h) * k1), u_eq, p);
    let k3 = derivative(&(*x + (0.5 * h) * k2), u_eq, p);
    let k4 = derivative(&(*x + h * k3), u_eq, p);
    *x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Checks a state reached at time `t`.
pub(crate) fn check_state(x: &StateVector, t: f64) -> Result<(), IntegrationError> {
    if !x.is_finite() {
        return Err(IntegrationError::NonFiniteState { t });
    }
    if let Some((field, value)) = x.first_negative(NEGATIVITY_TOLERANCE) {
        return Err(IntegrationError::NegativeState { t, field, value });
    }
    Ok(())
}

/// One RK4 step of size `h`. Faults report `t` relative to the step start.
pub fn step(x: &StateVector, u_eq: f64, h: f64, p: &ModelParams) -> Result<StateVector, IntegrationError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(IntegrationError::InvalidGrid(format!("step h = {h} must be > 0")));
    }
    let next = rk4_step(x, u_eq, h, p);
    check_state(&next, h)?;
    Ok(next)
}

/// Advances from `times[0]` through every later entry of `times` under a
/// constant input, appending one sample per reached time.
pub(crate) fn advance(
    mut x: StateVector,
    u_eq: f64,
    times: &[f64],
    p: &ModelParams,
    out: &mut Vec<Sample>,
) -> Result<StateVector, IntegrationError> {
    for w in times.windows(2) {
        x = rk4_step(&x, u_eq, w[1] - w[0], p);
        check_state(&x, w[1])?;
        out.push(Sample { t: w[1], x, u: u_eq });
    }
    Ok(x)
}

/// Integrates over `grid`, refining it with the schedule's breakpoints so
/// every step sees a single input value.
pub fn integrate(
    x0: StateVector,
    schedule: &InputSchedule,
    grid: &TimeGrid,
    p: &ModelParams,
) -> Result<Trajectory, IntegrationError> {
    if schedule.start() > grid.t0 {
        return Err(IntegrationError::InvalidSchedule(format!(
            "schedule starts at {} after t0 = {}",
            schedule.start(),
            grid.t0
        )));
    }
    check_state(&x0, grid.t0)?;
    let times = grid.points(&schedule.breakpoints());
    let mut samples = Vec::with_capacity(times.len());
    samples.push(Sample {
        t: times[0],
        x: x0,
        u: schedule.value_at(times[0]),
    });
    let mut x = x0;
    for w in times.windows(2) {
        let u = schedule.value_at(w[0]);
        x = rk4_step(&x, u, w[1] - w[0], p);
        check_state(&x, w[1])?;
        samples.push(Sample {
            t: w[1],
            x,
            u: schedule.value_at(w[1]),
        });
    }
    Ok(Trajectory { samples })
}
