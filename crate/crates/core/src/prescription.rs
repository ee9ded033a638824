//! Mapping between the controller's equivalent input and concrete exercise
//! programs.
//!
//! A program of sessions at intensity `u_bar` (percent) lasting `delta`,
//! repeated every `T`, has the period-averaged input `u_eq = u_bar delta / T`.
//! The inverse, `delta = u_eq T / u_bar`, turns a controller decision into a
//! session length. Durations shown to people are in minutes and are scaled by
//! a calibration factor read from the parameter file.

use serde::Serialize;

use crate::error::PrescriptionError;

pub const MINUTES_PER_DAY: f64 = 1440.0;
pub const DAYS_PER_WEEK: f64 = 7.0;

/// Lowest weekly dose of moderate exercise recommended by public-health
/// guidelines, min/week.
pub const GUIDELINE_MINIMUM_MIN_PER_WEEK: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeUnit {
    Days,
    Minutes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSpan {
    pub value: f64,
    pub unit: TimeUnit,
}

impl TimeSpan {
    pub fn days(value: f64) -> Self {
        Self { value, unit: TimeUnit::Days }
    }

    pub fn minutes(value: f64) -> Self {
        Self { value, unit: TimeUnit::Minutes }
    }
}

/// `u_bar delta / T` on raw spans; both spans must be in the same unit.
pub fn average_input(u_bar: f64, session: TimeSpan, period: TimeSpan) -> Result<f64, PrescriptionError> {
    if session.unit != period.unit {
        return Err(PrescriptionError::UnitMismatch {
            delta: session.unit,
            period: period.unit,
        });
    }
    Ok(u_bar * session.value / period.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExerciseProgram {
    /// Intensity, percent (50 means 50 %).
    pub u_bar: f64,
    /// Period between session starts, days.
    pub period_days: f64,
    /// Session length, minutes.
    pub delta_min: f64,
}

impl ExerciseProgram {
    pub fn new(u_bar: f64, period_days: f64, delta_min: f64) -> Result<Self, PrescriptionError> {
        let bad = |m: String| Err(PrescriptionError::InvalidProgram(m));
        if !(u_bar.is_finite() && u_bar > 0.0 && u_bar <= 100.0) {
            return bad(format!("intensity {u_bar} must be in (0, 100]"));
        }
        if !(period_days.is_finite() && period_days > 0.0) {
            return bad(format!("period {period_days} d must be > 0"));
        }
        if !(delta_min.is_finite() && delta_min >= 0.0) {
            return bad(format!("session length {delta_min} min must be >= 0"));
        }
        if delta_min > period_days * MINUTES_PER_DAY {
            return bad(format!("session of {delta_min} min exceeds the {period_days} d period"));
        }
        Ok(Self {
            u_bar,
            period_days,
            delta_min,
        })
    }

    pub fn period_min(&self) -> f64 {
        self.period_days * MINUTES_PER_DAY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct WeeklyDose {
    pub minutes_per_week: f64,
}

impl WeeklyDose {
    pub fn meets_guideline_minimum(&self) -> bool {
        self.minutes_per_week >= GUIDELINE_MINIMUM_MIN_PER_WEEK
    }
}

/// `delta (7 / T)`.
pub fn weekly_dose(program: &ExerciseProgram) -> WeeklyDose {
    WeeklyDose {
        minutes_per_week: program.delta_min * DAYS_PER_WEEK / program.period_days,
    }
}

/// A session length derived from a controller decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recommendation {
    pub u_eq: f64,
    /// Session length to perform, minutes; clamped to the period if needed.
    pub delta_min: f64,
    /// Unclamped session length the decision asks for.
    pub requested_min: f64,
    pub weekly_dose: WeeklyDose,
}

impl Recommendation {
    pub fn is_clamped(&self) -> bool {
        self.delta_min < self.requested_min
    }
}

/// Converts between `u_eq` and displayed session minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrescriptionMapper {
    /// Multiplier applied to displayed durations.
    pub calibration: f64,
}

impl Default for PrescriptionMapper {
    fn default() -> Self {
        Self { calibration: 1.0 }
    }
}

impl PrescriptionMapper {
    pub fn new(calibration: f64) -> Self {
        Self { calibration }
    }

    /// Period-averaged input of a program.
    pub fn equivalent_input(&self, program: &ExerciseProgram) -> Result<f64, PrescriptionError> {
        let session = TimeSpan::days(program.delta_min / (MINUTES_PER_DAY * self.calibration));
        average_input(program.u_bar, session, TimeSpan::days(program.period_days))
    }

    fn raw_session_min(&self, u_eq: f64, u_bar: f64, period_days: f64) -> Result<f64, PrescriptionError> {
        if !(u_bar.is_finite() && u_bar > 0.0) {
            return Err(PrescriptionError::InvalidProgram(format!("intensity {u_bar} must be > 0")));
        }
        if !(period_days.is_finite() && period_days > 0.0) {
            return Err(PrescriptionError::InvalidProgram(format!("period {period_days} d must be > 0")));
        }
        if !(u_eq.is_finite() && u_eq >= 0.0) {
            return Err(PrescriptionError::InvalidProgram(format!("input {u_eq} must be >= 0")));
        }
        Ok(u_eq * period_days / u_bar * MINUTES_PER_DAY * self.calibration)
    }

    /// Session length, minutes, realizing `u_eq` at intensity `u_bar` every
    /// `period_days`. Fails with the clamped length attached when the session
    /// would not fit in the period.
    pub fn inverse_map(&self, u_eq: f64, u_bar: f64, period_days: f64) -> Result<f64, PrescriptionError> {
        let delta = self.raw_session_min(u_eq, u_bar, period_days)?;
        let period_min = period_days * MINUTES_PER_DAY;
        if delta > period_min {
            return Err(PrescriptionError::InfeasibleDuration {
                requested_min: delta,
                period_min,
                clamped_min: period_min,
            });
        }
        Ok(delta)
    }

    /// Like [`Self::inverse_map`] but always returns a usable session,
    /// flagging when it had to be clamped.
    pub fn recommend(&self, u_eq: f64, u_bar: f64, period_days: f64) -> Result<Recommendation, PrescriptionError> {
        let requested_min = self.raw_session_min(u_eq, u_bar, period_days)?;
        let delta_min = match self.inverse_map(u_eq, u_bar, period_days) {
            Ok(d) => d,
            Err(PrescriptionError::InfeasibleDuration { clamped_min, .. }) => clamped_min,
            Err(e) => return Err(e),
        };
        let program = ExerciseProgram::new(u_bar, period_days, delta_min)?;
        Ok(Recommendation {
            u_eq,
            delta_min,
            requested_min,
            weekly_dose: weekly_dose(&program),
        })
    }
}
