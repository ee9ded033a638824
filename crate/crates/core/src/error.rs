use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("state component {field} = {value} is outside the physiological set")]
    InvalidState { field: &'static str, value: f64 },
    #[error("parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input schedule: {0}")]
    InvalidSchedule(String),
    #[error("non-finite state at t = {t} d")]
    NonFiniteState { t: f64 },
    #[error("state component {field} = {value:e} went negative at t = {t} d")]
    NegativeState {
        t: f64,
        field: &'static str,
        value: f64,
    },
}

impl IntegrationError {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::NonFiniteState { .. } | Self::NegativeState { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("every candidate input diverged (period {period})")]
    AllCandidatesDiverged { period: usize },
    #[error("closed loop failed in period {period}: {source}")]
    Period {
        period: usize,
        #[source]
        source: IntegrationError,
    },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrescriptionError {
    #[error("invalid exercise program: {0}")]
    InvalidProgram(String),
    #[error("duration and period must share a time unit ({delta:?} vs {period:?})")]
    UnitMismatch {
        delta: crate::prescription::TimeUnit,
        period: crate::prescription::TimeUnit,
    },
    #[error("session of {requested_min:.1} min does not fit in a {period_min:.1} min period")]
    InfeasibleDuration {
        requested_min: f64,
        period_min: f64,
        /// Longest feasible session, i.e. the whole period.
        clamped_min: f64,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{scenario}: {source}")]
    Integration {
        scenario: String,
        #[source]
        source: IntegrationError,
    },
    #[error("{scenario}: {source}")]
    Control {
        scenario: String,
        #[source]
        source: ControlError,
    },
    #[error("writing {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rerun produced different {0} bytes")]
    NotReproducible(String),
}

impl ScenarioError {
    /// True for faults of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Self::Integration { source, .. } => source.is_numerical(),
            Self::Control { source, .. } => match source {
                ControlError::InvalidConfig(_) => false,
                ControlError::AllCandidatesDiverged { .. } => true,
                ControlError::Period { source, .. } | ControlError::Integration(source) => {
                    source.is_numerical()
                }
            },
            Self::NotReproducible(_) => true,
            Self::Config(_) | Self::Output { .. } => false,
        }
    }
}
