//! Parameter files: flat `key = value` documents (TOML subset) holding every
//! [`ModelParams`] field plus the prescription calibration factor. Missing and
//! unknown keys are both rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::ModelParams;

/// Contents of the shipped default parameter file.
pub const DEFAULT_PARAMS_TOML: &str = include_str!("../data/default-params.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterSet {
    #[serde(flatten)]
    pub model: ModelParams,
    pub duration_calibration: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawParameterSet {
    R0: f64,
    Eg0: f64,
    sigma: f64,
    alpha: f64,
    k: f64,
    d0: f64,
    r1r: f64,
    r2r: f64,
    r1a: f64,
    r2a: f64,
    c: f64,
    S_I_target: f64,
    zeta_si: f64,
    k_n_si: f64,
    SR: f64,
    K_IL6: f64,
    k_s: f64,
    zeta_p: f64,
    k_p: f64,
    zeta_a: f64,
    k_a: f64,
    duration_calibration: f64,
}

impl From<RawParameterSet> for ParameterSet {
    fn from(r: RawParameterSet) -> Self {
        Self {
            model: ModelParams {
                R0: r.R0,
                Eg0: r.Eg0,
                sigma: r.sigma,
                alpha: r.alpha,
                k: r.k,
                d0: r.d0,
                r1r: r.r1r,
                r2r: r.r2r,
                r1a: r.r1a,
                r2a: r.r2a,
                c: r.c,
                S_I_target: r.S_I_target,
                zeta_si: r.zeta_si,
                k_n_si: r.k_n_si,
                SR: r.SR,
                K_IL6: r.K_IL6,
                k_s: r.k_s,
                zeta_p: r.zeta_p,
                k_p: r.k_p,
                zeta_a: r.zeta_a,
                k_a: r.k_a,
            },
            duration_calibration: r.duration_calibration,
        }
    }
}

impl ParameterSet {
    /// The shipped defaults.
    pub fn defaults() -> Self {
        Self::parse(DEFAULT_PARAMS_TOML, "<default-params>").expect("shipped parameter file is valid")
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let raw: RawParameterSet = toml::from_str(text).map_err(|e| toml_error(&e, text, origin))?;
        let set = Self::from(raw);
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        if !(self.duration_calibration.is_finite() && self.duration_calibration > 0.0) {
            return Err(ConfigError::Invalid {
                field: "duration_calibration".into(),
                message: format!("must be finite and > 0, got {}", self.duration_calibration),
            });
        }
        Ok(())
    }

    /// Renders the set back into a parameter file (no comments).
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in ModelParams::KEYS.iter().zip(self.model.values()) {
            out.push_str(&format!("{key} = {value:?}\n"));
        }
        out.push_str(&format!("duration_calibration = {:?}\n", self.duration_calibration));
        out
    }
}

pub(crate) fn toml_error(e: &toml::de::Error, text: &str, origin: &str) -> ConfigError {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    ConfigError::Parse {
        path: origin.to_string(),
        line,
        message: e.message().to_string(),
    }
}
