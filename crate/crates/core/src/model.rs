//! Long-term glucose / insulin / beta-cell progression model with an
//! exercise-driven state.
//!
//! The model is a five-state ODE:
//!
//! ```text
//! dG/dt    = R0 - (Eg0 + S_I I) G
//! dI/dt    = beta sigma G^2 / (alpha + G^2) - k I
//! dbeta/dt = (P(G) psi1(V_l) - A(G) psi2(V_l)) beta
//! dS_I/dt  = -c (S_I - S_I_target) (1 - zeta_si V_l / (k_n_si + V_l))
//! dV_l/dt  = (SR / K_IL6) u_eq - k_s V_l
//! ```
//!
//! with `P(G) = r1r G - r2r G^2` and `A(G) = d0 - r1a G + r2a G^2`. All rates
//! are per day. The vector field is defined for every real state; keeping
//! trajectories inside the physiological set is the integrator's job.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// The five physiological states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateVector {
    /// Plasma glucose, mg/dl.
    #[serde(rename = "G")]
    pub glucose: f64,
    /// Serum insulin, µU/ml.
    #[serde(rename = "I")]
    pub insulin: f64,
    /// Beta-cell mass, mg.
    #[serde(rename = "beta")]
    pub beta: f64,
    /// Insulin sensitivity, ml/µU/d.
    #[serde(rename = "S_I")]
    pub sensitivity: f64,
    /// Integrated long-term exercise effect, (pg/dl)·min.
    #[serde(rename = "V_l")]
    pub exercise_effect: f64,
}

impl StateVector {
    pub const DIM: usize = 5;

    pub const fn new(
        glucose: f64,
        insulin: f64,
        beta: f64,
        sensitivity: f64,
        exercise_effect: f64,
    ) -> Self {
        Self {
            glucose,
            insulin,
            beta,
            sensitivity,
            exercise_effect,
        }
    }

    /// Pre-diabetic onset state `[100, 10, 300, 0.72, 0]`.
    pub const fn onset() -> Self {
        Self::new(100.0, 10.0, 300.0, 0.72, 0.0)
    }

    pub fn to_array(self) -> [f64; 5] {
        [
            self.glucose,
            self.insulin,
            self.beta,
            self.sensitivity,
            self.exercise_effect,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Name and value of the first component that lies below the physiological
    /// set by more than `tol`.
    pub fn first_negative(&self, tol: f64) -> Option<(&'static str, f64)> {
        const NAMES: [&str; 5] = ["G", "I", "beta", "S_I", "V_l"];
        NAMES
            .iter()
            .zip(self.to_array())
            .find(|(_, v)| *v < -tol)
            .map(|(n, v)| (*n, v))
    }

    /// Checks the state invariants: finite, G > 0, everything else >= 0.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.is_finite() {
            return Err(ModelError::NonFinite("state".into()));
        }
        if self.glucose <= 0.0 {
            return Err(ModelError::InvalidState {
                field: "G",
                value: self.glucose,
            });
        }
        if let Some((field, value)) = self.first_negative(0.0) {
            return Err(ModelError::InvalidState { field, value });
        }
        Ok(())
    }
}

impl Add for StateVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.glucose + o.glucose,
            self.insulin + o.insulin,
            self.beta + o.beta,
            self.sensitivity + o.sensitivity,
            self.exercise_effect + o.exercise_effect,
        )
    }
}

impl Sub for StateVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.glucose - o.glucose,
            self.insulin - o.insulin,
            self.beta - o.beta,
            self.sensitivity - o.sensitivity,
            self.exercise_effect - o.exercise_effect,
        )
    }
}

impl Mul<StateVector> for f64 {
    type Output = StateVector;
    fn mul(self, x: StateVector) -> StateVector {
        StateVector::new(
            self * x.glucose,
            self * x.insulin,
            self * x.beta,
            self * x.sensitivity,
            self * x.exercise_effect,
        )
    }
}

/// Rate constants and Hill parameters. Field names follow the parameter file
/// keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ModelParams {
    /// Net glucose production at zero glucose, mg/dl/d.
    pub R0: f64,
    /// Glucose effectiveness, 1/d.
    pub Eg0: f64,
    /// Maximal insulin secretion rate per mg of beta cells, µU/ml/d/mg.
    pub sigma: f64,
    /// Secretion half-saturation, (mg/dl)^2.
    pub alpha: f64,
    /// Insulin clearance, 1/d.
    pub k: f64,
    pub d0: f64,
    pub r1r: f64,
    pub r2r: f64,
    pub r1a: f64,
    pub r2a: f64,
    /// Insulin-sensitivity relaxation rate, 1/d.
    pub c: f64,
    pub S_I_target: f64,
    pub zeta_si: f64,
    pub k_n_si: f64,
    pub SR: f64,
    pub K_IL6: f64,
    /// Decay rate of the exercise effect, 1/d.
    pub k_s: f64,
    pub zeta_p: f64,
    pub k_p: f64,
    pub zeta_a: f64,
    pub k_a: f64,
}

impl ModelParams {
    /// Parameter names in file order.
    pub const KEYS: [&'static str; 21] = [
        "R0",
        "Eg0",
        "sigma",
        "alpha",
        "k",
        "d0",
        "r1r",
        "r2r",
        "r1a",
        "r2a",
        "c",
        "S_I_target",
        "zeta_si",
        "k_n_si",
        "SR",
        "K_IL6",
        "k_s",
        "zeta_p",
        "k_p",
        "zeta_a",
        "k_a",
    ];

    pub fn values(&self) -> [f64; 21] {
        [
            self.R0,
            self.Eg0,
            self.sigma,
            self.alpha,
            self.k,
            self.d0,
            self.r1r,
            self.r2r,
            self.r1a,
            self.r2a,
            self.c,
            self.S_I_target,
            self.zeta_si,
            self.k_n_si,
            self.SR,
            self.K_IL6,
            self.k_s,
            self.zeta_p,
            self.k_p,
            self.zeta_a,
            self.k_a,
        ]
    }

    /// Source gain of the exercise state, `SR / K_IL6`.
    pub fn exercise_gain(&self) -> f64 {
        self.SR / self.K_IL6
    }

    /// Steady exercise effect under a constant input.
    pub fn exercise_equilibrium(&self, u_eq: f64) -> f64 {
        self.exercise_gain() * u_eq / self.k_s
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in Self::KEYS.iter().zip(self.values()) {
            if !v.is_finite() {
                return Err(ModelError::InvalidParam {
                    name,
                    value: v,
                    reason: "must be finite",
                });
            }
        }
        let strictly_positive = [
            ("R0", self.R0),
            ("Eg0", self.Eg0),
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("k", self.k),
            ("d0", self.d0),
            ("c", self.c),
            ("S_I_target", self.S_I_target),
            ("k_n_si", self.k_n_si),
            ("SR", self.SR),
            ("K_IL6", self.K_IL6),
            ("k_s", self.k_s),
            ("k_p", self.k_p),
            ("k_a", self.k_a),
        ];
        for (name, v) in strictly_positive {
            if v <= 0.0 {
                return Err(ModelError::InvalidParam {
                    name,
                    value: v,
                    reason: "must be > 0",
                });
            }
        }
        let non_negative = [
            ("r1r", self.r1r),
            ("r2r", self.r2r),
            ("r1a", self.r1a),
            ("r2a", self.r2a),
            ("zeta_si", self.zeta_si),
            ("zeta_p", self.zeta_p),
            ("zeta_a", self.zeta_a),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(ModelError::InvalidParam {
                    name,
                    value: v,
                    reason: "must be >= 0",
                });
            }
        }
        if self.zeta_a >= 1.0 {
            return Err(ModelError::InvalidParam {
                name: "zeta_a",
                value: self.zeta_a,
                reason: "must be < 1 so apoptosis stays positive",
            });
        }
        if self.zeta_si >= 1.0 {
            return Err(ModelError::InvalidParam {
                name: "zeta_si",
                value: self.zeta_si,
                reason: "must be < 1 so S_I keeps relaxing",
            });
        }
        Ok(())
    }
}

/// Beta-cell proliferation without exercise, `r1r G - r2r G^2`.
#[inline]
pub fn proliferation_base(glucose: f64, p: &ModelParams) -> f64 {
    p.r1r * glucose - p.r2r * glucose * glucose
}

/// Beta-cell apoptosis without exercise, `d0 - r1a G + r2a G^2`.
#[inline]
pub fn apoptosis_base(glucose: f64, p: &ModelParams) -> f64 {
    p.d0 - p.r1a * glucose + p.r2a * glucose * glucose
}

#[inline]
fn hill2(x: f64, half: f64) -> f64 {
    let x2 = x * x;
    x2 / (half * half + x2)
}

/// Proliferation boost, in `[1, 1 + zeta_p)`.
#[inline]
pub fn psi1(exercise_effect: f64, p: &ModelParams) -> f64 {
    1.0 + p.zeta_p * hill2(exercise_effect, p.k_p)
}

/// Apoptosis suppression, in `(1 - zeta_a, 1]`.
#[inline]
pub fn psi2(exercise_effect: f64, p: &ModelParams) -> f64 {
    1.0 - p.zeta_a * hill2(exercise_effect, p.k_a)
}

/// Time derivative of the state under a constant equivalent exercise input.
#[inline]
pub fn derivative(x: &StateVector, u_eq: f64, p: &ModelParams) -> StateVector {
    let g = x.glucose;
    let v = x.exercise_effect;
    let g2 = g * g;

    let dg = p.R0 - (p.Eg0 + x.sensitivity * x.insulin) * g;
    let di = x.beta * p.sigma * g2 / (p.alpha + g2) - p.k * x.insulin;
    let net_growth = proliferation_base(g, p) * psi1(v, p) - apoptosis_base(g, p) * psi2(v, p);
    let dbeta = net_growth * x.beta;
    let dsi = -p.c * (x.sensitivity - p.S_I_target) * (1.0 - p.zeta_si * v / (p.k_n_si + v));
    let dv = p.exercise_gain() * u_eq - p.k_s * v;

    StateVector::new(dg, di, dbeta, dsi, dv)
}

/// Checked vector field: like [`derivative`] but reports overflow.
pub fn vector_field(x: &StateVector, u_eq: f64, p: &ModelParams) -> Result<StateVector, ModelError> {
    let d = derivative(x, u_eq, p);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(ModelError::NonFinite("vector field".into()))
    }
}
