use approx::assert_relative_eq;
use proptest::prelude::*;
use t2d_mpc::model::derivative;
use t2d_mpc::{apoptosis_base, proliferation_base, psi1, psi2, vector_field, ModelParams, ParameterSet, StateVector};

fn defaults() -> ModelParams {
    ParameterSet::defaults().model
}

// Frozen from an exact rational evaluation of the model with the shipped
// parameter file.
const ONSET_DERIVATIVE: [f64; 5] = [0.0, 0.0, 0.0, -0.0140205, 0.0];
const PROBE_STATE: [f64; 5] = [150.0, 12.0, 250.0, 0.5, 5.0];
const PROBE_INPUT: f64 = 2.0;
const PROBE_DERIVATIVE: [f64; 5] = [-252.0, 533.6470588235294, 3.57, -0.00817362, 1.85];

#[test]
fn vector_field_matches_rational_oracle() {
    let p = defaults();
    let d = vector_field(&StateVector::onset(), 0.0, &p).unwrap().to_array();
    for (got, want) in d.iter().zip(ONSET_DERIVATIVE) {
        assert!((got - want).abs() <= 1e-9, "{d:?}");
    }
    let d = vector_field(&StateVector::from_array(PROBE_STATE), PROBE_INPUT, &p)
        .unwrap()
        .to_array();
    for (got, want) in d.iter().zip(PROBE_DERIVATIVE) {
        assert_relative_eq!(*got, want, max_relative = 1e-12);
    }
}

#[test]
fn turnover_rates_at_normoglycemia() {
    let p = defaults();
    assert_relative_eq!(proliferation_base(100.0, &p), 0.048, max_relative = 1e-12);
    assert_relative_eq!(apoptosis_base(100.0, &p), 0.048, max_relative = 1e-12);
}

/// Exercise-free model written out independently, S_I relaxing to target.
fn unmodified_field(x: &StateVector, p: &ModelParams) -> [f64; 5] {
    let (g, i, b, s) = (x.glucose, x.insulin, x.beta, x.sensitivity);
    let net = -p.d0 + (p.r1r + p.r1a) * g - (p.r2r + p.r2a) * g * g;
    [
        p.R0 - (p.Eg0 + s * i) * g,
        b * p.sigma * g * g / (p.alpha + g * g) - p.k * i,
        net * b,
        -p.c * (s - p.S_I_target),
        0.0,
    ]
}

proptest! {
    #[test]
    fn hill_factor_bounds(v in 0.0f64..1e6) {
        let p = defaults();
        let a = psi1(v, &p);
        let b = psi2(v, &p);
        prop_assert!(a >= 1.0 && a < 1.0 + p.zeta_p);
        prop_assert!(b > 1.0 - p.zeta_a && b <= 1.0);
    }

    #[test]
    fn hill_factors_are_monotone(v in 0.0f64..200.0, dv in 1e-3f64..50.0) {
        let p = defaults();
        prop_assert!(psi1(v + dv, &p) > psi1(v, &p));
        prop_assert!(psi2(v + dv, &p) < psi2(v, &p));
    }

    #[test]
    fn exercise_state_is_affine_in_input(
        v in 0.0f64..100.0,
        u in 0.0f64..3.0,
        du in 1e-3f64..1.0,
    ) {
        let p = defaults();
        let x = StateVector::new(120.0, 11.0, 280.0, 0.6, v);
        let f = |u: f64| derivative(&x, u, &p).exercise_effect;
        let slope = (f(u + du) - f(u)) / du;
        prop_assert!((slope - p.SR / p.K_IL6).abs() <= 1e-9);
        let curvature = f(u + du) - 2.0 * f(u) + f(u - du.min(u));
        if du <= u {
            prop_assert!(curvature.abs() <= 1e-12 * (1.0 + f(u).abs()));
        }
    }

    #[test]
    fn beta_rate_is_linear_in_beta(
        g in 50.0f64..600.0,
        beta in 1.0f64..2000.0,
        v in 0.0f64..60.0,
    ) {
        let p = defaults();
        let x = StateVector::new(g, 10.0, beta, 0.5, v);
        let y = StateVector { beta: 2.0 * beta, ..x };
        prop_assert_eq!(derivative(&y, 1.0, &p).beta, 2.0 * derivative(&x, 1.0, &p).beta);
    }

    #[test]
    fn no_exercise_reduces_to_unmodified_model(
        g in 50.0f64..600.0,
        i in 0.0f64..100.0,
        beta in 0.0f64..2000.0,
        s in 0.0f64..1.0,
    ) {
        let p = defaults();
        let x = StateVector::new(g, i, beta, s, 0.0);
        let got = derivative(&x, 0.0, &p).to_array();
        let want = unmodified_field(&x, &p);
        for (a, b) in got.iter().zip(want) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{:?} vs {:?}", got, want);
        }
    }
}

#[test]
fn hill_product_is_one_without_exercise() {
    let p = defaults();
    assert_eq!(psi1(0.0, &p) * psi2(0.0, &p), 1.0);
}
