//! Ready-made models and profiles of the reference experiments.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::models::{make_model, CoefficientFunction as C, Family, VectorFieldModel};
use crate::transitions::{Profile, RateProfile};

fn build(family: Family, entries: Vec<(&str, C)>) -> VectorFieldModel {
    let coefficients: BTreeMap<String, C> =
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    make_model(family, &coefficients).expect("preset coefficients are valid")
}

/// Rational Allee model with migration `γ φ(t)`.
pub fn allee_migration() -> VectorFieldModel {
    let s5 = 5f64.sqrt();
    build(
        Family::AlleeMultiplicativeRational,
        vec![
            ("r", C::sin2(1.5, 1.0, 0.25)),
            ("K", C::sin2(40.0, 40.0, s5 / 16.0)),
            ("mu", C::sin2(30.0, 30.0, 0.25)),
            ("nu", C::sin2(40.0, 40.0, s5 / 16.0)),
            ("phi", C::sin2(0.75, 0.5, s5 / 2.0)),
        ],
    )
}

/// `x' = -(x - γ)² + I(t)` with `I(t) = -sin(t/2) - sin(√5 t) + 0.895`.
pub fn concave_logistic() -> VectorFieldModel {
    build(
        Family::ConcaveLogisticMigration,
        vec![
            ("r", C::constant(1.0)),
            (
                "I",
                C::Sum {
                    terms: vec![C::sin(0.895, -1.0, 0.5), C::sin(0.0, -1.0, 5f64.sqrt())],
                },
            ),
        ],
    )
}

/// Logistic growth with Holling-II predation of strength `52 - 13γ`.
pub fn holling_predation() -> VectorFieldModel {
    build(
        Family::HollingPredationLinearGamma,
        vec![
            ("r", C::sin(2.0, 1.0, 1.0)),
            ("K", C::sin2(90.0, 18.0, 5f64.sqrt() / 2.0)),
        ],
    )
}

/// Cauchy pulse from 1.5 down to 0.8.
pub fn migration_pulse() -> Profile {
    Profile::CauchyPulse {
        gamma_plus: 1.5,
        gamma_star: 0.8,
        b: 0.02386,
    }
}

/// `(2/π) atan(t)`.
pub fn arctan_transition() -> Profile {
    Profile::ArctanRamp { scale: 2.0 / PI }
}

/// `-550 / (1000 + t²)`.
pub fn predation_dip() -> Profile {
    Profile::RationalDip {
        base: 0.0,
        depth: 550.0,
        offset: 1000.0,
        scale: 1.0,
    }
}

/// `v₋ / (1 + eᵗ) + v₊ / (1 + e⁻ᵗ)`.
pub fn sigmoid_blend(v_minus: f64, v_plus: f64) -> Profile {
    Profile::SigmoidBlend { v_minus, v_plus }
}

/// `20 - scale (atan(t/10)/π + 1/2)`.
pub fn reaction_rate_profile(scale: f64) -> RateProfile {
    RateProfile::new(Profile::ArctanStep {
        base: 20.0,
        drop: scale,
        width: 10.0,
    })
    .expect("positive rate")
}

/// `35 - 300 / (10 + t²)`, dipping below the critical rate.
pub fn no_return_rate_profile() -> RateProfile {
    RateProfile::new(Profile::RationalDip {
        base: 35.0,
        depth: 300.0,
        offset: 10.0,
        scale: 1.0,
    })
    .expect("positive rate")
}

/// `30 - 147 / (6 + 4t²)`.
pub fn safe_rate_profile() -> RateProfile {
    RateProfile::new(Profile::RationalDip {
        base: 30.0,
        depth: 147.0,
        offset: 6.0,
        scale: 4.0,
    })
    .expect("positive rate")
}
