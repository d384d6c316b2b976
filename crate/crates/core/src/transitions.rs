//! Transition profiles Γ, rate/phase profiles Δ and the mechanisms that turn
//! them into an effective parameter path `t ↦ Γᶜ(t)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{logistic_blend, VectorField};

/// Closed-form profiles with finite limits at `±∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Profile {
    /// `γ₊ + (γ* − γ₊) / (1 + b t²)`
    CauchyPulse {
        gamma_plus: f64,
        gamma_star: f64,
        b: f64,
    },
    /// `scale · atan(t)`
    ArctanRamp { scale: f64 },
    /// `v₋ / (1 + eᵗ) + v₊ / (1 + e⁻ᵗ)`
    SigmoidBlend { v_minus: f64, v_plus: f64 },
    /// `base − depth / (offset + scale t²)`
    RationalDip {
        base: f64,
        depth: f64,
        offset: f64,
        scale: f64,
    },
    /// `base − drop · (atan(t / width) / π + 1/2)`
    ArctanStep { base: f64, drop: f64, width: f64 },
    Constant { value: f64 },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::CauchyPulse {
                gamma_plus,
                gamma_star,
                b,
            } => gamma_plus + (gamma_star - gamma_plus) / (1.0 + b * t * t),
            Profile::ArctanRamp { scale } => scale * t.atan(),
            Profile::SigmoidBlend { v_minus, v_plus } => logistic_blend(v_minus, v_plus, t),
            Profile::RationalDip {
                base,
                depth,
                offset,
                scale,
            } => base - depth / (offset + scale * t * t),
            Profile::ArctanStep { base, drop, width } => {
                base - drop * ((t / width).atan() / PI + 0.5)
            }
            Profile::Constant { value } => value,
        }
    }

    /// `(lim_{t→−∞}, lim_{t→+∞})` in closed form.
    pub fn limits(&self) -> (f64, f64) {
        match *self {
            Profile::CauchyPulse { gamma_plus, .. } => (gamma_plus, gamma_plus),
            Profile::ArctanRamp { scale } => (-scale * PI / 2.0, scale * PI / 2.0),
            Profile::SigmoidBlend { v_minus, v_plus } => (v_minus, v_plus),
            Profile::RationalDip { base, .. } => (base, base),
            Profile::ArctanStep { base, drop, .. } => (base, base - drop),
            Profile::Constant { value } => (value, value),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParameter {
                name: name.into(),
                reason: reason.into(),
            })
        };
        match *self {
            Profile::CauchyPulse { b, .. } if !(b > 0.0) => bad("b", "pulse width b must be positive"),
            Profile::RationalDip { offset, scale, .. } if !(offset > 0.0 && scale >= 0.0) => {
                bad("offset", "rational dip needs offset > 0 and scale >= 0")
            }
            Profile::ArctanStep { width, .. } if !(width > 0.0) => bad("width", "must be positive"),
            _ => Ok(()),
        }
    }
}

/// Builds a transition profile after checking parameter signs.
pub fn make_profile(profile: Profile) -> Result<Profile> {
    profile.validate()?;
    Ok(profile)
}

/// A profile used as a (strictly positive) rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Profile", into = "Profile")]
pub struct RateProfile(Profile);

impl RateProfile {
    pub fn new(profile: Profile) -> Result<Self> {
        profile.validate()?;
        let (lo, hi) = profile.limits();
        let sampled = (-20_000..=20_000)
            .map(|i| profile.eval(i as f64 * 0.05))
            .fold(f64::INFINITY, f64::min);
        let inf = sampled.min(lo).min(hi);
        if !(inf > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rate profile".into(),
                reason: format!("must be strictly positive (infimum {inf})"),
            });
        }
        Ok(Self(profile))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    pub fn limits(&self) -> (f64, f64) {
        self.0.limits()
    }

    pub fn profile(&self) -> &Profile {
        &self.0
    }
}

impl TryFrom<Profile> for RateProfile {
    type Error = Error;
    fn try_from(p: Profile) -> Result<Self> {
        RateProfile::new(p)
    }
}

impl From<RateProfile> for Profile {
    fn from(r: RateProfile) -> Profile {
        r.0
    }
}

/// Sign convention of the time-dependent phase mechanism.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseSign {
    /// `Γ(c (t − Δ(d t)))`
    #[default]
    Minus,
    /// `Γ(c (t + Δ(d t)))`
    Plus,
}

impl PhaseSign {
    pub fn factor(self) -> f64 {
        match self {
            PhaseSign::Minus => -1.0,
            PhaseSign::Plus => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MechanismKind {
    /// `Γ(c t)`
    ConstantRate { c: f64 },
    /// `Γ(c (t + offset))`
    Phase { c: f64, offset: f64 },
    /// `c Γ(t)`
    Size { c: f64 },
    /// `Γ(Δ(d t) t)`
    TimeDependentRate { delta: RateProfile, d: f64 },
    /// `Γ(c (t ∓ Δ(d t)))`
    TimeDependentPhase {
        c: f64,
        delta: Profile,
        d: f64,
        #[serde(default)]
        sign: PhaseSign,
    },
    /// Left path for `t < t0`, right path for `t >= t0`.
    Switching {
        left: Box<MechanismKind>,
        right: Box<MechanismKind>,
        #[serde(default)]
        t0: f64,
    },
    /// `Γ((Δ(t) + r tanh(b (t − t1))) t)`
    Reaction {
        delta: RateProfile,
        r: f64,
        b: f64,
        t1: f64,
    },
}

impl MechanismKind {
    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        match self {
            MechanismKind::ConstantRate { c } => positive("c", *c),
            MechanismKind::Phase { c, .. } => positive("c", *c),
            MechanismKind::Size { .. } => Ok(()),
            MechanismKind::TimeDependentRate { d, .. } => positive("d", *d),
            MechanismKind::TimeDependentPhase { c, delta, d, .. } => {
                positive("c", *c)?;
                positive("d", *d)?;
                delta.validate()
            }
            MechanismKind::Switching { left, right, .. } => {
                left.validate()?;
                right.validate()
            }
            MechanismKind::Reaction { r, b, .. } => {
                positive("b", *b)?;
                if *r >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "r".into(),
                        reason: "reaction strength must be nonnegative".into(),
                    })
                }
            }
        }
    }

    fn eval(&self, profile: &Profile, t: f64) -> f64 {
        match self {
            MechanismKind::ConstantRate { c } => profile.eval(c * t),
            MechanismKind::Phase { c, offset } => profile.eval(c * (t + offset)),
            MechanismKind::Size { c } => c * profile.eval(t),
            MechanismKind::TimeDependentRate { delta, d } => profile.eval(delta.eval(d * t) * t),
            MechanismKind::TimeDependentPhase { c, delta, d, sign } => {
                profile.eval(c * (t + sign.factor() * delta.eval(d * t)))
            }
            MechanismKind::Switching { left, right, t0 } => {
                if t < *t0 {
                    left.eval(profile, t)
                } else {
                    right.eval(profile, t)
                }
            }
            MechanismKind::Reaction { delta, r, b, t1 } => {
                profile.eval((delta.eval(t) + r * (b * (t - t1)).tanh()) * t)
            }
        }
    }

    fn limits(&self, profile: &Profile) -> (f64, f64) {
        let (lo, hi) = profile.limits();
        // limit of Γ(s) as s → sign · ∞
        let at = |sign: f64| {
            if sign > 0.0 {
                hi
            } else if sign < 0.0 {
                lo
            } else {
                profile.eval(0.0)
            }
        };
        match self {
            MechanismKind::ConstantRate { c } | MechanismKind::Phase { c, .. } => {
                (at(-c), at(*c))
            }
            MechanismKind::Size { c } => (c * lo, c * hi),
            MechanismKind::TimeDependentRate { .. } => (lo, hi),
            MechanismKind::TimeDependentPhase { c, .. } => (at(-c), at(*c)),
            MechanismKind::Switching { left, right, .. } => {
                (left.limits(profile).0, right.limits(profile).1)
            }
            MechanismKind::Reaction { delta, r, .. } => {
                let (d_lo, d_hi) = delta.limits();
                (at(-(d_lo - r)), at(d_hi + r))
            }
        }
    }
}

/// A transition profile composed with a parameter-shift mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMechanism {
    pub kind: MechanismKind,
    pub profile: Profile,
}

impl TransitionMechanism {
    pub fn new(kind: MechanismKind, profile: Profile) -> Result<Self> {
        kind.validate()?;
        profile.validate()?;
        Ok(Self { kind, profile })
    }

    pub fn constant_rate(profile: Profile, c: f64) -> Result<Self> {
        Self::new(MechanismKind::ConstantRate { c }, profile)
    }

    /// Checks model compatibility: the size mechanism needs `f = h(t, x − γ)`.
    pub fn check_model(&self, model: &dyn VectorField) -> Result<()> {
        fn uses_size(k: &MechanismKind) -> bool {
            match k {
                MechanismKind::Size { .. } => true,
                MechanismKind::Switching { left, right, .. } => uses_size(left) || uses_size(right),
                _ => false,
            }
        }
        if uses_size(&self.kind) && !model.is_shift_form() {
            return Err(Error::SizeMechanismUnsupported);
        }
        Ok(())
    }

    pub fn effective_parameter(&self, t: f64) -> f64 {
        self.kind.eval(&self.profile, t)
    }

    /// Past and future parameter values `(γ₋, γ₊)`.
    pub fn limits(&self) -> (f64, f64) {
        self.kind.limits(&self.profile)
    }

    /// Smallest `start · 2ᵏ ≤ cap` at which the parameter path is within `tol`
    /// of both limits; `cap` if none is.
    pub fn settled_horizon(&self, start: f64, tol: f64, cap: f64) -> f64 {
        let (lo, hi) = self.limits();
        let mut h = start;
        while h < cap {
            let past = (self.effective_parameter(-h) - lo).abs();
            let future = (self.effective_parameter(h) - hi).abs();
            if past <= tol && future <= tol {
                return h;
            }
            h *= 2.0;
        }
        cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn cauchy_pulse_values() {
        let p = make_profile(presets::migration_pulse()).unwrap();
        assert_eq!(p.eval(0.0), 0.8);
        assert_eq!(p.limits(), (1.5, 1.5));
        assert!((p.eval(1e6) - 1.5).abs() < 1e-4);
        assert_eq!(p.eval(3.7), p.eval(-3.7));
        assert!(make_profile(Profile::CauchyPulse {
            gamma_plus: 1.5,
            gamma_star: 0.8,
            b: 0.0
        })
        .is_err());
    }

    #[test]
    fn sigmoid_blend_midpoint() {
        let p = Profile::SigmoidBlend {
            v_minus: 0.25,
            v_plus: 0.74,
        };
        assert!((p.eval(0.0) - 0.495).abs() < 1e-15);
        let r = RateProfile::new(p).unwrap();
        assert!((r.eval(1e6) - 0.74).abs() < 1e-6);
        assert!((r.eval(-1e6) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn arctan_ramp_limits() {
        let p = Profile::ArctanRamp { scale: 2.0 / PI };
        assert_eq!(p.eval(0.0), 0.0);
        let (lo, hi) = p.limits();
        assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        assert!((p.eval(1e6) - hi).abs() < 1e-6);
    }

    #[test]
    fn nonpositive_rate_rejected() {
        let p = Profile::RationalDip {
            base: 1.0,
            depth: 20.0,
            offset: 10.0,
            scale: 1.0,
        };
        assert!(RateProfile::new(p).is_err());
    }

    #[test]
    fn constant_rate_scales_time() {
        let m = TransitionMechanism::constant_rate(presets::migration_pulse(), 2.0).unwrap();
        assert_eq!(m.effective_parameter(3.0), m.profile.eval(6.0));
    }

    #[test]
    fn switching_picks_side() {
        let p = presets::arctan_transition();
        let sw = TransitionMechanism::new(
            MechanismKind::Switching {
                left: Box::new(MechanismKind::ConstantRate { c: 0.25 }),
                right: Box::new(MechanismKind::ConstantRate { c: 0.74 }),
                t0: 0.0,
            },
            p.clone(),
        )
        .unwrap();
        assert_eq!(sw.effective_parameter(-0.001), p.eval(0.25 * -0.001));
        assert_eq!(sw.effective_parameter(0.001), p.eval(0.74 * 0.001));
        let (lo, hi) = sw.limits();
        assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reaction_without_strength_is_time_dependent_rate() {
        let delta = presets::reaction_rate_profile(1.0);
        let p = presets::predation_dip();
        let react = TransitionMechanism::new(
            MechanismKind::Reaction {
                delta: delta.clone(),
                r: 0.0,
                b: 1.0,
                t1: 0.0,
            },
            p.clone(),
        )
        .unwrap();
        let tdr =
            TransitionMechanism::new(MechanismKind::TimeDependentRate { delta, d: 1.0 }, p).unwrap();
        for i in -50..50 {
            let t = i as f64 * 0.37;
            assert_eq!(react.effective_parameter(t), tdr.effective_parameter(t));
        }
    }

    #[test]
    fn constant_delta_matches_constant_rate() {
        let p = presets::migration_pulse();
        let c = 1.3;
        let tdr = TransitionMechanism::new(
            MechanismKind::TimeDependentRate {
                delta: RateProfile::new(Profile::Constant { value: c }).unwrap(),
                d: 0.7,
            },
            p.clone(),
        )
        .unwrap();
        let cr = TransitionMechanism::constant_rate(p, c).unwrap();
        for i in -40..40 {
            let t = i as f64 * 0.9;
            assert_eq!(tdr.effective_parameter(t), cr.effective_parameter(t));
        }
    }

    #[test]
    fn phase_reduction_with_constant_delta() {
        let p = presets::arctan_transition();
        let s = 2.5;
        for sign in [PhaseSign::Minus, PhaseSign::Plus] {
            let tdp = TransitionMechanism::new(
                MechanismKind::TimeDependentPhase {
                    c: 1.0,
                    delta: Profile::Constant { value: s },
                    d: 1.0,
                    sign,
                },
                p.clone(),
            )
            .unwrap();
            let offset = match sign {
                PhaseSign::Minus => -s,
                PhaseSign::Plus => s,
            };
            let ph =
                TransitionMechanism::new(MechanismKind::Phase { c: 1.0, offset }, p.clone()).unwrap();
            for i in -30..30 {
                let t = i as f64 * 0.41;
                assert!((tdp.effective_parameter(t) - ph.effective_parameter(t)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn size_needs_shift_form() {
        let m = TransitionMechanism::new(
            MechanismKind::Size { c: 2.0 },
            presets::arctan_transition(),
        )
        .unwrap();
        assert!(m.check_model(&presets::concave_logistic()).is_ok());
        assert_eq!(
            m.check_model(&presets::allee_migration()),
            Err(Error::SizeMechanismUnsupported)
        );
        assert_eq!(m.effective_parameter(1.0), 2.0 * (1.0f64).atan() * 2.0 / PI);
    }

    #[test]
    fn settled_horizon_doubles() {
        let m = TransitionMechanism::constant_rate(presets::migration_pulse(), 1.0).unwrap();
        let h = m.settled_horizon(400.0, 1e-6, 1e6);
        assert_eq!(h, 6400.0);
        let h = m.settled_horizon(400.0, 1e-6, 1000.0);
        assert_eq!(h, 1000.0);
    }

    #[test]
    fn mechanism_json_shape() {
        let m = TransitionMechanism::constant_rate(presets::migration_pulse(), 1.01).unwrap();
        let json = serde_json_like(&m);
        assert!(json.contains("constant-rate"));
    }

    fn serde_json_like(m: &TransitionMechanism) -> String {
        format!("{:?}", serde_kind_name(&m.kind))
    }

    fn serde_kind_name(k: &MechanismKind) -> &'static str {
        match k {
            MechanismKind::ConstantRate { .. } => "constant-rate",
            _ => "other",
        }
    }
}
