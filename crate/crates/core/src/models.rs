//! Catalog of concave and d-concave population vector fields `f(t, x, γ)`.
//!
//! Every catalog family evaluates `f` and `f_x` in closed form; d-concave
//! families also provide `f_xx`. Time dependence enters only through
//! [`CoefficientFunction`]s, which form a closed set of bounded closed forms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded closed-form functions of time used as model coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum CoefficientFunction {
    Constant {
        value: f64,
    },
    /// `base + amplitude * sin(frequency * t + phase)`
    Sin {
        base: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `base + amplitude * sin²(frequency * t)`
    Sin2 {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// `base - depth / (offset + scale * t²)`
    RationalDip {
        base: f64,
        depth: f64,
        offset: f64,
        scale: f64,
    },
    /// `base + amplitude * atan(scale * t)`
    ArctanRamp {
        base: f64,
        amplitude: f64,
        scale: f64,
    },
    /// `lower / (1 + e^{k t}) + upper / (1 + e^{-k t})`
    Sigmoid {
        lower: f64,
        upper: f64,
        steepness: f64,
    },
    Sum {
        terms: Vec<CoefficientFunction>,
    },
}

impl CoefficientFunction {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn sin(base: f64, amplitude: f64, frequency: f64) -> Self {
        Self::Sin {
            base,
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn sin2(base: f64, amplitude: f64, frequency: f64) -> Self {
        Self::Sin2 {
            base,
            amplitude,
            frequency,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Sin {
                base,
                amplitude,
                frequency,
                phase,
            } => base + amplitude * (frequency * t + phase).sin(),
            Self::Sin2 {
                base,
                amplitude,
                frequency,
            } => {
                let s = (frequency * t).sin();
                base + amplitude * s * s
            }
            Self::RationalDip {
                base,
                depth,
                offset,
                scale,
            } => base - depth / (offset + scale * t * t),
            Self::ArctanRamp {
                base,
                amplitude,
                scale,
            } => base + amplitude * (scale * t).atan(),
            Self::Sigmoid {
                lower,
                upper,
                steepness,
            } => logistic_blend(*lower, *upper, steepness * t),
            Self::Sum { terms } => terms.iter().map(|c| c.eval(t)).sum(),
        }
    }

    /// Minimum over a uniform grid of `[0, 10⁴]`.
    pub fn sampled_min(&self) -> f64 {
        const SPAN: f64 = 1.0e4;
        const N: usize = 200_000;
        (0..=N)
            .map(|i| self.eval(SPAN * i as f64 / N as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn logistic_blend(lower: f64, upper: f64, s: f64) -> f64 {
    lower / (1.0 + s.exp()) + upper / (1.0 + (-s).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Concavity {
    Concave,
    DConcave,
}

/// A scalar right-hand side `f(t, x, γ)` with analytic x-derivatives.
///
/// `f` and `fx` return NaN outside the domain of the field (for example at or
/// beyond a pole); the checked `eval_*` methods turn that into [`Error::Domain`].
pub trait VectorField: Send + Sync {
    fn f(&self, t: f64, x: f64, gamma: f64) -> f64;
    fn fx(&self, t: f64, x: f64, gamma: f64) -> f64;
    fn fxx(&self, _t: f64, _x: f64, _gamma: f64) -> Option<f64> {
        None
    }
    fn concavity(&self) -> Concavity;
    /// Box of states containing the bounded dynamics of interest.
    fn state_box(&self) -> (f64, f64);
    /// Lower edge of the domain of definition at time `t`.
    fn lower_domain(&self, _t: f64) -> f64 {
        f64::NEG_INFINITY
    }
    /// True when `f(t, x, γ) = h(t, x - γ)`.
    fn is_shift_form(&self) -> bool {
        false
    }

    fn eval_f(&self, t: f64, x: f64, gamma: f64) -> Result<f64> {
        checked(self.f(t, x, gamma), t, x)
    }

    fn eval_fx(&self, t: f64, x: f64, gamma: f64) -> Result<f64> {
        checked(self.fx(t, x, gamma), t, x)
    }

    fn eval_fxx(&self, t: f64, x: f64, gamma: f64) -> Result<f64> {
        match self.fxx(t, x, gamma) {
            Some(v) => checked(v, t, x),
            None => Err(Error::Unavailable),
        }
    }
}

fn checked(v: f64, t: f64, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain { t, x })
    }
}

/// `f(t, x, γ) + λ`, the additive perturbation used by the concave bifurcation map.
pub struct AdditiveShift<'a> {
    pub inner: &'a dyn VectorField,
    pub lambda: f64,
}

impl VectorField for AdditiveShift<'_> {
    fn f(&self, t: f64, x: f64, gamma: f64) -> f64 {
        self.inner.f(t, x, gamma) + self.lambda
    }
    fn fx(&self, t: f64, x: f64, gamma: f64) -> f64 {
        self.inner.fx(t, x, gamma)
    }
    fn fxx(&self, t: f64, x: f64, gamma: f64) -> Option<f64> {
        self.inner.fxx(t, x, gamma)
    }
    fn concavity(&self) -> Concavity {
        self.inner.concavity()
    }
    fn state_box(&self) -> (f64, f64) {
        self.inner.state_box()
    }
    fn lower_domain(&self, t: f64) -> f64 {
        self.inner.lower_domain(t)
    }
    fn is_shift_form(&self) -> bool {
        self.inner.is_shift_form()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `-r(t) (x - γ)² + I(t)`
    ConcaveLogisticMigration,
    /// `-r(t) x log(x / K(t)) + γ φ(t)`
    Gompertz,
    /// `x ((1 + r(t)) / (1 + α(t) x) - 1) + γ φ(t)`
    BevertonHolt,
    /// `r(t) x (1 - x/K(t)) (x - S(t)) / K(t) + γ φ(t)`
    AlleeMultiplicativeCubic,
    /// `r(t) x (1 - x/K(t)) (x - μ(t)) / (ν(t) + x) + γ φ(t)`
    AlleeMultiplicativeRational,
    /// `r(t) x (1 - x/K(t)) - a(t) x / (x + b(t)) + γ φ(t)`
    AlleeHolling2,
    /// `r(t) x (1 - x/K(t)) - (a0 - a1 γ) x / (x + b)`
    #[serde(rename = "holling-predation-linear-gamma", alias = "holling-predation-linear-γ")]
    HollingPredationLinearGamma,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::ConcaveLogisticMigration,
        Family::Gompertz,
        Family::BevertonHolt,
        Family::AlleeMultiplicativeCubic,
        Family::AlleeMultiplicativeRational,
        Family::AlleeHolling2,
        Family::HollingPredationLinearGamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::ConcaveLogisticMigration => "concave-logistic-migration",
            Family::Gompertz => "gompertz",
            Family::BevertonHolt => "beverton-holt",
            Family::AlleeMultiplicativeCubic => "allee-multiplicative-cubic",
            Family::AlleeMultiplicativeRational => "allee-multiplicative-rational",
            Family::AlleeHolling2 => "allee-holling2",
            Family::HollingPredationLinearGamma => "holling-predation-linear-gamma",
        }
    }

    pub fn concavity(self) -> Concavity {
        match self {
            Family::ConcaveLogisticMigration | Family::Gompertz | Family::BevertonHolt => {
                Concavity::Concave
            }
            _ => Concavity::DConcave,
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Family::ConcaveLogisticMigration => &["r", "I"],
            Family::Gompertz => &["r", "K"],
            Family::BevertonHolt => &["r", "alpha"],
            Family::AlleeMultiplicativeCubic => &["r", "K", "S"],
            Family::AlleeMultiplicativeRational => &["r", "K", "mu", "nu"],
            Family::AlleeHolling2 => &["r", "K", "a", "b"],
            Family::HollingPredationLinearGamma => &["r", "K"],
        }
    }

    fn default_state_box(self) -> (f64, f64) {
        match self {
            Family::ConcaveLogisticMigration => (-5.0, 5.0),
            Family::Gompertz => (0.1, 100.0),
            Family::BevertonHolt => (0.0, 100.0),
            Family::AlleeMultiplicativeCubic => (-2.0, 100.0),
            Family::AlleeMultiplicativeRational => (0.0, 90.0),
            Family::AlleeHolling2 => (0.0, 120.0),
            Family::HollingPredationLinearGamma => (0.0, 120.0),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('γ', "gamma");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or(Error::UnknownFamily(s))
    }
}

#[derive(Clone, Debug)]
enum Field {
    Logistic {
        r: CoefficientFunction,
        i: CoefficientFunction,
    },
    Gompertz {
        r: CoefficientFunction,
        k: CoefficientFunction,
        phi: CoefficientFunction,
    },
    BevertonHolt {
        r: CoefficientFunction,
        alpha: CoefficientFunction,
        phi: CoefficientFunction,
    },
    AlleeCubic {
        r: CoefficientFunction,
        k: CoefficientFunction,
        s: CoefficientFunction,
        phi: CoefficientFunction,
    },
    AlleeRational {
        r: CoefficientFunction,
        k: CoefficientFunction,
        mu: CoefficientFunction,
        nu: CoefficientFunction,
        phi: CoefficientFunction,
    },
    AlleeHolling2 {
        r: CoefficientFunction,
        k: CoefficientFunction,
        a: CoefficientFunction,
        b: CoefficientFunction,
        phi: CoefficientFunction,
    },
    HollingLinear {
        r: CoefficientFunction,
        k: CoefficientFunction,
        a0: f64,
        a1: f64,
        b: CoefficientFunction,
    },
}

/// A catalog vector field with its coefficients resolved.
#[derive(Clone, Debug)]
pub struct VectorFieldModel {
    family: Family,
    coefficients: BTreeMap<String, CoefficientFunction>,
    field: Field,
    state_box: (f64, f64),
}

impl VectorFieldModel {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn coefficients(&self) -> &BTreeMap<String, CoefficientFunction> {
        &self.coefficients
    }

    pub fn with_state_box(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter {
                name: "state_box".into(),
                reason: format!("empty box [{lo}, {hi}]"),
            });
        }
        self.state_box = (lo, hi);
        Ok(self)
    }
}

/// Builds a catalog model, checking that required coefficients are present and
/// that coefficients the family treats as positive are sampled positive.
pub fn make_model(
    family: Family,
    coefficients: &BTreeMap<String, CoefficientFunction>,
) -> Result<VectorFieldModel> {
    for name in family.required() {
        if !coefficients.contains_key(*name) {
            return Err(Error::MissingCoefficient {
                family: family.name().into(),
                name: (*name).into(),
            });
        }
    }
    let get = |name: &str| coefficients[name].clone();
    let phi = || {
        coefficients
            .get("phi")
            .cloned()
            .unwrap_or(CoefficientFunction::constant(1.0))
    };
    let scalar = |name: &str, default: f64| -> Result<f64> {
        match coefficients.get(name) {
            None => Ok(default),
            Some(CoefficientFunction::Constant { value }) => Ok(*value),
            Some(_) => Err(Error::InvalidParameter {
                name: name.into(),
                reason: "must be a constant".into(),
            }),
        }
    };

    let mut positive: Vec<(&str, CoefficientFunction)> = Vec::new();
    let field = match family {
        Family::ConcaveLogisticMigration => {
            positive.push(("r", get("r")));
            Field::Logistic {
                r: get("r"),
                i: get("I"),
            }
        }
        Family::Gompertz => {
            positive.extend([("r", get("r")), ("K", get("K")), ("phi", phi())]);
            Field::Gompertz {
                r: get("r"),
                k: get("K"),
                phi: phi(),
            }
        }
        Family::BevertonHolt => {
            positive.extend([("r", get("r")), ("alpha", get("alpha")), ("phi", phi())]);
            Field::BevertonHolt {
                r: get("r"),
                alpha: get("alpha"),
                phi: phi(),
            }
        }
        Family::AlleeMultiplicativeCubic => {
            let k_plus_s = CoefficientFunction::Sum {
                terms: vec![get("K"), get("S")],
            };
            // K + S may vanish, so shift by a hair to test K + S >= 0.
            let k_plus_s_nonneg = CoefficientFunction::Sum {
                terms: vec![k_plus_s, CoefficientFunction::constant(1e-12)],
            };
            positive.extend([
                ("r", get("r")),
                ("K", get("K")),
                ("K+S", k_plus_s_nonneg),
                ("phi", phi()),
            ]);
            Field::AlleeCubic {
                r: get("r"),
                k: get("K"),
                s: get("S"),
                phi: phi(),
            }
        }
        Family::AlleeMultiplicativeRational => {
            positive.extend([
                ("r", get("r")),
                ("K", get("K")),
                ("nu", get("nu")),
                (
                    "nu+mu",
                    CoefficientFunction::Sum {
                        terms: vec![get("nu"), get("mu")],
                    },
                ),
                ("phi", phi()),
            ]);
            Field::AlleeRational {
                r: get("r"),
                k: get("K"),
                mu: get("mu"),
                nu: get("nu"),
                phi: phi(),
            }
        }
        Family::AlleeHolling2 => {
            positive.extend([
                ("r", get("r")),
                ("K", get("K")),
                ("a", get("a")),
                ("b", get("b")),
                ("phi", phi()),
            ]);
            Field::AlleeHolling2 {
                r: get("r"),
                k: get("K"),
                a: get("a"),
                b: get("b"),
                phi: phi(),
            }
        }
        Family::HollingPredationLinearGamma => {
            let b = coefficients
                .get("b")
                .cloned()
                .unwrap_or(CoefficientFunction::constant(10.0));
            positive.extend([("r", get("r")), ("K", get("K")), ("b", b.clone())]);
            Field::HollingLinear {
                r: get("r"),
                k: get("K"),
                a0: scalar("a0", 52.0)?,
                a1: scalar("a1", 13.0)?,
                b,
            }
        }
    };

    for (name, c) in positive {
        let min = c.sampled_min();
        if !(min > 0.0) {
            return Err(Error::PositivityViolation {
                name: name.into(),
                min,
            });
        }
    }

    Ok(VectorFieldModel {
        family,
        coefficients: coefficients.clone(),
        field,
        state_box: family.default_state_box(),
    })
}

/// `p(x) / (x + ν)` for `p(x) = x (1 - x/K) (x - μ)`, split as
/// `a x² + b x + c + rem / (x + ν)`.
#[inline]
fn rational_allee_parts(k: f64, mu: f64, nu: f64) -> (f64, f64, f64, f64) {
    let a = -1.0 / k;
    let b = 1.0 + mu / k + nu / k;
    let c = -mu - b * nu;
    (a, b, c, -c * nu)
}

impl VectorField for VectorFieldModel {
    fn f(&self, t: f64, x: f64, gamma: f64) -> f64 {
        match &self.field {
            Field::Logistic { r, i } => {
                let y = x - gamma;
                -r.eval(t) * y * y + i.eval(t)
            }
            Field::Gompertz { r, k, phi } => -r.eval(t) * x * (x / k.eval(t)).ln() + gamma * phi.eval(t),
            Field::BevertonHolt { r, alpha, phi } => {
                let q = 1.0 + alpha.eval(t) * x;
                if q <= 0.0 {
                    return f64::NAN;
                }
                x * ((1.0 + r.eval(t)) / q - 1.0) + gamma * phi.eval(t)
            }
            Field::AlleeCubic { r, k, s, phi } => {
                let k = k.eval(t);
                r.eval(t) * x * (1.0 - x / k) * (x - s.eval(t)) / k + gamma * phi.eval(t)
            }
            Field::AlleeRational { r, k, mu, nu, phi } => {
                let nu = nu.eval(t);
                if x <= -nu {
                    return f64::NAN;
                }
                let (a, b, c, rem) = rational_allee_parts(k.eval(t), mu.eval(t), nu);
                r.eval(t) * ((a * x + b) * x + c + rem / (x + nu)) + gamma * phi.eval(t)
            }
            Field::AlleeHolling2 { r, k, a, b, phi } => {
                let q = x + b.eval(t);
                if q <= 0.0 {
                    return f64::NAN;
                }
                r.eval(t) * x * (1.0 - x / k.eval(t)) - a.eval(t) * x / q + gamma * phi.eval(t)
            }
            Field::HollingLinear { r, k, a0, a1, b } => {
                let q = x + b.eval(t);
                if q <= 0.0 {
                    return f64::NAN;
                }
                r.eval(t) * x * (1.0 - x / k.eval(t)) - (a0 - a1 * gamma) * x / q
            }
        }
    }

    fn fx(&self, t: f64, x: f64, gamma: f64) -> f64 {
        match &self.field {
            Field::Logistic { r, .. } => -2.0 * r.eval(t) * (x - gamma),
            Field::Gompertz { r, k, .. } => -r.eval(t) * ((x / k.eval(t)).ln() + 1.0),
            Field::BevertonHolt { r, alpha, .. } => {
                let q = 1.0 + alpha.eval(t) * x;
                if q <= 0.0 {
                    return f64::NAN;
                }
                (1.0 + r.eval(t)) / (q * q) - 1.0
            }
            Field::AlleeCubic { r, k, s, .. } => {
                let k = k.eval(t);
                let s = s.eval(t);
                r.eval(t) / k * (-3.0 * x * x / k + 2.0 * x * (1.0 + s / k) - s)
            }
            Field::AlleeRational { r, k, mu, nu, .. } => {
                let nu = nu.eval(t);
                let (a, b, _, rem) = rational_allee_parts(k.eval(t), mu.eval(t), nu);
                let q = x + nu;
                if q <= 0.0 {
                    return f64::NAN;
                }
                r.eval(t) * (2.0 * a * x + b - rem / (q * q))
            }
            Field::AlleeHolling2 { r, k, a, b, .. } => {
                let r = r.eval(t);
                let b = b.eval(t);
                let q = x + b;
                if q <= 0.0 {
                    return f64::NAN;
                }
                r - 2.0 * r * x / k.eval(t) - a.eval(t) * b / (q * q)
            }
            Field::HollingLinear { r, k, a0, a1, b } => {
                let r = r.eval(t);
                let b = b.eval(t);
                let q = x + b;
                if q <= 0.0 {
                    return f64::NAN;
                }
                r - 2.0 * r * x / k.eval(t) - (a0 - a1 * gamma) * b / (q * q)
            }
        }
    }

    fn fxx(&self, t: f64, x: f64, gamma: f64) -> Option<f64> {
        match &self.field {
            Field::Logistic { .. } | Field::Gompertz { .. } | Field::BevertonHolt { .. } => None,
            Field::AlleeCubic { r, k, s, .. } => {
                let k = k.eval(t);
                Some(r.eval(t) / k * (-6.0 * x / k + 2.0 * (1.0 + s.eval(t) / k)))
            }
            Field::AlleeRational { r, k, mu, nu, .. } => {
                let nu = nu.eval(t);
                let (a, _, _, rem) = rational_allee_parts(k.eval(t), mu.eval(t), nu);
                let q = x + nu;
                if q <= 0.0 {
                    return Some(f64::NAN);
                }
                Some(r.eval(t) * (2.0 * a + 2.0 * rem / (q * q * q)))
            }
            Field::AlleeHolling2 { r, k, a, b, .. } => {
                let r = r.eval(t);
                let b = b.eval(t);
                let q = x + b;
                if q <= 0.0 {
                    return Some(f64::NAN);
                }
                Some(-2.0 * r / k.eval(t) + 2.0 * a.eval(t) * b / (q * q * q))
            }
            Field::HollingLinear { r, k, a0, a1, b } => {
                let r = r.eval(t);
                let b = b.eval(t);
                let q = x + b;
                if q <= 0.0 {
                    return Some(f64::NAN);
                }
                Some(-2.0 * r / k.eval(t) + 2.0 * (a0 - a1 * gamma) * b / (q * q * q))
            }
        }
    }

    fn concavity(&self) -> Concavity {
        self.family.concavity()
    }

    fn state_box(&self) -> (f64, f64) {
        self.state_box
    }

    fn lower_domain(&self, t: f64) -> f64 {
        match &self.field {
            Field::Gompertz { .. } => 0.0,
            Field::BevertonHolt { alpha, .. } => -1.0 / alpha.eval(t),
            Field::AlleeRational { nu, .. } => -nu.eval(t),
            Field::AlleeHolling2 { b, .. } | Field::HollingLinear { b, .. } => -b.eval(t),
            _ => f64::NEG_INFINITY,
        }
    }

    fn is_shift_form(&self) -> bool {
        matches!(self.field, Field::Logistic { .. })
    }
}

/// Outcome of a sampled concavity (or d-concavity) check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub concavity: Concavity,
    pub min_second_difference: f64,
    pub max_second_difference: f64,
    /// `-max_second_difference`; the check passes iff this is positive.
    pub delta: f64,
    pub pass: bool,
}

/// Samples the second difference quotient of `f` (concave) or of `f_x`
/// (d-concave) in `x` over `state_box × {t_0..t_{n-1}}` with `t` spread over `[0, 100]`.
pub fn check_concavity_class(
    model: &dyn VectorField,
    state_box: (f64, f64),
    t_samples: usize,
    gamma: f64,
) -> ConcavityReport {
    const X_SAMPLES: usize = 200;
    let (lo, hi) = state_box;
    let h = (hi - lo) / 1000.0;
    let concavity = model.concavity();
    let g = |t: f64, x: f64| match concavity {
        Concavity::Concave => model.f(t, x, gamma),
        Concavity::DConcave => model.fx(t, x, gamma),
    };
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let nt = t_samples.max(1);
    for it in 0..nt {
        let t = 100.0 * it as f64 / nt as f64;
        for ix in 0..=X_SAMPLES {
            let x = (lo + h) + (hi - lo - 2.0 * h) * ix as f64 / X_SAMPLES as f64;
            let d2 = (g(t, x + h) - 2.0 * g(t, x) + g(t, x - h)) / (h * h);
            if d2.is_nan() {
                // outside the domain counts as a failure
                max = f64::INFINITY;
                continue;
            }
            min = min.min(d2);
            max = max.max(d2);
        }
    }
    ConcavityReport {
        concavity,
        min_second_difference: min,
        max_second_difference: max,
        delta: -max,
        pass: max < 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn coeffs(pairs: &[(&str, CoefficientFunction)]) -> BTreeMap<String, CoefficientFunction> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn logistic_vertex_returns_migration() {
        let m = presets::concave_logistic();
        for &t in &[-3.0, 0.0, 1.7, 40.0] {
            for &g in &[-1.0, 0.3, 2.0] {
                let i = -(t / 2.0_f64).sin() - (5.0_f64.sqrt() * t).sin() + 0.895;
                assert_eq!(m.eval_f(t, g, g).unwrap(), i);
            }
        }
    }

    #[test]
    fn holling_vanishes_at_zero() {
        let m = presets::holling_predation();
        for &t in &[-10.0, 0.0, 3.3] {
            for &g in &[-0.55, 0.0, 1.0] {
                assert_eq!(m.eval_f(t, 0.0, g).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn allee_golden_value() {
        // R(0, 10) + 1.5 φ(0) with r=1.5, K=40, μ=30, ν=40, φ=0.75:
        // 1.5 * 10 * 0.75 * (-20) / 50 + 1.125 = -4.5 + 1.125
        let m = presets::allee_migration();
        let v = m.eval_f(0.0, 10.0, 1.5).unwrap();
        assert!((v - (-3.375)).abs() < 1e-13, "{v}");
    }

    #[test]
    fn rational_allee_pole_is_domain_error() {
        let m = presets::allee_migration();
        assert!(matches!(m.eval_f(0.0, -40.0, 1.5), Err(Error::Domain { .. })));
        assert!(matches!(m.eval_fx(0.0, -41.0, 1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn fxx_unavailable_for_concave() {
        let m = presets::concave_logistic();
        assert_eq!(m.eval_fxx(0.0, 1.0, 0.0), Err(Error::Unavailable));
        assert!(presets::allee_migration().eval_fxx(0.0, 10.0, 1.5).is_ok());
    }

    #[test]
    fn unknown_family_and_missing_coefficient() {
        assert!(matches!("lotka".parse::<Family>(), Err(Error::UnknownFamily(_))));
        assert_eq!(
            "holling-predation-linear-γ".parse::<Family>().unwrap(),
            Family::HollingPredationLinearGamma
        );
        let c = coeffs(&[("r", CoefficientFunction::constant(1.0))]);
        assert!(matches!(
            make_model(Family::ConcaveLogisticMigration, &c),
            Err(Error::MissingCoefficient { .. })
        ));
    }

    #[test]
    fn positivity_violation_detected() {
        let c = coeffs(&[
            ("r", CoefficientFunction::sin(0.5, 1.0, 1.0)),
            ("K", CoefficientFunction::constant(10.0)),
        ]);
        assert!(matches!(
            make_model(Family::Gompertz, &c),
            Err(Error::PositivityViolation { .. })
        ));
    }

    #[test]
    fn concavity_reports() {
        let m = presets::concave_logistic();
        let rep = check_concavity_class(&m, (-50.0, 50.0), 10, 0.0);
        assert!(rep.pass);
        assert!((rep.delta - 2.0).abs() < 1e-6, "{rep:?}");

        let c = coeffs(&[
            ("r", CoefficientFunction::constant(1.0)),
            ("K", CoefficientFunction::constant(50.0)),
        ]);
        let gompertz = make_model(Family::Gompertz, &c).unwrap();
        assert!(check_concavity_class(&gompertz, (0.1, 100.0), 10, 0.0).pass);

        let allee = presets::allee_migration();
        assert!(check_concavity_class(&allee, (-5.0, 100.0), 20, 1.5).pass);
        let holling = presets::holling_predation();
        assert!(check_concavity_class(&holling, (-5.0, 120.0), 20, 0.0).pass);
    }

    struct Convex;
    impl VectorField for Convex {
        fn f(&self, _t: f64, x: f64, _g: f64) -> f64 {
            x * x
        }
        fn fx(&self, _t: f64, x: f64, _g: f64) -> f64 {
            2.0 * x
        }
        fn concavity(&self) -> Concavity {
            Concavity::Concave
        }
        fn state_box(&self) -> (f64, f64) {
            (-1.0, 1.0)
        }
    }

    #[test]
    fn convex_field_fails() {
        assert!(!check_concavity_class(&Convex, (-1.0, 1.0), 3, 0.0).pass);
    }

    #[test]
    fn coefficient_closed_forms_at_checkpoints() {
        let c = CoefficientFunction::sin2(1.5, 1.0, 0.25);
        // sin²(π/2) = 1 at t = 2π
        assert!((c.eval(2.0 * std::f64::consts::PI) - 2.5).abs() < 1e-15);
        assert_eq!(c.eval(0.0), 1.5);
        let s = CoefficientFunction::Sigmoid {
            lower: 0.25,
            upper: 0.74,
            steepness: 1.0,
        };
        assert!((s.eval(0.0) - 0.495).abs() < 1e-15);
        assert!((s.eval(800.0) - 0.74).abs() < 1e-15);
        assert!((s.eval(-800.0) - 0.25).abs() < 1e-15);
    }
}
