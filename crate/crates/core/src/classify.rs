//! Case classification of transition equations and bisection for critical
//! rates, the concave bifurcation map `λ*` and the interval of tristability.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::attractors::{
    limit_hyperbolic_solutions, repulsive_band, transition_rhs, LimitStructure, Numerics, Role,
};
use crate::error::{Error, Result};
use crate::integrator::{integrate_endpoint, Status};
use crate::models::{AdditiveShift, Concavity, VectorField};
use crate::transitions::{MechanismKind, PhaseSign, Profile, TransitionMechanism};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    A,
    C,
    C1,
    C2,
    B,
    B1,
    B2,
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseLabel::A => "A",
            CaseLabel::C => "C",
            CaseLabel::C1 => "C1",
            CaseLabel::C2 => "C2",
            CaseLabel::B => "B",
            CaseLabel::B1 => "B1",
            CaseLabel::B2 => "B2",
            CaseLabel::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Numerical evidence behind a label.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub horizon: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    /// `max |Γᶜ(±T_h) − γ±|`.
    pub profile_residual: f64,
    pub track_tol: f64,
    pub upper_to_upper: Option<f64>,
    pub upper_to_lower: Option<f64>,
    pub lower_to_lower: Option<f64>,
    pub lower_to_upper: Option<f64>,
    pub middle_bounded: Option<bool>,
    pub middle_exit: Option<f64>,
    pub attractive_to_attractive: Option<f64>,
    pub forward_blow_up: Option<f64>,
    pub backward_blow_up: Option<f64>,
    pub sep_tol: f64,
    pub conv_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: CaseLabel,
    pub evidence: Evidence,
}

type CacheKey = (u64, u64);

/// Classifies transition equations of one model, caching limit structures by
/// `(γ, horizon)`.
pub struct Classifier<'m> {
    model: &'m dyn VectorField,
    pub numerics: Numerics,
    cache: Mutex<HashMap<CacheKey, Arc<LimitStructure>>>,
}

impl<'m> Classifier<'m> {
    pub fn new(model: &'m dyn VectorField, numerics: Numerics) -> Self {
        Self {
            model,
            numerics,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &'m dyn VectorField {
        self.model
    }

    /// Frozen structure at `γ` on `[−horizon, horizon]`.
    pub fn limit_structure(&self, gamma: f64, horizon: f64) -> Result<Arc<LimitStructure>> {
        let key = (gamma.to_bits(), horizon.to_bits());
        if let Some(s) = self.cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(limit_hyperbolic_solutions(
            self.model,
            gamma,
            (-horizon, horizon),
            &self.numerics,
        )?);
        Ok(self.cache.lock().unwrap().entry(key).or_insert(s).clone())
    }

    /// Horizon chosen by doubling until the parameter path settles.
    pub fn horizon_for(&self, mechanism: &TransitionMechanism) -> f64 {
        let n = &self.numerics;
        mechanism.settled_horizon(n.horizon, n.horizon_tol, n.horizon_cap.max(n.horizon))
    }

    pub fn classify(&self, mechanism: &TransitionMechanism) -> Result<Classification> {
        self.classify_at(mechanism, self.horizon_for(mechanism))
    }

    /// Classification at an explicit horizon.
    pub fn classify_at(&self, mechanism: &TransitionMechanism, horizon: f64) -> Result<Classification> {
        mechanism.check_model(self.model)?;
        let (gm, gp) = mechanism.limits();
        let past = self.limit_structure(gm, horizon)?;
        let future = self.limit_structure(gp, horizon)?;
        past.require_complete()?;
        future.require_complete()?;
        let residual = (mechanism.effective_parameter(-horizon) - gm)
            .abs()
            .max((mechanism.effective_parameter(horizon) - gp).abs());
        let num = &self.numerics;
        let mut ev = Evidence {
            horizon,
            gamma_minus: gm,
            gamma_plus: gp,
            profile_residual: residual,
            sep_tol: num.sep_tol,
            conv_tol: num.conv_tol,
            ..Default::default()
        };
        let rhs = transition_rhs(self.model, mechanism);
        let cfg = &num.integrator;
        let forward = |role: Role| -> Result<(f64, Status)> {
            let x0 = past.get(role).expect("complete structure").eval(-horizon)?;
            let (_, x, st) = integrate_endpoint(&rhs, -horizon, x0, horizon, None, cfg)?;
            Ok((x, st))
        };
        let backward = |role: Role| -> Result<(f64, Status)> {
            let x0 = future.get(role).expect("complete structure").eval(horizon)?;
            let band = repulsive_band(self.model, num);
            let (_, x, st) = integrate_endpoint(&rhs, horizon, x0, -horizon, band, cfg)?;
            Ok((x, st))
        };
        let at = |role: Role| future.get(role).expect("complete structure").eval(horizon);

        let label = match self.model.concavity() {
            Concavity::DConcave => {
                let (fu, fl) = (at(Role::Upper)?, at(Role::Lower)?);
                let tt = num.track_fraction * (fu - fl);
                ev.track_tol = tt;
                let (u, su) = forward(Role::Upper)?;
                let (l, sl) = forward(Role::Lower)?;
                let (_, sm) = backward(Role::Middle)?;
                ev.forward_blow_up = su.stop_time().or(sl.stop_time());
                ev.middle_bounded = Some(sm.is_completed());
                ev.middle_exit = sm.stop_time();
                if su.is_completed() {
                    ev.upper_to_upper = Some((u - fu).abs());
                    ev.upper_to_lower = Some((u - fl).abs());
                }
                if sl.is_completed() {
                    ev.lower_to_lower = Some((l - fl).abs());
                    ev.lower_to_upper = Some((l - fu).abs());
                }
                let within = |d: Option<f64>| d.is_some_and(|d| d < tt);
                if within(ev.upper_to_upper) && within(ev.lower_to_lower) && sm.is_completed() {
                    CaseLabel::A
                } else if within(ev.upper_to_lower) {
                    CaseLabel::C2
                } else if within(ev.lower_to_upper) {
                    CaseLabel::C1
                } else {
                    CaseLabel::Indeterminate
                }
            }
            Concavity::Concave => {
                let (fa, fr) = (at(Role::Attractive)?, at(Role::Repulsive)?);
                let tt = num.track_fraction * (fa - fr);
                ev.track_tol = tt;
                let (a, sa) = forward(Role::Attractive)?;
                let (_, sr) = backward(Role::Repulsive)?;
                ev.forward_blow_up = sa.stop_time();
                ev.backward_blow_up = sr.stop_time();
                if sa.is_completed() {
                    ev.attractive_to_attractive = Some((a - fa).abs());
                }
                let tracks = ev.attractive_to_attractive.is_some_and(|d| d < tt);
                if !sa.is_completed() || !sr.is_completed() {
                    CaseLabel::C
                } else if tracks {
                    CaseLabel::A
                } else {
                    CaseLabel::Indeterminate
                }
            }
        };
        Ok(Classification { label, evidence: ev })
    }

    /// Classification that retries once with a doubled horizon and errors if
    /// still indeterminate.
    pub fn classify_strict(&self, mechanism: &TransitionMechanism, parameter: f64) -> Result<Classification> {
        let h = self.horizon_for(mechanism);
        let first = self.classify_at(mechanism, h)?;
        if first.label != CaseLabel::Indeterminate {
            return Ok(first);
        }
        let second = self.classify_at(mechanism, 2.0 * h)?;
        if second.label != CaseLabel::Indeterminate {
            return Ok(second);
        }
        Err(Error::Indeterminate(parameter))
    }
}

/// Boundary label between two case labels.
pub fn boundary_between(a: CaseLabel, b: CaseLabel) -> CaseLabel {
    use CaseLabel::*;
    match (a, b) {
        (A, C2) | (C2, A) => B2,
        (A, C1) | (C1, A) => B1,
        (A, C) | (C, A) => B,
        _ => Indeterminate,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueResult {
    pub lo: f64,
    pub hi: f64,
    pub label_lo: CaseLabel,
    pub label_hi: CaseLabel,
    pub iterations: usize,
    pub width: f64,
    /// Boundary case located inside the bracket.
    pub boundary: CaseLabel,
}

impl CriticalValueResult {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bisection maintaining distinct labels at the bracket ends.
pub fn bisect<L, F>(mut lo: f64, mut hi: f64, tol: f64, mut label: F) -> Result<(f64, f64, L, L, usize)>
where
    L: PartialEq + Copy + fmt::Debug,
    F: FnMut(f64) -> Result<L>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "bracket".into(),
            reason: format!("need lo < hi and tol > 0, got [{lo}, {hi}], tol {tol}"),
        });
    }
    let mut l_lo = label(lo)?;
    let mut l_hi = label(hi)?;
    if l_lo == l_hi {
        return Err(Error::BracketNotStraddling(format!("{l_lo:?}")));
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let l = label(mid)?;
        if l == l_lo {
            lo = mid;
        } else {
            hi = mid;
            l_hi = l;
        }
        iterations += 1;
        let _ = &mut l_lo;
    }
    Ok((lo, hi, l_lo, l_hi, iterations))
}

/// Critical value of a one-parameter family of mechanisms.
pub fn critical_value<F>(
    classifier: &Classifier<'_>,
    family: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<CriticalValueResult>
where
    F: Fn(f64) -> Result<TransitionMechanism>,
{
    let (lo, hi, label_lo, label_hi, iterations) = bisect(lo, hi, tol, |c| {
        Ok(classifier.classify_strict(&family(c)?, c)?.label)
    })?;
    Ok(CriticalValueResult {
        lo,
        hi,
        label_lo,
        label_hi,
        iterations,
        width: hi - lo,
        boundary: boundary_between(label_lo, label_hi),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaStar {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Whether `x' = f + λ` under `mechanism` tracks. A missing or non-hyperbolic
/// limit structure counts as tipping.
pub fn shifted_tracks(
    model: &dyn VectorField,
    mechanism: &TransitionMechanism,
    lambda: f64,
    numerics: &Numerics,
) -> Result<bool> {
    let shifted = AdditiveShift { inner: model, lambda };
    let classifier = Classifier::new(&shifted, *numerics);
    match classifier.classify_strict(mechanism, lambda) {
        Ok(c) => Ok(c.label == CaseLabel::A),
        Err(Error::MissingLimitStructure { .. } | Error::NonConvergentBurnIn { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Critical additive shift `λ*(c, s)` for `Γ(c (t ∓ s))`; negative iff the
/// unshifted equation tracks.
#[allow(clippy::too_many_arguments)]
pub fn lambda_star(
    model: &dyn VectorField,
    profile: &Profile,
    c: f64,
    s: f64,
    sign: PhaseSign,
    bracket: (f64, f64),
    tol: f64,
    numerics: &Numerics,
) -> Result<LambdaStar> {
    if model.concavity() != Concavity::Concave {
        return Err(Error::InvalidParameter {
            name: "model".into(),
            reason: "the bifurcation map is defined for concave models".into(),
        });
    }
    let mech = TransitionMechanism::new(MechanismKind::Phase { c, offset: sign.factor() * s }, profile.clone())?;
    let tracks = |l: f64| shifted_tracks(model, &mech, l, numerics);
    let (mut lo, mut hi) = bracket;
    let mut expansions = 0;
    while !tracks(hi)? {
        let w = hi - lo;
        lo = hi;
        hi += 2.0 * w;
        expansions += 1;
        if expansions > 30 {
            return Err(Error::BracketExpansionCap);
        }
    }
    while tracks(lo)? {
        let w = hi - lo;
        hi = lo;
        lo -= 2.0 * w;
        expansions += 1;
        if expansions > 30 {
            return Err(Error::BracketExpansionCap);
        }
    }
    let (lo, hi, _, _, iterations) = bisect(lo, hi, tol, tracks)?;
    Ok(LambdaStar {
        value: 0.5 * (lo + hi),
        lo,
        hi,
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaBracket {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    /// Bracket of the left end `γ₁`, if it lies inside the scan range.
    pub lower: Option<GammaBracket>,
    /// Bracket of the right end `γ₂`, if it lies inside the scan range.
    pub upper: Option<GammaBracket>,
}

/// Whether the frozen equation at `γ` has three separated hyperbolic solutions.
/// A burn-in that fails to converge is read as a collision.
pub fn is_tristable(model: &dyn VectorField, gamma: f64, window: (f64, f64), numerics: &Numerics) -> Result<bool> {
    match limit_hyperbolic_solutions(model, gamma, window, numerics) {
        Ok(s) => Ok(s.estimates.len() == 3),
        Err(Error::NonConvergentBurnIn { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Ends of the tristability interval of a d-concave model, scanning `points`
/// values of `γ` in `range`.
pub fn gamma_interval(
    model: &dyn VectorField,
    range: (f64, f64),
    points: usize,
    tol: f64,
    window: (f64, f64),
    numerics: &Numerics,
) -> Result<GammaInterval> {
    let points = points.max(2);
    let grid: Vec<f64> = (0..points)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (points - 1) as f64)
        .collect();
    let flags = grid
        .iter()
        .map(|&g| is_tristable(model, g, window, numerics))
        .collect::<Result<Vec<_>>>()?;
    let first = flags.iter().position(|&f| f).ok_or(Error::NoBistableParameter)?;
    let last = flags.iter().rposition(|&f| f).expect("some flag is set");
    let pred = |g: f64| is_tristable(model, g, window, numerics);
    let lower = if first > 0 {
        let (lo, hi, _, _, iterations) = bisect(grid[first - 1], grid[first], tol, pred)?;
        Some(GammaBracket { lo, hi, iterations })
    } else {
        None
    };
    let upper = if last + 1 < grid.len() {
        let (lo, hi, _, _, iterations) = bisect(grid[last], grid[last + 1], tol, pred)?;
        Some(GammaBracket { lo, hi, iterations })
    } else {
        None
    };
    Ok(GammaInterval { lower, upper })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingReport {
    pub label: CaseLabel,
    /// Pullback attractive solution of the left path at `t0` (`−∞` after blow-up).
    pub attractive_at_t0: f64,
    /// Pullback repulsive solution of the right path at `t0` (`+∞` after blow-up).
    pub repulsive_at_t0: f64,
}

/// Compares the left path's pullback attractor with the right path's pullback
/// repeller at the switching time.
pub fn switching_classify(
    classifier: &Classifier<'_>,
    left: &TransitionMechanism,
    right: &TransitionMechanism,
    t0: f64,
) -> Result<SwitchingReport> {
    let model = classifier.model();
    let num = &classifier.numerics;
    let h = classifier.horizon_for(left).max(classifier.horizon_for(right));
    let past = classifier.limit_structure(left.limits().0, h)?;
    let future = classifier.limit_structure(right.limits().1, h)?;
    past.require_complete()?;
    future.require_complete()?;
    let a0 = past.top().expect("complete").eval(-h)?;
    let r0 = future.repeller().expect("complete").eval(h)?;
    let (_, a, sa) = integrate_endpoint(transition_rhs(model, left), -h, a0, t0, None, &num.integrator)?;
    let (_, r, sr) = integrate_endpoint(
        transition_rhs(model, right),
        h,
        r0,
        t0,
        repulsive_band(model, num),
        &num.integrator,
    )?;
    let a = if sa.is_completed() { a } else { f64::NEG_INFINITY };
    let r = if sr.is_completed() { r } else { f64::INFINITY * r.signum() };
    let label = if a > r + num.sep_tol {
        CaseLabel::A
    } else if a < r - num.sep_tol {
        match model.concavity() {
            Concavity::Concave => CaseLabel::C,
            Concavity::DConcave => CaseLabel::C2,
        }
    } else {
        match model.concavity() {
            Concavity::Concave => CaseLabel::B,
            Concavity::DConcave => CaseLabel::B2,
        }
    };
    Ok(SwitchingReport {
        label,
        attractive_at_t0: a,
        repulsive_at_t0: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_model, CoefficientFunction, Family};
    use crate::presets;
    use std::collections::BTreeMap;

    fn quadratic() -> crate::models::VectorFieldModel {
        let mut c = BTreeMap::new();
        c.insert("r".to_string(), CoefficientFunction::constant(1.0));
        c.insert("I".to_string(), CoefficientFunction::constant(0.0));
        make_model(Family::ConcaveLogisticMigration, &c).unwrap()
    }

    fn cubic() -> crate::models::VectorFieldModel {
        let mut c = BTreeMap::new();
        c.insert("r".to_string(), CoefficientFunction::constant(1.0));
        c.insert("K".to_string(), CoefficientFunction::constant(1.0));
        c.insert("S".to_string(), CoefficientFunction::constant(-1.0));
        c.insert("phi".to_string(), CoefficientFunction::constant(1.0));
        make_model(Family::AlleeMultiplicativeCubic, &c)
            .unwrap()
            .with_state_box(-2.0, 2.0)
            .unwrap()
    }

    fn fast() -> Numerics {
        Numerics {
            integrator: crate::integrator::IntegratorConfig {
                rtol: 1e-9,
                atol: 1e-11,
                ..Default::default()
            },
            horizon: 50.0,
            horizon_cap: 50.0,
            burn_in: 50.0,
            ..Default::default()
        }
    }

    #[test]
    fn bisection_keeps_labels() {
        let (lo, hi, a, b, it) = bisect(0.0, 1.0, 1e-6, |x| Ok(x > 0.3)).unwrap();
        assert!(lo <= 0.3 && hi > 0.3 && hi - lo <= 1e-6);
        assert!(!a && b);
        assert_eq!(it, 20);
        assert!(matches!(
            bisect(0.0, 1.0, 1e-3, |_| Ok(true)),
            Err(Error::BracketNotStraddling(_))
        ));
    }

    #[test]
    fn autonomous_quadratic_lambda_star_is_zero() {
        let m = quadratic();
        let p = Profile::Constant { value: 0.0 };
        let r = lambda_star(&m, &p, 1.0, 0.0, PhaseSign::Minus, (-0.5, 0.5), 1e-3, &fast()).unwrap();
        assert!(r.value.abs() < 2e-3, "λ* = {}", r.value);
    }

    #[test]
    fn cubic_gamma_interval() {
        let m = cubic();
        let num = fast();
        let r = gamma_interval(&m, (-1.0, 1.0), 9, 1e-3, (-20.0, 20.0), &num).unwrap();
        let g = 2.0 / (3.0 * 3f64.sqrt());
        let lower = r.lower.unwrap();
        let upper = r.upper.unwrap();
        assert!(lower.lo - 2e-3 <= -g && -g <= lower.hi + 2e-3, "{lower:?}");
        assert!(upper.lo - 2e-3 <= g && g <= upper.hi + 2e-3, "{upper:?}");
        assert!(is_tristable(&m, 0.0, (-20.0, 20.0), &num).unwrap());
        assert!(!is_tristable(&m, -g - 0.05, (-20.0, 20.0), &num).unwrap());
    }

    #[test]
    fn degenerate_switch_tracks() {
        let m = presets::concave_logistic();
        let num = fast();
        let cls = Classifier::new(&m, num);
        let mech = TransitionMechanism::constant_rate(Profile::Constant { value: 0.0 }, 1.0).unwrap();
        let rep = switching_classify(&cls, &mech, &mech, 0.0).unwrap();
        assert_eq!(rep.label, CaseLabel::A);
        assert!(rep.attractive_at_t0 > rep.repulsive_at_t0);
    }

    #[test]
    fn labels_render() {
        assert_eq!(CaseLabel::C2.to_string(), "C2");
        assert_eq!(boundary_between(CaseLabel::C2, CaseLabel::A), CaseLabel::B2);
        assert_eq!(boundary_between(CaseLabel::A, CaseLabel::C), CaseLabel::B);
    }
}
