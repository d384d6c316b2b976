//! Hyperbolic solutions of frozen (limit) equations, pullback solutions of
//! transition equations and Lyapunov exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{
    integrate, integrate_endpoint, integrate_in_band, Cumulative, IntegratorConfig, Status, Trajectory,
};
use crate::models::{Concavity, VectorField};
use crate::transitions::TransitionMechanism;

/// Numerical tolerances shared by attractor, classification and EWS routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Numerics {
    pub integrator: IntegratorConfig,
    /// Initial horizon `T_h`.
    pub horizon: f64,
    /// Largest horizon reached by doubling.
    pub horizon_cap: f64,
    /// Distance of `Γᶜ(±T_h)` to `γ±` that stops horizon doubling.
    pub horizon_tol: f64,
    pub burn_in: f64,
    pub burn_in_cap: f64,
    pub conv_tol: f64,
    /// Relative gap accepted once doubling the burn-in no longer shrinks it.
    pub noise_tol: f64,
    pub sep_tol: f64,
    /// Tracking tolerance as a fraction of the future attractor separation.
    pub track_fraction: f64,
    pub anchor_delta: f64,
    /// Margin around the state box outside which a repulsive solution is unbounded.
    pub band_margin: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            horizon: 400.0,
            horizon_cap: 6400.0,
            horizon_tol: 1e-6,
            burn_in: 200.0,
            burn_in_cap: 6400.0,
            conv_tol: 1e-8,
            noise_tol: 1e-6,
            sep_tol: 1e-3,
            track_fraction: 1e-3,
            anchor_delta: 1e-4,
            band_margin: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Upper,
    Lower,
    Middle,
    Attractive,
    Repulsive,
}

#[derive(Clone, Debug)]
pub struct HyperbolicEstimate {
    pub role: Role,
    pub gamma: f64,
    pub trajectory: Trajectory,
    pub burn_in: f64,
    /// Sup-norm change over the window caused by the last burn-in doubling.
    pub gap: f64,
}

impl HyperbolicEstimate {
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.trajectory.eval(t)
    }
}

/// Hyperbolic solutions of the frozen equation `x' = f(t, x, γ)` on a window.
#[derive(Clone, Debug)]
pub struct LimitStructure {
    pub gamma: f64,
    pub window: (f64, f64),
    pub concavity: Concavity,
    pub estimates: Vec<HyperbolicEstimate>,
    /// Infimum over the window of the smallest pairwise gap.
    pub separation: f64,
}

impl LimitStructure {
    pub fn get(&self, role: Role) -> Option<&HyperbolicEstimate> {
        self.estimates.iter().find(|e| e.role == role)
    }

    pub fn needed(&self) -> usize {
        match self.concavity {
            Concavity::Concave => 2,
            Concavity::DConcave => 3,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.estimates.len() == self.needed()
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::MissingLimitStructure {
                gamma: self.gamma,
                found: self.estimates.len(),
                needed: self.needed(),
            })
        }
    }

    /// Upper attractive estimate (`ũ` or `ã`).
    pub fn top(&self) -> Option<&HyperbolicEstimate> {
        self.get(Role::Upper).or_else(|| self.get(Role::Attractive))
    }

    /// Repulsive estimate (`m̃` or `r̃`).
    pub fn repeller(&self) -> Option<&HyperbolicEstimate> {
        self.get(Role::Middle).or_else(|| self.get(Role::Repulsive))
    }
}

fn top_seed(model: &dyn VectorField) -> f64 {
    model.state_box().1 + 10.0
}

fn bottom_seed(model: &dyn VectorField, t: f64) -> f64 {
    let lo = model.state_box().0;
    let pole = model.lower_domain(t);
    if lo - 10.0 > pole {
        lo - 10.0
    } else {
        0.5 * (pole.max(lo - 10.0) + lo)
    }
}

/// Forward burn-in from `seed(t)` at `a - B`, doubling `B` until the window
/// `[a, b]` stops moving. `None` when the seed escapes.
fn attractive_burn_in<S: Fn(f64) -> f64>(
    model: &dyn VectorField,
    gamma: f64,
    seed: S,
    (a, b): (f64, f64),
    num: &Numerics,
) -> Result<Option<(Trajectory, f64, f64)>> {
    let rhs = |t: f64, x: f64| model.f(t, x, gamma);
    let run = |burn: f64| integrate(rhs, a - burn, seed(a - burn), b, &num.integrator);
    let mut burn = num.burn_in;
    let mut last_gap = None;
    let mut prev = run(burn)?;
    if !prev.status.is_completed() {
        return Ok(None);
    }
    loop {
        let next = run(2.0 * burn)?;
        if !next.status.is_completed() {
            return Ok(None);
        }
        let gap = next.sup_distance(&prev, a, b)?;
        if converged(gap, last_gap, 4.0 * burn > num.burn_in_cap, scale(&next, a, b), num) {
            return Ok(Some((next, 2.0 * burn, gap)));
        }
        burn *= 2.0;
        if burn > num.burn_in_cap {
            return Err(Error::NonConvergentBurnIn { gap, burn_in: burn });
        }
        prev = next;
        last_gap = Some(gap);
    }
}

/// Backward burn-in from `seed(t)` at `b + B`; mirror image of the attractive case.
fn repulsive_burn_in<S: Fn(f64) -> Result<f64>>(
    model: &dyn VectorField,
    gamma: f64,
    seed: S,
    (a, b): (f64, f64),
    num: &Numerics,
) -> Result<Option<(Trajectory, f64, f64)>> {
    let rhs = |t: f64, x: f64| model.f(t, x, gamma);
    let (lo, hi) = model.state_box();
    let run = |burn: f64| -> Result<Trajectory> {
        let start = b + burn;
        let pole = model.lower_domain(start) + 1e-6 * (hi - lo).max(1.0);
        let band = (pole.max(lo - 20.0), hi + 20.0);
        integrate_in_band(rhs, start, seed(start)?, a, Some(band), &num.integrator)
    };
    let mut burn = num.burn_in;
    let mut last_gap = None;
    let mut prev = run(burn)?;
    if !prev.status.is_completed() {
        return Ok(None);
    }
    loop {
        let next = run(2.0 * burn)?;
        if !next.status.is_completed() {
            return Ok(None);
        }
        let gap = next.sup_distance(&prev, a, b)?;
        if converged(gap, last_gap, 4.0 * burn > num.burn_in_cap, scale(&next, a, b), num) {
            return Ok(Some((next, 2.0 * burn, gap)));
        }
        burn *= 2.0;
        if burn > num.burn_in_cap {
            return Err(Error::NonConvergentBurnIn { gap, burn_in: burn });
        }
        prev = next;
        last_gap = Some(gap);
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        let fields = [
            ("horizon", self.horizon),
            ("horizon_cap", self.horizon_cap),
            ("horizon_tol", self.horizon_tol),
            ("burn_in", self.burn_in),
            ("burn_in_cap", self.burn_in_cap),
            ("conv_tol", self.conv_tol),
            ("noise_tol", self.noise_tol),
            ("sep_tol", self.sep_tol),
            ("track_fraction", self.track_fraction),
            ("anchor_delta", self.anchor_delta),
            ("band_margin", self.band_margin),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.horizon_cap < self.horizon || self.burn_in_cap < self.burn_in {
            return Err(Error::InvalidParameter {
                name: "horizon_cap".into(),
                reason: "caps must not be below their initial values".into(),
            });
        }
        Ok(())
    }
}

/// Below `conv_tol`, or at the integration noise floor: under `noise_tol` and
/// either stalled (a doubling failed to halve the gap) or at the burn-in cap.
fn converged(gap: f64, last: Option<f64>, at_cap: bool, scale: f64, num: &Numerics) -> bool {
    if gap < num.conv_tol * scale {
        return true;
    }
    gap < num.noise_tol * scale && (at_cap || last.is_some_and(|l| gap > 0.5 * l))
}

/// `max(1, sup |x|)` over `[a, b]`; convergence gaps are measured relative to it.
fn scale(traj: &Trajectory, a: f64, b: f64) -> f64 {
    traj.times()
        .iter()
        .zip(traj.states())
        .filter(|(t, _)| **t >= a && **t <= b)
        .fold(1.0f64, |m, (_, x)| m.max(x.abs()))
}

/// Value at `t >= end` of a forward frozen trajectory, continuing past its end.
fn continue_to(model: &dyn VectorField, gamma: f64, traj: &Trajectory, t: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let (t_end, x_end) = traj.terminal();
    if t <= t_end {
        return traj.eval(t);
    }
    let (_, x, status) = integrate_endpoint(|s, y| model.f(s, y, gamma), t_end, x_end, t, None, cfg)?;
    if !status.is_completed() {
        return Err(Error::NonFiniteState(x));
    }
    Ok(x)
}

fn estimate(role: Role, gamma: f64, (trajectory, burn_in, gap): (Trajectory, f64, f64)) -> HyperbolicEstimate {
    HyperbolicEstimate {
        role,
        gamma,
        trajectory,
        burn_in,
        gap,
    }
}

/// Hyperbolic solutions of the frozen equation at `γ` over `window`.
pub fn limit_hyperbolic_solutions(
    model: &dyn VectorField,
    gamma: f64,
    window: (f64, f64),
    num: &Numerics,
) -> Result<LimitStructure> {
    let (a, b) = window;
    if !(a < b) {
        return Err(Error::EmptySpan);
    }
    let concavity = model.concavity();
    let mut estimates = Vec::new();
    let mut separation = f64::INFINITY;
    let done = |estimates, separation| {
        Ok(LimitStructure {
            gamma,
            window,
            concavity,
            estimates,
            separation,
        })
    };
    let upper = attractive_burn_in(model, gamma, |_| top_seed(model), window, num)?;
    let Some(upper) = upper else {
        return done(estimates, separation);
    };
    match concavity {
        Concavity::Concave => {
            let rep = repulsive_burn_in(model, gamma, |t| Ok(bottom_seed(model, t)), window, num)?;
            let attr = estimate(Role::Attractive, gamma, upper);
            if let Some(rep) = rep {
                let gap = attr.trajectory.inf_difference(&rep.0, a, b)?;
                if gap >= num.sep_tol {
                    separation = gap;
                    estimates.push(attr);
                    estimates.push(estimate(Role::Repulsive, gamma, rep));
                    return done(estimates, separation);
                }
            }
            estimates.push(attr);
            done(estimates, separation)
        }
        Concavity::DConcave => {
            let lower = attractive_burn_in(model, gamma, |t| bottom_seed(model, t), window, num)?;
            let up = estimate(Role::Upper, gamma, upper);
            let Some(lower) = lower else {
                estimates.push(up);
                return done(estimates, separation);
            };
            let low = estimate(Role::Lower, gamma, lower);
            let gap = up.trajectory.inf_difference(&low.trajectory, a, b)?;
            if gap < num.sep_tol {
                estimates.push(up);
                return done(estimates, separation);
            }
            let cfg = num.integrator;
            let seed = |t: f64| -> Result<f64> {
                let u = continue_to(model, gamma, &up.trajectory, t, &cfg)?;
                let l = continue_to(model, gamma, &low.trajectory, t, &cfg)?;
                Ok(0.5 * (u + l))
            };
            let mid = repulsive_burn_in(model, gamma, seed, window, num)?;
            if let Some(mid) = mid {
                let gu = up.trajectory.inf_difference(&mid.0, a, b)?;
                let gl = mid.0.inf_difference(&low.trajectory, a, b)?;
                if gu >= num.sep_tol && gl >= num.sep_tol {
                    separation = gu.min(gl);
                    estimates.push(up);
                    estimates.push(estimate(Role::Middle, gamma, mid));
                    estimates.push(low);
                    return done(estimates, separation);
                }
            }
            separation = gap;
            estimates.push(up);
            estimates.push(low);
            done(estimates, separation)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PullbackRole {
    AttractiveFromPast,
    RepulsiveFromFuture,
}

#[derive(Clone, Debug)]
pub struct PullbackSolution {
    pub role: PullbackRole,
    pub trajectory: Trajectory,
    pub horizon: f64,
    pub anchor_value: f64,
}

impl PullbackSolution {
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.trajectory.eval(t)
    }

    pub fn status(&self) -> Status {
        self.trajectory.status
    }
}

/// Right-hand side of the transition equation `x' = f(t, x, Γᶜ(t))`.
pub fn transition_rhs<'a>(
    model: &'a dyn VectorField,
    mechanism: &'a TransitionMechanism,
) -> impl Fn(f64, f64) -> f64 + 'a {
    move |t, x| model.f(t, x, mechanism.effective_parameter(t))
}

/// Band outside which a backward-integrated repulsive solution counts as unbounded.
pub fn repulsive_band(model: &dyn VectorField, num: &Numerics) -> Option<(f64, f64)> {
    match model.concavity() {
        Concavity::DConcave => {
            let (lo, hi) = model.state_box();
            Some((lo - num.band_margin, hi + num.band_margin))
        }
        Concavity::Concave => None,
    }
}

/// Forward solution from `(−T_h, anchor(−T_h))` up to `t_end` (default `T_h`).
pub fn pullback_attractive(
    model: &dyn VectorField,
    mechanism: &TransitionMechanism,
    anchor: &HyperbolicEstimate,
    horizon: f64,
    t_end: Option<f64>,
    num: &Numerics,
) -> Result<PullbackSolution> {
    let x0 = anchor.eval(-horizon)?;
    let trajectory = integrate(
        transition_rhs(model, mechanism),
        -horizon,
        x0,
        t_end.unwrap_or(horizon),
        &num.integrator,
    )?;
    Ok(PullbackSolution {
        role: PullbackRole::AttractiveFromPast,
        trajectory,
        horizon,
        anchor_value: x0,
    })
}

/// Backward solution from `(T_h, anchor(T_h))` down to `t_end` (default `−T_h`).
pub fn pullback_repulsive(
    model: &dyn VectorField,
    mechanism: &TransitionMechanism,
    anchor: &HyperbolicEstimate,
    horizon: f64,
    t_end: Option<f64>,
    num: &Numerics,
) -> Result<PullbackSolution> {
    let x0 = anchor.eval(horizon)?;
    let trajectory = integrate_in_band(
        transition_rhs(model, mechanism),
        horizon,
        x0,
        t_end.unwrap_or(-horizon),
        repulsive_band(model, num),
        &num.integrator,
    )?;
    Ok(PullbackSolution {
        role: PullbackRole::RepulsiveFromFuture,
        trajectory,
        horizon,
        anchor_value: x0,
    })
}

/// Largest change at `∓T_h/2` caused by moving the anchor value by `±δ₀`.
pub fn anchor_sensitivity(
    model: &dyn VectorField,
    mechanism: &TransitionMechanism,
    solution: &PullbackSolution,
    num: &Numerics,
) -> Result<f64> {
    let h = solution.horizon;
    let (start, probe, band) = match solution.role {
        PullbackRole::AttractiveFromPast => (-h, -0.5 * h, None),
        PullbackRole::RepulsiveFromFuture => (h, 0.5 * h, repulsive_band(model, num)),
    };
    let rhs = transition_rhs(model, mechanism);
    let base = solution.eval(probe)?;
    let mut worst = 0.0f64;
    for delta in [-num.anchor_delta, num.anchor_delta] {
        let (_, x, status) =
            integrate_endpoint(&rhs, start, solution.anchor_value + delta, probe, band, &num.integrator)?;
        if !status.is_completed() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max((x - base).abs());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub exponent: f64,
    pub window: f64,
    /// Exponent over twice the window, when the estimate spans it.
    pub doubled: Option<f64>,
    pub sensitivity: Option<f64>,
}

/// `(1/T) ∫ f_x` along `traj` over `[a, b]`, refining the quadrature until two
/// successive refinements agree to `1e-6`.
pub(crate) fn average_fx<G: Fn(f64, f64) -> f64>(traj: &Trajectory, g: &G, a: f64, b: f64) -> Result<f64> {
    let mut sub = 1;
    let mut prev = Cumulative::new(traj, g, sub).integral(traj, g, a, b)? / (b - a);
    loop {
        sub *= 2;
        let next = Cumulative::new(traj, g, sub).integral(traj, g, a, b)? / (b - a);
        if (next - prev).abs() < 1e-6 || sub >= 64 {
            return Ok(next);
        }
        prev = next;
    }
}

/// Lyapunov exponent of a frozen hyperbolic estimate over the last `t_l` time
/// units of its window.
pub fn estimate_lyapunov(
    model: &dyn VectorField,
    gamma: f64,
    solution: &HyperbolicEstimate,
    window: (f64, f64),
    t_l: f64,
) -> Result<LyapunovReport> {
    let (a, b) = window;
    if !(t_l > 0.0) || t_l > b - a {
        return Err(Error::WindowTooLong {
            window: t_l,
            span: b - a,
        });
    }
    let g = |t: f64, x: f64| model.fx(t, x, gamma);
    let exponent = average_fx(&solution.trajectory, &g, b - t_l, b)?;
    let doubled = if 2.0 * t_l <= b - a {
        Some(average_fx(&solution.trajectory, &g, b - 2.0 * t_l, b)?)
    } else {
        None
    };
    Ok(LyapunovReport {
        exponent,
        window: t_l,
        doubled,
        sensitivity: doubled.map(|d| (d - exponent).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_model, CoefficientFunction, Family};
    use crate::presets;
    use crate::transitions::Profile;
    use std::collections::BTreeMap;

    struct Linear;
    impl VectorField for Linear {
        fn f(&self, _t: f64, x: f64, g: f64) -> f64 {
            -x + g
        }
        fn fx(&self, _t: f64, _x: f64, _g: f64) -> f64 {
            -1.0
        }
        fn concavity(&self) -> Concavity {
            Concavity::Concave
        }
        fn state_box(&self) -> (f64, f64) {
            (-1.0, 1.0)
        }
    }

    fn small() -> Numerics {
        Numerics {
            integrator: IntegratorConfig {
                rtol: 1e-9,
                atol: 1e-11,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn linear_field_has_single_attractor_at_zero() {
        let s = limit_hyperbolic_solutions(&Linear, 0.0, (-50.0, 50.0), &small()).unwrap();
        assert_eq!(s.estimates.len(), 1);
        let a = s.get(Role::Attractive).unwrap();
        for t in [-50.0, 0.0, 50.0] {
            assert!(a.eval(t).unwrap().abs() < 1e-9);
        }
        assert!(!s.is_complete());
    }

    #[test]
    fn concave_logistic_pair() {
        let m = presets::concave_logistic();
        let s = limit_hyperbolic_solutions(&m, 0.0, (-100.0, 100.0), &small()).unwrap();
        assert!(s.is_complete());
        let a = s.get(Role::Attractive).unwrap();
        let r = s.get(Role::Repulsive).unwrap();
        for i in 0..=20 {
            let t = -100.0 + 10.0 * i as f64;
            assert!(a.eval(t).unwrap() > r.eval(t).unwrap());
        }
        assert!(s.separation > 0.1);
    }

    #[test]
    fn allee_three_solutions() {
        let m = presets::allee_migration();
        let s = limit_hyperbolic_solutions(&m, 1.5, (-100.0, 100.0), &small()).unwrap();
        assert_eq!(s.estimates.len(), 3);
        let (u, mid, l) = (
            s.get(Role::Upper).unwrap(),
            s.get(Role::Middle).unwrap(),
            s.get(Role::Lower).unwrap(),
        );
        for i in 0..=20 {
            let t = -100.0 + 10.0 * i as f64;
            let (uu, mm, ll) = (u.eval(t).unwrap(), mid.eval(t).unwrap(), l.eval(t).unwrap());
            assert!(ll < mm && mm < uu);
            assert!(ll.abs() < 5.0, "lower attractor near zero, got {ll}");
        }
    }

    #[test]
    fn gompertz_exponent_is_minus_r() {
        let mut c = BTreeMap::new();
        c.insert("r".to_string(), CoefficientFunction::constant(0.7));
        c.insert("K".to_string(), CoefficientFunction::constant(20.0));
        let m = make_model(Family::Gompertz, &c).unwrap();
        let s = limit_hyperbolic_solutions(&m, 0.0, (-100.0, 100.0), &small()).unwrap();
        let a = s.top().unwrap();
        let rep = estimate_lyapunov(&m, 0.0, a, s.window, 100.0).unwrap();
        assert!((rep.exponent + 0.7).abs() < 1e-8);
        assert!(rep.sensitivity.unwrap() < 1e-8);
    }

    #[test]
    fn lyapunov_window_too_long() {
        let s = limit_hyperbolic_solutions(&Linear, 0.0, (-10.0, 10.0), &small()).unwrap();
        let r = estimate_lyapunov(&Linear, 0.0, s.top().unwrap(), s.window, 50.0);
        assert!(matches!(r, Err(Error::WindowTooLong { .. })));
        let r = estimate_lyapunov(&Linear, 0.0, s.top().unwrap(), s.window, 5.0).unwrap();
        assert!((r.exponent + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_mechanism_reproduces_anchors() {
        let m = presets::allee_migration();
        let num = small();
        let s = limit_hyperbolic_solutions(&m, 1.5, (-100.0, 100.0), &num).unwrap();
        let mech = TransitionMechanism::constant_rate(Profile::Constant { value: 1.5 }, 1.0).unwrap();
        let u = pullback_attractive(&m, &mech, s.get(Role::Upper).unwrap(), 100.0, None, &num).unwrap();
        let mid = pullback_repulsive(&m, &mech, s.get(Role::Middle).unwrap(), 100.0, None, &num).unwrap();
        for i in 0..=40 {
            let t = -100.0 + 5.0 * i as f64;
            assert!((u.eval(t).unwrap() - s.get(Role::Upper).unwrap().eval(t).unwrap()).abs() < 1e-6);
            assert!((mid.eval(t).unwrap() - s.get(Role::Middle).unwrap().eval(t).unwrap()).abs() < 1e-6);
        }
        assert!(anchor_sensitivity(&m, &mech, &u, &num).unwrap() < 1e-6);
        assert!(anchor_sensitivity(&m, &mech, &mid, &num).unwrap() < 1e-6);
    }
}
