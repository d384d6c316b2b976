//! Finite-time Lyapunov exponents, early-warning detection, detection-region
//! sweeps, safe/no-return points and reaction-control experiments.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractors::{pullback_attractive, pullback_repulsive, transition_rhs, Role};
use crate::classify::{CaseLabel, Classifier};
use crate::error::{Error, Result};
use crate::integrator::{integrate_endpoint, Cumulative, Trajectory};
use crate::models::VectorField;
use crate::transitions::{MechanismKind, Profile, RateProfile, TransitionMechanism};

/// Sliding-window averages `λ(T, t) = (1/T) ∫_{t−T}^{t} f_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtleSeries {
    pub window: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub role: String,
}

impl FtleSeries {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Uniform grid `a, a + step, …` not exceeding `b`.
pub fn uniform_grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| a + step * i as f64).collect()
}

/// FTLE series along `traj` of the transition equation `(model, mechanism)`.
pub fn ftle_series(
    model: &dyn VectorField,
    mechanism: &TransitionMechanism,
    traj: &Trajectory,
    window: f64,
    grid: &[f64],
    role: &str,
) -> Result<FtleSeries> {
    let g = |t: f64, x: f64| model.fx(t, x, mechanism.effective_parameter(t));
    ftle_with(traj, &g, window, grid, role)
}

/// FTLE series for an arbitrary integrand `g(t, x)`.
pub fn ftle_with<G: Fn(f64, f64) -> f64>(
    traj: &Trajectory,
    g: &G,
    window: f64,
    grid: &[f64],
    role: &str,
) -> Result<FtleSeries> {
    let (lo, hi) = traj.span();
    if grid.is_empty() {
        return Err(Error::EmptySpan);
    }
    let first = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let last = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if first - window < lo || last > hi {
        return Err(Error::OutsideSpan {
            t: if first - window < lo { first - window } else { last },
            lo,
            hi,
        });
    }
    let eval = |sub: usize| -> Result<Vec<f64>> {
        let cum = Cumulative::new(traj, g, sub);
        grid.iter()
            .map(|&t| Ok(cum.integral(traj, g, t - window, t)? / window))
            .collect()
    };
    let mut sub = 1;
    let mut prev = eval(sub)?;
    loop {
        sub *= 2;
        let next = eval(sub)?;
        let diff = prev
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff < 1e-9 || sub >= 64 {
            return Ok(FtleSeries {
                window,
                times: grid.to_vec(),
                values: next,
                role: role.to_string(),
            });
        }
        prev = next;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwsConfig {
    pub kappa: f64,
    /// Reference Lyapunov exponent `L < 0`.
    pub reference: f64,
    /// Optional search window `[t_min, t_max]`.
    pub search: Option<(f64, f64)>,
}

impl EwsConfig {
    pub fn new(kappa: f64, reference: f64) -> Result<Self> {
        let cfg = Self {
            kappa,
            reference,
            search: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(Error::InvalidParameter {
                name: "kappa".into(),
                reason: format!("must lie in [0, 1), got {}", self.kappa),
            });
        }
        if !(self.reference < 0.0) {
            return Err(Error::InvalidParameter {
                name: "reference".into(),
                reason: format!("reference exponent must be negative, got {}", self.reference),
            });
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.kappa * self.reference
    }
}

/// First time at which the series reaches `κ L`, interpolated linearly
/// between grid nodes.
pub fn warning_time(series: &FtleSeries, cfg: &EwsConfig) -> Option<f64> {
    let thr = cfg.threshold();
    let (a, b) = cfg.search.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut prev: Option<(f64, f64)> = None;
    for (&t, &v) in series.times.iter().zip(&series.values) {
        if t < a || t > b {
            continue;
        }
        if v >= thr {
            return Some(match prev {
                None => t,
                Some((tp, vp)) => tp + (thr - vp) / (v - vp) * (t - tp),
            });
        }
        prev = Some((t, v));
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Outcome {
    Detected(bool),
    Case(CaseLabel),
    Failed(String),
}

impl Outcome {
    pub fn render(&self) -> String {
        match self {
            Outcome::Detected(b) => b.to_string(),
            Outcome::Case(c) => c.to_string(),
            Outcome::Failed(e) => format!("error: {e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub axis1: f64,
    pub axis2: f64,
    pub outcome: Outcome,
    /// Warning time of the cell, when one was computed.
    pub t1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub axis1_name: String,
    pub axis2_name: String,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major: `cells[i * axis2.len() + j]` holds `(axis1[i], axis2[j])`.
    pub cells: Vec<Cell>,
    pub provenance: BTreeMap<String, String>,
}

impl RegionGrid {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.axis2.len() + j]
    }
}

/// Forward pullback attractive solution along the upper (or attractive) past
/// estimate, over `[−T_h, t_end]`.
pub fn upper_pullback(
    classifier: &Classifier<'_>,
    mechanism: &TransitionMechanism,
    t_end: Option<f64>,
) -> Result<(Trajectory, f64)> {
    let h = classifier.horizon_for(mechanism);
    let past = classifier.limit_structure(mechanism.limits().0, h)?;
    let anchor = past.top().ok_or(Error::MissingLimitStructure {
        gamma: past.gamma,
        found: 0,
        needed: past.needed(),
    })?;
    let sol = pullback_attractive(
        classifier.model(),
        mechanism,
        anchor,
        h,
        t_end.map(|t| t.max(-h + 1.0)),
        &classifier.numerics,
    )?;
    Ok((sol.trajectory, h))
}

/// Detection region over `(κ, c)`: a cell is detected when the FTLE series of
/// `u_c` reaches `κ L` inside `search`.
#[allow(clippy::too_many_arguments)]
pub fn ews_region<F>(
    classifier: &Classifier<'_>,
    family: F,
    kappas: &[f64],
    rates: &[f64],
    window: f64,
    search: (f64, f64),
    grid_step: f64,
    reference: f64,
) -> Result<RegionGrid>
where
    F: Fn(f64) -> Result<TransitionMechanism> + Sync,
{
    if kappas.is_empty() || rates.is_empty() {
        return Err(Error::EmptySpan);
    }
    let grid = uniform_grid(search.0, search.1, grid_step);
    let maxima: Vec<Result<f64>> = rates
        .par_iter()
        .map(|&c| {
            let mech = family(c)?;
            let (traj, _) = upper_pullback(classifier, &mech, Some(search.1))?;
            let s = ftle_series(classifier.model(), &mech, &traj, window, &grid, "u")?;
            Ok(s.max())
        })
        .collect();
    let mut cells = Vec::with_capacity(kappas.len() * rates.len());
    for &k in kappas {
        for (j, &c) in rates.iter().enumerate() {
            let outcome = match &maxima[j] {
                Ok(m) => Outcome::Detected(*m >= k * reference),
                Err(e) => Outcome::Failed(e.to_string()),
            };
            cells.push(Cell {
                axis1: k,
                axis2: c,
                outcome,
                t1: None,
            });
        }
    }
    let mut provenance = BTreeMap::new();
    provenance.insert("window".into(), window.to_string());
    provenance.insert("search".into(), format!("[{}, {}]", search.0, search.1));
    provenance.insert("grid_step".into(), grid_step.to_string());
    provenance.insert("reference".into(), reference.to_string());
    Ok(RegionGrid {
        axis1_name: "kappa".into(),
        axis2_name: "c".into(),
        axis1: kappas.to_vec(),
        axis2: rates.to_vec(),
        cells,
        provenance,
    })
}

/// Frozen-rate repellers `t ↦ m_{Δ(t)}(t)` with a cache keyed by the rate
/// rounded to four decimals.
pub struct MCurve<'c, 'm> {
    classifier: &'c Classifier<'m>,
    profile: Profile,
    lowest: f64,
    cache: Mutex<HashMap<i64, Arc<Option<Trajectory>>>>,
}

impl<'c, 'm> MCurve<'c, 'm> {
    /// `lowest` is the earliest time the curve will be queried at.
    pub fn new(classifier: &'c Classifier<'m>, profile: Profile, lowest: f64) -> Self {
        Self {
            classifier,
            profile,
            lowest,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn repeller(&self, c: f64) -> Result<Arc<Option<Trajectory>>> {
        let key = (c * 1e4).round() as i64;
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let rate = key as f64 * 1e-4;
        let mech = TransitionMechanism::constant_rate(self.profile.clone(), rate)?;
        let h = self.classifier.horizon_for(&mech);
        let fut = self.classifier.limit_structure(mech.limits().1, h)?;
        let traj = match fut.repeller() {
            Some(anchor) => {
                let sol = pullback_repulsive(
                    self.classifier.model(),
                    &mech,
                    anchor,
                    h,
                    Some(self.lowest.min(h - 1.0)),
                    &self.classifier.numerics,
                )?;
                Some(sol.trajectory)
            }
            None => None,
        };
        let v = Arc::new(traj);
        Ok(self.cache.lock().unwrap().entry(key).or_insert(v).clone())
    }

    /// `m_c(t)` for the frozen rate `c`.
    pub fn at_rate(&self, c: f64, t: f64) -> Result<f64> {
        match self.repeller(c)?.as_ref() {
            Some(traj) if t >= traj.span().0 && t <= traj.span().1 => traj.eval(t),
            _ => Err(Error::MissingRepeller(c)),
        }
    }

    pub fn len_cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

/// Samples `t ↦ m_{Δ(t)}(t)` on `grid`.
pub fn m_curve(classifier: &Classifier<'_>, profile: &Profile, delta: &RateProfile, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let lowest = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let curve = MCurve::new(classifier, profile.clone(), lowest);
    grid.iter()
        .map(|&t| Ok((t, curve.at_rate(delta.eval(t), t)?)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointFlag {
    Safe,
    NoReturn,
    Neither,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::Safe => "safe",
            PointFlag::NoReturn => "no-return",
            PointFlag::Neither => "neither",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafeRow {
    pub t: f64,
    pub u_delta: f64,
    /// `m_{Δ(t)}(t)`, NaN when the frozen repeller is unbounded there.
    pub m_frozen: f64,
    pub m_future: f64,
    pub flag: PointFlag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conclusion {
    Tracking,
    Tipping,
    NoTippingPossible,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafePointReport {
    pub warning_point: Option<f64>,
    pub c0: f64,
    pub c_star: f64,
    pub t0: f64,
    pub safe: Vec<f64>,
    pub no_return: Vec<f64>,
    pub rows: Vec<SafeRow>,
    pub conclusion: Conclusion,
}

/// First time `s₁` at which `Δ` comes down to `c0`, scanning forward from
/// `start` in steps of `step` up to `end`.
pub fn warning_point(delta: &RateProfile, c0: f64, start: f64, end: f64, step: f64) -> Option<f64> {
    let h = |t: f64| delta.eval(t) - c0;
    let mut a = start;
    if h(a) <= 0.0 {
        return Some(a);
    }
    while a < end {
        let b = (a + step).min(end);
        if h(b) <= 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if h(m) <= 0.0 {
                    hi = m;
                } else {
                    lo = m;
                }
                if hi - lo < 1e-12 {
                    break;
                }
            }
            return Some(hi);
        }
        a = b;
    }
    None
}

/// Safe and no-return points of `x' = f(t, x, Γ(Δ(t) t))`.
pub fn safe_no_return(
    classifier: &Classifier<'_>,
    profile: &Profile,
    delta: &RateProfile,
    c0: f64,
    t0: f64,
    grid: &[f64],
) -> Result<SafePointReport> {
    let c_star = delta.limits().1;
    let s1 = warning_point(delta, c0, -1e4, 1e4, 0.01);
    let Some(_) = s1 else {
        return Ok(SafePointReport {
            warning_point: None,
            c0,
            c_star,
            t0,
            safe: vec![],
            no_return: vec![],
            rows: vec![],
            conclusion: Conclusion::NoTippingPossible,
        });
    };
    let tdr = TransitionMechanism::new(
        MechanismKind::TimeDependentRate {
            delta: delta.clone(),
            d: 1.0,
        },
        profile.clone(),
    )?;
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lowest = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let (u, _) = upper_pullback(classifier, &tdr, Some(hi))?;
    let curve = MCurve::new(classifier, profile.clone(), lowest);
    let mut rows = Vec::with_capacity(grid.len());
    let (mut safe, mut no_return) = (vec![], vec![]);
    for &t in grid {
        let ud = u.eval(t)?;
        let mf = curve.at_rate(delta.eval(t), t).unwrap_or(f64::NAN);
        let mc = curve.at_rate(c_star, t).unwrap_or(f64::NAN);
        let is_safe = t >= t0 && ud > mf;
        let is_nr = t >= t0 && ud < mc;
        let flag = match (is_safe, is_nr) {
            (true, false) => PointFlag::Safe,
            (false, true) => PointFlag::NoReturn,
            _ => PointFlag::Neither,
        };
        match flag {
            PointFlag::Safe => safe.push(t),
            PointFlag::NoReturn => no_return.push(t),
            PointFlag::Neither => {}
        }
        rows.push(SafeRow {
            t,
            u_delta: ud,
            m_frozen: mf,
            m_future: mc,
            flag,
        });
    }
    let conclusion = match (safe.is_empty(), no_return.is_empty()) {
        (false, true) => Conclusion::Tracking,
        (true, false) => Conclusion::Tipping,
        _ => Conclusion::Undetermined,
    };
    Ok(SafePointReport {
        warning_point: s1,
        c0,
        c_star,
        t0,
        safe,
        no_return,
        rows,
        conclusion,
    })
}

/// Settings shared by reaction runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionSettings {
    pub b: f64,
    pub window: f64,
    pub reference: f64,
    pub grid_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionOutcome {
    pub label: CaseLabel,
    pub t1: Option<f64>,
}

/// Unreacted upper solution and its FTLE series, shared by all `(r, κ)` cells.
pub struct ReactionBase {
    pub mechanism: TransitionMechanism,
    pub horizon: f64,
    pub trajectory: Trajectory,
    pub series: FtleSeries,
    pub unreacted: CaseLabel,
}

pub fn reaction_base(
    classifier: &Classifier<'_>,
    profile: &Profile,
    delta: &RateProfile,
    settings: &ReactionSettings,
) -> Result<ReactionBase> {
    let mechanism = TransitionMechanism::new(
        MechanismKind::TimeDependentRate {
            delta: delta.clone(),
            d: 1.0,
        },
        profile.clone(),
    )?;
    let (trajectory, horizon) = upper_pullback(classifier, &mechanism, None)?;
    let grid = uniform_grid(-horizon + settings.window, horizon, settings.grid_step);
    let series = ftle_series(classifier.model(), &mechanism, &trajectory, settings.window, &grid, "u")?;
    let unreacted = classifier.classify_at(&mechanism, horizon)?.label;
    Ok(ReactionBase {
        mechanism,
        horizon,
        trajectory,
        series,
        unreacted,
    })
}

/// Outcome of reacting with strength `r` once the warning with threshold `κ L` fires.
pub fn reaction_run(
    classifier: &Classifier<'_>,
    base: &ReactionBase,
    delta: &RateProfile,
    r: f64,
    kappa: f64,
    settings: &ReactionSettings,
) -> Result<ReactionOutcome> {
    let cfg = EwsConfig::new(kappa, settings.reference)?;
    let Some(t1) = warning_time(&base.series, &cfg) else {
        return Ok(ReactionOutcome {
            label: base.unreacted,
            t1: None,
        });
    };
    let h = base.horizon;
    let reaction = TransitionMechanism::new(
        MechanismKind::Reaction {
            delta: delta.clone(),
            r,
            b: settings.b,
            t1,
        },
        base.mechanism.profile.clone(),
    )?;
    let x1 = base.trajectory.eval(t1)?;
    let model = classifier.model();
    let (_, x, status) = integrate_endpoint(
        transition_rhs(model, &reaction),
        t1,
        x1,
        h,
        None,
        &classifier.numerics.integrator,
    )?;
    let future = classifier.limit_structure(reaction.limits().1, h)?;
    future.require_complete()?;
    let fu = future.get(Role::Upper).map(|e| e.eval(h)).transpose()?;
    let fl = future.get(Role::Lower).map(|e| e.eval(h)).transpose()?;
    let label = match (fu, fl) {
        (Some(fu), Some(fl)) if status.is_completed() => {
            let tt = classifier.numerics.track_fraction * (fu - fl);
            if (x - fu).abs() < tt {
                CaseLabel::A
            } else if (x - fl).abs() < tt {
                CaseLabel::C2
            } else {
                CaseLabel::Indeterminate
            }
        }
        _ => CaseLabel::Indeterminate,
    };
    Ok(ReactionOutcome { label, t1: Some(t1) })
}

/// Reaction outcomes over `(r, κ)`.
pub fn reaction_region(
    classifier: &Classifier<'_>,
    profile: &Profile,
    delta: &RateProfile,
    strengths: &[f64],
    kappas: &[f64],
    settings: &ReactionSettings,
) -> Result<RegionGrid> {
    if strengths.is_empty() || kappas.is_empty() {
        return Err(Error::EmptySpan);
    }
    let base = reaction_base(classifier, profile, delta, settings)?;
    let pairs: Vec<(f64, f64)> = strengths
        .iter()
        .flat_map(|&r| kappas.iter().map(move |&k| (r, k)))
        .collect();
    let cells: Vec<Cell> = pairs
        .par_iter()
        .map(|&(r, k)| match reaction_run(classifier, &base, delta, r, k, settings) {
            Ok(o) => Cell {
                axis1: r,
                axis2: k,
                outcome: Outcome::Case(o.label),
                t1: o.t1,
            },
            Err(e) => Cell {
                axis1: r,
                axis2: k,
                outcome: Outcome::Failed(e.to_string()),
                t1: None,
            },
        })
        .collect();
    let mut provenance = BTreeMap::new();
    provenance.insert("b".into(), settings.b.to_string());
    provenance.insert("window".into(), settings.window.to_string());
    provenance.insert("reference".into(), settings.reference.to_string());
    provenance.insert("horizon".into(), base.horizon.to_string());
    provenance.insert("unreacted".into(), base.unreacted.to_string());
    Ok(RegionGrid {
        axis1_name: "r".into(),
        axis2_name: "kappa".into(),
        axis1: strengths.to_vec(),
        axis2: kappas.to_vec(),
        cells,
        provenance,
    })
}
