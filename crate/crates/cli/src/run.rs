//! Subcommand drivers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::{json, Value};
use tracklab::attractors::{
    estimate_lyapunov, limit_hyperbolic_solutions, pullback_repulsive, transition_rhs, Numerics, Role,
};
use tracklab::classify::{critical_value, lambda_star, CaseLabel, Classifier};
use tracklab::ews::{
    ews_region, ftle_series, reaction_region, safe_no_return, upper_pullback, warning_time, EwsConfig,
    Outcome, ReactionSettings, RegionGrid,
};
use tracklab::integrator::integrate;
use tracklab::io;
use tracklab::models::VectorField;
use tracklab::transitions::{MechanismKind, TransitionMechanism};

use crate::config::{GridSpec, RunConfig};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Attractors,
    Classify,
    CriticalRate,
    Lyapunov,
    Ftle,
    EwsRegion,
    BifurcationMap,
    SafePoints,
    ReactionRegion,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Attractors => "attractors",
            Command::Classify => "classify",
            Command::CriticalRate => "critical-rate",
            Command::Lyapunov => "lyapunov",
            Command::Ftle => "ftle",
            Command::EwsRegion => "ews-region",
            Command::BifurcationMap => "bifurcation-map",
            Command::SafePoints => "safe-points",
            Command::ReactionRegion => "reaction-region",
        }
    }
}

/// Files written so far and whether anything came out indeterminate.
pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
    pub indeterminate: bool,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: vec![],
            indeterminate: false,
        })
    }

    fn text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        io::write(&self.dir.join(name), content)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
        s.push('\n');
        self.text(name, &s)
    }

    pub fn manifest(&self, cfg: &RunConfig, cmd: Command, wall: f64, exit: i32) -> Result<(), CliError> {
        let mut doc = serde_json::to_value(cfg).expect("config serializes");
        doc["manifest"] = json!({
            "tool": "tracklab",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": cmd.name(),
            "wall_time_s": wall,
            "exit_code": exit,
            "files": self.files,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
        s.push('\n');
        io::write(&self.dir.join("manifest.json"), &s)?;
        Ok(())
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Upper => "upper",
        Role::Lower => "lower",
        Role::Middle => "middle",
        Role::Attractive => "attractive",
        Role::Repulsive => "repulsive",
    }
}

/// Exponent of the top hyperbolic solution of the frozen equation at `γ`.
fn reference_exponent(model: &dyn VectorField, gamma: f64, num: &Numerics) -> Result<f64, CliError> {
    let w = 2000.0;
    let s = limit_hyperbolic_solutions(model, gamma, (-w, w), num)?;
    let top = s.top().ok_or_else(|| CliError::Config(format!("no attractor at γ = {gamma}")))?;
    Ok(estimate_lyapunov(model, gamma, top, s.window, w)?.exponent)
}

/// Past and future reference exponents; the past one is used.
fn references(cfg: &RunConfig, model: &dyn VectorField, mech: &TransitionMechanism) -> Result<(f64, Option<f64>), CliError> {
    if let Some(l) = cfg.experiment.reference {
        return Ok((l, None));
    }
    let (gm, gp) = mech.limits();
    let past = reference_exponent(model, gm, &cfg.numerics)?;
    let future = if gm == gp {
        past
    } else {
        reference_exponent(model, gp, &cfg.numerics)?
    };
    Ok((past, Some(future)))
}

fn core_err(e: CliError) -> tracklab::Error {
    match e {
        CliError::Core(c) => c,
        other => tracklab::Error::InvalidParameter {
            name: "mechanism".into(),
            reason: other.to_string(),
        },
    }
}

fn grid_or(cfg: &RunConfig, default: GridSpec) -> Result<Vec<f64>, CliError> {
    cfg.experiment.grid.unwrap_or(default).points()
}

fn nonempty(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Config(format!("experiment.{name} must not be empty")));
    }
    Ok(())
}

fn region_indeterminate(grid: &RegionGrid) -> bool {
    grid.cells.iter().any(|c| {
        matches!(
            c.outcome,
            Outcome::Case(CaseLabel::Indeterminate) | Outcome::Failed(_)
        )
    })
}

fn region_doc(grid: &RegionGrid, extra: Value) -> Value {
    let failures: Vec<Value> = grid
        .cells
        .iter()
        .filter_map(|c| match &c.outcome {
            Outcome::Failed(e) => Some(json!({"axis1": c.axis1, "axis2": c.axis2, "error": e})),
            _ => None,
        })
        .collect();
    let warnings: Vec<Value> = grid
        .cells
        .iter()
        .filter_map(|c| c.t1.map(|t| json!({"axis1": c.axis1, "axis2": c.axis2, "t1": t})))
        .collect();
    json!({
        "axis1": grid.axis1_name,
        "axis2": grid.axis2_name,
        "provenance": grid.provenance,
        "failures": failures,
        "warning_times": warnings,
        "extra": extra,
    })
}

pub fn execute(cmd: Command, cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let num = cfg.numerics;
    let e = &cfg.experiment;
    let classifier = Classifier::new(&model, num);
    match cmd {
        Command::Simulate => {
            let mech = cfg.mechanism()?;
            mech.check_model(&model)?;
            if !(e.t1 != e.t0) || !e.t0.is_finite() || !e.t1.is_finite() {
                return Err(CliError::Config(format!("empty time span [{}, {}]", e.t0, e.t1)));
            }
            nonempty("x0", &e.x0)?;
            let mut runs = vec![];
            for (i, &x0) in e.x0.iter().enumerate() {
                let traj = integrate(transition_rhs(&model, &mech), e.t0, x0, e.t1, &num.integrator)?;
                let name = format!("trajectory_{i}.csv");
                out.text(&name, &io::trajectory_csv(&traj))?;
                let (t, x) = traj.terminal();
                runs.push(json!({"file": name, "x0": x0, "status": traj.status, "t_end": t, "x_end": x}));
            }
            out.json("simulate.json", &json!({"runs": runs}))?;
        }
        Command::Attractors => {
            let mech = cfg.mechanism()?;
            mech.check_model(&model)?;
            let h = classifier.horizon_for(&mech);
            let (gm, gp) = mech.limits();
            let mut limits = vec![];
            for (tag, g) in [("past", gm), ("future", gp)] {
                let s = classifier.limit_structure(g, h)?;
                for est in &s.estimates {
                    let name = format!("limit_{tag}_{}.csv", role_name(est.role));
                    out.text(&name, &io::trajectory_csv(&est.trajectory))?;
                    limits.push(json!({
                        "file": name, "gamma": g, "role": role_name(est.role),
                        "burn_in": est.burn_in, "gap": est.gap,
                    }));
                }
                limits.push(json!({"gamma": g, "separation": s.separation, "complete": s.is_complete()}));
            }
            let (u, _) = upper_pullback(&classifier, &mech, None)?;
            out.text("pullback_attractive.csv", &io::trajectory_csv(&u))?;
            let mut pull = vec![json!({"file": "pullback_attractive.csv", "status": u.status})];
            let future = classifier.limit_structure(gp, h)?;
            if let Some(anchor) = future.repeller() {
                let r = pullback_repulsive(&model, &mech, anchor, h, None, &num)?;
                out.text("pullback_repulsive.csv", &io::trajectory_csv(&r.trajectory))?;
                pull.push(json!({"file": "pullback_repulsive.csv", "status": r.trajectory.status}));
            }
            out.json("attractors.json", &json!({"horizon": h, "limits": limits, "pullback": pull}))?;
        }
        Command::Classify => {
            let mech = cfg.mechanism()?;
            mech.check_model(&model)?;
            let c = classifier.classify(&mech)?;
            out.indeterminate |= c.label == CaseLabel::Indeterminate;
            out.json(
                "classification.json",
                &json!({"case": c.label.to_string(), "evidence": c.evidence}),
            )?;
        }
        Command::CriticalRate => {
            let (lo, hi) = e
                .bracket
                .ok_or_else(|| CliError::Config("experiment.bracket is required".into()))?;
            cfg.mechanism_at(lo)?.check_model(&model)?;
            let r = critical_value(&classifier, |v| cfg.mechanism_at(v).map_err(core_err), lo, hi, e.tol)?;
            out.json(
                "critical.json",
                &json!({
                    "lo": r.lo, "hi": r.hi, "midpoint": r.midpoint(), "width": r.width,
                    "label_lo": r.label_lo.to_string(), "label_hi": r.label_hi.to_string(),
                    "boundary": r.boundary.to_string(), "iterations": r.iterations,
                }),
            )?;
        }
        Command::Lyapunov => {
            let gamma = match (e.gamma, &cfg.mechanism) {
                (Some(g), _) => g,
                (None, Some(_)) => cfg.mechanism()?.limits().0,
                (None, None) => return Err(CliError::Config("experiment.gamma is required".into())),
            };
            let w = e.window.unwrap_or(2000.0);
            let s = limit_hyperbolic_solutions(&model, gamma, (-w, w), &num)?;
            let mut reports = vec![];
            for est in &s.estimates {
                let l = estimate_lyapunov(&model, gamma, est, s.window, w)?;
                reports.push(json!({
                    "role": role_name(est.role), "exponent": l.exponent, "window": l.window,
                    "doubled": l.doubled, "sensitivity": l.sensitivity,
                }));
            }
            out.json("lyapunov.json", &json!({"gamma": gamma, "exponents": reports}))?;
        }
        Command::Ftle => {
            let mech = cfg.mechanism()?;
            mech.check_model(&model)?;
            let grid = grid_or(cfg, GridSpec { start: e.search.0, end: e.search.1, step: 0.1 })?;
            let end = grid.last().copied().unwrap_or(0.0);
            let (u, _) = upper_pullback(&classifier, &mech, Some(end))?;
            let series = ftle_series(&model, &mech, &u, e.ftle_window, &grid, "u")?;
            out.text("ftle.csv", &io::ftle_csv(&series))?;
            let (l, lf) = references(cfg, &model, &mech)?;
            let ews = EwsConfig::new(e.kappa, l)?;
            out.json(
                "ftle.json",
                &json!({
                    "window": e.ftle_window, "max": series.max(), "reference": l,
                    "reference_future": lf, "kappa": e.kappa, "warning_time": warning_time(&series, &ews),
                }),
            )?;
        }
        Command::EwsRegion => {
            nonempty("rates", &e.rates)?;
            nonempty("kappas", &e.kappas)?;
            let first = cfg.mechanism_at(e.rates[0])?;
            first.check_model(&model)?;
            let (l, lf) = references(cfg, &model, &first)?;
            let step = e.grid.map(|g| g.step).unwrap_or(0.1);
            let grid = ews_region(
                &classifier,
                |c| cfg.mechanism_at(c).map_err(core_err),
                &e.kappas,
                &e.rates,
                e.ftle_window,
                e.search,
                step,
                l,
            )?;
            out.indeterminate |= region_indeterminate(&grid);
            out.text("region.csv", &io::region_csv(&grid))?;
            out.json("region.json", &region_doc(&grid, json!({"reference_future": lf})))?;
        }
        Command::BifurcationMap => {
            nonempty("rates", &e.rates)?;
            nonempty("phases", &e.phases)?;
            let profile = cfg.mechanism_block()?.profile.clone();
            let cells: Vec<(f64, f64)> = e
                .rates
                .iter()
                .flat_map(|&c| e.phases.iter().map(move |&s| (c, s)))
                .collect();
            let values: Vec<Result<f64, String>> = cells
                .par_iter()
                .map(|&(c, s)| {
                    lambda_star(&model, &profile, c, s, e.phase_sign, e.lambda_bracket, e.tol, &num)
                        .map(|l| l.value)
                        .map_err(|err| err.to_string())
                })
                .collect();
            let mut rows = vec![];
            let mut failures = vec![];
            for (&(c, s), v) in cells.iter().zip(&values) {
                match v {
                    Ok(l) => rows.push([io::num(c), io::num(s), io::num(*l)]),
                    Err(err) => {
                        rows.push([io::num(c), io::num(s), io::num(f64::NAN)]);
                        failures.push(json!({"c": c, "s": s, "error": err}));
                    }
                }
            }
            out.indeterminate |= !failures.is_empty();
            out.text("bifurcation.csv", &io::csv(&["c", "s", "lambda_star"], rows))?;
            out.json(
                "bifurcation.json",
                &json!({"phase_sign": e.phase_sign, "tol": e.tol, "failures": failures}),
            )?;
        }
        Command::SafePoints => {
            let block = cfg.mechanism_block()?;
            let MechanismKind::TimeDependentRate { delta, .. } = &block.path else {
                return Err(CliError::Config("safe-points needs a time-dependent-rate mechanism".into()));
            };
            let c0 = match (e.c0, e.bracket) {
                (Some(c0), _) => c0,
                (None, Some((lo, hi))) => {
                    let profile = block.profile.clone();
                    critical_value(
                        &classifier,
                        |c| TransitionMechanism::constant_rate(profile.clone(), c),
                        lo,
                        hi,
                        e.tol,
                    )?
                    .midpoint()
                }
                (None, None) => {
                    return Err(CliError::Config("safe-points needs experiment.c0 or experiment.bracket".into()))
                }
            };
            let grid = grid_or(cfg, GridSpec { start: -5.0, end: 5.0, step: 0.05 })?;
            let rep = safe_no_return(&classifier, &block.profile, delta, c0, e.monotone_from, &grid)?;
            out.text("safepoints.csv", &io::safepoints_csv(&rep))?;
            out.json(
                "safepoints.json",
                &json!({
                    "warning_point": rep.warning_point, "c0": rep.c0, "c_star": rep.c_star,
                    "t0": rep.t0, "conclusion": rep.conclusion,
                    "safe": rep.safe, "no_return": rep.no_return,
                }),
            )?;
        }
        Command::ReactionRegion => {
            nonempty("strengths", &e.strengths)?;
            nonempty("kappas", &e.kappas)?;
            let block = cfg.mechanism_block()?;
            let MechanismKind::TimeDependentRate { delta, .. } = &block.path else {
                return Err(CliError::Config("reaction-region needs a time-dependent-rate mechanism".into()));
            };
            let mech = cfg.mechanism()?;
            let (l, lf) = references(cfg, &model, &mech)?;
            let settings = ReactionSettings {
                b: e.b,
                window: e.ftle_window,
                reference: l,
                grid_step: e.grid.map(|g| g.step).unwrap_or(0.05),
            };
            let grid = reaction_region(&classifier, &block.profile, delta, &e.strengths, &e.kappas, &settings)?;
            out.indeterminate |= region_indeterminate(&grid);
            out.text("region.csv", &io::region_csv(&grid))?;
            out.json("region.json", &region_doc(&grid, json!({"reference_future": lf})))?;
        }
    }
    Ok(())
}
