//! Run configuration: four JSON blocks plus dotted-path overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracklab::attractors::Numerics;
use tracklab::models::{make_model, CoefficientFunction, Family, VectorFieldModel};
use tracklab::presets;
use tracklab::transitions::{MechanismKind, PhaseSign, Profile, TransitionMechanism};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub mechanism: Option<MechanismBlock>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub experiment: Experiment,
    /// Stamp written into manifests; ignored on input.
    #[serde(default, skip_serializing)]
    pub manifest: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// One of `allee-migration`, `concave-logistic`, `holling-predation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub coefficients: BTreeMap<String, CoefficientFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_box: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismBlock {
    pub profile: Profile,
    pub path: MechanismKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if !(self.step > 0.0) || !(self.end >= self.start) || !self.start.is_finite() || !self.end.is_finite() {
            return Err(CliError::Config(format!(
                "grid needs start <= end and step > 0, got {:?}",
                self
            )));
        }
        Ok(tracklab::ews::uniform_grid(self.start, self.end, self.step))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    /// Worker threads for grid sweeps; 0 uses all cores.
    pub threads: usize,
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec<f64>,
    pub gamma: Option<f64>,
    pub window: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub tol: f64,
    pub ftle_window: f64,
    pub grid: Option<GridSpec>,
    pub kappa: f64,
    pub kappas: Vec<f64>,
    pub rates: Vec<f64>,
    pub phases: Vec<f64>,
    pub phase_sign: PhaseSign,
    pub lambda_bracket: (f64, f64),
    pub reference: Option<f64>,
    pub search: (f64, f64),
    pub c0: Option<f64>,
    pub monotone_from: f64,
    pub strengths: Vec<f64>,
    pub b: f64,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            threads: 0,
            t0: -100.0,
            t1: 100.0,
            x0: vec![],
            gamma: None,
            window: None,
            bracket: None,
            tol: 1e-6,
            ftle_window: 50.0,
            grid: None,
            kappa: 0.6,
            kappas: vec![],
            rates: vec![],
            phases: vec![],
            phase_sign: PhaseSign::Minus,
            lambda_bracket: (-0.5, 0.5),
            reference: None,
            search: (-400.0, 400.0),
            c0: None,
            monotone_from: 0.0,
            strengths: vec![],
            b: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.numerics.validate()?;
        let e = &self.experiment;
        if !(e.tol > 0.0) {
            return Err(CliError::Config("experiment.tol must be positive".into()));
        }
        if !(e.ftle_window > 0.0) {
            return Err(CliError::Config("experiment.ftle_window must be positive".into()));
        }
        if !(0.0..1.0).contains(&e.kappa) || e.kappas.iter().any(|k| !(0.0..1.0).contains(k)) {
            return Err(CliError::Config("kappa values must lie in [0, 1)".into()));
        }
        if let Some(m) = &self.mechanism {
            TransitionMechanism::new(m.path.clone(), m.profile.clone())?;
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<VectorFieldModel, CliError> {
        let m = &self.model;
        let model = match (&m.preset, m.family) {
            (Some(name), None) => match name.as_str() {
                "allee-migration" => presets::allee_migration(),
                "concave-logistic" => presets::concave_logistic(),
                "holling-predation" => presets::holling_predation(),
                other => return Err(CliError::Config(format!("unknown model preset `{other}`"))),
            },
            (None, Some(family)) => make_model(family, &m.coefficients)?,
            _ => {
                return Err(CliError::Config(
                    "model needs exactly one of `preset` or `family`".into(),
                ))
            }
        };
        Ok(match m.state_box {
            Some((lo, hi)) => model.with_state_box(lo, hi)?,
            None => model,
        })
    }

    pub fn mechanism_block(&self) -> Result<&MechanismBlock, CliError> {
        self.mechanism
            .as_ref()
            .ok_or_else(|| CliError::Config("this subcommand needs a `mechanism` block".into()))
    }

    pub fn mechanism(&self) -> Result<TransitionMechanism, CliError> {
        let m = self.mechanism_block()?;
        Ok(TransitionMechanism::new(m.path.clone(), m.profile.clone())?)
    }

    /// Mechanism with its scalar parameter replaced by `value`.
    pub fn mechanism_at(&self, value: f64) -> Result<TransitionMechanism, CliError> {
        let m = self.mechanism_block()?;
        let path = match &m.path {
            MechanismKind::ConstantRate { .. } => MechanismKind::ConstantRate { c: value },
            MechanismKind::Phase { c, .. } => MechanismKind::Phase { c: *c, offset: value },
            MechanismKind::Size { .. } => MechanismKind::Size { c: value },
            _ => {
                return Err(CliError::Config(
                    "parameter sweeps need a constant-rate, phase or size mechanism".into(),
                ))
            }
        };
        Ok(TransitionMechanism::new(path, m.profile.clone())?)
    }
}

/// Sets `path` (dot separated) in `doc` to `raw`, parsed as JSON when
/// possible and as a string otherwise.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("malformed override key `{path}`")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{path}` crosses a non-object")))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override `{path}` crosses a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
        apply_override(&mut doc, k.trim(), v.trim())?;
    }
    let cfg: RunConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
