use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::algorithm::StepsizeSchedule;
use crate::problem::{RegularizationPlacement, TargetDynamics, TrackingParams};

/// A complete experiment description, read from TOML.
///
/// ```toml
/// [instance]
/// agents = 10
/// horizon = 2000
/// seed = 1
///
/// [algorithm]
/// schedule = "strongly-convex"
/// kappa = 0.5
/// mapping = "true-dynamics"
///
/// [output]
/// dir = "out/run"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub instance: InstanceConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    pub agents: usize,
    pub constraints: usize,
    pub dimension: usize,
    pub horizon: usize,
    pub zeta: [f64; 2],
    pub lambda: [f64; 2],
    pub box_upper: f64,
    pub slack: f64,
    pub dynamics: TargetDynamics,
    pub seed: u64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        let p = TrackingParams::default();
        InstanceConfig {
            agents: p.agents,
            constraints: p.constraints,
            dimension: p.dimension,
            horizon: p.horizon,
            zeta: p.zeta,
            lambda: p.lambda,
            box_upper: p.box_upper,
            slack: p.slack,
            dynamics: p.dynamics,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Probability of each non-backbone edge per round.
    pub connect_probability: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            connect_probability: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    General,
    Slater,
    StronglyConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingKind {
    Identity,
    TrueDynamics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnViolation {
    #[default]
    Halt,
    Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub schedule: ScheduleKind,
    /// Primal exponent; only for the general schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub kappa: f64,
    #[serde(default = "default_mapping")]
    pub mapping: MappingKind,
    #[serde(default = "default_placement")]
    pub placement: RegularizationPlacement,
    /// Slater margin for the bounds; estimated from the instance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slater_margin: Option<f64>,
    #[serde(default)]
    pub on_violation: OnViolation,
}

fn default_mapping() -> MappingKind {
    MappingKind::Identity
}

fn default_placement() -> RegularizationPlacement {
    RegularizationPlacement::Explicit
}

impl AlgorithmConfig {
    pub fn schedule(&self) -> StepsizeSchedule {
        match self.schedule {
            ScheduleKind::General => StepsizeSchedule::General {
                c: self.c.unwrap_or(f64::NAN),
                kappa: self.kappa,
            },
            ScheduleKind::Slater => StepsizeSchedule::Slater { kappa: self.kappa },
            ScheduleKind::StronglyConvex => StepsizeSchedule::StronglyConvex { kappa: self.kappa },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    Euclidean,
    Kl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// `s` in `psi(x) = s ||x||^2`.
    pub scale: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            kind: GeometryKind::Euclidean,
            scale: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparatorChoice {
    Dynamic,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Number of log-spaced checkpoints before merging with the slices.
    pub checkpoints: usize,
    /// Extra checkpoints, also the rows of a sweep table.
    pub slices: Vec<usize>,
    pub comparators: Vec<ComparatorChoice>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            checkpoints: 20,
            slices: vec![100, 500, 1000],
            comparators: vec![ComparatorChoice::Dynamic],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Kappa,
    C,
    Seed,
    Scale,
    ConnectProbability,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Kappa => "kappa",
            SweepParam::C => "c",
            SweepParam::Seed => "seed",
            SweepParam::Scale => "scale",
            SweepParam::ConnectProbability => "connect-probability",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ExperimentError> {
        [
            SweepParam::Kappa,
            SweepParam::C,
            SweepParam::Seed,
            SweepParam::Scale,
            SweepParam::ConnectProbability,
        ]
        .into_iter()
        .find(|p| p.name() == name)
        .ok_or_else(|| ExperimentError::Config(format!("unknown sweep parameter `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ExperimentError::Config(msg) => invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn tracking_params(&self) -> TrackingParams {
        let i = &self.instance;
        TrackingParams {
            agents: i.agents,
            constraints: i.constraints,
            dimension: i.dimension,
            horizon: i.horizon,
            zeta: i.zeta,
            lambda: i.lambda,
            box_upper: i.box_upper,
            slack: i.slack,
            dynamics: i.dynamics,
            placement: self.algorithm.placement,
            seed: i.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.tracking_params()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        let rho = self.network.connect_probability;
        if !(0.0..=1.0).contains(&rho) {
            return Err(invalid(format!("connect_probability {rho} outside [0, 1]")));
        }

        let a = &self.algorithm;
        match (a.schedule, a.c) {
            (ScheduleKind::General, None) => {
                return Err(invalid("the general schedule needs `c`"));
            }
            (ScheduleKind::Slater | ScheduleKind::StronglyConvex, Some(_)) => {
                return Err(invalid("`c` only applies to the general schedule"));
            }
            _ => {}
        }
        a.schedule().validate().map_err(|e| invalid(e.to_string()))?;
        if a.schedule == ScheduleKind::Slater && a.mapping != MappingKind::Identity {
            return Err(invalid("the slater schedule assumes the identity mapping"));
        }
        if let Some(eps) = a.slater_margin {
            if a.schedule != ScheduleKind::Slater {
                return Err(invalid("`slater_margin` only applies to the slater schedule"));
            }
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(invalid(format!("slater_margin {eps} must be positive")));
            }
        }

        match self.geometry.kind {
            GeometryKind::Kl => {
                return Err(invalid(
                    "the kl geometry needs simplex domains; tracking instances use boxes",
                ))
            }
            GeometryKind::Euclidean => {
                let s = self.geometry.scale;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(invalid(format!("geometry scale {s} must be positive")));
                }
            }
        }

        let o = &self.output;
        if o.checkpoints < 2 {
            return Err(invalid("at least two checkpoints are needed"));
        }
        if o.slices.contains(&0) {
            return Err(invalid("slices are rounds and start at 1"));
        }
        if o.comparators.is_empty() {
            return Err(invalid("no comparator selected"));
        }
        let distinct: BTreeSet<_> = o.comparators.iter().collect();
        if distinct.len() != o.comparators.len() {
            return Err(invalid("comparators are listed twice"));
        }

        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(invalid("sweep has no values"));
            }
            for v in &sweep.values {
                self.with_param(sweep.param, *v)?.validate_point()?;
            }
        }
        Ok(())
    }

    // the sweep section is not re-checked for each of its own points
    fn validate_point(&self) -> Result<(), ExperimentError> {
        ExperimentConfig {
            sweep: None,
            ..self.clone()
        }
        .validate()
    }

    /// Copy with one parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self, ExperimentError> {
        let mut out = self.clone();
        match param {
            SweepParam::Kappa => out.algorithm.kappa = value,
            SweepParam::C => {
                if out.algorithm.schedule != ScheduleKind::General {
                    return Err(invalid("`c` can only be swept with the general schedule"));
                }
                out.algorithm.c = Some(value);
            }
            SweepParam::Seed => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                    return Err(invalid(format!("seed {value} is not a nonnegative integer")));
                }
                out.instance.seed = value as u64;
            }
            SweepParam::Scale => out.geometry.scale = value,
            SweepParam::ConnectProbability => out.network.connect_probability = value,
        }
        Ok(out)
    }

    /// Log-spaced rounds merged with the slices and the horizon, increasing.
    pub fn checkpoints(&self) -> Vec<usize> {
        let t = self.instance.horizon;
        let k = self.output.checkpoints;
        let mut set = BTreeSet::new();
        for j in 0..k {
            let e = (t as f64).ln() * j as f64 / (k - 1) as f64;
            set.insert((e.exp().round() as usize).clamp(1, t));
        }
        set.extend(self.output.slices.iter().copied().filter(|s| *s <= t));
        set.insert(t);
        set.into_iter().collect()
    }
}
