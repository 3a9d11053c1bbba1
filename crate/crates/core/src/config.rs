//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": { "kind": "barrage", "T": 1.0, "Q0": {...}, "C": {...} },
//!   "channel": { "grid": [1, 2, 3, 4], "P": [[...], ...], "P_hat": [[...], ...] },
//!   "utility": { "c1": 100, "c2": 10000 },
//!   "simulation": { "slow_horizon": 4, "intermediate_per_slow": 8,
//!                   "initial_sigma": 1.0, "strategy_mode": "full", "scenario": 1 }
//! }
//! ```
//!
//! Matrices are `{ "rows": r, "cols": c, "data": [row-major entries] }`.
//! `A` may be omitted, in which case a constant-velocity transition with
//! period `T` is used. A `targets` list of `{ "model": ..., "weight": β }`
//! replaces `model` when several targets are tracked.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EccmError, Result};
use crate::model::{CovarianceSummary, JammingChannel, JammingGrid, UtilityParams};
use crate::pap::SolveMode;
use crate::riccati::{
    constant_velocity_transition, DeceptionModel, KinematicsModel, TrackingModel,
};
use crate::sim::{
    Mismatch, Scenario, SimulationConfig, WeightedTarget, DEFAULT_INITIAL_SIGMA,
    DEFAULT_INTERMEDIATE_PER_SLOW, DEFAULT_SLOW_HORIZON,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixSpec {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }

    fn to_matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(config_error(format!(
                "{name}: {}×{} matrix needs {} entries, got {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Barrage,
    Deception,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(rename = "T")]
    pub sampling_period: f64,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixSpec>,
    #[serde(rename = "Q0")]
    pub q0: MatrixSpec,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixSpec>,
    #[serde(rename = "B1", default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<MatrixSpec>,
    #[serde(rename = "B2", default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<MatrixSpec>,
    #[serde(rename = "C1", default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<MatrixSpec>,
    #[serde(rename = "C2", default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub model: ModelSpec,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub grid: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "P_hat", default, skip_serializing_if = "Option::is_none")]
    pub p_hat: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_slow")]
    pub slow_horizon: usize,
    #[serde(default = "default_intermediate")]
    pub intermediate_per_slow: usize,
    #[serde(default = "default_sigma")]
    pub initial_sigma: f64,
    #[serde(default)]
    pub strategy_mode: SolveMode,
    #[serde(default = "default_scenario")]
    pub scenario: u8,
}

fn default_slow() -> usize {
    DEFAULT_SLOW_HORIZON
}

fn default_intermediate() -> usize {
    DEFAULT_INTERMEDIATE_PER_SLOW
}

fn default_sigma() -> f64 {
    DEFAULT_INITIAL_SIGMA
}

fn default_scenario() -> u8 {
    1
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            slow_horizon: DEFAULT_SLOW_HORIZON,
            intermediate_per_slow: DEFAULT_INTERMEDIATE_PER_SLOW,
            initial_sigma: DEFAULT_INITIAL_SIGMA,
            strategy_mode: SolveMode::Full,
            scenario: 1,
        }
    }
}

/// Parsed, not yet validated, configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<TargetSpec>>,
    pub channel: ChannelSpec,
    pub utility: UtilityParams,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

fn config_error(msg: impl Into<String>) -> EccmError {
    EccmError::Config(msg.into())
}

fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        EccmError::InvalidArgument(m) | EccmError::Config(m) => {
            config_error(format!("{section}: {m}"))
        }
        other => other,
    })
}

fn required<'a>(m: &'a Option<MatrixSpec>, name: &str, kind: &str) -> Result<&'a MatrixSpec> {
    m.as_ref()
        .ok_or_else(|| config_error(format!("{name} is required for a {kind} model")))
}

impl ModelSpec {
    pub fn build(&self) -> Result<TrackingModel> {
        let q = self.q0.to_matrix("Q0")?;
        let a = match &self.a {
            Some(a) => a.to_matrix("A")?,
            None => {
                let d = q.nrows();
                if d == 0 || d % 2 != 0 {
                    return Err(config_error(
                        "A omitted but Q0 is not a (position, velocity) state of even dimension",
                    ));
                }
                constant_velocity_transition(self.sampling_period, d / 2)
            }
        };
        match self.kind {
            ModelKind::Barrage => {
                for (name, m) in [
                    ("B1", &self.b1),
                    ("B2", &self.b2),
                    ("C1", &self.c1),
                    ("C2", &self.c2),
                ] {
                    if m.is_some() {
                        return Err(config_error(format!(
                            "{name} only applies to deception models"
                        )));
                    }
                }
                let c = required(&self.c, "C", "barrage")?.to_matrix("C")?;
                Ok(TrackingModel::Barrage(KinematicsModel::new(
                    a,
                    q,
                    c,
                    self.sampling_period,
                )?))
            }
            ModelKind::Deception => {
                if self.c.is_some() {
                    return Err(config_error("deception models take C1 and C2 instead of C"));
                }
                Ok(TrackingModel::Deception(DeceptionModel::new(
                    a,
                    required(&self.b1, "B1", "deception")?.to_matrix("B1")?,
                    required(&self.b2, "B2", "deception")?.to_matrix("B2")?,
                    required(&self.c1, "C1", "deception")?.to_matrix("C1")?,
                    required(&self.c2, "C2", "deception")?.to_matrix("C2")?,
                    q,
                    self.sampling_period,
                )?))
            }
        }
    }
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: JammingChannel,
    pub p_hat: Option<JammingChannel>,
    pub params: UtilityParams,
    pub targets: Vec<WeightedTarget>,
    pub simulation: SimulationSpec,
}

impl RunConfig {
    /// Simulation settings; fails when no tracking model was configured.
    pub fn simulation_config(&self) -> Result<SimulationConfig> {
        if self.targets.is_empty() {
            return Err(config_error(
                "a `model` or `targets` section is required to simulate",
            ));
        }
        let spec = &self.simulation;
        let config = SimulationConfig {
            targets: self.targets.clone(),
            channel: self.channel.clone(),
            params: self.params,
            slow_horizon: spec.slow_horizon,
            intermediate_per_slow: spec.intermediate_per_slow,
            initial_sigma: CovarianceSummary::new(spec.initial_sigma)?,
            strategy_mode: spec.strategy_mode,
            mismatch: match &self.p_hat {
                Some(p_hat) => Some(Mismatch {
                    p_hat: p_hat.clone(),
                    scenario: Scenario::from_number(spec.scenario)?,
                }),
                None => None,
            },
        };
        in_section("simulation", config.validate())?;
        Ok(config)
    }
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn validate(&self) -> Result<RunConfig> {
        let grid = in_section("channel.grid", JammingGrid::new(self.channel.grid.clone()))?;
        let channel = in_section(
            "channel.P",
            JammingChannel::from_rounded_rows(grid.clone(), self.channel.p.clone()),
        )?;
        let p_hat = match &self.channel.p_hat {
            Some(rows) => Some(in_section(
                "channel.P_hat",
                JammingChannel::from_rounded_rows(grid, rows.clone()),
            )?),
            None => None,
        };
        let params = in_section(
            "utility",
            UtilityParams::new(self.utility.c1, self.utility.c2),
        )?;
        let targets = match (&self.model, &self.targets) {
            (Some(_), Some(_)) => {
                return Err(config_error("give either `model` or `targets`, not both"))
            }
            (Some(m), None) => vec![WeightedTarget {
                model: in_section("model", m.build())?,
                weight: 1.0,
            }],
            (None, Some(ts)) => ts
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    Ok(WeightedTarget {
                        model: in_section(&format!("targets[{i}].model"), t.model.build())?,
                        weight: t.weight,
                    })
                })
                .collect::<Result<_>>()?,
            (None, None) => Vec::new(),
        };
        let spec = &self.simulation;
        if spec.slow_horizon == 0 || spec.intermediate_per_slow == 0 {
            return Err(config_error("simulation: horizons must be at least 1"));
        }
        in_section(
            "simulation.initial_sigma",
            CovarianceSummary::new(spec.initial_sigma),
        )?;
        in_section("simulation.scenario", Scenario::from_number(spec.scenario))?;
        let config = RunConfig {
            channel,
            p_hat,
            params,
            targets,
            simulation: spec.clone(),
        };
        if !config.targets.is_empty() {
            config.simulation_config()?;
        }
        Ok(config)
    }
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| EccmError::Io(format!("{}: {e}", path.display())))?;
    RunConfigFile::parse(&text)
        .and_then(|f| f.validate())
        .map_err(|e| match e {
            EccmError::Config(m) => config_error(format!("{}: {m}", path.display())),
            other => other,
        })
}
