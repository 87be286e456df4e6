// SPDX-License-Identifier: Apache-2.0

//! Run configuration read from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use persuasion::extensions::{CostExampleParams, PhysicalCostParams, TestModelParams};
use persuasion::{AnticipationCurve, ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("config field `{field}`: {source}")]
    Model {
        field: &'static str,
        source: ModelError,
    },
}

fn field(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Main,
    MainWithPc,
    Unconditional,
    PhysicalCost,
    TestDesign,
    CostExample,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Main => "main",
            Variant::MainWithPc => "main-with-pc",
            Variant::Unconditional => "unconditional",
            Variant::PhysicalCost => "physical-cost",
            Variant::TestDesign => "test-design",
            Variant::CostExample => "cost-example",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub grid_n: usize,
    /// Tolerance used by the verification checks on binding constraints.
    pub check_tol: f64,
    pub oracle_grid: usize,
    pub mc_draws: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_n: 2001,
            check_tol: 1e-8,
            oracle_grid: 801,
            mc_draws: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Mu0,
    Alpha0,
    Upsilon0,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepConfig {
    /// `steps` evenly spaced points from `from` to `to`.
    pub fn points(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.from],
            n => (0..n)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DebugConfig {
    /// Shift added to the good-news lower atom in the verification suite.
    pub l_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub model: Option<ModelParams>,
    #[serde(default = "default_phi")]
    pub phi: AnticipationCurve,
    #[serde(default)]
    pub psi: Option<f64>,
    #[serde(default)]
    pub test_design: Option<TestModelParams>,
    #[serde(default)]
    pub cost_example: Option<CostExampleParams>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub debug: DebugConfig,
}

fn default_variant() -> Variant {
    Variant::Main
}

fn default_phi() -> AnticipationCurve {
    AnticipationCurve::Linear
}

fn default_seed() -> u64 {
    42
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::Main,
            model: Some(ModelParams {
                alpha: 0.4,
                p_bar: 1.0,
                p_high: 0.8,
                p_low: 0.2,
                c: 0.5,
                mu0: 0.6,
            }),
            phi: AnticipationCurve::Exponential { k: 3.0 },
            psi: None,
            test_design: None,
            cost_example: None,
            solver: SolverConfig::default(),
            sweep: None,
            seed: 42,
            debug: DebugConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn model(&self) -> Result<ModelParams, ConfigError> {
        self.model.ok_or_else(|| {
            field(
                "model",
                format!("required by variant {}", self.variant.name()),
            )
        })
    }

    pub fn physical_cost(&self) -> Result<PhysicalCostParams, ConfigError> {
        let psi = self
            .psi
            .ok_or_else(|| field("psi", "required by variant physical-cost"))?;
        Ok(PhysicalCostParams {
            base: self.model()?,
            psi,
        })
    }

    pub fn test_design(&self) -> Result<&TestModelParams, ConfigError> {
        self.test_design
            .as_ref()
            .ok_or_else(|| field("test_design", "required by variant test-design"))
    }

    pub fn cost_example(&self) -> Result<&CostExampleParams, ConfigError> {
        self.cost_example
            .as_ref()
            .ok_or_else(|| field("cost_example", "required by variant cost-example"))
    }

    /// Checks everything the selected variant will use.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.solver;
        if s.grid_n < 11 {
            return Err(field("solver.grid_n", format!("{} is below 11", s.grid_n)));
        }
        if s.oracle_grid < 3 {
            return Err(field(
                "solver.oracle_grid",
                format!("{} is below 3", s.oracle_grid),
            ));
        }
        if s.mc_draws == 0 {
            return Err(field("solver.mc_draws", "must be positive"));
        }
        if !(s.check_tol.is_finite() && s.check_tol > 0.0) {
            return Err(field(
                "solver.check_tol",
                format!("{} is not positive", s.check_tol),
            ));
        }
        if !self.debug.l_offset.is_finite() {
            return Err(field("debug.l_offset", "must be finite"));
        }
        let model_err = |field| move |source| ConfigError::Model { field, source };
        match self.variant {
            Variant::Main | Variant::MainWithPc | Variant::Unconditional => {
                self.phi.validate().map_err(model_err("phi"))?;
                self.model()?.validate().map_err(model_err("model"))?;
                if self.variant == Variant::MainWithPc && !self.phi.is_concave() {
                    return Err(field(
                        "phi",
                        "the participation variant needs a concave curve",
                    ));
                }
            }
            Variant::PhysicalCost => {
                self.physical_cost()?
                    .validate()
                    .map_err(model_err("model"))?;
            }
            Variant::TestDesign => {
                self.test_design()?
                    .validate()
                    .map_err(model_err("test_design"))?;
            }
            Variant::CostExample => {
                self.cost_example()?
                    .validate()
                    .map_err(model_err("cost_example"))?;
            }
        }
        if let Some(sw) = &self.sweep {
            let allowed: &[SweepVariable] = match self.variant {
                Variant::Main | Variant::MainWithPc | Variant::Unconditional => {
                    &[SweepVariable::Mu0]
                }
                Variant::PhysicalCost => &[SweepVariable::Mu0, SweepVariable::Psi],
                Variant::TestDesign => &[SweepVariable::Alpha0],
                Variant::CostExample => &[SweepVariable::Upsilon0, SweepVariable::Psi],
            };
            if !allowed.contains(&sw.variable) {
                return Err(field(
                    "sweep.variable",
                    format!(
                        "{:?} cannot be swept in variant {}",
                        sw.variable,
                        self.variant.name()
                    ),
                ));
            }
            for (name, x) in [("sweep.from", sw.from), ("sweep.to", sw.to)] {
                let ok = match sw.variable {
                    SweepVariable::Psi => x.is_finite() && x >= 0.0,
                    _ => (0.0..=1.0).contains(&x),
                };
                if !ok {
                    return Err(field(
                        name,
                        format!("{x} is outside the range of {:?}", sw.variable),
                    ));
                }
            }
        }
        Ok(())
    }
}
