//! Experiment configuration: one JSON document per run.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::distance::PNorm;
use crate::kernels::oracle::OracleGridConfig;
use crate::mean_value::KnownSolution;
use crate::operator::{GroupRef, OperatorSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the JSON report, CSV table and plot script; nothing is written when absent.
    pub dir: Option<PathBuf>,
    pub stem: String,
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, stem: "carnot".into(), plot: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    Distance(DistanceArgs),
    KernelBake(BakeArgs),
    KernelEval(KernelEvalArgs),
    ParametrixEval(ParametrixEvalArgs),
    ParametrixVerify(ParametrixVerifyArgs),
    Meanvalue(MeanValueArgs),
    HarnackChain(ChainArgs),
    HarnackParabolic(ParabolicArgs),
    HarnackInvariant(InvariantArgs),
    HarnackMaxprinciple(ProbeArgs),
    Selftest(SelftestArgs),
}

impl Command {
    pub fn label(&self) -> &'static str {
        match self {
            Command::Distance(_) => "distance",
            Command::KernelBake(_) => "kernel bake",
            Command::KernelEval(_) => "kernel eval",
            Command::ParametrixEval(_) => "parametrix eval",
            Command::ParametrixVerify(_) => "parametrix verify",
            Command::Meanvalue(_) => "meanvalue",
            Command::HarnackChain(_) => "harnack chain",
            Command::HarnackParabolic(_) => "harnack parabolic",
            Command::HarnackInvariant(_) => "harnack invariant",
            Command::HarnackMaxprinciple(_) => "harnack maxprinciple",
            Command::Selftest(_) => "selftest",
        }
    }

    /// Group used when the config names none.
    pub fn default_group(&self) -> &'static str {
        match self {
            Command::Meanvalue(_) => "euclidean1",
            _ => "heisenberg1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceArgs {
    #[arg(long = "from", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[arg(long = "to", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y: Vec<f64>,
    /// Control norm: 1, 2 or inf.
    #[arg(long, default_value = "2")]
    pub p: PNorm,
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

impl Default for DistanceArgs {
    fn default() -> Self {
        DistanceArgs { x: Vec::new(), y: Vec::new(), p: PNorm::Two, segments: 32, restarts: 8, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct BakeArgs {
    /// Low-resolution grid for smoke tests.
    #[arg(long)]
    pub coarse: bool,
    /// Grid as JSON, overriding `--coarse`.
    #[arg(long, value_parser = super::parse_grid)]
    pub grid: Option<OracleGridConfig>,
    /// Bake even when a cached table exists and compare checksums.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct KernelEvalArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
}

impl Default for KernelEvalArgs {
    fn default() -> Self {
        KernelEvalArgs { x: Vec::new(), t: 1.0 }
    }
}

/// Points are given as space coordinates followed by the time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixEvalArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub z: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub zeta: Vec<f64>,
    /// Series order.
    #[arg(long = "K", default_value_t = 3)]
    pub order: usize,
    /// Spatial nodes per axis for the outer convolution.
    #[arg(long, default_value_t = 16)]
    pub nodes: usize,
}

impl Default for ParametrixEvalArgs {
    fn default() -> Self {
        ParametrixEvalArgs { z: Vec::new(), zeta: Vec::new(), order: 3, nodes: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VerifyCheck {
    Normalization,
    Reproduction,
    Sandwich,
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ParametrixVerifyArgs {
    #[arg(long, value_enum)]
    pub check: VerifyCheck,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zeta: Vec<f64>,
    /// Intermediate time for the reproduction check; the midpoint when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long = "K", default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 16)]
    pub nodes: usize,
}

impl Default for ParametrixVerifyArgs {
    fn default() -> Self {
        ParametrixVerifyArgs { check: VerifyCheck::Normalization, z: Vec::new(), zeta: Vec::new(), s: None, order: 3, nodes: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct MeanValueArgs {
    /// const, caloric-poly or heat-kernel.
    #[arg(long, default_value = "const")]
    pub solution: KnownSolution,
    /// Descent dimension.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Use the unbounded kernel instead of the descent kernels.
    #[arg(long)]
    pub unbounded: bool,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Constant zero-order coefficient of the heat operator.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Space part of the point; 0.1 in every coordinate when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zeta: Vec<f64>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 40)]
    pub strata: usize,
}

impl Default for MeanValueArgs {
    fn default() -> Self {
        MeanValueArgs {
            solution: KnownSolution::Const,
            m: 4,
            unbounded: false,
            r: 0.5,
            c: 0.0,
            zeta: Vec::new(),
            tau: 1.0,
            samples: 20_000,
            strata: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ChainArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub z_plus: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub z_minus: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub c_p: f64,
    #[arg(long, default_value_t = 0.25)]
    pub eps1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta1: f64,
    #[arg(long)]
    pub r0: Option<f64>,
}

impl Default for ChainArgs {
    fn default() -> Self {
        ChainArgs { z_plus: Vec::new(), z_minus: Vec::new(), c_p: 2.0, eps1: 0.25, theta1: 0.5, r0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ParabolicArgs {
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Poles per family (calibration and held-out).
    #[arg(long, default_value_t = 20)]
    pub poles: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 0.25)]
    pub eps1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta1: f64,
}

impl Default for ParabolicArgs {
    fn default() -> Self {
        ParabolicArgs { r: 0.5, poles: 20, samples: 2000, spread: 2.0, eps1: 0.25, theta1: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5])]
    pub radii: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub poles: usize,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Constant to test `sup u <= C_H inf u` against.
    #[arg(long)]
    pub c_h: Option<f64>,
}

impl Default for InvariantArgs {
    fn default() -> Self {
        InvariantArgs { radii: vec![0.25, 0.5], poles: 20, samples: 500, c_h: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSolution {
    /// `u = 1`.
    Const,
    /// `u = x1` (plus `x3` on the Heisenberg group), a negative control.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeArgs {
    #[arg(long, value_enum, default_value = "const")]
    pub solution: ProbeSolution,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Constant source term; `c u` when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub f: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub paths: usize,
}

impl Default for ProbeArgs {
    fn default() -> Self {
        ProbeArgs { solution: ProbeSolution::Const, c: 0.0, f: None, paths: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestArgs {
    /// Criteria to run; all when absent.
    #[arg(long = "criterion", value_delimiter = ',')]
    pub criteria: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig { schema_version: SCHEMA_VERSION, group: None, operator: None, command, seed: 0, output: OutputConfig::default() }
    }

    /// Fills the default group so that the stored form names everything it uses.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        if c.group.is_none() && c.operator.is_none() && !matches!(c.command, Command::Selftest(_) | Command::ParametrixEval(_) | Command::ParametrixVerify(_)) {
            c.group = Some(GroupRef::Name(c.command.default_group().into()));
        }
        c
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.normalized()).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, super::CliError> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| super::CliError::Invalid(super::located("config", &e)))?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(super::CliError::Invalid(format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", c.schema_version)));
        }
        Ok(c)
    }
}
