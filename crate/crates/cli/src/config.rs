//! Layered configuration: built-in defaults, then a TOML file, then
//! command-line flags, each layer overriding the one below.

use std::path::Path;

use ampalloc::{AllocMode, ExperimentSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Flat key set accepted in a `--config` TOML file. Every key is optional;
/// unknown keys are rejected so typos fail loudly instead of silently
/// running the defaults.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // Operating point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_fractions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_param: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alloc_mode: Option<AllocMode>,
    // Sweep abscissae.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_vars: Option<Vec<f64>>,
    // Contour window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_height: Option<usize>,
}

impl FileConfig {
    /// Parses a TOML config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| {
            CliError::Config(format!("invalid config file {}: {e}", path.display()))
        })
    }
}

/// Flag values shared by the experiment-running commands; every field
/// mirrors a [`FileConfig`] key.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct CommonArgs {
    /// Signal length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Measurement count (must be below n).
    #[arg(long)]
    pub m: Option<usize>,
    /// Mean nonzero count per measurement.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Comma-separated coordinate fraction per block (one or two blocks).
    #[arg(long, value_delimiter = ',')]
    pub block_fractions: Option<Vec<f64>>,
    /// Sparsity ratio between the densest and sparsest block.
    #[arg(long)]
    pub epsilon_ratio: Option<f64>,
    /// Measurement noise variance.
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Near-worst-case margin for signal amplitudes.
    #[arg(long)]
    pub a_param: Option<f64>,
    /// Monte Carlo repetitions.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Power allocation under test.
    #[arg(long, value_parser = parse_alloc_mode)]
    pub alloc_mode: Option<AllocMode>,
}

fn parse_alloc_mode(s: &str) -> Result<AllocMode, String> {
    match s {
        "uniform" => Ok(AllocMode::Uniform),
        "optimal" => Ok(AllocMode::Optimal),
        other => Err(format!(
            "unknown allocation mode `{other}` (expected `uniform` or `optimal`)"
        )),
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!(
        "missing required parameter `{key}`: pass --{key} or set `{key}` in the config file"
    ))
}

/// Resolves the experiment spec for one invocation: flags override the
/// file, the file overrides defaults; `n`, `m`, and `rho` have no
/// defaults and must come from one of the layers.
pub fn resolve_spec(file: &FileConfig, args: &CommonArgs) -> Result<ExperimentSpec, CliError> {
    Ok(ExperimentSpec {
        n: args.n.or(file.n).ok_or_else(|| missing("n"))?,
        m: args.m.or(file.m).ok_or_else(|| missing("m"))?,
        rho: args.rho.or(file.rho).ok_or_else(|| missing("rho"))?,
        block_fractions: args
            .block_fractions
            .clone()
            .or_else(|| file.block_fractions.clone())
            .unwrap_or_else(|| vec![0.5, 0.5]),
        epsilon_ratio: args.epsilon_ratio.or(file.epsilon_ratio).unwrap_or(100.0),
        noise_var: args.noise_var.or(file.noise_var).unwrap_or(0.2),
        a_param: args.a_param.or(file.a_param).unwrap_or(0.02),
        trials: args.trials.or(file.trials).unwrap_or(50),
        seed: args.seed.or(file.seed).unwrap_or(42),
        alloc_mode: args
            .alloc_mode
            .or(file.alloc_mode)
            .unwrap_or(AllocMode::Optimal),
    })
}

/// Resolved window for the contour command (pure theory: no trial or
/// measurement-count parameters).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub grid_width: usize,
    pub grid_height: usize,
    pub block_fractions: Vec<f64>,
    pub epsilon_ratio: f64,
    pub noise_var: f64,
}

/// Contour window flags.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ContourArgs {
    /// Smallest sparsity on the horizontal axis.
    #[arg(long)]
    pub rho_min: Option<f64>,
    /// Largest sparsity on the horizontal axis.
    #[arg(long)]
    pub rho_max: Option<f64>,
    /// Smallest undersampling ratio on the vertical axis.
    #[arg(long)]
    pub delta_min: Option<f64>,
    /// Largest undersampling ratio on the vertical axis.
    #[arg(long)]
    pub delta_max: Option<f64>,
    /// Grid points along the sparsity axis.
    #[arg(long)]
    pub grid_width: Option<usize>,
    /// Grid points along the undersampling axis.
    #[arg(long)]
    pub grid_height: Option<usize>,
    /// Comma-separated coordinate fraction per block.
    #[arg(long, value_delimiter = ',')]
    pub block_fractions: Option<Vec<f64>>,
    /// Sparsity ratio between the densest and sparsest block.
    #[arg(long)]
    pub epsilon_ratio: Option<f64>,
    /// Measurement noise variance for the predicted-MSE surface.
    #[arg(long)]
    pub noise_var: Option<f64>,
}

/// Resolves the contour window. Everything has a default: the standard
/// view is the near-complete unit square at a 50 x 50 resolution with
/// unit noise.
pub fn resolve_contour(file: &FileConfig, args: &ContourArgs) -> ContourConfig {
    ContourConfig {
        rho_min: args.rho_min.or(file.rho_min).unwrap_or(0.02),
        rho_max: args.rho_max.or(file.rho_max).unwrap_or(0.98),
        delta_min: args.delta_min.or(file.delta_min).unwrap_or(0.02),
        delta_max: args.delta_max.or(file.delta_max).unwrap_or(0.98),
        grid_width: args.grid_width.or(file.grid_width).unwrap_or(50),
        grid_height: args.grid_height.or(file.grid_height).unwrap_or(50),
        block_fractions: args
            .block_fractions
            .clone()
            .or_else(|| file.block_fractions.clone())
            .unwrap_or_else(|| vec![0.5, 0.5]),
        epsilon_ratio: args.epsilon_ratio.or(file.epsilon_ratio).unwrap_or(100.0),
        noise_var: args.noise_var.or(file.noise_var).unwrap_or(1.0),
    }
}

/// Resolves the ratio list for `sweep-ratio`.
pub fn resolve_ratios(file: &FileConfig, flag: &Option<Vec<f64>>) -> Vec<f64> {
    flag.clone()
        .or_else(|| file.ratios.clone())
        .unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0])
}

/// Resolves the noise-variance list for `sweep-noise`.
pub fn resolve_noise_vars(file: &FileConfig, flag: &Option<Vec<f64>>) -> Vec<f64> {
    flag.clone()
        .or_else(|| file.noise_vars.clone())
        .unwrap_or_else(|| vec![0.2, 0.4, 0.6, 0.8, 1.0])
}
