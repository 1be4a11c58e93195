//! Experiment runner for power-allocated compressed sensing.
//!
//! Five subcommands cover the study workflow end to end: `theory` prints
//! the closed-form quantities at one operating point, `run` executes
//! Monte Carlo trials there, `sweep-ratio` and `sweep-noise` trace the
//! two central comparisons (allocation gain versus sparsity skew, MSE
//! versus noise level), and `contour` maps the predicted MSE over the
//! sparsity/undersampling plane.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, bad
//! config file, invalid or inadmissible parameters), 3 for runtime
//! failures (I/O, numerical breakdown mid-run).

mod config;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use ampalloc::{
    contour_grid, phase_transition_rho, AllocMode, Error, Experiment, Prediction, SweepStats,
};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{
    resolve_contour, resolve_noise_vars, resolve_ratios, resolve_spec, CommonArgs, ContourArgs,
    FileConfig,
};
use output::{cell, cell_or, config_preamble, config_value, emit, with_field, Format, Report};

/// CLI failure, split by whose fault it is.
#[derive(Debug)]
pub enum CliError {
    /// The invocation or configuration is wrong (exit 2).
    Config(String),
    /// The run itself failed (exit 3).
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

/// Classifies a library error: parameter problems are configuration
/// mistakes, everything else is a runtime failure.
fn classify(e: Error) -> CliError {
    match e {
        Error::Domain { .. }
        | Error::DimensionMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::Inadmissible { .. } => CliError::Config(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "ampalloc",
    version,
    about = "Compressed sensing with block-structured sparsity and measurement power allocation"
)]
struct Cli {
    /// TOML config file supplying any omitted parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted). CSV output also writes a JSON
    /// mirror with a .json extension next to it.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form theory at one operating point: per-block risks,
    /// thresholds, amplitudes, allocations, and MSE predictions.
    Theory(CommonArgs),
    /// Monte Carlo reconstruction trials at one operating point.
    Run(CommonArgs),
    /// Sweep the block sparsity ratio, comparing both allocations.
    SweepRatio {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated sparsity ratios to visit.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Sweep the measurement-noise variance and fit MSE-vs-noise lines.
    SweepNoise {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated noise variances to visit.
        #[arg(long, value_delimiter = ',')]
        noise_vars: Option<Vec<f64>>,
    },
    /// Predicted-MSE contour grid over the sparsity/undersampling plane.
    Contour(ContourArgs),
}

fn main() {
    let started = Instant::now();
    let code = match real_main(started) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    };
    std::process::exit(code);
}

fn real_main(started: Instant) -> Result<(), CliError> {
    let cli = Cli::parse();

    if let Ok(threads) = std::env::var("AMPALLOC_THREADS") {
        let count: usize = threads.parse().map_err(|_| {
            CliError::Config(format!(
                "AMPALLOC_THREADS must be a positive integer, got `{threads}`"
            ))
        })?;
        if count == 0 {
            return Err(CliError::Config(
                "AMPALLOC_THREADS must be a positive integer, got `0`".to_string(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot size the thread pool: {e}")))?;
    }

    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let (report, config_echo) = match &cli.command {
        Command::Theory(args) => cmd_theory(&file, args)?,
        Command::Run(args) => cmd_run(&file, args)?,
        Command::SweepRatio { common, ratios } => cmd_sweep_ratio(&file, common, ratios)?,
        Command::SweepNoise { common, noise_vars } => {
            cmd_sweep_noise(&file, common, noise_vars)?
        }
        Command::Contour(args) => cmd_contour(&file, args)?,
    };

    emit(
        &report,
        &config_echo,
        cli.format,
        cli.output.as_deref(),
        started.elapsed().as_secs_f64(),
    )
}

fn prediction_json(p: &Prediction<f64>) -> Value {
    json!({
        "mse": p.mse,
        "converges": p.converges,
        "tau2_per_block": p.tau2_per_block,
        "aggregate_m_sharp": p.aggregate_m_sharp,
    })
}

fn cmd_theory(file: &FileConfig, args: &CommonArgs) -> Result<(Report, Value), CliError> {
    let spec = resolve_spec(file, args)?;
    let experiment = Experiment::new(spec.clone()).map_err(classify)?;
    let delta = spec.m as f64 / spec.n as f64;

    let transition = match phase_transition_rho(delta, spec.epsilon_ratio, &spec.block_fractions)
    {
        Ok(rho) => Some(rho),
        Err(Error::Inadmissible { .. }) => None,
        Err(other) => return Err(classify(other)),
    };
    let uniform = experiment.predicted(AllocMode::Uniform).map_err(classify)?;
    let optimal = experiment.predicted(AllocMode::Optimal).map_err(classify)?;

    let profile = experiment.profile();
    let epsilons = profile.epsilons();
    let sigma2_uniform = experiment.allocation(AllocMode::Uniform).sigma2();
    let sigma2_optimal = experiment.allocation(AllocMode::Optimal).sigma2();

    let mut rows = Vec::new();
    let mut blocks_json = Vec::new();
    for (k, &eps) in epsilons.iter().enumerate() {
        let minimax = &experiment.minimax()[k];
        let mu = experiment.mu_a()[k];
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            k + 1,
            cell(eps),
            cell(minimax.m_sharp),
            cell(minimax.alpha_star),
            cell(mu),
            cell(sigma2_uniform[k]),
            cell(sigma2_optimal[k]),
        ));
        blocks_json.push(json!({
            "block": k + 1,
            "epsilon": eps,
            "m_sharp": minimax.m_sharp,
            "alpha_star": minimax.alpha_star,
            "mu_a": mu,
            "sigma2_uniform": sigma2_uniform[k],
            "sigma2_optimal": sigma2_optimal[k],
        }));
    }
    let mean_epsilon: f64 = spec
        .block_fractions
        .iter()
        .zip(&epsilons)
        .map(|(c, e)| c * e)
        .sum();
    rows.push(format!(
        "all,{},{},,,{},{}",
        cell(mean_epsilon),
        cell(uniform.aggregate_m_sharp),
        cell(1.0),
        cell(1.0),
    ));

    let config_echo = config_value(&spec);
    let mut preamble = config_preamble(&config_echo);
    preamble.push((
        "predicted_mse_uniform".into(),
        cell_or(uniform.mse, "divergent"),
    ));
    preamble.push((
        "predicted_mse_optimal".into(),
        cell_or(optimal.mse, "divergent"),
    ));
    preamble.push((
        "phase_transition_rho".into(),
        cell_or(transition, ""),
    ));
    preamble.push(("converges".into(), uniform.converges.to_string()));

    let report = Report {
        command: "theory",
        preamble,
        header: "block,epsilon,m_sharp,alpha_star,mu_a,sigma2_uniform,sigma2_optimal",
        rows,
        payload: json!({
            "blocks": blocks_json,
            "aggregate_m_sharp": uniform.aggregate_m_sharp,
            "phase_transition_rho": transition,
            "predictions": {
                "uniform": prediction_json(&uniform),
                "optimal": prediction_json(&optimal),
            },
        }),
    };
    Ok((report, config_echo))
}

fn cmd_run(file: &FileConfig, args: &CommonArgs) -> Result<(Report, Value), CliError> {
    let spec = resolve_spec(file, args)?;
    let experiment = Experiment::new(spec.clone()).map_err(classify)?;
    let theory = experiment.predicted(spec.alloc_mode).map_err(classify)?;
    let results = experiment.run().map_err(CliError::runtime)?;
    let stats = SweepStats::from_results(&results, &theory);

    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    for (trial, r) in results.iter().enumerate() {
        let block2 = r.per_block_mse.get(1).copied();
        rows.push(format!(
            "{},{},{},{},{},{},{},{}",
            trial,
            spec.alloc_mode,
            cell(r.mse),
            r.iterations,
            r.converged,
            r.diverged,
            cell(r.per_block_mse[0]),
            cell_or(block2, ""),
        ));
        rows_json.push(json!({
            "trial": trial,
            "alloc_mode": spec.alloc_mode.to_string(),
            "mse": r.mse,
            "iterations": r.iterations,
            "converged": r.converged,
            "diverged": r.diverged,
            "per_block_mse": r.per_block_mse,
        }));
    }

    let config_echo = config_value(&spec);
    let mut preamble = config_preamble(&config_echo);
    preamble.push(("mse_mean".into(), cell(stats.mse_mean)));
    preamble.push(("mse_stderr".into(), cell(stats.mse_stderr)));
    preamble.push((
        "mse_theory".into(),
        cell_or(stats.mse_theory, "divergent"),
    ));

    let report = Report {
        command: "run",
        preamble,
        header: "trial,alloc_mode,mse,iterations,converged,diverged,mse_block_1,mse_block_2",
        rows,
        payload: json!({
            "rows": rows_json,
            "summary": stats,
        }),
    };
    Ok((report, config_echo))
}

fn cmd_sweep_ratio(
    file: &FileConfig,
    common: &CommonArgs,
    ratios_flag: &Option<Vec<f64>>,
) -> Result<(Report, Value), CliError> {
    let spec = resolve_spec(file, common)?;
    let ratios = resolve_ratios(file, ratios_flag);
    if ratios.is_empty() {
        return Err(CliError::Config("ratios list is empty".to_string()));
    }
    let rows_data = ampalloc::sweep_ratio(&spec, &ratios).map_err(classify)?;

    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    for row in &rows_data {
        match &row.stats {
            Some(stats) => {
                rows.push(format!(
                    "{},{},{},{},{},{},0",
                    cell(row.ratio),
                    row.alloc_mode,
                    cell(stats.mse_mean),
                    cell(stats.mse_stderr),
                    cell_or(stats.mse_theory, "divergent"),
                    stats.trials,
                ));
                rows_json.push(json!({
                    "ratio": row.ratio,
                    "alloc_mode": row.alloc_mode.to_string(),
                    "mse_mean": stats.mse_mean,
                    "mse_stderr": stats.mse_stderr,
                    "mse_theory": stats.mse_theory,
                    "trials": stats.trials,
                    "inadmissible": false,
                }));
            }
            None => {
                rows.push(format!("{},{},,,,,1", cell(row.ratio), row.alloc_mode));
                rows_json.push(json!({
                    "ratio": row.ratio,
                    "alloc_mode": row.alloc_mode.to_string(),
                    "mse_mean": null,
                    "mse_stderr": null,
                    "mse_theory": null,
                    "trials": null,
                    "inadmissible": true,
                }));
            }
        }
    }

    let config_echo = with_field(
        config_value(&spec),
        "ratios",
        serde_json::to_value(&ratios).expect("float lists always serialize"),
    );
    let preamble = config_preamble(&config_echo);
    let report = Report {
        command: "sweep-ratio",
        preamble,
        header: "ratio,alloc_mode,mse_mean,mse_stderr,mse_theory,trials,inadmissible",
        rows,
        payload: json!({ "rows": rows_json }),
    };
    Ok((report, config_echo))
}

fn cmd_sweep_noise(
    file: &FileConfig,
    common: &CommonArgs,
    noise_flag: &Option<Vec<f64>>,
) -> Result<(Report, Value), CliError> {
    let spec = resolve_spec(file, common)?;
    let noise_vars = resolve_noise_vars(file, noise_flag);
    let (rows_data, fits) = ampalloc::sweep_noise(&spec, &noise_vars).map_err(classify)?;

    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    for row in &rows_data {
        rows.push(format!(
            "{},{},{},{},{},{}",
            cell(row.noise_var),
            row.alloc_mode,
            cell(row.stats.mse_mean),
            cell(row.stats.mse_stderr),
            cell_or(row.stats.mse_theory, "divergent"),
            row.stats.trials,
        ));
        rows_json.push(json!({
            "noise_var": row.noise_var,
            "alloc_mode": row.alloc_mode.to_string(),
            "mse_mean": row.stats.mse_mean,
            "mse_stderr": row.stats.mse_stderr,
            "mse_theory": row.stats.mse_theory,
            "trials": row.stats.trials,
        }));
    }

    let config_echo = with_field(
        config_value(&spec),
        "noise_vars",
        serde_json::to_value(&noise_vars).expect("float lists always serialize"),
    );
    let mut preamble = config_preamble(&config_echo);
    for fit in &fits {
        for (line, which) in [(&fit.empirical, "empirical"), (&fit.theory, "theory")] {
            let prefix = format!("fit_{}_{}", fit.alloc_mode, which);
            preamble.push((format!("{prefix}_slope"), cell(line.slope)));
            preamble.push((format!("{prefix}_intercept"), cell(line.intercept)));
            preamble.push((format!("{prefix}_r_squared"), cell(line.r_squared)));
        }
    }

    let report = Report {
        command: "sweep-noise",
        preamble,
        header: "noise_var,alloc_mode,mse_mean,mse_stderr,mse_theory,trials",
        rows,
        payload: json!({
            "rows": rows_json,
            "fits": fits,
        }),
    };
    Ok((report, config_echo))
}

fn cmd_contour(file: &FileConfig, args: &ContourArgs) -> Result<(Report, Value), CliError> {
    let c = resolve_contour(file, args);
    let uniform = contour_grid(
        (c.rho_min, c.rho_max),
        (c.delta_min, c.delta_max),
        c.grid_width,
        c.grid_height,
        c.epsilon_ratio,
        &c.block_fractions,
        c.noise_var,
        AllocMode::Uniform,
    )
    .map_err(classify)?;
    let optimal = contour_grid(
        (c.rho_min, c.rho_max),
        (c.delta_min, c.delta_max),
        c.grid_width,
        c.grid_height,
        c.epsilon_ratio,
        &c.block_fractions,
        c.noise_var,
        AllocMode::Optimal,
    )
    .map_err(classify)?;

    let mut rows = Vec::new();
    let mut rows_json = Vec::new();
    for (i, (cu, co)) in uniform.cells.iter().zip(&optimal.cells).enumerate() {
        let transition = uniform.transition_rho[i / c.grid_width];
        let (status, mse_u, mse_o) = match (&cu.prediction, &co.prediction) {
            (None, _) | (_, None) => ("inadmissible", None, None),
            (Some(u), Some(o)) if !u.converges => {
                debug_assert!(!o.converges);
                ("divergent", None, None)
            }
            (Some(u), Some(o)) => ("ok", u.mse, o.mse),
        };
        let marker = if status == "inadmissible" {
            "inadmissible"
        } else {
            "divergent"
        };
        rows.push(format!(
            "{},{},{},{},{},{}",
            cell(cu.rho),
            cell(cu.delta),
            cell_or(mse_u, marker),
            cell_or(mse_o, marker),
            cell_or(transition, ""),
            u8::from(status == "inadmissible"),
        ));
        rows_json.push(json!({
            "rho": cu.rho,
            "delta": cu.delta,
            "status": status,
            "mse_uniform": mse_u,
            "mse_optimal": mse_o,
        }));
    }

    let config_echo = config_value(&c);
    let preamble = config_preamble(&config_echo);
    let report = Report {
        command: "contour",
        preamble,
        header: "rho,delta,mse_uniform,mse_optimal,phase_transition,inadmissible",
        rows,
        payload: json!({
            "rhos": uniform.rhos,
            "deltas": uniform.deltas,
            "cells": rows_json,
            "transition_rho": uniform.transition_rho,
            "inadmissible_rho": uniform.inadmissible_rho,
        }),
    };
    Ok((report, config_echo))
}

impl CliError {
    fn runtime(e: Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
