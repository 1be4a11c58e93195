//! Monte Carlo harness: synthetic instances, reconstruction trials, and
//! parameter sweeps.
//!
//! Everything here is deterministic given the experiment seed. Each trial
//! derives three private generator streams (signal, matrix, noise) from
//! `(seed, trial, stream)` so that results are independent of execution
//! order and thread count, and so that the *same* signal, underlying
//! matrix entries, and noise are reused when only the power allocation or
//! the noise level changes — paired comparisons see genuine differences,
//! not Monte Carlo jitter.
//!
//! This module is deliberately concrete (`f64`): it sits at the outermost
//! layer where results are aggregated and serialized, and the generic
//! scalar machinery of the inner layers would buy nothing here.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{run_amp, AmpConfig, SensingOperator};
use crate::error::{Error, Result};
use crate::power::{optimal_allocation, AllocMode, AllocationProfile};
use crate::risk::{a_least_favorable_mu, minimax_mse, MinimaxResult, ThreePointPrior};
use crate::state_evolution::{epsilons_for_ratio, predicted_mse, BlockProfile, Prediction};

/// Stream tags for the per-trial generators.
const STREAM_SIGNAL: u64 = 1;
const STREAM_MATRIX: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Full description of one Monte Carlo operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Signal length.
    pub n: usize,
    /// Measurement count (`m < n`).
    pub m: usize,
    /// Coordinate fraction per block (one or two blocks, summing to 1).
    pub block_fractions: Vec<f64>,
    /// Sparsity ratio between the densest and sparsest block (`>= 1`).
    pub epsilon_ratio: f64,
    /// Mean nonzero count per measurement.
    pub rho: f64,
    /// Measurement noise variance.
    pub noise_var: f64,
    /// Near-worst-case margin for the signal amplitude: nonzeros are
    /// placed at the smallest amplitude whose optimally-thresholded risk
    /// reaches `(1 - a)` of the worst case.
    pub a_param: f64,
    /// Monte Carlo repetitions.
    pub trials: usize,
    /// Master seed; every random draw in the experiment derives from it.
    pub seed: u64,
    /// Power allocation under test.
    pub alloc_mode: AllocMode,
}

/// One reconstruction outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Mean squared error over all coordinates.
    pub mse: f64,
    /// Sweeps executed.
    pub iterations: usize,
    /// Settled within tolerance (and did not blow up).
    pub converged: bool,
    /// Noise estimate blew up.
    pub diverged: bool,
    /// Mean squared error within each block, in block order.
    pub per_block_mse: Vec<f64>,
}

/// A validated operating point with its derived theory cached: priors at
/// the near-worst-case amplitude, per-block threshold tuning, and both
/// power allocations.
#[derive(Debug, Clone)]
pub struct Experiment {
    spec: ExperimentSpec,
    profile: BlockProfile<f64>,
    minimax: Vec<MinimaxResult<f64>>,
    mu_a: Vec<f64>,
    uniform: AllocationProfile<f64>,
    optimal: AllocationProfile<f64>,
    /// Iteration knobs, initialized to the per-block minimax multipliers;
    /// callers may tighten tolerances or toggle trajectory recording.
    pub amp: AmpConfig<f64>,
}

impl Experiment {
    /// Validates a spec and derives its theory.
    ///
    /// # Errors
    ///
    /// Domain errors for out-of-range parameters, [`Error::Inadmissible`]
    /// when the implied densest-block sparsity reaches 1, and length
    /// errors when the block fractions do not split `n` into whole
    /// coordinates.
    pub fn new(spec: ExperimentSpec) -> Result<Self> {
        if spec.m == 0 || spec.m >= spec.n {
            return Err(Error::DimensionMismatch {
                what: "measurement count must satisfy 0 < m < n; rows",
                expected: spec.n.saturating_sub(1),
                got: spec.m,
            });
        }
        if spec.trials == 0 {
            return Err(Error::Domain {
                name: "trials",
                value: 0.0,
                requirement: "at least one trial",
            });
        }
        if !(spec.noise_var >= 0.0 && spec.noise_var.is_finite()) {
            return Err(Error::Domain {
                name: "noise_var",
                value: spec.noise_var,
                requirement: "0 <= noise_var < infinity",
            });
        }
        let delta = spec.m as f64 / spec.n as f64;
        let epsilons = epsilons_for_ratio(spec.rho, delta, spec.epsilon_ratio, &spec.block_fractions)?;

        let mut minimax = Vec::with_capacity(epsilons.len());
        let mut mu_a = Vec::with_capacity(epsilons.len());
        let mut blocks = Vec::with_capacity(epsilons.len());
        for (&c, &eps) in spec.block_fractions.iter().zip(&epsilons) {
            minimax.push(minimax_mse(eps)?);
            let mu = a_least_favorable_mu(eps, spec.a_param)?;
            mu_a.push(mu);
            blocks.push((c, ThreePointPrior::new(eps, mu)?));
        }
        let profile = BlockProfile::new(blocks, delta)?;
        profile.block_lengths(spec.n)?;

        let uniform = AllocationProfile::uniform(profile.num_blocks());
        let optimal = optimal_allocation(&profile)?;
        let amp = AmpConfig::new(minimax.iter().map(|r| r.alpha_star).collect());

        Ok(Self {
            spec,
            profile,
            minimax,
            mu_a,
            uniform,
            optimal,
            amp,
        })
    }

    /// The validated spec.
    #[inline]
    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    /// Block structure with the near-worst-case priors.
    #[inline]
    pub fn profile(&self) -> &BlockProfile<f64> {
        &self.profile
    }

    /// Per-block minimax risk and threshold tuning.
    #[inline]
    pub fn minimax(&self) -> &[MinimaxResult<f64>] {
        &self.minimax
    }

    /// Per-block near-worst-case amplitudes.
    #[inline]
    pub fn mu_a(&self) -> &[f64] {
        &self.mu_a
    }

    /// The allocation a mode selects.
    pub fn allocation(&self, mode: AllocMode) -> &AllocationProfile<f64> {
        match mode {
            AllocMode::Uniform => &self.uniform,
            AllocMode::Optimal => &self.optimal,
        }
    }

    /// Limiting-MSE prediction for a mode at this operating point.
    pub fn predicted(&self, mode: AllocMode) -> Result<Prediction<f64>> {
        predicted_mse(&self.profile, self.allocation(mode), self.spec.noise_var)
    }

    /// Runs one trial under the spec's own allocation mode.
    pub fn run_trial(&self, trial: u64) -> Result<TrialResult> {
        self.run_trial_with_mode(self.spec.alloc_mode, trial)
    }

    /// Runs one trial under an explicit allocation mode.
    ///
    /// Trials are indexed, not iterated: trial `t` draws from generator
    /// streams derived from `(seed, t)`, so any subset of trials can be
    /// reproduced in isolation and in any order.
    pub fn run_trial_with_mode(&self, mode: AllocMode, trial: u64) -> Result<TrialResult> {
        let spec = &self.spec;
        let lengths = self.profile.block_lengths(spec.n)?;
        let priors: Vec<ThreePointPrior<f64>> =
            self.profile.blocks().iter().map(|&(_, p)| p).collect();

        let mut signal_rng = trial_rng(spec.seed, trial, STREAM_SIGNAL);
        let x = gen_signal(&lengths, &priors, &mut signal_rng)?;

        let mut matrix_rng = trial_rng(spec.seed, trial, STREAM_MATRIX);
        let sigma2 = self.allocation(mode).sigma2();
        let a = gen_matrix(spec.m, &lengths, sigma2, &mut matrix_rng);

        let mut column_variance = Array1::zeros(spec.n);
        let mut offset = 0;
        for (k, &len) in lengths.iter().enumerate() {
            for i in offset..offset + len {
                column_variance[i] = sigma2[k];
            }
            offset += len;
        }
        let op = SensingOperator::new(a, column_variance)?;

        let mut noise_rng = trial_rng(spec.seed, trial, STREAM_NOISE);
        let mut y = op.apply(&x);
        if spec.noise_var > 0.0 {
            let sd = spec.noise_var.sqrt();
            for v in y.iter_mut() {
                *v += sd * noise_rng.sample::<f64, _>(StandardNormal);
            }
        }

        let (x_hat, diag) = run_amp(&y, &op, &self.profile, &self.amp, Some(&x))?;

        let mut per_block_mse = Vec::with_capacity(lengths.len());
        let mut offset = 0;
        for &len in &lengths {
            let mut ss = 0.0;
            for i in offset..offset + len {
                let d = x_hat[i] - x[i];
                ss += d * d;
            }
            per_block_mse.push(ss / len as f64);
            offset += len;
        }

        Ok(TrialResult {
            mse: diag.final_mse.expect("truth was supplied"),
            iterations: diag.iterations,
            converged: diag.converged && !diag.diverged,
            diverged: diag.diverged,
            per_block_mse,
        })
    }

    /// Runs all trials of the spec under an explicit allocation mode.
    ///
    /// Trials run in parallel; the result order is by trial index and the
    /// values are identical whatever the thread count.
    pub fn run_mode(&self, mode: AllocMode) -> Result<Vec<TrialResult>> {
        (0..self.spec.trials as u64)
            .into_par_iter()
            .map(|trial| self.run_trial_with_mode(mode, trial))
            .collect()
    }

    /// Runs all trials under the spec's own allocation mode.
    pub fn run(&self) -> Result<Vec<TrialResult>> {
        self.run_mode(self.spec.alloc_mode)
    }
}

/// Derives the generator for one `(seed, trial, stream)` triple.
///
/// The triple is mixed through a 64-bit finalizer before keying the
/// stream cipher, so neighboring trials and streams share no structure.
fn trial_rng(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed
        ^ trial.wrapping_mul(0xA076_1D64_78BD_642F)
        ^ stream.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// One step of the splitmix64 sequence.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a block-structured three-point signal: coordinate `i` in block
/// `k` is `0` with probability `1 - eps_k` and `+/- mu_k` with probability
/// `eps_k / 2` each, decided by a single uniform draw per coordinate.
///
/// Rejects priors with infinite amplitude — those are analysis devices,
/// not samplable distributions.
pub fn gen_signal(
    lengths: &[usize],
    priors: &[ThreePointPrior<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    if lengths.len() != priors.len() {
        return Err(Error::LengthMismatch {
            what: "signal priors",
            expected: lengths.len(),
            got: priors.len(),
        });
    }
    for p in priors {
        if !p.mu().is_finite() {
            return Err(Error::NonFinite {
                what: "signal amplitude (cannot sample an infinite-amplitude prior)",
            });
        }
    }
    let n: usize = lengths.iter().sum();
    let mut x = Array1::zeros(n);
    let mut offset = 0;
    for (k, &len) in lengths.iter().enumerate() {
        let eps = priors[k].epsilon();
        let mu = priors[k].mu();
        for i in offset..offset + len {
            let u: f64 = rng.random();
            x[i] = if u < 1.0 - eps {
                0.0
            } else if u < 1.0 - eps / 2.0 {
                mu
            } else {
                -mu
            };
        }
        offset += len;
    }
    Ok(x)
}

/// Draws an `m x (sum of lengths)` sensing matrix with independent
/// `N(0, sigma2_k / m)` entries, block by block.
///
/// The underlying standard normals are drawn column-major and scaled
/// afterwards, so two calls with the same generator state and different
/// variances produce *proportional* columns — the coupling that makes
/// allocation comparisons paired.
pub fn gen_matrix(
    m: usize,
    lengths: &[usize],
    sigma2: &[f64],
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let n: usize = lengths.iter().sum();
    let mut a = Array2::zeros((m, n));
    let mut col = 0;
    for (k, &len) in lengths.iter().enumerate() {
        let scale = (sigma2[k] / m as f64).sqrt();
        for j in col..col + len {
            for i in 0..m {
                a[[i, j]] = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        col += len;
    }
    a
}

/// Mean, standard error, and prediction for one cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    /// Sample mean of the per-trial MSE.
    pub mse_mean: f64,
    /// Standard error of that mean (sample standard deviation over
    /// `sqrt(trials)`; zero for a single trial).
    pub mse_stderr: f64,
    /// Limiting-MSE prediction; `None` where state evolution diverges.
    pub mse_theory: Option<f64>,
    /// Trials aggregated.
    pub trials: usize,
}

impl SweepStats {
    /// Aggregates per-trial errors and pairs them with a prediction.
    pub fn from_results(results: &[TrialResult], theory: &Prediction<f64>) -> Self {
        let n = results.len();
        let mean = results.iter().map(|r| r.mse).sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = results.iter().map(|r| (r.mse - mean).powi(2)).sum::<f64>()
                / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mse_mean: mean,
            mse_stderr: stderr,
            mse_theory: theory.mse,
            trials: n,
        }
    }
}

/// One row of a sparsity-ratio sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSweepRow {
    pub ratio: f64,
    pub alloc_mode: AllocMode,
    /// `None` when the ratio makes the densest block inadmissible.
    pub stats: Option<SweepStats>,
}

/// Sweeps the block sparsity ratio, running both allocation modes at every
/// admissible ratio on paired instances.
///
/// Rows come in ratio order, uniform before optimal. Inadmissible ratios
/// yield marker rows instead of failing the sweep.
pub fn sweep_ratio(base: &ExperimentSpec, ratios: &[f64]) -> Result<Vec<RatioSweepRow>> {
    let mut rows = Vec::with_capacity(ratios.len() * 2);
    for &ratio in ratios {
        let spec = ExperimentSpec {
            epsilon_ratio: ratio,
            ..base.clone()
        };
        match Experiment::new(spec) {
            Err(Error::Inadmissible { .. }) => {
                for mode in [AllocMode::Uniform, AllocMode::Optimal] {
                    rows.push(RatioSweepRow {
                        ratio,
                        alloc_mode: mode,
                        stats: None,
                    });
                }
            }
            Err(other) => return Err(other),
            Ok(experiment) => {
                for mode in [AllocMode::Uniform, AllocMode::Optimal] {
                    let results = experiment.run_mode(mode)?;
                    let theory = experiment.predicted(mode)?;
                    rows.push(RatioSweepRow {
                        ratio,
                        alloc_mode: mode,
                        stats: Some(SweepStats::from_results(&results, &theory)),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// One row of a noise sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepRow {
    pub noise_var: f64,
    pub alloc_mode: AllocMode,
    pub stats: SweepStats,
}

/// Ordinary least-squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; defined as 1 when the responses are
    /// constant (a constant is fit exactly by the line).
    pub r_squared: f64,
}

impl LinearFit {
    /// Fits `y ~ slope * x + intercept` by least squares.
    ///
    /// Needs at least two distinct abscissae.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                what: "fit points",
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let n = xs.len() as f64;
        if xs.len() < 2 {
            return Err(Error::Domain {
                name: "fit points",
                value: n,
                requirement: "at least two points",
            });
        }
        let x_mean = xs.iter().sum::<f64>() / n;
        let y_mean = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::Domain {
                name: "fit abscissae",
                value: x_mean,
                requirement: "at least two distinct x values",
            });
        }
        let sxy: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (x - x_mean) * (y - y_mean))
            .sum();
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
            .sum();
        let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
        let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
        Ok(Self {
            slope,
            intercept,
            r_squared,
        })
    }
}

/// Fitted linearity of MSE in the noise variance, for one allocation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    pub alloc_mode: AllocMode,
    /// Line through the Monte Carlo means.
    pub empirical: LinearFit,
    /// Line through the predictions (exactly linear by construction).
    pub theory: LinearFit,
}

/// Sweeps the measurement-noise variance at a fixed operating point,
/// running both allocation modes on paired instances, and fits the
/// MSE-versus-variance lines.
///
/// The operating point must be admissible and below the phase transition
/// boundary is not required — but a diverging point yields no theory line,
/// which is reported as an error since the sweep exists to measure the
/// noise sensitivity of a *working* configuration.
pub fn sweep_noise(
    base: &ExperimentSpec,
    noise_vars: &[f64],
) -> Result<(Vec<NoiseSweepRow>, Vec<NoiseFit>)> {
    if noise_vars.len() < 2 {
        return Err(Error::Domain {
            name: "noise_vars",
            value: noise_vars.len() as f64,
            requirement: "at least two noise levels to fit a line",
        });
    }
    let mut rows = Vec::with_capacity(noise_vars.len() * 2);
    for &noise_var in noise_vars {
        let spec = ExperimentSpec {
            noise_var,
            ..base.clone()
        };
        let experiment = Experiment::new(spec)?;
        for mode in [AllocMode::Uniform, AllocMode::Optimal] {
            let results = experiment.run_mode(mode)?;
            let theory = experiment.predicted(mode)?;
            if theory.mse.is_none() {
                return Err(Error::Divergent {
                    aggregate: theory.aggregate_m_sharp,
                    delta: experiment.profile.delta(),
                });
            }
            rows.push(NoiseSweepRow {
                noise_var,
                alloc_mode: mode,
                stats: SweepStats::from_results(&results, &theory),
            });
        }
    }
    let mut fits = Vec::with_capacity(2);
    for mode in [AllocMode::Uniform, AllocMode::Optimal] {
        let mode_rows: Vec<&NoiseSweepRow> =
            rows.iter().filter(|r| r.alloc_mode == mode).collect();
        let xs: Vec<f64> = mode_rows.iter().map(|r| r.noise_var).collect();
        let ys: Vec<f64> = mode_rows.iter().map(|r| r.stats.mse_mean).collect();
        let ts: Vec<f64> = mode_rows
            .iter()
            .map(|r| r.stats.mse_theory.expect("checked above"))
            .collect();
        fits.push(NoiseFit {
            alloc_mode: mode,
            empirical: LinearFit::fit(&xs, &ys)?,
            theory: LinearFit::fit(&xs, &ts)?,
        });
    }
    Ok((rows, fits))
}
