//! Compressed-sensing reconstruction for signals whose sparsity varies by
//! block, with measurement power allocated to match.
//!
//! When some blocks of a signal are much denser than others, spending the
//! sensing-energy budget unevenly across matrix columns buys a strictly
//! better reconstruction error at the same measurement count. This crate
//! provides the full toolchain for studying and exploiting that effect:
//!
//! * [`risk`] — the scalar calculus of soft thresholding: exact risk
//!   formulas, the sparsity-indexed minimax risk and its optimal
//!   threshold, and near-worst-case signal amplitudes.
//! * [`state_evolution`] — large-system MSE predictions for block-sparse
//!   signals, the convergence/divergence boundary (phase transition), and
//!   dense contour maps over the sparsity/undersampling plane.
//! * [`power`] — the closed-form optimal split of the power budget across
//!   blocks, and the objective it minimizes.
//! * [`amp`] — the iterative thresholding engine with per-column power
//!   weighting and a residual memory term, whose empirical behavior the
//!   state evolution predicts.
//! * [`experiment`] — a deterministic Monte Carlo harness pairing both
//!   allocation strategies on identical instances, plus ratio and noise
//!   sweeps with line fits.
//! * [`special`] and [`optim`] — the small numerical substrate (normal
//!   pdf/cdf, scalar minimization, bisection).
//!
//! The mathematical layers are generic over the scalar type through
//! [`Real`] (any of `f32`/`f64`); the experiment layer and the aliases at
//! the crate root fix `f64`, which is what the binaries use.
//!
//! # Example
//!
//! Predict the limiting MSE of both allocations at one operating point:
//!
//! ```
//! use ampalloc::{
//!     epsilons_for_ratio, optimal_allocation, predicted_mse, Allocation64,
//!     BlockProfile64, Prior64,
//! };
//!
//! // Half the coordinates 30x denser than the other half, delta = 1/2.
//! let eps = epsilons_for_ratio(0.2, 0.5, 30.0, &[0.5, 0.5]).unwrap();
//! let profile = BlockProfile64::new(
//!     vec![
//!         (0.5, Prior64::least_favorable(eps[0]).unwrap()),
//!         (0.5, Prior64::least_favorable(eps[1]).unwrap()),
//!     ],
//!     0.5,
//! )
//! .unwrap();
//! let uniform = predicted_mse(&profile, &Allocation64::uniform(2), 0.2).unwrap();
//! let optimal =
//!     predicted_mse(&profile, &optimal_allocation(&profile).unwrap(), 0.2).unwrap();
//! assert!(optimal.mse.unwrap() < uniform.mse.unwrap());
//! ```

pub mod amp;
pub mod error;
pub mod experiment;
mod float;
pub mod optim;
pub mod power;
pub mod risk;
pub mod special;
pub mod state_evolution;

pub use amp::{
    amp_p_step, count_support, run_amp, AmpConfig, AmpDiagnostics, AmpState, SensingOperator,
};
pub use error::{Error, Result};
pub use experiment::{
    gen_matrix, gen_signal, sweep_noise, sweep_ratio, Experiment, ExperimentSpec, LinearFit,
    NoiseFit, NoiseSweepRow, RatioSweepRow, SweepStats, TrialResult,
};
pub use float::Real;
pub use power::{
    allocation_objective, optimal_allocation, validate_budget, AllocMode, AllocationProfile,
};
pub use risk::{
    a_least_favorable_mu, minimax_mse, mixture_risk, scale_risk, soft_threshold, st_risk,
    MinimaxResult, ThreePointPrior,
};
pub use special::{std_normal_cdf, std_normal_pdf};
pub use state_evolution::{
    aggregate_minimax, contour_grid, convergence_check, epsilons_for_ratio, phase_transition_rho,
    predicted_mse, steady_state_tau, BlockProfile, ContourCell, ContourGrid, Prediction,
};

/// [`ThreePointPrior`] at the default precision.
pub type Prior64 = ThreePointPrior<f64>;
/// [`MinimaxResult`] at the default precision.
pub type Minimax64 = MinimaxResult<f64>;
/// [`BlockProfile`] at the default precision.
pub type BlockProfile64 = BlockProfile<f64>;
/// [`Prediction`] at the default precision.
pub type Prediction64 = Prediction<f64>;
/// [`ContourGrid`] at the default precision.
pub type ContourGrid64 = ContourGrid<f64>;
/// [`AllocationProfile`] at the default precision.
pub type Allocation64 = AllocationProfile<f64>;
/// [`SensingOperator`] at the default precision.
pub type SensingOperator64 = SensingOperator<f64>;
/// [`AmpConfig`] at the default precision.
pub type AmpConfig64 = AmpConfig<f64>;
/// [`AmpState`] at the default precision.
pub type AmpState64 = AmpState<f64>;
/// [`AmpDiagnostics`] at the default precision.
pub type AmpDiagnostics64 = AmpDiagnostics<f64>;
