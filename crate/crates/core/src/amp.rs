//! Iterative thresholding reconstruction with per-column power weighting.
//!
//! The engine solves `y = A x + w` for block-sparse `x` where the columns
//! of `A` carry block-dependent variances `sigma_i^2`. Each sweep forms a
//! corrected residual (the memory term keeps the effective observation
//! Gaussian, which is what makes the scalar prediction of
//! [`crate::state_evolution`] apply), then soft-thresholds a power-whitened
//! pseudo-data vector coordinate by coordinate:
//!
//! ```text
//!     r^t     = y - A x^t + (||x^t||_0 / m) r^{t-1}
//!     gamma^t = ||r^t||_2 / sqrt(m)
//!     u_i     = x_i^t + (A^T r^t)_i / sigma_i^2
//!     x_i^{t+1} = eta(u_i ; alpha_i * gamma^t / sigma_i)
//! ```
//!
//! Loud columns (large `sigma_i`) see *smaller* effective noise and are
//! thresholded more gently — exactly the mechanism the power allocation of
//! [`crate::power`] exploits. With all column variances equal to one the
//! sweep reduces to the classical uniform-power iteration.

use ndarray::{Array1, Array2};
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::float::Real;
use crate::risk::soft_threshold;
use crate::state_evolution::BlockProfile;

/// Growth factor over a 10-sweep window that flags divergence.
const DIVERGENCE_FACTOR: f64 = 10.0;
/// Window length for the divergence check.
const DIVERGENCE_WINDOW: usize = 10;

/// A sensing matrix together with its per-column variances.
///
/// The variances are carried explicitly rather than re-estimated from the
/// columns: the whitening and thresholding steps need the *design*
/// variances, not their finite-sample realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOperator<R: Real> {
    matrix: Array2<R>,
    column_variance: Array1<R>,
}

impl<R: Real> SensingOperator<R> {
    /// Wraps an `m x n` matrix (`m < n`) and its `n` column variances.
    pub fn new(matrix: Array2<R>, column_variance: Array1<R>) -> Result<Self> {
        let (m, n) = matrix.dim();
        if m == 0 || n == 0 || m >= n {
            return Err(Error::DimensionMismatch {
                what: "sensing matrix must be strictly undersampled (0 < m < n); rows",
                expected: n.saturating_sub(1),
                got: m,
            });
        }
        if column_variance.len() != n {
            return Err(Error::LengthMismatch {
                what: "column variances",
                expected: n,
                got: column_variance.len(),
            });
        }
        for &v in &column_variance {
            if !(v > R::zero() && v.is_finite()) {
                return Err(Error::Domain {
                    name: "column variance",
                    value: v.as_f64(),
                    requirement: "0 < variance < infinity",
                });
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "sensing matrix entries",
            });
        }
        Ok(Self {
            matrix,
            column_variance,
        })
    }

    /// Measurement count `m`.
    #[inline]
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Signal length `n`.
    #[inline]
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// The matrix itself.
    #[inline]
    pub fn matrix(&self) -> &Array2<R> {
        &self.matrix
    }

    /// Design variance of each column.
    #[inline]
    pub fn column_variance(&self) -> &Array1<R> {
        &self.column_variance
    }

    /// `A x`.
    pub fn apply(&self, x: &Array1<R>) -> Array1<R> {
        self.matrix.dot(x)
    }

    /// `A^T r`.
    pub fn apply_transpose(&self, r: &Array1<R>) -> Array1<R> {
        self.matrix.t().dot(r)
    }
}

/// One sweep's worth of iteration state.
///
/// `residual` is the corrected residual that produced the current `x`
/// (zero before the first sweep, where the memory term vanishes anyway);
/// `residual_prev` is the one before that, kept because the next sweep's
/// memory term needs it.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState<R: Real> {
    pub x: Array1<R>,
    pub residual: Array1<R>,
    pub residual_prev: Array1<R>,
    pub gamma_hat: R,
    pub iter: usize,
}

impl<R: Real> AmpState<R> {
    /// The all-zero starting state.
    pub fn initial(m: usize, n: usize) -> Self {
        Self {
            x: Array1::zeros(n),
            residual: Array1::zeros(m),
            residual_prev: Array1::zeros(m),
            gamma_hat: R::zero(),
            iter: 0,
        }
    }
}

/// Knobs of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig<R: Real> {
    /// Sweep budget.
    pub max_iter: usize,
    /// Relative-change stopping tolerance on the iterate.
    pub x_tol: R,
    /// Threshold multiplier per block (one entry per profile block).
    pub alpha_per_block: Vec<R>,
    /// Record per-sweep noise estimates, support sizes, and (given truth)
    /// MSE values in the diagnostics.
    pub record_trajectory: bool,
    /// Keep the residual memory term. Disabling it degrades the iteration
    /// to plain iterative soft thresholding; exposed for ablations only.
    pub onsager: bool,
}

impl<R: Real> AmpConfig<R> {
    /// Defaults (300 sweeps, 1e-6 relative tolerance, memory term on) with
    /// the given per-block threshold multipliers.
    pub fn new(alpha_per_block: Vec<R>) -> Self {
        Self {
            max_iter: 300,
            x_tol: R::of(1e-6),
            alpha_per_block,
            record_trajectory: false,
            onsager: true,
        }
    }
}

/// Measured behavior of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpDiagnostics<R: Real> {
    /// Sweeps actually executed.
    pub iterations: usize,
    /// Stopped because the iterate settled within `x_tol`.
    pub converged: bool,
    /// Stopped because the noise estimate blew up or turned non-finite.
    pub diverged: bool,
    /// Last residual-based noise estimate.
    pub final_gamma_hat: R,
    /// Nonzero count of the returned iterate.
    pub final_support: usize,
    /// Relative change of the final sweep.
    pub final_rel_change: R,
    /// Mean squared error against the supplied truth, if one was given.
    pub final_mse: Option<R>,
    /// Per-sweep noise estimates (only when recording).
    pub gamma_trajectory: Vec<R>,
    /// Per-sweep support sizes (only when recording).
    pub support_trajectory: Vec<usize>,
    /// Per-sweep MSE against truth (only when recording with truth).
    pub mse_trajectory: Vec<R>,
}

/// Number of exactly nonzero coordinates.
///
/// Soft thresholding produces exact zeros, so counting against zero (not a
/// tolerance) is the right notion of support here — it feeds the memory
/// term's `||x||_0 / m` coefficient.
pub fn count_support<R: Real>(x: &Array1<R>) -> usize {
    x.iter().filter(|v| !v.is_zero()).count()
}

fn mse<R: Real>(x: &Array1<R>, truth: &Array1<R>) -> R {
    let mut total = R::zero();
    for (&a, &b) in x.iter().zip(truth) {
        let d = a - b;
        total += d * d;
    }
    total / R::of_usize(x.len())
}

/// Executes one sweep from `state`, returning the advanced state.
///
/// `alpha` is the per-coordinate threshold multiplier (already expanded
/// from blocks to coordinates). Shapes are validated; values are taken as
/// given — callers detect non-finite blow-ups on the returned state.
pub fn amp_p_step<R: Real>(
    y: &Array1<R>,
    op: &SensingOperator<R>,
    alpha: &Array1<R>,
    state: &AmpState<R>,
    onsager: bool,
) -> Result<AmpState<R>> {
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::LengthMismatch {
            what: "measurement vector",
            expected: m,
            got: y.len(),
        });
    }
    if alpha.len() != n {
        return Err(Error::LengthMismatch {
            what: "threshold multipliers",
            expected: n,
            got: alpha.len(),
        });
    }
    if state.x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "iterate length",
            expected: n,
            got: state.x.len(),
        });
    }
    if state.residual.len() != m {
        return Err(Error::DimensionMismatch {
            what: "residual length",
            expected: m,
            got: state.residual.len(),
        });
    }

    let support = count_support(&state.x);
    let mut residual = y - &op.apply(&state.x);
    if onsager {
        let coef = R::of_usize(support) / R::of_usize(m);
        residual = residual + &(&state.residual * coef);
    }
    let gamma_hat = residual.iter().map(|&r| r * r).sum::<R>().sqrt() / R::of_usize(m).sqrt();

    let x = if gamma_hat.is_finite() {
        let correlation = op.apply_transpose(&residual);
        let mut x = Array1::zeros(n);
        for i in 0..n {
            let s2 = op.column_variance()[i];
            let u = state.x[i] + correlation[i] / s2;
            let threshold = alpha[i] * gamma_hat / s2.sqrt();
            x[i] = soft_threshold(u, threshold);
        }
        x
    } else {
        // The residual blew up; poison the iterate instead of thresholding
        // with a non-finite level. Callers treat this as divergence.
        Array1::from_elem(n, R::nan())
    };

    Ok(AmpState {
        x,
        residual_prev: state.residual.clone(),
        residual,
        gamma_hat,
        iter: state.iter + 1,
    })
}

/// Runs the iteration from the zero state until the iterate settles, the
/// sweep budget runs out, or divergence is detected.
///
/// Returns the final iterate and diagnostics. Divergence (noise estimate
/// growing tenfold over a ten-sweep window, or a non-finite state) is
/// reported in-band via [`AmpDiagnostics::diverged`], not as an error —
/// above the phase transition that outcome is the expected result of the
/// experiment, not a failure of the program. On a non-finite blow-up the
/// last finite iterate is returned.
///
/// `truth`, when given, enables MSE reporting and must have length `n`.
pub fn run_amp<R: Real>(
    y: &Array1<R>,
    op: &SensingOperator<R>,
    profile: &BlockProfile<R>,
    config: &AmpConfig<R>,
    truth: Option<&Array1<R>>,
) -> Result<(Array1<R>, AmpDiagnostics<R>)> {
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::LengthMismatch {
            what: "measurement vector",
            expected: m,
            got: y.len(),
        });
    }
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::LengthMismatch {
                what: "truth vector",
                expected: n,
                got: t.len(),
            });
        }
    }
    if config.alpha_per_block.len() != profile.num_blocks() {
        return Err(Error::LengthMismatch {
            what: "per-block threshold multipliers",
            expected: profile.num_blocks(),
            got: config.alpha_per_block.len(),
        });
    }
    for &a in &config.alpha_per_block {
        if !(a >= R::zero() && a.is_finite()) {
            return Err(Error::Domain {
                name: "alpha",
                value: a.as_f64(),
                requirement: "0 <= alpha < infinity",
            });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "measurement vector",
        });
    }

    // Expand block multipliers to coordinates.
    let lengths = profile.block_lengths(n)?;
    let mut alpha = Array1::zeros(n);
    let mut offset = 0;
    for (k, &len) in lengths.iter().enumerate() {
        for i in offset..offset + len {
            alpha[i] = config.alpha_per_block[k];
        }
        offset += len;
    }

    let mut state = AmpState::<R>::initial(m, n);
    let mut diagnostics = AmpDiagnostics {
        iterations: 0,
        converged: false,
        diverged: false,
        final_gamma_hat: R::zero(),
        final_support: 0,
        final_rel_change: R::infinity(),
        final_mse: None,
        gamma_trajectory: Vec::new(),
        support_trajectory: Vec::new(),
        mse_trajectory: Vec::new(),
    };
    let mut gamma_window: VecDeque<R> = VecDeque::with_capacity(DIVERGENCE_WINDOW + 1);

    for _ in 0..config.max_iter {
        let next = amp_p_step(y, op, &alpha, &state, config.onsager)?;

        if !next.gamma_hat.is_finite() || next.x.iter().any(|v| !v.is_finite()) {
            // Keep the last finite iterate.
            diagnostics.diverged = true;
            diagnostics.iterations = next.iter;
            break;
        }

        let mut diff2 = R::zero();
        let mut prev2 = R::zero();
        for (&a, &b) in next.x.iter().zip(&state.x) {
            let d = a - b;
            diff2 += d * d;
            prev2 += b * b;
        }
        let rel_change = if prev2 > R::zero() {
            (diff2 / prev2).sqrt()
        } else {
            diff2.sqrt()
        };

        state = next;
        diagnostics.iterations = state.iter;
        diagnostics.final_rel_change = rel_change;
        if config.record_trajectory {
            diagnostics.gamma_trajectory.push(state.gamma_hat);
            diagnostics.support_trajectory.push(count_support(&state.x));
            if let Some(t) = truth {
                diagnostics.mse_trajectory.push(mse(&state.x, t));
            }
        }

        gamma_window.push_back(state.gamma_hat);
        if gamma_window.len() > DIVERGENCE_WINDOW {
            let oldest = gamma_window.pop_front().unwrap();
            if state.gamma_hat > R::of(DIVERGENCE_FACTOR) * oldest {
                diagnostics.diverged = true;
                break;
            }
        }

        if rel_change <= config.x_tol {
            diagnostics.converged = true;
            break;
        }
    }

    diagnostics.final_gamma_hat = state.gamma_hat;
    diagnostics.final_support = count_support(&state.x);
    diagnostics.final_mse = truth.map(|t| mse(&state.x, t));
    Ok((state.x, diagnostics))
}
