//! Measurement-power allocation across signal blocks.
//!
//! Each block of columns in the sensing matrix carries its own variance
//! `sigma_k^2`, subject to the budget `sum_k c_k sigma_k^2 = 1` (so total
//! measurement energy matches the uniform design). The limiting MSE is
//! proportional to `sum_k c_k m_sharp(eps_k) / sigma_k^2`, and by
//! Cauchy-Schwarz that is minimized over the budget at
//!
//! ```text
//!     sigma_k^2 = sqrt(m_sharp(eps_k)) / sum_j c_j sqrt(m_sharp(eps_j))
//! ```
//!
//! achieving the objective value `(sum_k c_k sqrt(m_sharp(eps_k)))^2` —
//! sparse blocks are deliberately measured more loudly, dense blocks more
//! quietly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Real;
use crate::risk::minimax_mse;
use crate::state_evolution::BlockProfile;

/// Budget tolerance: `sum_k c_k sigma_k^2` must equal one this tightly.
const BUDGET_TOL: f64 = 1e-10;

/// How measurement power is split across blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocMode {
    /// Every column at unit variance.
    Uniform,
    /// Variances proportional to the square root of each block's minimax
    /// risk, normalized to the unit budget.
    Optimal,
}

impl fmt::Display for AllocMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocMode::Uniform => f.write_str("uniform"),
            AllocMode::Optimal => f.write_str("optimal"),
        }
    }
}

/// Per-block column variances satisfying the unit power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProfile<R: Real> {
    sigma2: Vec<R>,
}

impl<R: Real> AllocationProfile<R> {
    /// Wraps explicit per-block variances, checking positivity and the
    /// budget `sum_k c_k sigma_k^2 = 1` against the given block fractions.
    pub fn new(sigma2: Vec<R>, fractions: &[R]) -> Result<Self> {
        if sigma2.len() != fractions.len() {
            return Err(Error::LengthMismatch {
                what: "allocation variances",
                expected: fractions.len(),
                got: sigma2.len(),
            });
        }
        for &s2 in &sigma2 {
            if !(s2 > R::zero() && s2.is_finite()) {
                return Err(Error::Domain {
                    name: "sigma2",
                    value: s2.as_f64(),
                    requirement: "0 < sigma2 < infinity",
                });
            }
        }
        let budget: R = sigma2
            .iter()
            .zip(fractions)
            .map(|(&s2, &c)| s2 * c)
            .sum();
        if (budget - R::one()).abs() > R::of(BUDGET_TOL) {
            return Err(Error::Domain {
                name: "power budget",
                value: budget.as_f64(),
                requirement: "a fraction-weighted variance sum of 1 within 1e-10",
            });
        }
        Ok(Self { sigma2 })
    }

    /// The uniform allocation: every block at unit variance. Satisfies the
    /// budget for any fractions summing to one.
    pub fn uniform(num_blocks: usize) -> Self {
        Self {
            sigma2: vec![R::one(); num_blocks],
        }
    }

    /// Per-block variances in block order.
    #[inline]
    pub fn sigma2(&self) -> &[R] {
        &self.sigma2
    }

    /// Number of blocks.
    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.sigma2.len()
    }
}

/// The MSE-optimal allocation for a profile: variances proportional to
/// `sqrt(m_sharp(eps_k))`, normalized to the unit budget.
///
/// # Errors
///
/// Propagates [`minimax_mse`] domain errors; a block with `epsilon = 0`
/// (zero risk, zero optimal power) is rejected before division.
pub fn optimal_allocation<R: Real>(profile: &BlockProfile<R>) -> Result<AllocationProfile<R>> {
    let mut roots = Vec::with_capacity(profile.num_blocks());
    let mut norm = R::zero();
    for &(c, prior) in profile.blocks() {
        let m_sharp = minimax_mse(prior.epsilon())?.m_sharp;
        let root = m_sharp.sqrt();
        roots.push(root);
        norm += c * root;
    }
    let sigma2: Vec<R> = roots.into_iter().map(|r| r / norm).collect();
    AllocationProfile::new(sigma2, &profile.fractions())
}

/// The allocation-dependent factor of the limiting MSE,
/// `sum_k c_k m_sharp(eps_k) / sigma_k^2`. Smaller is better; the optimal
/// allocation attains `(sum_k c_k sqrt(m_sharp(eps_k)))^2`.
pub fn allocation_objective<R: Real>(
    profile: &BlockProfile<R>,
    alloc: &AllocationProfile<R>,
) -> Result<R> {
    if alloc.num_blocks() != profile.num_blocks() {
        return Err(Error::LengthMismatch {
            what: "allocation blocks",
            expected: profile.num_blocks(),
            got: alloc.num_blocks(),
        });
    }
    let mut total = R::zero();
    for (k, &(c, prior)) in profile.blocks().iter().enumerate() {
        total += c * minimax_mse(prior.epsilon())?.m_sharp / alloc.sigma2()[k];
    }
    Ok(total)
}

/// Checks the unit power budget of explicit variances against fractions,
/// returning the achieved budget on success.
pub fn validate_budget<R: Real>(sigma2: &[R], fractions: &[R]) -> Result<R> {
    AllocationProfile::new(sigma2.to_vec(), fractions)?;
    Ok(sigma2
        .iter()
        .zip(fractions)
        .map(|(&s2, &c)| s2 * c)
        .sum())
}
