//! Large-system MSE prediction for block-sparse reconstruction.
//!
//! In the large-system limit the iterative engine of [`crate::amp`]
//! decouples into independent scalar problems: coordinate `i` with
//! per-column measurement power `sigma_i^2` sees an effective Gaussian
//! noise level `tau_i = gamma / sigma_i`, where `gamma^2` aggregates the
//! not-yet-resolved signal energy plus the measurement noise. Tracking
//! `gamma` across iterations ("state evolution") gives a fixed-point
//! equation whose solution predicts the reconstruction MSE exactly in the
//! limit — and the fixed point exists precisely when the per-measurement
//! aggregate minimax risk stays below the undersampling ratio `delta`.
//! That threshold is the *phase transition*: below it the noiseless
//! problem is solved exactly, above it no threshold schedule converges.
//!
//! The signal model is piecewise: coordinates come in blocks of fractions
//! `c_k` (summing to one), each with its own three-point prior, and the
//! per-block measurement power is chosen by [`crate::power`].

use crate::error::{Error, Result};
use crate::float::Real;
use crate::optim::bisect_increasing;
use crate::power::{optimal_allocation, AllocMode, AllocationProfile};
use crate::risk::{minimax_mse, ThreePointPrior};

/// Fraction tolerance: block fractions must sum to one this tightly.
const FRACTION_SUM_TOL: f64 = 1e-12;

/// Block-structured signal description: per-block coordinate fractions and
/// priors, plus the undersampling ratio `delta = m / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProfile<R: Real> {
    blocks: Vec<(R, ThreePointPrior<R>)>,
    delta: R,
}

impl<R: Real> BlockProfile<R> {
    /// Creates a profile from `(fraction, prior)` pairs and `delta`.
    ///
    /// Fractions must be strictly positive and sum to one within 1e-12;
    /// `delta` must lie strictly inside `(0, 1)`.
    pub fn new(blocks: Vec<(R, ThreePointPrior<R>)>, delta: R) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Domain {
                name: "blocks",
                value: 0.0,
                requirement: "at least one block",
            });
        }
        if !(delta > R::zero() && delta < R::one()) {
            return Err(Error::Domain {
                name: "delta",
                value: delta.as_f64(),
                requirement: "0 < delta < 1",
            });
        }
        let mut sum = R::zero();
        for &(c, _) in &blocks {
            if !(c > R::zero() && c <= R::one()) {
                return Err(Error::Domain {
                    name: "block fraction",
                    value: c.as_f64(),
                    requirement: "0 < fraction <= 1",
                });
            }
            sum += c;
        }
        if (sum - R::one()).abs() > R::of(FRACTION_SUM_TOL) {
            return Err(Error::Domain {
                name: "block fractions",
                value: sum.as_f64(),
                requirement: "fractions summing to 1 within 1e-12",
            });
        }
        Ok(Self { blocks, delta })
    }

    /// Single uniform block covering every coordinate.
    pub fn uniform(prior: ThreePointPrior<R>, delta: R) -> Result<Self> {
        Self::new(vec![(R::one(), prior)], delta)
    }

    /// `(fraction, prior)` pairs in block order.
    #[inline]
    pub fn blocks(&self) -> &[(R, ThreePointPrior<R>)] {
        &self.blocks
    }

    /// Number of blocks.
    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Undersampling ratio `m / n`.
    #[inline]
    pub fn delta(&self) -> R {
        self.delta
    }

    /// Block fractions in order.
    pub fn fractions(&self) -> Vec<R> {
        self.blocks.iter().map(|&(c, _)| c).collect()
    }

    /// Per-block nonzero fractions in order.
    pub fn epsilons(&self) -> Vec<R> {
        self.blocks.iter().map(|&(_, p)| p.epsilon()).collect()
    }

    /// Concrete block lengths for a signal of `n` coordinates.
    ///
    /// Errors unless every `fraction * n` is an integer (within a 1e-6
    /// count tolerance) and the lengths add back up to `n`.
    pub fn block_lengths(&self, n: usize) -> Result<Vec<usize>> {
        let mut lengths = Vec::with_capacity(self.blocks.len());
        let mut total = 0usize;
        for &(c, _) in &self.blocks {
            let exact = c.as_f64() * n as f64;
            let rounded = exact.round();
            if (exact - rounded).abs() > 1e-6 || rounded < 1.0 {
                return Err(Error::Domain {
                    name: "block fraction",
                    value: c.as_f64(),
                    requirement: "a fraction splitting n into whole coordinates",
                });
            }
            lengths.push(rounded as usize);
            total += rounded as usize;
        }
        if total != n {
            return Err(Error::LengthMismatch {
                what: "block lengths",
                expected: n,
                got: total,
            });
        }
        Ok(lengths)
    }
}

/// State-evolution output for one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<R: Real> {
    /// Predicted per-coordinate MSE; `None` marks a divergent point (at or
    /// above the phase transition), where no finite fixed point exists.
    pub mse: Option<R>,
    /// Fixed-point effective noise variances `tau_k^2`, one per block;
    /// empty when divergent.
    pub tau2_per_block: Vec<R>,
    /// Whether state evolution contracts at this operating point.
    pub converges: bool,
    /// Aggregate per-coordinate minimax MSE `sum_k c_k m_sharp(eps_k)`.
    pub aggregate_m_sharp: R,
}

/// Aggregate per-coordinate minimax MSE of a profile:
/// `sum_k c_k * m_sharp(epsilon_k)`.
///
/// Propagates [`minimax_mse`] domain errors (for example a block with
/// `epsilon = 0`).
pub fn aggregate_minimax<R: Real>(profile: &BlockProfile<R>) -> Result<R> {
    let mut total = R::zero();
    for &(c, prior) in profile.blocks() {
        total += c * minimax_mse(prior.epsilon())?.m_sharp;
    }
    Ok(total)
}

/// Whether state evolution contracts: `aggregate_minimax / delta < 1`.
///
/// This condition does not involve the power allocation at all — power
/// shapes the limiting MSE but never the phase transition.
pub fn convergence_check<R: Real>(profile: &BlockProfile<R>) -> Result<bool> {
    Ok(aggregate_minimax(profile)? < profile.delta())
}

/// Fixed-point effective noise variances `tau_k^2`, one per block, for a
/// given power allocation and measurement-noise variance.
///
/// The fixed point satisfies, for every block `k`,
///
/// ```text
///     tau_k^2 = (1 / sigma_k^2) * [ (1/delta) * sum_j c_j sigma_j^2 m_sharp(eps_j) tau_j^2 + noise_var ]
/// ```
///
/// whose closed-form solution is
/// `tau_k^2 = (noise_var / sigma_k^2) / (1 - aggregate_minimax / delta)`.
/// The residual of the defining equation is verified to 1e-10 (relative)
/// before returning.
///
/// # Errors
///
/// [`Error::Divergent`] when the convergence condition fails;
/// domain/length errors for invalid inputs.
pub fn steady_state_tau<R: Real>(
    profile: &BlockProfile<R>,
    alloc: &AllocationProfile<R>,
    noise_var: R,
) -> Result<Vec<R>> {
    if !(noise_var >= R::zero() && noise_var.is_finite()) {
        return Err(Error::Domain {
            name: "noise_var",
            value: noise_var.as_f64(),
            requirement: "0 <= noise_var < infinity",
        });
    }
    if alloc.num_blocks() != profile.num_blocks() {
        return Err(Error::LengthMismatch {
            what: "allocation blocks",
            expected: profile.num_blocks(),
            got: alloc.num_blocks(),
        });
    }
    let aggregate = aggregate_minimax(profile)?;
    let delta = profile.delta();
    if aggregate >= delta {
        return Err(Error::Divergent {
            aggregate: aggregate.as_f64(),
            delta: delta.as_f64(),
        });
    }
    let shrink = R::one() - aggregate / delta;
    let tau2: Vec<R> = alloc
        .sigma2()
        .iter()
        .map(|&s2| noise_var / s2 / shrink)
        .collect();

    // Self-check: plug the solution back into the defining equation. The
    // tolerance is 1e-10 relative at f64, widening with the scalar's own
    // precision so that narrower types stay checkable.
    let mut recycled = R::zero();
    for (k, &(c, prior)) in profile.blocks().iter().enumerate() {
        recycled += c * alloc.sigma2()[k] * minimax_mse(prior.epsilon())?.m_sharp * tau2[k];
    }
    let gamma2 = recycled / delta + noise_var;
    let rel_tol = R::of(1e-10).max(R::epsilon() * R::of(256.0));
    for (k, &t2) in tau2.iter().enumerate() {
        let lhs = t2 * alloc.sigma2()[k];
        let scale = lhs.abs().max(gamma2.abs()).max(R::min_positive_value());
        if (lhs - gamma2).abs() > rel_tol * scale {
            return Err(Error::NonFinite {
                what: "state-evolution fixed-point residual",
            });
        }
    }
    Ok(tau2)
}

/// Predicted per-coordinate reconstruction MSE at an operating point:
///
/// ```text
///     mse = [ sum_k c_k m_sharp(eps_k) / sigma_k^2 ] / [ 1 - aggregate_minimax / delta ] * noise_var
/// ```
///
/// Returns the divergent marker (in-band, `mse = None`) instead of erroring
/// when the convergence condition fails; the prediction is exactly linear
/// in `noise_var` for converging profiles.
pub fn predicted_mse<R: Real>(
    profile: &BlockProfile<R>,
    alloc: &AllocationProfile<R>,
    noise_var: R,
) -> Result<Prediction<R>> {
    if !(noise_var >= R::zero() && noise_var.is_finite()) {
        return Err(Error::Domain {
            name: "noise_var",
            value: noise_var.as_f64(),
            requirement: "0 <= noise_var < infinity",
        });
    }
    if alloc.num_blocks() != profile.num_blocks() {
        return Err(Error::LengthMismatch {
            what: "allocation blocks",
            expected: profile.num_blocks(),
            got: alloc.num_blocks(),
        });
    }
    let aggregate = aggregate_minimax(profile)?;
    let delta = profile.delta();
    if aggregate >= delta {
        return Ok(Prediction {
            mse: None,
            tau2_per_block: Vec::new(),
            converges: false,
            aggregate_m_sharp: aggregate,
        });
    }
    let tau2 = steady_state_tau(profile, alloc, noise_var)?;
    let mut weighted = R::zero();
    for (k, &(c, prior)) in profile.blocks().iter().enumerate() {
        weighted += c * minimax_mse(prior.epsilon())?.m_sharp / alloc.sigma2()[k];
    }
    let mse = weighted / (R::one() - aggregate / delta) * noise_var;
    Ok(Prediction {
        mse: Some(mse),
        tau2_per_block: tau2,
        converges: true,
        aggregate_m_sharp: aggregate,
    })
}

/// Per-block nonzero fractions induced by an overall sparsity level.
///
/// `rho` is the mean nonzero count per *measurement*, so the per-coordinate
/// mean nonzero fraction is `rho * delta`. For a single block that is the
/// answer directly (and `ratio` must be 1). For two blocks the fractions
/// are split so that `eps_1 / eps_2 = ratio` with block weights honored:
///
/// ```text
///     eps_2 = rho * delta / (c_1 * ratio + c_2),      eps_1 = ratio * eps_2
/// ```
///
/// (for even blocks this is `eps_2 = 2 rho delta / (1 + ratio)`).
///
/// # Errors
///
/// [`Error::Inadmissible`] if the densest block would need `eps_1 >= 1`;
/// domain errors for invalid `rho`, `delta`, `ratio`, or fraction lists
/// other than one or two blocks.
pub fn epsilons_for_ratio<R: Real>(
    rho: R,
    delta: R,
    ratio: R,
    fractions: &[R],
) -> Result<Vec<R>> {
    if !(rho > R::zero() && rho.is_finite()) {
        return Err(Error::Domain {
            name: "rho",
            value: rho.as_f64(),
            requirement: "0 < rho < infinity",
        });
    }
    if !(delta > R::zero() && delta < R::one()) {
        return Err(Error::Domain {
            name: "delta",
            value: delta.as_f64(),
            requirement: "0 < delta < 1",
        });
    }
    if !(ratio >= R::one() && ratio.is_finite()) {
        return Err(Error::Domain {
            name: "ratio",
            value: ratio.as_f64(),
            requirement: "1 <= ratio < infinity",
        });
    }
    let mean = rho * delta;
    match fractions {
        [_] => {
            if ratio != R::one() {
                return Err(Error::Domain {
                    name: "ratio",
                    value: ratio.as_f64(),
                    requirement: "exactly 1 for a single-block profile",
                });
            }
            if mean >= R::one() {
                return Err(Error::Inadmissible {
                    epsilon: mean.as_f64(),
                });
            }
            Ok(vec![mean])
        }
        [c1, c2] => {
            let eps2 = mean / (*c1 * ratio + *c2);
            let eps1 = ratio * eps2;
            if eps1 >= R::one() {
                return Err(Error::Inadmissible {
                    epsilon: eps1.as_f64(),
                });
            }
            Ok(vec![eps1, eps2])
        }
        _ => Err(Error::Domain {
            name: "block_fractions",
            value: fractions.len() as f64,
            requirement: "one or two blocks (a single ratio only orders two blocks)",
        }),
    }
}

/// Sparsity level `rho` at which the noiseless phase transition sits, for a
/// given undersampling `delta`, block split, and sparsity ratio: solves
///
/// ```text
///     sum_k c_k m_sharp(eps_k(rho)) = delta
/// ```
///
/// by bisection, independent of any power allocation. The returned `rho`
/// satisfies the defining equation to 1e-8.
///
/// # Errors
///
/// [`Error::Inadmissible`] if the densest block's fraction would reach 1
/// before the boundary is reached (large `delta` with skewed ratios).
pub fn phase_transition_rho<R: Real>(delta: R, ratio: R, fractions: &[R]) -> Result<R> {
    // rho at which the densest block hits eps = 1.
    let rho_cap = match fractions {
        [_] => R::one() / delta,
        [c1, c2] => (*c1 * ratio + *c2) / (ratio * delta),
        _ => {
            return Err(Error::Domain {
                name: "block_fractions",
                value: fractions.len() as f64,
                requirement: "one or two blocks",
            })
        }
    };
    let aggregate_at = |rho: R| -> Result<R> {
        let epsilons = epsilons_for_ratio(rho, delta, ratio, fractions)?;
        let mut total = R::zero();
        for (i, &eps) in epsilons.iter().enumerate() {
            total += fractions[i] * minimax_mse(eps)?.m_sharp;
        }
        Ok(total)
    };
    let hi = rho_cap * R::of(1.0 - 1e-9);
    let at_hi = aggregate_at(hi)?;
    if at_hi < delta {
        // Even with the densest block saturated the aggregate risk cannot
        // reach delta: the transition is unreachable in the admissible area.
        return Err(Error::Inadmissible { epsilon: 1.0 });
    }
    // The aggregate is continuous and strictly increasing in rho, zero in
    // the limit rho -> 0, so a sign change exists on (0, hi].
    let lo = hi * R::of(1e-12);
    let rho = bisect_increasing(
        |rho| aggregate_at(rho).unwrap_or(R::infinity()) - delta,
        lo,
        hi,
        R::of(1e-9),
        300,
    );
    let residual = (aggregate_at(rho)? - delta).abs();
    if residual > R::of(1e-8) {
        return Err(Error::BracketFailed {
            what: "phase-transition sparsity",
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    Ok(rho)
}

/// One evaluated point of a contour grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourCell<R: Real> {
    pub rho: R,
    pub delta: R,
    /// `None` marks an inadmissible cell (densest block would need
    /// `eps >= 1`); divergent-but-admissible cells carry a [`Prediction`]
    /// with its in-band divergent marker.
    pub prediction: Option<Prediction<R>>,
}

/// Dense evaluation of the predicted MSE over a `(rho, delta)` rectangle,
/// under least-favorable priors at every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid<R: Real> {
    /// Grid abscissae (sparsity), length `width`.
    pub rhos: Vec<R>,
    /// Grid ordinates (undersampling), length `height`.
    pub deltas: Vec<R>,
    /// Row-major cells: index `d * width + r` pairs `deltas[d]` with `rhos[r]`.
    pub cells: Vec<ContourCell<R>>,
    /// Phase-transition sparsity per delta; `None` where the boundary is
    /// unreachable inside the admissible area.
    pub transition_rho: Vec<Option<R>>,
    /// Sparsity at which the densest block saturates (`eps = 1`) per delta.
    pub inadmissible_rho: Vec<R>,
}

/// Evaluates [`predicted_mse`] over an inclusive `width x height` grid of
/// `(rho, delta)` points, with per-cell priors induced by
/// [`epsilons_for_ratio`] at amplitude infinity, and the power allocation
/// chosen per `mode`.
///
/// Cells are independent; the output is identical regardless of evaluation
/// order. Inadmissible cells are marked, not errored.
#[allow(clippy::too_many_arguments)]
pub fn contour_grid<R: Real>(
    rho_range: (R, R),
    delta_range: (R, R),
    width: usize,
    height: usize,
    ratio: R,
    fractions: &[R],
    noise_var: R,
    mode: AllocMode,
) -> Result<ContourGrid<R>> {
    for (name, (lo, hi)) in [("rho_range", rho_range), ("delta_range", delta_range)] {
        if !(lo > R::zero() && hi < R::one() && lo <= hi) {
            return Err(Error::Domain {
                name,
                value: lo.as_f64(),
                requirement: "0 < lo <= hi < 1",
            });
        }
    }
    if width < 2 || height < 2 {
        return Err(Error::Domain {
            name: "grid resolution",
            value: width.min(height) as f64,
            requirement: "width and height >= 2",
        });
    }
    let linspace = |lo: R, hi: R, count: usize| -> Vec<R> {
        let step = (hi - lo) / R::of_usize(count - 1);
        (0..count).map(|i| lo + step * R::of_usize(i)).collect()
    };
    let rhos = linspace(rho_range.0, rho_range.1, width);
    let deltas = linspace(delta_range.0, delta_range.1, height);

    let mut cells = Vec::with_capacity(width * height);
    for &delta in &deltas {
        for &rho in &rhos {
            let prediction = match epsilons_for_ratio(rho, delta, ratio, fractions) {
                Err(Error::Inadmissible { .. }) => None,
                Err(other) => return Err(other),
                Ok(epsilons) => {
                    let blocks = fractions
                        .iter()
                        .zip(&epsilons)
                        .map(|(&c, &eps)| Ok((c, ThreePointPrior::least_favorable(eps)?)))
                        .collect::<Result<Vec<_>>>()?;
                    let profile = BlockProfile::new(blocks, delta)?;
                    let alloc = match mode {
                        AllocMode::Uniform => AllocationProfile::uniform(profile.num_blocks()),
                        AllocMode::Optimal => optimal_allocation(&profile)?,
                    };
                    Some(predicted_mse(&profile, &alloc, noise_var)?)
                }
            };
            cells.push(ContourCell { rho, delta, prediction });
        }
    }

    let mut transition_rho = Vec::with_capacity(height);
    let mut inadmissible_rho = Vec::with_capacity(height);
    for &delta in &deltas {
        transition_rho.push(match phase_transition_rho(delta, ratio, fractions) {
            Ok(rho) => Some(rho),
            Err(Error::Inadmissible { .. }) => None,
            Err(other) => return Err(other),
        });
        let cap = match fractions {
            [_] => R::one() / delta,
            [c1, c2] => (*c1 * ratio + *c2) / (ratio * delta),
            _ => unreachable!("fraction arity validated above"),
        };
        inadmissible_rho.push(cap);
    }

    Ok(ContourGrid {
        rhos,
        deltas,
        cells,
        transition_rho,
        inadmissible_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lf(eps: f64) -> ThreePointPrior<f64> {
        ThreePointPrior::least_favorable(eps).unwrap()
    }

    fn even_profile(eps1: f64, eps2: f64, delta: f64) -> BlockProfile<f64> {
        BlockProfile::new(vec![(0.5, lf(eps1)), (0.5, lf(eps2))], delta).unwrap()
    }

    #[test]
    fn profile_validation() {
        assert!(BlockProfile::new(vec![(0.6, lf(0.1)), (0.5, lf(0.1))], 0.5).is_err());
        assert!(BlockProfile::new(vec![(1.0, lf(0.1))], 0.0).is_err());
        assert!(BlockProfile::new(vec![(1.0, lf(0.1))], 1.0).is_err());
        assert!(BlockProfile::<f64>::new(vec![], 0.5).is_err());
        assert!(BlockProfile::new(vec![(1.0, lf(0.1))], 0.5).is_ok());
    }

    #[test]
    fn block_lengths_require_integral_splits() {
        let profile = even_profile(0.1, 0.01, 0.5);
        assert_eq!(profile.block_lengths(1000).unwrap(), vec![500, 500]);
        assert!(profile.block_lengths(1001).is_err());
        let thirds =
            BlockProfile::new(vec![(0.25, lf(0.1)), (0.75, lf(0.01))], 0.5).unwrap();
        assert_eq!(thirds.block_lengths(8).unwrap(), vec![2, 6]);
    }

    #[test]
    fn aggregate_is_the_fraction_weighted_mean() {
        let eps = 0.09;
        let single = BlockProfile::uniform(lf(eps), 0.5).unwrap();
        let split = even_profile(eps, eps, 0.5);
        let a = aggregate_minimax(&single).unwrap();
        let b = aggregate_minimax(&split).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a - minimax_mse(eps).unwrap().m_sharp).abs() < 1e-15);
    }

    #[test]
    fn aggregate_propagates_domain_errors() {
        let profile =
            BlockProfile::new(vec![(0.5, lf(0.1)), (0.5, ThreePointPrior::new(0.0, 1.0).unwrap())], 0.5)
                .unwrap();
        assert!(aggregate_minimax(&profile).is_err());
    }

    #[test]
    fn convergence_matches_the_threshold_condition() {
        // m_sharp(eps) = delta at the transition; pick eps well on each side.
        let below = BlockProfile::uniform(lf(0.05), 0.5).unwrap();
        assert!(convergence_check(&below).unwrap());
        let above = BlockProfile::uniform(lf(0.5), 0.5).unwrap();
        assert!(!convergence_check(&above).unwrap());
    }

    #[test]
    fn steady_state_tau_keeps_tau2_sigma2_constant() {
        let profile = even_profile(0.1, 0.01, 0.5);
        let alloc = AllocationProfile::new(vec![1.5, 0.5], &[0.5, 0.5]).unwrap();
        let tau2 = steady_state_tau(&profile, &alloc, 1.0).unwrap();
        let products: Vec<f64> = tau2
            .iter()
            .zip(alloc.sigma2())
            .map(|(&t, &s)| t * s)
            .collect();
        assert!((products[0] - products[1]).abs() < 1e-12 * products[0]);
    }

    #[test]
    fn steady_state_tau_zero_noise_is_zero() {
        let profile = even_profile(0.1, 0.01, 0.5);
        let alloc = AllocationProfile::uniform(2);
        let tau2 = steady_state_tau(&profile, &alloc, 0.0).unwrap();
        assert_eq!(tau2, vec![0.0, 0.0]);
    }

    #[test]
    fn steady_state_tau_reports_divergence() {
        let profile = BlockProfile::uniform(lf(0.5), 0.5).unwrap();
        let alloc = AllocationProfile::uniform(1);
        assert!(matches!(
            steady_state_tau(&profile, &alloc, 1.0),
            Err(Error::Divergent { .. })
        ));
    }

    #[test]
    fn predicted_mse_uniform_profile_closed_form() {
        // For one block at unit power the prediction must reduce to
        // m_sharp * noise_var / (1 - m_sharp / delta).
        for &eps in &[0.02, 0.08, 0.15] {
            for &delta in &[0.4, 0.5, 0.7] {
                let m_sharp = minimax_mse(eps).unwrap().m_sharp;
                if m_sharp >= delta {
                    continue;
                }
                let profile = BlockProfile::uniform(lf(eps), delta).unwrap();
                let alloc = AllocationProfile::uniform(1);
                let sigma2 = 0.3;
                let predicted = predicted_mse(&profile, &alloc, sigma2)
                    .unwrap()
                    .mse
                    .unwrap();
                let closed = m_sharp * sigma2 / (1.0 - m_sharp / delta);
                assert!(
                    (predicted - closed).abs() <= 1e-12 * closed,
                    "eps={eps} delta={delta}"
                );
            }
        }
    }

    #[test]
    fn predicted_mse_is_exactly_homogeneous_in_noise() {
        let profile = even_profile(0.1, 0.01, 0.5);
        let alloc = AllocationProfile::uniform(2);
        let base = predicted_mse(&profile, &alloc, 0.3).unwrap().mse.unwrap();
        let doubled = predicted_mse(&profile, &alloc, 0.6).unwrap().mse.unwrap();
        // Doubling the variance doubles the prediction bit-exactly (the
        // factor 2 multiplication is exact in binary floating point).
        assert_eq!(doubled, 2.0 * base);
        let zero = predicted_mse(&profile, &alloc, 0.0).unwrap().mse.unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn predicted_mse_divergent_marker_is_in_band() {
        let profile = BlockProfile::uniform(lf(0.6), 0.5).unwrap();
        let alloc = AllocationProfile::uniform(1);
        let prediction = predicted_mse(&profile, &alloc, 1.0).unwrap();
        assert!(!prediction.converges);
        assert_eq!(prediction.mse, None);
        assert!(prediction.tau2_per_block.is_empty());
        assert!(prediction.aggregate_m_sharp >= 0.5);
    }

    #[test]
    fn predicted_mse_decreases_with_more_measurements() {
        // Same priors, growing delta: the prediction must not increase.
        let mut prev = f64::INFINITY;
        for &delta in &[0.35, 0.45, 0.55, 0.65, 0.75] {
            let profile = even_profile(0.1, 0.01, delta);
            let alloc = AllocationProfile::uniform(2);
            let mse = predicted_mse(&profile, &alloc, 1.0).unwrap().mse.unwrap();
            assert!(mse < prev, "delta={delta}");
            prev = mse;
        }
    }

    #[test]
    fn epsilon_split_honors_ratio_and_mean() {
        let rho = 0.18_f64;
        let delta = 0.5;
        for &ratio in &[1.0, 5.0, 10.0, 50.0, 100.0] {
            let eps = epsilons_for_ratio(rho, delta, ratio, &[0.5, 0.5]).unwrap();
            assert!((eps[0] / eps[1] - ratio).abs() < 1e-12 * ratio);
            let mean = 0.5 * eps[0] + 0.5 * eps[1];
            assert!((mean - rho * delta).abs() < 1e-15);
            // Even-block closed form.
            assert!((eps[1] - 2.0 * rho * delta / (1.0 + ratio)).abs() < 1e-15);
        }
        let single = epsilons_for_ratio(0.2, 0.5, 1.0, &[1.0]).unwrap();
        assert_eq!(single, vec![0.1]);
    }

    #[test]
    fn epsilon_split_flags_inadmissible_points() {
        assert!(matches!(
            epsilons_for_ratio(0.9, 0.9, 100.0, &[0.5, 0.5]),
            Err(Error::Inadmissible { .. })
        ));
        assert!(epsilons_for_ratio(0.5, 0.5, 0.5, &[0.5, 0.5]).is_err());
        assert!(epsilons_for_ratio(0.5, 0.5, 2.0, &[1.0]).is_err());
    }

    #[test]
    fn phase_transition_solves_the_defining_equation() {
        for &(delta, ratio) in &[(0.5_f64, 1.0_f64), (0.5, 5.0), (0.3, 100.0)] {
            let rho = phase_transition_rho(delta, ratio, &[0.5, 0.5]).unwrap();
            let eps = epsilons_for_ratio(rho, delta, ratio, &[0.5, 0.5]).unwrap();
            let aggregate = 0.5 * minimax_mse(eps[0]).unwrap().m_sharp
                + 0.5 * minimax_mse(eps[1]).unwrap().m_sharp;
            assert!((aggregate - delta).abs() <= 1e-8, "delta={delta} ratio={ratio}");
            assert!(rho > 0.0 && rho <= 1.0);
        }
    }

    #[test]
    fn phase_transition_at_ratio_one_matches_single_block() {
        let two: f64 = phase_transition_rho(0.5, 1.0, &[0.5, 0.5]).unwrap();
        let one = phase_transition_rho(0.5, 1.0, &[1.0]).unwrap();
        assert!((two - one).abs() < 1e-7);
    }

    #[test]
    fn phase_transition_unreachable_is_inadmissible() {
        // At delta = 0.9 and a strongly skewed split, saturating the dense
        // block still leaves the aggregate risk below delta.
        assert!(matches!(
            phase_transition_rho(0.9, 100.0, &[0.5, 0.5]),
            Err(Error::Inadmissible { .. })
        ));
    }

    #[test]
    fn contour_grid_marks_regions_consistently() {
        let grid = contour_grid(
            (0.05, 0.95),
            (0.05, 0.95),
            12,
            12,
            100.0,
            &[0.5, 0.5],
            1.0,
            AllocMode::Uniform,
        )
        .unwrap();
        assert_eq!(grid.cells.len(), 144);
        let mut saw_inadmissible = false;
        let mut saw_divergent = false;
        let mut saw_finite = false;
        for (i, cell) in grid.cells.iter().enumerate() {
            assert_eq!(cell.rho, grid.rhos[i % 12]);
            assert_eq!(cell.delta, grid.deltas[i / 12]);
            match &cell.prediction {
                None => {
                    saw_inadmissible = true;
                    // Inadmissibility is exactly the eps >= 1 region.
                    assert!(cell.rho >= grid.inadmissible_rho[i / 12] - 1e-12);
                }
                Some(p) if !p.converges => saw_divergent = true,
                Some(_) => saw_finite = true,
            }
        }
        assert!(saw_inadmissible && saw_divergent && saw_finite);
    }

    #[test]
    fn contour_divergence_mask_is_allocation_invariant() {
        let args = ((0.05, 0.9), (0.1, 0.9), 9, 9, 10.0, [0.5, 0.5], 1.0);
        let uniform = contour_grid(
            args.0, args.1, args.2, args.3, args.4, &args.5, args.6,
            AllocMode::Uniform,
        )
        .unwrap();
        let optimal = contour_grid(
            args.0, args.1, args.2, args.3, args.4, &args.5, args.6,
            AllocMode::Optimal,
        )
        .unwrap();
        assert_eq!(uniform.transition_rho, optimal.transition_rho);
        for (u, o) in uniform.cells.iter().zip(&optimal.cells) {
            match (&u.prediction, &o.prediction) {
                (None, None) => {}
                (Some(pu), Some(po)) => {
                    assert_eq!(pu.converges, po.converges);
                    if let (Some(mu), Some(mo)) = (pu.mse, po.mse) {
                        assert!(mo <= mu + 1e-12, "optimal must not lose at any cell");
                    }
                }
                _ => panic!("inadmissibility must not depend on allocation"),
            }
        }
    }

    #[test]
    fn contour_mse_grows_toward_the_transition() {
        let grid = contour_grid(
            (0.05, 0.6),
            (0.5, 0.5000001),
            24,
            2,
            1.0,
            &[1.0],
            1.0,
            AllocMode::Uniform,
        )
        .unwrap();
        let mut prev = 0.0;
        for cell in grid.cells.iter().take(24) {
            if let Some(p) = &cell.prediction {
                if let Some(mse) = p.mse {
                    assert!(mse > prev, "rho={}", cell.rho);
                    prev = mse;
                }
            }
        }
    }
}
