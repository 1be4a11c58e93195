//! Standard normal density and distribution function.
//!
//! The distribution function is evaluated through the complementary error
//! function, which keeps the absolute error at machine level (below 1e-14
//! for `f64`) over the whole real line — in particular in the far tails,
//! where low-order rational fits lose all of their digits. The risk
//! formulas in [`crate::risk`] lean on that tail accuracy.

use crate::float::Real;

/// 1/sqrt(2*pi).
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_68;

/// Density `phi(z)` of the standard normal distribution.
///
/// Accepts any `z`; infinities map to 0 and NaN propagates.
#[inline]
pub fn std_normal_pdf<R: Real>(z: R) -> R {
    R::of(FRAC_1_SQRT_2PI) * (-z * z / R::of(2.0)).exp()
}

/// Distribution function `Phi(z)` of the standard normal distribution.
///
/// Evaluates `erfc(-z / sqrt(2)) / 2` in `f64` and rounds into `R`. The
/// absolute error stays below 1e-14 for every finite argument, and the
/// result is exact at `z = 0` and monotone across the evaluation grid.
#[inline]
pub fn std_normal_cdf<R: Real>(z: R) -> R {
    let z = z.as_f64();
    R::of(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
}
