//! Scalar minimization and root location used by the risk calculus.
//!
//! These are small, derivative-free
//! routines tuned for the smooth one-dimensional objectives that the
//! minimax-threshold and phase-transition solvers produce.

use crate::float::Real;

/// Golden-section minimization of a unimodal function on `[a, b]`.
///
/// Shrinks the bracket until its width is at most `xtol` and returns the
/// best evaluated `(x, f(x))` pair. If the minimum sits on a boundary the
/// returned point converges to that boundary.
pub fn golden_section_min<R: Real>(
    f: impl Fn(R) -> R,
    mut a: R,
    mut b: R,
    xtol: R,
) -> (R, R) {
    debug_assert!(a <= b);
    let invphi = (R::of(5.0).sqrt() - R::one()) / R::of(2.0);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // Each pass cuts the interval by the golden ratio, so even a very tight
    // tolerance terminates in well under two hundred evaluations.
    let mut guard = 0usize;
    while b - a > xtol && guard < 256 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
        guard += 1;
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coarse grid scan over `[a, b]` followed by golden-section refinement in
/// the winning cell. Robust against shallow secondary dips that a pure
/// golden-section search could lock onto.
pub fn scan_then_refine<R: Real>(
    f: impl Fn(R) -> R,
    a: R,
    b: R,
    points: usize,
    xtol: R,
) -> (R, R) {
    let n = points.max(2);
    let step = (b - a) / R::of_usize(n);
    let mut best_i = 0usize;
    let mut best_x = a;
    let mut best_v = f(a);
    for i in 1..=n {
        let x = a + step * R::of_usize(i);
        let v = f(x);
        if v < best_v {
            best_i = i;
            best_x = x;
            best_v = v;
        }
    }
    let lo = if best_i == 0 { a } else { a + step * R::of_usize(best_i - 1) };
    let hi = if best_i == n { b } else { a + step * R::of_usize(best_i + 1) };
    let (x, v) = golden_section_min(&f, lo, hi, xtol);
    if v <= best_v {
        (x, v)
    } else {
        (best_x, best_v)
    }
}

/// Bisection for the root of a monotone nondecreasing function, given an
/// established sign change `f(lo) <= 0 <= f(hi)`.
///
/// Stops when `|f(mid)| <= ftol` or after `max_iter` halvings, whichever
/// comes first, and returns the final midpoint.
pub fn bisect_increasing<R: Real>(
    f: impl Fn(R) -> R,
    mut lo: R,
    mut hi: R,
    ftol: R,
    max_iter: usize,
) -> R {
    let half = R::of(0.5);
    let mut mid = (lo + hi) * half;
    for _ in 0..max_iter {
        mid = (lo + hi) * half;
        let v = f(mid);
        if v.abs() <= ftol {
            return mid;
        }
        if v < R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}
