//! Error type shared across the crate.

use thiserror::Error;

/// Errors reported by constructors, solvers, and the reconstruction engine.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// computation ran at, so that errors stay printable and comparable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside its documented domain.
    #[error("`{name}` must satisfy {requirement}, got {value}")]
    Domain {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    /// Two related sequences have inconsistent lengths.
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Shapes of the measurement system disagree.
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A root or minimum bracket could not be established.
    #[error("failed to bracket {what} within ({lo}, {hi}]")]
    BracketFailed {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    /// State evolution does not contract: the per-measurement aggregate
    /// minimax MSE meets or exceeds the undersampling ratio.
    #[error(
        "state evolution diverges: aggregate minimax MSE {aggregate} >= delta * 1 = {delta} \
         (operating point lies on or above the phase transition)"
    )]
    Divergent { aggregate: f64, delta: f64 },

    /// The requested operating point is inadmissible: it would force the
    /// densest block's nonzero fraction to reach or exceed one.
    #[error(
        "inadmissible operating point: the densest block would need nonzero fraction \
         {epsilon} >= 1"
    )]
    Inadmissible { epsilon: f64 },

    /// A non-finite value was found where a finite one is required.
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_name_the_offending_parameter() {
        let err = Error::Domain {
            name: "epsilon",
            value: -0.5,
            requirement: "0 < epsilon <= 1",
        };
        let text = err.to_string();
        assert!(text.contains("epsilon"));
        assert!(text.contains("-0.5"));
    }

    #[test]
    fn inadmissible_message_cites_the_constraint() {
        let err = Error::Inadmissible { epsilon: 1.8 };
        let text = err.to_string();
        assert!(text.contains("inadmissible"));
        assert!(text.contains(">= 1"));
    }
}
