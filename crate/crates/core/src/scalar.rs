//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar used by the dynamics, analysis and reward code: `f32` or `f64`.
///
/// Tolerances are per-type because the row-stochasticity checks that are
/// meaningful at 1e-12 in double precision are unreachable in single.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute per-row tolerance for stochasticity and normalization checks.
    fn row_tolerance() -> Self;

    /// Relative stopping tolerance for iterative eigenvalue estimates.
    fn eigen_tolerance() -> Self;

    /// Slack used by geometric membership tests.
    fn hull_slack() -> Self;

    /// Converts an `f64` literal. Panics only on values the type cannot hold.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Scalar for f64 {
    fn row_tolerance() -> Self {
        1e-12
    }
    fn eigen_tolerance() -> Self {
        1e-10
    }
    fn hull_slack() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn row_tolerance() -> Self {
        1e-5
    }
    fn eigen_tolerance() -> Self {
        1e-5
    }
    fn hull_slack() -> Self {
        1e-5
    }
}
