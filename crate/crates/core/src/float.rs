//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Float:
    num_traits::Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn cst(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Float for f32 {}
impl Float for f64 {}

/// Exact ordered scalar used by the parameter-region calculus.
///
/// Implemented for the float types and for `num_rational::Ratio<i64>`, so the
/// same predicates can be evaluated in floating point or exactly.
pub trait RegionScalar:
    num_traits::Num + PartialOrd + Copy + FromPrimitive + Debug + Send + Sync + 'static
{
    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("numerator") / Self::from_i64(den).expect("denominator")
    }

    fn to_f64_lossy(self) -> f64;
}

impl RegionScalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl RegionScalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl RegionScalar for num_rational::Ratio<i64> {
    fn to_f64_lossy(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
