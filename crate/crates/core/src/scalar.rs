//! Numeric traits the library is generic over.
//!
//! [`Scalar`] is enough for every evaluator that only adds, multiplies and
//! divides (quadratic forms, mediants, plan gaps, the exact ⊠ minimizer), so
//! those run over exact rationals as well as floats. [`Real`] adds the
//! transcendental operations needed by geometry and the optimizers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

pub trait Scalar:
    Num + NumAssign + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + 'static
{
    /// Converts a literal constant. Panics only if the type cannot
    /// represent ordinary finite `f64` values, which no supported type does.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar type cannot represent a finite f64 constant")
    }

    fn sq(self) -> Self {
        self * self
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Num
        + NumAssign
        + Signed
        + Copy
        + PartialOrd
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + 'static
{
}

pub trait Real: Scalar + Float {}

impl<T> Real for T where T: Scalar + Float {}

/// Sum of a slice.
pub fn sum<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &x| acc + x)
}
