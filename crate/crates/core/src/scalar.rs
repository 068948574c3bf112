use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar every numeric routine in this crate is generic over.
///
/// `f32` and `f64` are the supported instantiations; concrete type aliases for
/// both live at the crate root. Constants are written as `f64` literals and
/// converted through [`Scalar::cast`], so an `f32` build runs the same
/// algorithms at reduced precision rather than a different algorithm.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + for<'a> Sum<&'a Self>
    + LinalgScalar
    + ScalarOperand
    + Display
    + Debug
    + FromStr<Err = std::num::ParseFloatError>
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant into this scalar type.
    #[inline]
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant must convert")
    }

    /// Widen to `f64` for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must widen to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Component sign with the convention `sign(0) = 0`, as used by
/// sign-gradient attack steps (IEEE `signum` maps `+0.0` to `1.0`,
/// which is not what the update rule wants).
#[inline]
pub fn step_sign<F: Scalar>(value: F) -> F {
    if value > F::zero() {
        F::one()
    } else if value < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cast_round_trips_constants() {
        assert_eq!(<f64 as Scalar>::cast(0.5), 0.5);
        assert_eq!(<f32 as Scalar>::cast(0.5), 0.5f32);
    }

    #[test]
    fn step_sign_zero_is_zero() {
        assert_eq!(step_sign(0.0f64), 0.0);
        assert_eq!(step_sign(-0.0f64), 0.0);
        assert_eq!(step_sign(3.0f64), 1.0);
        assert_eq!(step_sign(-2.0f32), -1.0);
    }
}
