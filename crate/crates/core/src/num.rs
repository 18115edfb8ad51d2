//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the information measures are computed in.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for "sums to one" checks on probability vectors.
    fn normalization_tolerance() -> Self;

    /// Tolerance for agreement between the two transmission formulas.
    fn agreement_tolerance() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn of_u64(x: u64) -> Self {
        Self::from_u64(x).expect("u64 is representable")
    }
}

impl Scalar for f64 {
    fn normalization_tolerance() -> Self {
        1e-9
    }

    fn agreement_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn normalization_tolerance() -> Self {
        1e-5
    }

    fn agreement_tolerance() -> Self {
        1e-3
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<F: Scalar, I: IntoIterator<Item = F>>(values: I) -> F {
    let mut sum = F::zero();
    let mut carry = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry = carry + ((sum - t) + v);
        } else {
            carry = carry + ((v - t) + sum);
        }
        sum = t;
    }
    sum + carry
}

/// `p · log2 p`, with `0 · log2 0 = 0`.
pub fn plog2p<F: Scalar>(p: F) -> F {
    if p > F::zero() {
        p * p.log2()
    } else {
        F::zero()
    }
}

/// Rounds to one decimal place, as used for percentages and millibits.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}
