//! Numeric abstractions shared by the cost models.
//!
//! Costs built from logarithms need a floating-point type ([`Real`]); costs
//! built only from counts and ratios (IOU, reordering) work over any ordered
//! field ([`Scalar`]), including exact rationals.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// An ordered numeric field: `f32`, `f64`, or an exact ratio type.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync {
    /// Converts a count into the scalar type.
    ///
    /// Counts in this crate are bounded by transcript and roster sizes, so
    /// the conversion never saturates for the provided implementations.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync {}

/// Floating-point scalars (`f32`, `f64`).
pub trait Real: Scalar + Float {
    /// Literal conversion for constants such as tolerances.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Tie tolerance scaled to the magnitude of `reference`.
    fn tie_tolerance(reference: Self) -> Self {
        let eps = if std::mem::size_of::<Self>() >= 8 { 1e-9 } else { 1e-4 };
        Self::lit(eps) * reference.abs().max(Self::one())
    }

    /// `a` and `b` are equal up to [`Real::tie_tolerance`].
    fn approx_eq(a: Self, b: Self) -> bool {
        (a - b).abs() <= Self::tie_tolerance(a.abs().max(b.abs()))
    }
}

impl<T> Real for T where T: Scalar + Float {}
