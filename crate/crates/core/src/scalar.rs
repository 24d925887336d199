//! Floating-point abstraction for the pure-math modules.
//!
//! `linalg`, `composition`, and `approx` are generic over [`Scalar`] so the
//! same formulas run in `f32` or `f64`. The simulation side of the crate
//! (`sampling`, `harness`, `cli`) is pinned to `f64`: its contracts are about
//! reproducible streams and byte-identical output, not precision trade-offs.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar with the conversions and tolerances the math
/// modules need.
///
/// The associated constants are width-appropriate versions of the crate's
/// validation tolerances; the `f64` values are the authoritative ones, the
/// `f32` values are loosened by the precision ratio.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + 'static
{
    /// Permitted deviation of a composition's part sum from exactly one.
    const UNIT_SUM_TOL: Self;

    /// Permitted deviation from orthonormality and from zero column sums in
    /// a contrast matrix.
    const CONTRAST_TOL: Self;

    /// Off-diagonal Frobenius threshold for Jacobi convergence, relative to
    /// the Frobenius norm of the input.
    const JACOBI_OFF_TOL: Self;

    /// How far below zero the smallest eigenvalue of a covariance matrix may
    /// sit before the matrix is rejected as not positive semidefinite.
    const PSD_TOL: Self;

    /// Converts an `f64` constant; panics only if the target type cannot
    /// represent it at all, which never happens for the constants used here.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in this scalar type")
    }

    /// Converts a count to the scalar type (exact for counts below 2^53).
    fn of_u64(v: u64) -> Self {
        Self::from_u64(v).expect("count not representable in this scalar type")
    }
}

impl Scalar for f64 {
    const UNIT_SUM_TOL: Self = 1e-12;
    const CONTRAST_TOL: Self = 1e-12;
    const JACOBI_OFF_TOL: Self = 1e-14;
    const PSD_TOL: Self = 1e-10;
}

impl Scalar for f32 {
    const UNIT_SUM_TOL: Self = 1e-5;
    const CONTRAST_TOL: Self = 1e-5;
    const JACOBI_OFF_TOL: Self = 1e-6;
    const PSD_TOL: Self = 1e-3;
}
