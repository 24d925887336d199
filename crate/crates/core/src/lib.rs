//! Normal approximations for isometric log-ratio coordinates of
//! overdispersed count compositions, with a seeded Monte Carlo harness for
//! checking the approximations against simulation.
//!
//! The math modules (`linalg`, `composition`, `approx`) are generic over the
//! scalar type through [`scalar::Scalar`]; simulation and reporting run in
//! `f64`. The aliases at the crate root fix the common case.

pub mod approx;
pub mod cli;
pub mod composition;
pub mod figures;
pub mod harness;
pub mod linalg;
pub mod sampling;
pub mod scalar;

pub use scalar::Scalar;

/// Mean, covariance, and spectrum of a normal approximation, `f64`
/// precision.
pub type NormalApprox = approx::NormalApprox<f64>;

/// Strictly positive unit-sum parts, `f64` precision.
pub type Composition = composition::Composition<f64>;
/// Orthonormal zero-column-sum log-contrast basis, `f64` precision.
pub type ContrastMatrix = composition::ContrastMatrix<f64>;
/// Coordinates of a composition in a contrast basis, `f64` precision.
pub type IlrVector = composition::IlrVector<f64>;
/// Dense row-major matrix, `f64` precision.
pub type Matrix = linalg::Matrix<f64>;
/// Symmetric matrix with validated construction, `f64` precision.
pub type SymmetricMatrix = linalg::SymmetricMatrix<f64>;
/// Dirichlet expectation plus concentration, `f64` precision.
pub type DirichletSpec = sampling::DirichletSpec<f64>;
/// Count-generating model, `f64` precision.
pub type ModelSpec = sampling::ModelSpec<f64>;
