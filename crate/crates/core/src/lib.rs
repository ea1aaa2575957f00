//! Simulation toolkit for strict local martingales built as `h`-transforms of
//! absorbed diffusions.
//!
//! Everything that depends only on deterministic arithmetic (time grids,
//! closed forms, quadrature, Hermitian eigenvalues, inversion in the sphere) is
//! generic over [`Scalar`], which covers `f32` and `f64`. Monte Carlo code
//! works in `f64`.

// Negated comparisons are how argument checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod examples_suite;
pub mod error;
pub mod grid;
pub mod htransform;
pub mod kelvin;
pub mod mc;
pub mod path;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod sde;

pub use error::{Error, Result};
pub use grid::{make_grid, TimeGrid};
pub use mc::{MCEstimate, McPlan};
pub use path::AbsorbedPath;
pub use rng::RandomSource;
pub use scalar::Scalar;
pub use sde::{BesqDimension, ProcessModel};

pub type TimeGridF64 = TimeGrid<f64>;
pub type TimeGridF32 = TimeGrid<f32>;
pub type HermitianMatrixF64 = sde::hermitian::HermitianMatrix<f64>;
pub type HermitianMatrixF32 = sde::hermitian::HermitianMatrix<f32>;
pub type CallTermStructureF64 = analytics::CallTermStructure<f64>;
