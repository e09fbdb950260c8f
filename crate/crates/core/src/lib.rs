//! Distinguished solutions of `∂i∂j(a_ij u) = 0` in three dimensions and their asymptotics at the origin.
//!
//! The crate builds the solution `Z` by a contraction-mapping scheme on a log-radial ×
//! sphere product grid, evaluates the explicit leading term at the origin and checks the
//! associated bounds and criteria numerically.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the aliases at the crate
//! root fix the scalar to `f64`.

pub mod analysis;
pub mod coeff;
pub mod error;
pub mod export;
pub mod linalg;
pub mod meshmeans;
pub mod modulus;
pub mod ops;
pub mod potential;
pub mod quad;
pub mod scalar;
pub mod zsolver;

pub use error::{Error, Result};
pub use scalar::{Cx, Point, Real};

pub type Modulus = modulus::ModulusOmega<f64>;
pub type Coefficients = coeff::CoefficientField<f64>;
pub type Field = meshmeans::AnnularField<f64>;
pub type Profile = meshmeans::RadialProfile<f64>;
pub type Matrices = meshmeans::MatrixField<f64>;
pub type Config = zsolver::SolverConfig;
pub type Bundle = zsolver::SolutionBundle<f64>;
pub type Context = ops::OpContext<f64>;
