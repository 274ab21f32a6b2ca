//! Numerical laboratory for box-constrained, control-affine optimal control
//! of semilinear parabolic equations.
//!
//! The crate is organized bottom-up:
//! - [`grid`], [`field`], [`nonlin`], [`problem`], [`quad`]: discrete spaces,
//!   instance data and quadrature;
//! - [`pde`]: the four time-stepping solvers (state, linearized, adjoint,
//!   linear-with-potential) built around an exact discrete adjoint;
//! - [`optim`]: objective and variations, conditional-gradient and projected
//!   gradient minimizers, the bang-bang enumeration oracle and the
//!   value-function evaluator;
//! - [`verify`]: the experiment harness turning differentiability and
//!   stability statements into falsifiable numerical checks;
//! - [`io`]: configuration parsing, field persistence, run manifests.

pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod nonlin;
pub mod optim;
pub mod pde;
pub mod problem;
pub mod quad;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Field, SpatialField};
pub use grid::Grid;
pub use nonlin::Nonlinearity;
pub use problem::ProblemSpec;
