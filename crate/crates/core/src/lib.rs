//! Gaussian measure lab for centrally symmetric convex bodies.

pub mod bineq;
pub mod bodies;
pub mod corpus;
pub mod error;
pub mod function;
pub mod gauss;
mod matrix_serde;
pub mod mgm;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod special;
pub mod stability;
pub mod stats;

pub use bodies::{Direction, ProductBlock, SymmetricBody};
pub use error::{Error, Result};
pub use sampling::{GaussianSource, GaussianStream, SampleCloud, SampleConfig};
pub use scalar::Real;

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
pub type FunctionSpec = function::FunctionSpec<f64>;
pub type Polynomial = function::Polynomial<f64>;
