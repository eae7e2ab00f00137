//! Numerical laboratory for random walks among random conductances.
//!
//! Everything numerical is generic over [`num::Real`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the experiments and the CLI use.

pub mod environment;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod functionals;
pub mod num;
pub mod operators;
pub mod rng;
pub mod spectral;
pub mod walker;

pub use error::{Error, Result};
pub use num::Real;

pub type Field = environment::ConductanceField<f64>;
pub type Field32 = environment::ConductanceField<f32>;
pub type Operator = operators::TorusOperator<f64>;
pub type Operator32 = operators::TorusOperator<f32>;
pub type Function = operators::FieldFunction<f64>;
pub type Function32 = operators::FieldFunction<f32>;
pub type Decomposition = operators::Decomposition<f64>;
pub type Decomposition32 = operators::Decomposition<f32>;
