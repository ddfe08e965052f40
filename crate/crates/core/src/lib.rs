//! Numerical laboratory for flows of rough vector fields.
//!
//! The crate is generic over the scalar type (`f32` or `f64`); the aliases at
//! the root fix it to `f64`, with `…32` variants for single precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commute;
pub mod config;
pub mod error;
pub mod field;
pub mod flow;
pub mod linalg;
pub mod measure;
pub mod quad;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Field = field::VectorField<f64>;
pub type Field32 = field::VectorField<f32>;
pub type Pair = field::FieldPair<f64>;
pub type Pair32 = field::FieldPair<f32>;
pub type Function = field::ScalarFn<f64>;
pub type Function32 = field::ScalarFn<f32>;
pub type Traj = flow::Trajectory<f64>;
pub type Traj32 = flow::Trajectory<f32>;
