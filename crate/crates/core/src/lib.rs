//! Calculus engine and identity checker for the second-order tangent bundle `T₂M`.
//!
//! Objects live on a single chart `(x, y, z)` of dimension `3n`. Coefficients
//! are [`Expr`] trees with exact symbolic partial derivatives, so nested
//! Frölicher–Nijenhuis brackets are computed without truncation error and only
//! evaluated numerically at sample points.

pub mod calculus;
pub mod canonical;
pub mod chart;
pub mod connection;
pub mod error;
pub mod expr;
mod expr_json;
pub mod finsler;
pub mod gen;
pub mod linear;
pub mod linalg;
pub mod report;
pub mod scenario;
pub mod tensor;

pub use chart::{sample_points, Block, Chart, Coord, SampleBox};
pub use error::{Error, Result};
pub use expr::{Evaluator, Expr, Node};
pub use report::{Check, Residual, Tolerance, VerificationReport, Verdict};
pub use tensor::{ScalarForm, Tensor, VectorField, VectorForm, VectorOneForm, VectorTwoForm};
