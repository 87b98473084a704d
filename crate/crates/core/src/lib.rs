//! Token-level Shapley attribution of a response to the context it was
//! conditioned on.
//!
//! Every context token becomes a datastore entry keyed by the embedding of its
//! sentence prefix. For each response token, the nearest `M` entries form a
//! weighted KNN game whose exact Shapley values are spread back onto context
//! positions, then summed into sentence or passage scores.
//!
//! The game solvers are generic over the scalar type, so `f64` runs and exact
//! rational runs share one implementation.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod retrieval;
pub mod scalar;
pub mod shapley;

mod codec;

pub use error::{Error, Result};
pub use scalar::{binomial, BigRational, Scalar};
pub use shapley::{Game, Method, Player, ShapleyResult};

pub type Game64 = Game<f64>;
pub type Game32 = Game<f32>;
pub type ExactGame = Game<BigRational>;
pub type ShapleyValues = ShapleyResult<f64>;
pub type ExactShapleyValues = ShapleyResult<BigRational>;
