//! Deterministic numerical foundation: least squares through a QR
//! decomposition, the residual operator, distribution tails and a seedable
//! random stream.

mod dist;
mod linalg;
mod rng;
pub mod special;

pub use dist::{tail_probability, Distribution, Tail};
pub use linalg::{ols_fit, residual_operator, DesignMatrix, OlsFit, ResidualOperator};
pub use rng::RandomStream;
