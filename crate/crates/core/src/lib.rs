//! Hyperdimensional transform.
//!
//! Length-scale hypervector encoders, the normalization that turns them into
//! approximate Dirac deltas, forward and inverse transforms of functions and
//! distributions, empirical estimators, distribution operations, and
//! closed-form regression and classification heads.
//!
//! All randomness is derived from explicit seeds; the same configuration
//! produces bit-identical vectors and results.

// Guards are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classification;
pub mod datasets;
pub mod distributions;
pub mod empirical;
pub mod encoders;
pub mod error;
pub mod experiments;
pub mod hypervector;
pub mod normalization;
pub mod regression;
pub mod seeding;
pub mod transform;

pub use encoders::{
    AnyEncoder, CosSinEncoder, Encoder, EncoderSpec, IntervalEncoder, SequenceEncoder,
    SymbolEncoder,
};
pub use error::{Error, Result};
pub use hypervector::{aggregate, bind, inner, permute, sign_of, Flavor, Hypervector};
pub use normalization::{
    solve_normalization, Embedding, NormalizationFn, Normalized, QuadratureGrid, SolverConfig,
};
pub use transform::{Role, TransformVec};
