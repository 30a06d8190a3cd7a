//! Gaussian database alignment and planted matching.
//!
//! Samplers for synthetic instances, the maximum-likelihood, max-row and
//! threshold estimators, disagreement decomposition, closed-form achievability
//! and converse curves, and a seeded sweep driver.
//!
//! The numeric kernels are generic over [`Real`]; `f64` aliases are exported
//! at the crate root for everyday use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod mismatch;
pub mod model;
pub mod real;
pub mod rng;
pub mod score;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use estimators::{Algorithm, AlignmentEstimate};
pub use mismatch::{ElementaryMisalignment, MisalignmentKind, MisalignmentReport};
pub use real::Real;
pub use rng::Seed;
pub use synth::PartialMapping;
pub use theory::{BoundaryCurve, Regime};

pub type CorrelationModel = model::CorrelationModel<f64>;
pub type CorrelationModel32 = model::CorrelationModel<f32>;
pub type CanonicalCorrelation = model::CanonicalCorrelation<f64>;
pub type CanonicalTransformPair = model::CanonicalTransformPair<f64>;
pub type ScorePairMoments = model::ScorePairMoments<f64>;
pub type DatabasePair = synth::DatabasePair<f64>;
pub type DatabasePair32 = synth::DatabasePair<f32>;
pub type PlantedInstance = synth::PlantedInstance<f64>;
pub type ScoreMatrix = score::ScoreMatrix<f64>;
pub type ScoreMatrix32 = score::ScoreMatrix<f32>;
