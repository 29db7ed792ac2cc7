//! Contour-velocity tokenization of binary silhouette sequences.
//!
//! A silhouette frame is a [`BitGrid`]. Each frame is reduced to its
//! 4-neighbour inner boundary (the contour map) and the XOR of consecutive
//! contours (the velocity map). Active pixels of both maps are sent through an
//! injective [`VocabularyMap`] into a language-model token space and weighted
//! by reciprocal-frequency coefficients estimated from a training corpus.
//!
//! Real-valued parts of the pipeline (frequencies, weights, densities,
//! projections) are generic over a [`Scalar`]; `f64` aliases are provided
//! below for the common case.

pub mod corpus;
pub mod error;
pub mod extract;
pub mod grid;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod vocab;

pub use error::{Error, Result};
pub use extract::{ContourMap, FillMode, VelocityMap};
pub use grid::{BitGrid, BitVector, SilhouetteSequence};
pub use scalar::Scalar;
pub use vocab::{Channel, VocabularyMap};

/// Default size of the token id space.
pub const DEFAULT_VOCAB_SIZE: usize = 151_642;

/// Conventional gait silhouette height.
pub const DEFAULT_HEIGHT: usize = 64;

/// Conventional gait silhouette width.
pub const DEFAULT_WIDTH: usize = 44;

pub type FrequencyTable64 = vocab::FrequencyTable<f64>;
pub type FrequencyTable32 = vocab::FrequencyTable<f32>;
pub type TokenFrame64 = vocab::TokenFrame<f64>;
pub type TokenFrame32 = vocab::TokenFrame<f32>;
pub type DensityReport64 = stats::DensityReport<f64>;
pub type FrequencyHeatmap64 = stats::FrequencyHeatmap<f64>;
pub type FrequencyHistogram64 = stats::FrequencyHistogram<f64>;
