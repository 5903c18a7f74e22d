//! Deep discrete encoders (DDEs).
//!
//! A DDE is a directed graphical model with `D` layers of binary latent
//! variables of shrinking width stacked on top of a `J`-dimensional observed
//! layer. This crate provides:
//!
//! * [`model`]: parameter types, exact forward sampling, enumerated marginal
//!   likelihood and the benchmark parameter constructors;
//! * [`spectral`]: the layerwise double-SVD initializer and the spectral-ratio
//!   latent-dimension selector;
//! * [`estimation`]: penalized EM and penalized stochastic-approximation EM;
//! * [`identifiability`]: executable checkers for the pure-children,
//!   distinguishability and perfect-matching identifiability conditions;
//! * [`evaluation`]: label alignment, accuracy metrics, information criteria,
//!   latent inference, reconstruction and topic-model metrics;
//! * [`bench`]: the simulation harness that drives all of the above.

pub mod bench;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod family;
pub mod identifiability;
pub mod io;
mod linalg;
pub mod model;
pub mod rng;
pub mod spectral;

pub use error::{DdeError, Result};
pub use family::{FamilyKind, ObservedFamily};
pub use model::{Dataset, DdeModel, GraphSet, LatentAssignment};

/// Schema tag written into every structured JSON output.
pub const SCHEMA: &str = "dde/v1";
