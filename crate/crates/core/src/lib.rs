//! Angle-based multicategory classification with penalized linear learning,
//! closed-form class-probability estimation, and a two-stage refit that
//! restores the scale of shrunken decision functions.
//!
//! The building blocks are:
//!
//! * [`simplex`]: the k-vertex simplex code in R^(k-1) and the score/label maps.
//! * [`loss`]: smooth, strictly decreasing margin losses.
//! * [`linear_model`]: the penalized linear classifier and its proximal-gradient solver.
//! * [`probability`]: class probabilities from decision values.
//! * [`refit`]: stage-two unpenalized refit on stage-one decision values.
//! * [`tuning`], [`metrics`], [`datagen`], [`dataio`], [`bench`]: the experiment harness.

pub mod bench;
pub mod datagen;
pub mod dataio;
pub mod dataset;
pub mod error;
pub mod linear_model;
pub mod loss;
pub mod metrics;
pub mod probability;
pub mod refit;
pub mod rng;
pub mod simplex;
pub mod tuning;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use linear_model::{FitConfig, LinearAngleModel, Penalty};
pub use loss::{Loss, MarginLoss};
pub use probability::ProbabilityVector;
pub use refit::RefitModel;
pub use simplex::SimplexCode;
