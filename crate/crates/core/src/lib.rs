//! Learning-to-defer laboratory: human performance models under three
//! training regimes, a joint rejector-classifier with a deferral-cost
//! surrogate loss, a synthetic autonomous-vehicle deferral experiment,
//! a synthetic-expert classification experiment, and a Monte-Carlo
//! verifier for the calibration-error misclassification bound.

pub mod calib;
pub mod cli;
pub mod data;
pub mod defer;
pub mod driving;
pub mod error;
pub mod human_model;
pub mod nn;
pub mod stats;

pub use error::{Error, Result};
