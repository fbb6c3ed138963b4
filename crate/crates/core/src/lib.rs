//! Semi-supervised multi-label event detection.
//!
//! The crate is organised around five pieces:
//!
//! - [`learner`]: a dense feed-forward network with per-class sigmoid outputs,
//!   hand-written backpropagation, Adam, and the class-weighted multi-label
//!   cross-entropy objective.
//! - [`data`]: datasets, CMVN-style normalisation, stratified splits,
//!   bootstrap replicas, a synthetic domain-shift generator and the dataset
//!   file format.
//! - [`semisup`]: self-training and ensemble-based tri-training with
//!   agreement gating and top-k pseudo-label selection.
//! - [`ensemble_distill`]: probability-averaged ensembles and temperature
//!   scaled knowledge distillation into a single student.
//! - [`eval`]: DET curves, area under the DET curve and equal error rate.
//!
//! Everything is deterministic given its inputs and seeds.

pub mod data;
pub mod ensemble_distill;
mod error;
pub mod eval;
pub mod learner;
pub mod seed;
pub mod semisup;

pub use error::{Error, Result};
