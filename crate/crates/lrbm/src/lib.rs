//! Generative sequence classification with locally interacting
//! Gaussian-binary restricted Boltzmann machines.
//!
//! One generative model is trained per class on fixed-length real-valued
//! sequences. Each model couples the dimensions within a time slice
//! through a symmetric interaction matrix on top of the usual
//! visible-hidden weights, so per-frame structure (joint positions,
//! landmark coordinates) is captured without giving up the tractable
//! hidden conditional. Classification compares unnormalized
//! log-likelihoods across models: pairwise thresholds absorb the unknown
//! partition functions and a soft voting matrix turns the comparisons
//! into a multiclass decision.
//!
//! The crate is organized around that pipeline:
//!
//! - [`model`]: the energy function, free energy, hidden conditionals, and
//!   mean-field reconstruction of an immutable model.
//! - [`train`]: contrastive-divergence training with restarts, a spectral
//!   stability guard, and rank-based candidate selection.
//! - [`classify`]: pairwise threshold calibration, the preference matrix,
//!   vote scoring, and evaluation reports.
//! - [`data`]: interpolation, smoothing, normalization, skeleton
//!   renormalization, and the corruption/imputation tools.
//! - [`oracle`]: brute-force partition function, likelihood, gradients,
//!   and an exact sampler for tiny models; also the synthetic benchmark
//!   generator. Every fast path is tested against this module.
//! - [`io`]: JSON Lines datasets and JSON model/bundle files with
//!   bit-exact round-trips.
//! - [`commands`]: the file-to-file operations behind the `lrbm` binary
//!   (preprocess, train, predict, evaluate, robustness, synth, inspect).
//!
//! Everything that draws randomness takes an explicit seed and derives
//! per-task streams from it, so training, prediction, and the corruption
//! sweeps are reproducible byte for byte.
//!
//! The `examples/` directory walks through each capability in runnable
//! form; `examples/synthetic_end_to_end.rs` is the fastest overview.

pub mod classify;
pub mod commands;
pub mod data;
pub mod error;
pub mod io;
pub mod math;
pub mod model;
pub mod oracle;
pub mod train;

pub use error::{Error, Result};
pub use model::{HiddenState, LrbmModel, SequenceSample};
