//! Layout optimization for farms of fully submerged wave-energy-converter
//! buoys inside a size-constrained square site.
//!
//! The crate provides:
//! - a frequency-domain farm power model with a pluggable coefficient
//!   provider ([`hydro`]),
//! - the shared constraint and penalty system ([`farm`]),
//! - population-based baselines: DE, PSO, CMA-ES and a (mu+lambda) EA
//!   ([`ea`]),
//! - sequential single-buoy placement primitives including Nelder-Mead and
//!   symmetric annular sampling ([`seqplace`]),
//! - an LSTM power surrogate trained online with grey-wolf hyperparameter
//!   tuning ([`surrogate`]),
//! - the adaptive neuro-surrogate placement method with backtracking
//!   refinement ([`anso`]),
//! - experiment orchestration, statistics and CSV/JSON persistence
//!   ([`harness`]).

pub mod error;
pub mod rng;

pub mod anso;
pub mod ea;
pub mod farm;
pub mod harness;
pub mod hydro;
pub mod seqplace;
pub mod surrogate;

pub use error::{Error, Result};
