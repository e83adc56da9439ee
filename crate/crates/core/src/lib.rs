//! Warm-up detection for iterative benchmarks: steady-state annotation,
//! segment datasets, a ROCKET window classifier, dynamic stopping replay,
//! baseline stopping methods and evaluation statistics.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod rocket;
pub mod seed;
pub mod segmentation;
pub mod steady_state;
pub mod stopper;
pub mod synth;

pub use error::{Error, Result};
