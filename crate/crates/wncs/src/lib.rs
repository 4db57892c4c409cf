//! Deterministic simulator and codesign toolkit for wireless networked
//! control systems: coupled linear plants closed over Markov block-fading
//! channels, a packet-aware Kalman estimator, LQR and scheduling benchmarks,
//! and an actor-critic learner that jointly picks channel assignments and
//! control inputs.
//!
//! Everything is seeded and reproducible: simulations draw from explicit
//! per-stream RNGs, experiments serialize to versioned files, and the
//! evaluation harness compares policies under common random numbers.
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `wncs` binary for the batch command-line interface.

pub mod channel;
pub mod checkpoint;
pub mod config;
pub mod estimator;
pub mod drl;
pub mod env;
pub mod error;
pub mod eval;
pub mod lqr;
pub mod nn;
pub mod plant;
pub mod rng;
pub mod scheduling;
pub mod world;

pub use error::{Error, Result};
