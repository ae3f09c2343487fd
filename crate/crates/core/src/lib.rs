//! Simulation and analysis of classical PSK data carried on displaced
//! coherent states alongside Gaussian-modulated continuous-variable QKD.
//!
//! Quadratures are in shot-noise units: `X = a + a†`, so the vacuum has unit
//! variance and a coherent amplitude α sits at `(2 Re α, 2 Im α)`.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod link;
pub mod model;
pub mod receiver;
pub mod report;
pub mod security;
pub mod selftest;
pub mod stats;
pub mod transmitter;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use experiment::{keyrate_only, run_calibration, run_experiment, run_experiment_with_sink, sweep, ExperimentReport};
pub use security::{secret_key_rate, SecurityEstimate, SecurityParams};
pub use transmitter::PskOrder;
