//! Bayesian quickest detection of radially propagating events observed by a
//! field of noisy sensors.
//!
//! The hidden state is the event origin together with the radius of the
//! disturbance; a recursive filter tracks its posterior and stopping rules
//! threshold either the no-change posterior or per-origin posteriors.

pub mod asymptotics;
pub mod dp;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod observation;
pub mod posterior;
pub mod quadrature;
pub mod rng;
pub mod simulation;
pub mod state_model;
pub mod stats;
pub mod stopping;

pub use error::{Error, Result};
