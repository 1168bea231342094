//! Process mining over passive mobile positioning data.
//!
//! The pipeline turns call detail records into positioned events, staypoints,
//! multimodal trips, case-centric and object-centric event logs, directly-follows
//! graphs and workflow nets, and validates the results against survey data.
//! [`synth`] generates seeded scenarios with ground truth for testing all of it.

pub mod cli;
pub mod conformance;
pub mod discovery;
pub mod error;
pub mod eventlog;
pub mod formats;
pub mod geo;
pub mod stay;
pub mod synth;
pub mod trips;
pub mod validation;

pub use error::{Error, Result};

#[cfg(test)]
mod testkit;
