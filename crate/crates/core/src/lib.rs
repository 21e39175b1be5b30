//! Transmission-line outage modelling with PC structure learning and
//! discrete Bayesian networks.
//!
//! The pipeline runs ingest → discretize → rebalance → PC → CPT fitting,
//! then scores hourly weather with exact posterior outage probabilities.

pub mod bayesnet;
pub mod citest;
pub mod cli;
pub mod dag;
pub mod error;
pub mod evalmetrics;
pub mod ingest;
pub mod model;
pub mod pcalg;
pub mod preprocess;
pub mod synthgen;

pub use error::{Error, Result};
