//! Coded caching for fog radio access networks under time-variant content
//! popularity.
//!
//! Each fog access point (F-AP) trains a dueling double Q-network on
//! "virtual coded caching" experience built from its own requests. The local
//! models are merged by federated averaging into a global model that picks
//! the coded-caching placement for the whole network.
//!
//! Module map:
//!
//! - [`popularity`]: Zipf profiles, Markov profile switching, request sampling.
//! - [`coded_cache`]: fragmentation, fronthaul load per row, slot delay.
//! - [`env`]: MDP state, action space, reward, local/global steps.
//! - [`dqn`]: from-scratch dueling double Q-network and its training step.
//! - [`federated`]: local trainers, FedAvg aggregation, the federated run loop.
//! - [`baselines`]: LFU, APCC, NUCC, centralized DRL and a brute-force oracle.
//! - [`harness`]: config files, experiment driver, CSV and SVG output.
//!
//! Content and profile indices are zero-based throughout the API.

pub mod baselines;
pub mod coded_cache;
pub mod dqn;
pub mod env;
mod error;
pub mod federated;
pub mod harness;
pub mod popularity;
pub mod scheme;
pub mod seeds;

pub use error::{Error, Result};
