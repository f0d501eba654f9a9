//! Simulation and learning toolkit for user-centric load balancing in hybrid
//! LiFi/WiFi networks.

pub mod channel;
pub mod error;
pub mod experiment;
mod fsutil;
pub mod loadbalance;
pub mod mobility;
pub mod msnn;
pub mod neural;
pub mod par;
pub mod rng;
pub mod runtime;
pub mod scenario;
pub mod topology;

pub use error::{Error, Result};
pub use fsutil::write_atomic;
