//! Exact and simulated analysis of a single-server polling system with three
//! queues, Join-the-Shortest-Queue routing and preemptive
//! Serve-the-Longest-Queue switching.

pub mod error;
pub mod generator;
pub mod linalg;
pub mod measures;
pub mod mg;
pub mod model;
pub mod sim;
pub mod pgf;
pub mod stability;
pub mod tables;
pub mod truncated;

pub use error::{Error, Result};
pub use model::{ModelParams, Phase};
