//! Hyperfractal urban vehicular networks.
//!
//! Generates self-similar street/node/relay maps, builds the nearest-neighbour
//! communication graph, answers energy- and power-constrained routing
//! queries, and fits hyperfractal dimensions to street data.

pub mod analytics;
pub mod error;
pub mod experiments;
pub mod fitting;
pub mod graph;
pub mod io;
pub mod map;
pub mod rng;
pub mod routing;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
