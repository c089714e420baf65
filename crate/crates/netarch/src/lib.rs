//! Attributed spatial network embedding and trajectory archetype analysis.
//!
//! The library embeds per-timestep attributed networks into low-dimensional
//! vectors with an alternating-direction solver, clusters the embeddings,
//! validates cluster count and method with silhouette and stability measures,
//! merges temporal label trajectories into archetypes, and detects which node
//! features statistically distinguish the archetypes. The `netarch` binary
//! drives the same stages as a batch CLI.

pub mod archetype;
pub mod cluster;
pub mod embed;
pub mod error;
pub mod features;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod stats;
pub mod validate;

mod special;

pub use error::{Error, Result};
