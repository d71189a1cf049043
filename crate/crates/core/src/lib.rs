//! Ecosystem-scale vulnerability propagation.
//!
//! Given an immutable [`snapshot::EcosystemSnapshot`] and a vulnerability
//! (root project, vulnerable versions, vulnerable functions), the
//! [`propagation`] engine walks the project-level dependency graph with a
//! worklist, pruning candidate downstream project-versions by declared
//! version, by imported content and finally at call-graph level. The
//! [`vpss`] module turns the result into a time-aware 0–10 impact score.

pub mod depgraph;
pub mod oracle;
pub mod par;
pub mod patchvf;
pub mod propagation;
pub mod report;
pub mod rng;
pub mod snapshot;
pub mod synthgen;
pub mod vpss;

pub use depgraph::PDepGraph;
pub use propagation::{propagate, PropagationResult, VulnSpec};
pub use snapshot::{load_snapshot, validate_snapshot, EcosystemSnapshot, ProjectId, PvId};

/// Version tag written into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
