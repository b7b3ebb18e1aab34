//! Core building blocks of the SkyQuery federation.
//!
//! * [`sphere`]: sky positions, unit vectors and angular metrics.
//! * [`htm`]: the Hierarchical Triangular Mesh quadtree and cone covers.
//! * [`query`]: the extended SQL dialect (AREA / XMATCH), its parser,
//!   printer, predicate partitioning and expression evaluation.
//! * [`xmatch`]: inverse-variance cross-match tuples and the per-node
//!   cross-match step.
//! * [`table`]: the typed [`table::ResultTable`] exchanged by every service.
//! * [`catalog`]: schema-templated catalog tables with an HTM index.
//! * [`synth`]: deterministic synthetic survey catalogs.

pub mod catalog;
pub mod htm;
pub mod query;
pub mod sphere;
pub mod synth;
pub mod table;
pub mod xmatch;

pub use sphere::{SkyPos, UnitVec3};
