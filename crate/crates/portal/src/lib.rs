//! The federating portal: parses a cross-match query, asks every member for
//! counts, orders the chain by them and drives it, with a star-join
//! baseline for comparison and an optional image cutout of the area.

pub mod config;
pub mod demo;
pub mod error;
pub mod exec;
pub mod plan;
pub mod service;

pub use config::{FederationConfig, Member, MemberKind};
pub use error::PortalError;
pub use exec::{CutoutImage, Mode, Portal, QueryOutput};
pub use plan::{make_plan, validate_federated, ExecutionPlan, MemberMeta, SIGMA_COLUMN};
