//! A catalog node: metadata, single-table queries and one hop of the
//! cross-match daisy chain, served over HTTP.

pub mod batch;
pub mod chain;
pub mod client;
pub mod config;
pub mod error;
pub mod plan;
pub mod service;
pub mod stats;

pub use batch::TupleBatch;
pub use client::{Exchange, NodeClient, XMatchReply};
pub use config::NodeConfig;
pub use error::{ErrorBody, ErrorDetail, NodeError};
pub use plan::{QueryRequest, XMatchPlanStep, XMatchRequest, CHAIN_BYTES_HEADER};
pub use service::{router, spawn, NodeState, RunningNode};
pub use stats::{StatsEntry, StatsLog};
