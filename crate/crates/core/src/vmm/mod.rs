//! Virtualization management: telemetry polling, placement, failure detection and habit-driven
//! prewarming of free capacity.

mod failure;
pub mod habit;
mod manager;
pub mod placement;
mod prewarm;
mod resources;
pub mod telemetry;

pub use failure::FailureDetector;
pub use habit::{DemandPredictor, HabitProfile, LastValueProfile, Slot};
pub use manager::{
    Allocation, AllocationKey, FailureReport, Health, ManagedNode, NodeRole, VmConfig, VmManager,
};
pub use placement::{place_session, PlacementDecision, PlacementPolicy, PolicyKind};
pub use prewarm::{prewarm_plan, sessions_for, PrewarmPlan};
pub use resources::{min_ratio, Ratio, ResourceKind, ResourceVector};
pub use telemetry::NodeTelemetry;

use crate::render::SessionId;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VmError {
    #[error("no node has room for the request")]
    NoCapacity,
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("node {0} did not answer its poll")]
    NodeUnreachable(NodeId),
    #[error("node {0} is not registered")]
    UnknownNode(NodeId),
    #[error("node {0} sent a poll older than the last one")]
    StalePoll(NodeId),
    #[error("bad telemetry: {0}")]
    BadTelemetry(String),
    #[error("unknown placement policy {0:?}")]
    UnknownPolicy(String),
    #[error("unknown demand predictor {0:?}")]
    UnknownPredictor(String),
    #[error("session {0} is already placed")]
    DuplicateSession(SessionId),
}
