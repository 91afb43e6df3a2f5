//! Cumulus: a desk-scale thin-client cloud.
//!
//! The crate is split along the runtime boundaries of the system:
//!
//! - [`protocol`]: wire codecs for input events and frame updates, plus the tile-diff engine.
//! - [`render`]: the deterministic canvas application that runs server-side for each session.
//! - [`vmm`]: node telemetry, session placement, per-user habit matrices and prewarm planning.
//! - [`dfs`]: content-addressed, synchronously replicated block storage.
//! - [`gateway`]: compact form packaging and the session/object front door.
//! - [`sim`]: the discrete-event harness every component runs on, and the metrics it reports.
//!
//! Interchangeable algorithms (tile codecs, placement policies, demand predictors) sit behind
//! traits and are looked up by name in a [`registry::Registry`].

pub mod dfs;
pub mod digest;
pub mod gateway;
pub mod protocol;
pub mod registry;
pub mod render;
pub mod sim;
pub mod vmm;

pub use digest::Digest;

/// Virtual time, in ticks of one millisecond.
pub type Tick = u64;

/// Identifier of a node in the cluster (render host, storage node, control node or client edge).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
