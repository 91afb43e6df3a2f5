//! Content-addressed block storage with synchronous replication.
//!
//! Files are split into fixed-size blocks named by their SHA-256 digest. A single
//! [`DfsCoordinator`] owns the metadata (manifests, the block index and per-node accounting) and
//! drives [`StorageNode`]s through messages; it never touches a network itself, so the same
//! coordinator runs inside the simulator and behind the in-process [`LocalCluster`].

mod coordinator;
mod local;
mod manifest;
mod node;
mod repair;
mod replicas;
mod store;

pub use coordinator::{DfsCoordinator, DfsEffect, IndexEntry, ReqId};
pub use local::LocalCluster;
pub use manifest::{block_span, chunk, BlockRecord, Manifest};
pub use node::{StorageMsg, StorageNode};
pub use repair::{repair, RepairAction, RepairReason};
pub use replicas::choose_replicas;
pub use store::{BlockStore, DiskStore, MemStore};

use crate::{Digest, NodeId};

pub const DEFAULT_BLOCK_SIZE: u64 = 4 * 1024 * 1024;
pub const DEFAULT_REPLICATION: usize = 3;
pub const DEFAULT_READ_AHEAD: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DfsError {
    #[error("need {needed} live storage nodes, have {live}")]
    InsufficientNodes { needed: usize, live: usize },
    #[error("replica write of block {digest} failed on node {node}")]
    WriteFailed { digest: Digest, node: NodeId },
    #[error("no such file: {0}")]
    NotFound(String),
    #[error("range {offset}+{length} exceeds file length {total}")]
    RangeError {
        offset: u64,
        length: u64,
        total: u64,
    },
    #[error("no live replica of block {0} could serve it")]
    Unavailable(Digest),
    #[error("invalid path {0:?}")]
    BadPath(String),
    #[error("manifest line {line}: {message}")]
    BadManifest { line: usize, message: String },
}

/// Paths are opaque keys, but they end up in the line-oriented manifest format, so they may not
/// be empty or contain whitespace.
pub fn validate_path(path: &str) -> Result<(), DfsError> {
    if path.is_empty() || path.chars().any(char::is_whitespace) {
        return Err(DfsError::BadPath(path.to_string()));
    }
    Ok(())
}
