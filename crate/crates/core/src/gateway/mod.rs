//! The web front door: compact form packaging and per-session routing.

pub mod compact;
mod service;

pub use compact::{package_form, unpackage_form, CompactError, CompactMessage};
pub use service::{dfs_status, GatewayError, OpenRequest, RoutedSession, Router};
