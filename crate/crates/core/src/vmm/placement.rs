//! Session placement over a telemetry snapshot.
//!
//! Both built-in policies rank feasible nodes by a min-ratio headroom score (the tightest
//! resource relative to that node's capacity), so the choice is unchanged when every capacity
//! and request is scaled by the same factor. Ties go to the lowest node id.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::registry::Registry;
use crate::render::SessionId;
use crate::NodeId;

use super::resources::{min_ratio, Ratio};
use super::{NodeTelemetry, ResourceVector, VmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Best fit: the feasible node left with the least headroom.
    Consolidate,
    /// Least loaded: the feasible node with the most headroom before placement.
    Spread,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Consolidate => "consolidate",
            PolicyKind::Spread => "spread",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = VmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        policies()
            .get(s)
            .map(|p| p.kind())
            .ok_or_else(|| VmError::UnknownPolicy(s.to_string()))
    }
}

pub trait PlacementPolicy: Send + Sync {
    fn kind(&self) -> PolicyKind;

    /// Score of placing `req` on `node`. Only called for nodes where `req` fits.
    fn score(&self, req: &ResourceVector, node: &NodeTelemetry) -> Ratio;

    /// Whether score `a` ranks strictly ahead of score `b`.
    fn prefers(&self, a: Ratio, b: Ratio) -> bool;

    /// Index into `cluster` of the chosen node, with its score.
    fn select(&self, req: &ResourceVector, cluster: &[NodeTelemetry]) -> Option<(usize, Ratio)> {
        let mut best: Option<(usize, Ratio)> = None;
        for (i, node) in cluster.iter().enumerate() {
            if !req.fits_within(&node.free()) {
                continue;
            }
            let score = self.score(req, node);
            let better = match best {
                None => true,
                Some((j, s)) => {
                    self.prefers(score, s) || (score == s && node.node_id < cluster[j].node_id)
                }
            };
            if better {
                best = Some((i, score));
            }
        }
        best
    }
}

pub struct Consolidate;

impl PlacementPolicy for Consolidate {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Consolidate
    }

    fn score(&self, req: &ResourceVector, node: &NodeTelemetry) -> Ratio {
        min_ratio(&node.free().saturating_sub(*req), &node.capacity)
    }

    fn prefers(&self, a: Ratio, b: Ratio) -> bool {
        a < b
    }
}

pub struct Spread;

impl PlacementPolicy for Spread {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Spread
    }

    fn score(&self, _req: &ResourceVector, node: &NodeTelemetry) -> Ratio {
        min_ratio(&node.free(), &node.capacity)
    }

    fn prefers(&self, a: Ratio, b: Ratio) -> bool {
        a > b
    }
}

/// Built-in placement policies, keyed by name.
pub fn policies() -> &'static Registry<dyn PlacementPolicy> {
    static POLICIES: OnceLock<Registry<dyn PlacementPolicy>> = OnceLock::new();
    POLICIES.get_or_init(|| {
        let mut reg: Registry<dyn PlacementPolicy> = Registry::new();
        reg.register("consolidate", Box::new(Consolidate))
            .register("spread", Box::new(Spread));
        reg
    })
}

pub fn policy(kind: PolicyKind) -> &'static dyn PlacementPolicy {
    policies()
        .get(kind.name())
        .expect("built-in policy is registered")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementDecision {
    pub session_id: SessionId,
    pub chosen_node: NodeId,
    pub score: f64,
    pub policy: PolicyKind,
}

/// Chooses a node for `req` and records the allocation on it in `cluster`.
pub fn place_session(
    session_id: SessionId,
    req: &ResourceVector,
    cluster: &mut [NodeTelemetry],
    policy: &dyn PlacementPolicy,
) -> Result<PlacementDecision, VmError> {
    if cluster.is_empty() {
        return Err(VmError::EmptyCluster);
    }
    let (idx, score) = policy.select(req, cluster).ok_or(VmError::NoCapacity)?;
    let node = &mut cluster[idx];
    node.allocated += *req;
    node.session_count += 1;
    Ok(PlacementDecision {
        session_id,
        chosen_node: node.node_id,
        score: score.to_f64(),
        policy: policy.kind(),
    })
}
