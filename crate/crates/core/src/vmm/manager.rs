use std::collections::BTreeMap;

use crate::render::SessionId;
use crate::{NodeId, Tick};

use super::habit::{predictors, to_vector, DemandPredictor, Slot};
use super::placement::{place_session, policy, PlacementDecision, PolicyKind};
use super::prewarm::{prewarm_plan, PrewarmPlan};
use super::resources::min_ratio;
use super::{FailureDetector, NodeTelemetry, ResourceKind, ResourceVector, VmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRole {
    Render,
    Storage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Health {
    Alive,
    /// Missed its latest poll.
    Suspect,
    /// Silent past the failure threshold; holds no allocations.
    Failed,
}

#[derive(Debug, Clone)]
pub struct ManagedNode {
    pub role: NodeRole,
    pub health: Health,
    pub capacity: ResourceVector,
    /// Last successful poll, as reported by the node.
    pub reported: Option<NodeTelemetry>,
    pub last_ok: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AllocationKey {
    Session(SessionId),
    Warm(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Allocation {
    pub node: NodeId,
    pub resources: ResourceVector,
}

#[derive(Debug, Clone)]
pub struct VmConfig {
    pub policy: PolicyKind,
    pub predictor: String,
    pub poll_interval: Tick,
    pub session_quota: ResourceVector,
}

impl Default for VmConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Consolidate,
            predictor: "ewma".into(),
            poll_interval: 1000,
            session_quota: ResourceVector::new(1000, 1024, 10, 1),
        }
    }
}

/// Nodes newly declared failed and the sessions they were hosting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureReport {
    pub failed: Vec<NodeId>,
    pub orphaned: Vec<(SessionId, NodeId)>,
}

/// The cluster manager's single serialized state: node health, allocations and user habits.
///
/// Allocations are authoritative here; polled gauges are kept alongside for comparison.
pub struct VmManager {
    config: VmConfig,
    detector: FailureDetector,
    nodes: BTreeMap<NodeId, ManagedNode>,
    allocations: BTreeMap<AllocationKey, Allocation>,
    habits: BTreeMap<String, Box<dyn DemandPredictor>>,
    next_warm: u64,
}

impl VmManager {
    pub fn new(config: VmConfig) -> Result<Self, VmError> {
        if predictors().get(&config.predictor).is_none() {
            return Err(VmError::UnknownPredictor(config.predictor));
        }
        Ok(Self {
            detector: FailureDetector::new(config.poll_interval),
            config,
            nodes: BTreeMap::new(),
            allocations: BTreeMap::new(),
            habits: BTreeMap::new(),
            next_warm: 0,
        })
    }

    pub fn config(&self) -> &VmConfig {
        &self.config
    }

    pub fn register_node(
        &mut self,
        id: NodeId,
        role: NodeRole,
        capacity: ResourceVector,
        now: Tick,
    ) {
        self.nodes.insert(
            id,
            ManagedNode {
                role,
                health: Health::Alive,
                capacity,
                reported: None,
                last_ok: now,
            },
        );
    }

    pub fn node(&self, id: NodeId) -> Option<&ManagedNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &ManagedNode)> {
        self.nodes.iter().map(|(&id, n)| (id, n))
    }

    pub fn is_live(&self, id: NodeId) -> bool {
        self.nodes
            .get(&id)
            .is_some_and(|n| n.health != Health::Failed)
    }

    /// Records a successful poll. Poll times must strictly increase per node.
    pub fn record_poll(&mut self, telemetry: NodeTelemetry, now: Tick) -> Result<bool, VmError> {
        let id = telemetry.node_id;
        let node = self.nodes.get_mut(&id).ok_or(VmError::UnknownNode(id))?;
        if let Some(prev) = &node.reported {
            if telemetry.poll_time <= prev.poll_time {
                return Err(VmError::StalePoll(id));
            }
        }
        let revived = node.health == Health::Failed;
        node.capacity = telemetry.capacity;
        node.reported = Some(telemetry);
        node.last_ok = now;
        node.health = Health::Alive;
        Ok(revived)
    }

    /// Records a poll that got no answer in time; the node becomes suspect.
    pub fn record_poll_timeout(&mut self, id: NodeId) -> VmError {
        if let Some(node) = self.nodes.get_mut(&id) {
            if node.health == Health::Alive {
                node.health = Health::Suspect;
            }
        }
        VmError::NodeUnreachable(id)
    }

    /// Declares nodes silent for more than three poll intervals failed and frees their allocations.
    pub fn detect_failures(&mut self, now: Tick) -> FailureReport {
        let candidates = self
            .nodes
            .iter()
            .filter(|(_, n)| n.health != Health::Failed)
            .map(|(&id, n)| (id, n.last_ok));
        let failed = self.detector.detect(candidates, now);
        let mut orphaned = Vec::new();
        for &id in &failed {
            self.nodes
                .get_mut(&id)
                .expect("detected node exists")
                .health = Health::Failed;
            self.allocations.retain(|key, alloc| {
                if alloc.node != id {
                    return true;
                }
                if let AllocationKey::Session(s) = key {
                    orphaned.push((*s, id));
                }
                false
            });
        }
        FailureReport { failed, orphaned }
    }

    pub fn allocated_on(&self, id: NodeId) -> ResourceVector {
        self.allocations
            .values()
            .filter(|a| a.node == id)
            .map(|a| a.resources)
            .sum()
    }

    pub fn session_allocated_on(&self, id: NodeId) -> ResourceVector {
        self.allocations
            .iter()
            .filter(|(k, a)| a.node == id && matches!(k, AllocationKey::Session(_)))
            .map(|(_, a)| a.resources)
            .sum()
    }

    pub fn sessions_on(&self, id: NodeId) -> Vec<SessionId> {
        self.allocations
            .iter()
            .filter_map(|(k, a)| match k {
                AllocationKey::Session(s) if a.node == id => Some(*s),
                _ => None,
            })
            .collect()
    }

    pub fn session_host(&self, session: SessionId) -> Option<NodeId> {
        self.allocations
            .get(&AllocationKey::Session(session))
            .map(|a| a.node)
    }

    pub fn allocations(&self) -> impl Iterator<Item = (&AllocationKey, &Allocation)> {
        self.allocations.iter()
    }

    /// Placement view: live nodes of `role` with the manager's allocations.
    pub fn cluster(&self, role: NodeRole) -> Vec<NodeTelemetry> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.role == role && n.health == Health::Alive)
            .map(|(&id, n)| NodeTelemetry {
                node_id: id,
                capacity: n.capacity,
                allocated: self.allocated_on(id),
                session_count: self.allocations.values().filter(|a| a.node == id).count() as u32,
                poll_time: n.reported.as_ref().map_or(0, |r| r.poll_time),
            })
            .collect()
    }

    /// Places a session of `req` on a render node. A warm reservation of the same size is
    /// claimed first when one exists.
    pub fn place(
        &mut self,
        session: SessionId,
        req: ResourceVector,
    ) -> Result<PlacementDecision, VmError> {
        let key = AllocationKey::Session(session);
        if self.allocations.contains_key(&key) {
            return Err(VmError::DuplicateSession(session));
        }
        let warm = self.allocations.iter().find_map(|(k, a)| match k {
            AllocationKey::Warm(_)
                if a.resources == req
                    && self
                        .nodes
                        .get(&a.node)
                        .is_some_and(|n| n.health == Health::Alive) =>
            {
                Some((*k, *a))
            }
            _ => None,
        });
        if let Some((warm_key, alloc)) = warm {
            self.allocations.remove(&warm_key);
            self.allocations.insert(key, alloc);
            let cap = self.nodes[&alloc.node].capacity;
            let left = cap.saturating_sub(self.allocated_on(alloc.node));
            return Ok(PlacementDecision {
                session_id: session,
                chosen_node: alloc.node,
                score: min_ratio(&left, &cap).to_f64(),
                policy: self.config.policy,
            });
        }
        let mut cluster = self.cluster(NodeRole::Render);
        let decision = place_session(session, &req, &mut cluster, policy(self.config.policy))?;
        self.allocations.insert(
            key,
            Allocation {
                node: decision.chosen_node,
                resources: req,
            },
        );
        Ok(decision)
    }

    pub fn release(&mut self, session: SessionId) -> Option<Allocation> {
        self.allocations.remove(&AllocationKey::Session(session))
    }

    /// Min-ratio utilization of one node: the least-used resource relative to capacity.
    pub fn utilization(&self, id: NodeId) -> f64 {
        self.nodes.get(&id).map_or(0.0, |n| {
            min_ratio(&self.allocated_on(id), &n.capacity).to_f64()
        })
    }

    /// Nodes whose polled allocated gauge disagrees with the sessions the manager placed there.
    pub fn conservation_violations(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.health == Health::Alive)
            .filter_map(|(&id, n)| {
                let reported = n.reported.as_ref()?;
                (reported.allocated != self.session_allocated_on(id)).then_some(id)
            })
            .collect()
    }

    pub fn observe(&mut self, user: &str, slot: Slot, demand: &ResourceVector) {
        let predictor = &self.config.predictor;
        let profile = self.habits.entry(user.to_string()).or_insert_with(|| {
            predictors()
                .get(predictor)
                .expect("predictor validated at construction")
                .create(user)
        });
        for k in ResourceKind::ALL {
            profile.observe(slot, k, demand.get(k) as f64);
        }
    }

    pub fn predict(&self, user: &str, slot: Slot) -> ResourceVector {
        self.habits
            .get(user)
            .map_or(ResourceVector::ZERO, |p| to_vector(p.predict(slot)))
    }

    pub fn warm_count(&self) -> u32 {
        self.allocations
            .keys()
            .filter(|k| matches!(k, AllocationKey::Warm(_)))
            .count() as u32
    }

    /// Plans warm sessions for `slot` from every user's habit prediction.
    pub fn plan_prewarm(&self, slot: Slot) -> PrewarmPlan {
        let predictions: Vec<ResourceVector> = self
            .habits
            .values()
            .map(|p| to_vector(p.predict(slot)))
            .collect();
        prewarm_plan(
            slot,
            &predictions,
            &self.cluster(NodeRole::Render),
            self.warm_count(),
            &self.config.session_quota,
        )
    }

    /// Reserves the plan's warm sessions. Returns how many were reserved.
    pub fn apply_prewarm(&mut self, plan: &PrewarmPlan) -> u32 {
        let quota = self.config.session_quota;
        let mut reserved = 0;
        for &(node, count) in &plan.actions {
            for _ in 0..count {
                let cap = self
                    .nodes
                    .get(&node)
                    .map(|n| n.capacity)
                    .unwrap_or_default();
                if !(self.allocated_on(node) + quota).fits_within(&cap) {
                    break;
                }
                self.allocations.insert(
                    AllocationKey::Warm(self.next_warm),
                    Allocation {
                        node,
                        resources: quota,
                    },
                );
                self.next_warm += 1;
                reserved += 1;
            }
        }
        reserved
    }
}
