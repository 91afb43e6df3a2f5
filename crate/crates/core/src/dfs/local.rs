use std::collections::{BTreeMap, BTreeSet, VecDeque};

use bytes::Bytes;

use super::{
    BlockStore, DfsCoordinator, DfsEffect, DfsError, Manifest, MemStore, RepairAction, ReqId,
    StorageMsg, StorageNode,
};
use crate::NodeId;

const COORDINATOR: NodeId = NodeId(0);

/// The coordinator and its storage nodes wired together in one process with instant, in-order
/// delivery. Messages to stopped nodes are dropped; failures are reported to the coordinator at
/// once instead of after detection.
pub struct LocalCluster {
    coordinator: DfsCoordinator,
    nodes: BTreeMap<NodeId, StorageNode>,
    down: BTreeSet<NodeId>,
    queue: VecDeque<(NodeId, NodeId, StorageMsg)>,
    done: BTreeMap<ReqId, DfsEffect>,
    repairs: Vec<DfsEffect>,
    next_req: ReqId,
}

impl LocalCluster {
    /// `nodes` in-memory storage nodes with ids 1..=nodes.
    pub fn new(nodes: u32, replication: usize, block_size: u64) -> Self {
        Self::with_stores(
            nodes,
            replication,
            block_size,
            |_| Box::new(MemStore::new()),
        )
    }

    /// Like [`Self::new`], with each node's block store supplied by `store`.
    pub fn with_stores(
        nodes: u32,
        replication: usize,
        block_size: u64,
        mut store: impl FnMut(NodeId) -> Box<dyn BlockStore>,
    ) -> Self {
        let mut coordinator = DfsCoordinator::new(COORDINATOR, replication, block_size);
        let mut map = BTreeMap::new();
        for i in 1..=nodes {
            coordinator.add_node(NodeId(i));
            map.insert(NodeId(i), StorageNode::new(NodeId(i), store(NodeId(i))));
        }
        Self {
            coordinator,
            nodes: map,
            down: BTreeSet::new(),
            queue: VecDeque::new(),
            done: BTreeMap::new(),
            repairs: Vec::new(),
            next_req: 1,
        }
    }

    pub fn coordinator(&self) -> &DfsCoordinator {
        &self.coordinator
    }

    pub fn coordinator_mut(&mut self) -> &mut DfsCoordinator {
        &mut self.coordinator
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut StorageNode> {
        self.nodes.get_mut(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&StorageNode> {
        self.nodes.get(&id)
    }

    /// Repair effects observed so far, in order.
    pub fn repair_log(&self) -> &[DfsEffect] {
        &self.repairs
    }

    pub fn scheduled_repairs(&self) -> Vec<RepairAction> {
        self.repairs
            .iter()
            .filter_map(|e| match e {
                DfsEffect::RepairScheduled(a) => Some(*a),
                _ => None,
            })
            .collect()
    }

    fn absorb(&mut self, effects: Vec<DfsEffect>) {
        for e in effects {
            match e {
                DfsEffect::Send(to, msg) => self.queue.push_back((COORDINATOR, to, msg)),
                DfsEffect::PutDone { req, .. } | DfsEffect::GetDone { req, .. } => {
                    self.done.insert(req, e);
                }
                DfsEffect::RepairScheduled(_) | DfsEffect::RepairDone(_) => self.repairs.push(e),
            }
        }
    }

    /// Delivers one queued message. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some((from, to, msg)) = self.queue.pop_front() else {
            return false;
        };
        if to == COORDINATOR {
            let effects = self.coordinator.on_message(from, msg);
            self.absorb(effects);
        } else if !self.down.contains(&to) {
            if let Some(node) = self.nodes.get_mut(&to) {
                for (dest, reply) in node.handle(from, msg) {
                    self.queue.push_back((to, dest, reply));
                }
            }
        }
        true
    }

    pub fn run(&mut self) {
        while self.step() {}
    }

    fn req(&mut self) -> ReqId {
        let r = self.next_req;
        self.next_req += 1;
        r
    }

    pub fn submit_put(&mut self, path: &str, data: Bytes) -> ReqId {
        let req = self.req();
        let effects = self.coordinator.put(req, path, data);
        self.absorb(effects);
        req
    }

    pub fn submit_get(&mut self, path: &str, offset: u64, length: u64) -> ReqId {
        let req = self.req();
        let effects = self.coordinator.get(req, 0, path, offset, length);
        self.absorb(effects);
        req
    }

    pub fn take_put(&mut self, req: ReqId) -> Option<Result<Manifest, DfsError>> {
        match self.done.remove(&req)? {
            DfsEffect::PutDone { result, .. } => Some(result),
            other => panic!("request {req} finished as {other:?}"),
        }
    }

    pub fn take_get(&mut self, req: ReqId) -> Option<Result<Bytes, DfsError>> {
        match self.done.remove(&req)? {
            DfsEffect::GetDone { result, .. } => Some(result),
            other => panic!("request {req} finished as {other:?}"),
        }
    }

    pub fn put(&mut self, path: &str, data: Bytes) -> Result<Manifest, DfsError> {
        let req = self.submit_put(path, data);
        self.run();
        self.take_put(req)
            .expect("put completes once the queue drains")
    }

    pub fn get(&mut self, path: &str, offset: u64, length: u64) -> Result<Bytes, DfsError> {
        let req = self.submit_get(path, offset, length);
        self.run();
        self.take_get(req)
            .expect("get completes once the queue drains")
    }

    /// Stops a node (its disk survives) and tells the coordinator.
    pub fn kill(&mut self, id: NodeId) {
        self.down.insert(id);
        let effects = self.coordinator.node_failed(id);
        self.absorb(effects);
    }

    /// Stops a node without telling the coordinator: requests to it vanish.
    pub fn silence(&mut self, id: NodeId) {
        self.down.insert(id);
    }

    pub fn revive(&mut self, id: NodeId) {
        self.down.remove(&id);
        let effects = self.coordinator.node_revived(id);
        self.absorb(effects);
    }

    pub fn repair(&mut self) {
        let effects = self.coordinator.run_repair();
        self.absorb(effects);
        self.run();
    }
}
