use std::collections::{BTreeMap, BTreeSet, VecDeque};

use bytes::Bytes;

use super::{
    block_span, choose_replicas, chunk, repair, validate_path, BlockRecord, DfsError, Manifest,
    RepairAction, RepairReason, StorageMsg, DEFAULT_BLOCK_SIZE, DEFAULT_READ_AHEAD,
    DEFAULT_REPLICATION,
};
use crate::{Digest, NodeId};

/// Caller-chosen id correlating a request with its completion effect.
pub type ReqId = u64;

const MAX_WRITE_ATTEMPTS: u32 = 3;
const DEFAULT_CACHE_BLOCKS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DfsEffect {
    Send(NodeId, StorageMsg),
    PutDone {
        req: ReqId,
        result: Result<Manifest, DfsError>,
    },
    GetDone {
        req: ReqId,
        result: Result<Bytes, DfsError>,
    },
    /// A repair was started; data-loss actions are reported once and never executed.
    RepairScheduled(RepairAction),
    RepairDone(RepairAction),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub size: u64,
    pub replicas: BTreeSet<NodeId>,
    /// Number of manifests referencing the block.
    pub refs: u32,
}

#[derive(Debug, Clone)]
struct FileEntry {
    total_length: u64,
    block_size: u64,
    blocks: Vec<(Digest, u64)>,
}

struct PendingWrite {
    digest: Digest,
    node: NodeId,
    attempts: u32,
}

struct PutOp {
    req: ReqId,
    manifest: Manifest,
    data: BTreeMap<Digest, Bytes>,
    pending: BTreeMap<u64, PendingWrite>,
    acked: Vec<(Digest, NodeId)>,
    tried: BTreeMap<Digest, BTreeSet<NodeId>>,
    planned: BTreeMap<NodeId, u64>,
}

struct GetOp {
    offset: u64,
    length: u64,
    file: FileEntry,
    span_start: usize,
    slots: Vec<Option<Bytes>>,
    missing: usize,
}

struct Fetch {
    digest: Digest,
    node: NodeId,
    tried: BTreeSet<NodeId>,
    corrupt: Vec<NodeId>,
}

struct RepairJob {
    action: RepairAction,
    size: u64,
}

/// Metadata manager and request driver for the block store.
///
/// All methods return the effects to carry out: messages to storage nodes and completions of
/// earlier requests. Puts are serialized; gets and repairs run concurrently with them.
pub struct DfsCoordinator {
    id: NodeId,
    replication: usize,
    block_size: u64,
    read_ahead: usize,
    cache_blocks: usize,
    files: BTreeMap<String, FileEntry>,
    index: BTreeMap<Digest, IndexEntry>,
    /// Live storage nodes and the bytes the index places on them.
    stored: BTreeMap<NodeId, u64>,
    next_op: u64,
    put_queue: VecDeque<(ReqId, String, Bytes)>,
    put: Option<PutOp>,
    gets: BTreeMap<ReqId, GetOp>,
    fetches: BTreeMap<u64, Fetch>,
    inflight: BTreeMap<Digest, u64>,
    waiters: BTreeMap<Digest, Vec<ReqId>>,
    outstanding: BTreeMap<NodeId, usize>,
    cache: VecDeque<(Digest, Bytes)>,
    streams: BTreeMap<(u64, String), u64>,
    repairs: BTreeMap<u64, RepairJob>,
    lost: BTreeSet<Digest>,
    out: Vec<DfsEffect>,
}

impl DfsCoordinator {
    /// `id` is the coordinator's own address, used as the reply target of writes.
    pub fn new(id: NodeId, replication: usize, block_size: u64) -> Self {
        assert!(replication >= 1 && block_size > 0);
        Self {
            id,
            replication,
            block_size,
            read_ahead: DEFAULT_READ_AHEAD,
            cache_blocks: DEFAULT_CACHE_BLOCKS,
            files: BTreeMap::new(),
            index: BTreeMap::new(),
            stored: BTreeMap::new(),
            next_op: 1,
            put_queue: VecDeque::new(),
            put: None,
            gets: BTreeMap::new(),
            fetches: BTreeMap::new(),
            inflight: BTreeMap::new(),
            waiters: BTreeMap::new(),
            outstanding: BTreeMap::new(),
            cache: VecDeque::new(),
            streams: BTreeMap::new(),
            repairs: BTreeMap::new(),
            lost: BTreeSet::new(),
            out: Vec::new(),
        }
    }

    pub fn with_defaults(id: NodeId) -> Self {
        Self::new(id, DEFAULT_REPLICATION, DEFAULT_BLOCK_SIZE)
    }

    /// Read-ahead window in blocks and the size of the block cache that holds prefetched blocks.
    pub fn set_read_ahead(&mut self, window: usize, cache_blocks: usize) {
        self.read_ahead = window;
        self.cache_blocks = cache_blocks.max(window);
    }

    pub fn replication(&self) -> usize {
        self.replication
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    pub fn add_node(&mut self, node: NodeId) {
        self.stored.entry(node).or_insert(0);
    }

    pub fn live_nodes(&self) -> impl Iterator<Item = (NodeId, u64)> + '_ {
        self.stored.iter().map(|(&n, &b)| (n, b))
    }

    pub fn is_live(&self, node: NodeId) -> bool {
        self.stored.contains_key(&node)
    }

    pub fn index(&self) -> &BTreeMap<Digest, IndexEntry> {
        &self.index
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn manifest(&self, path: &str) -> Option<Manifest> {
        let f = self.files.get(path)?;
        Some(Manifest {
            path: path.to_string(),
            total_length: f.total_length,
            block_size: f.block_size,
            blocks: f
                .blocks
                .iter()
                .map(|&(digest, size)| BlockRecord {
                    digest,
                    size,
                    replicas: self
                        .index
                        .get(&digest)
                        .map_or_else(Vec::new, |e| e.replicas.iter().copied().collect()),
                })
                .collect(),
        })
    }

    /// Blocks whose replica count differs from the replication factor.
    pub fn misreplicated(&self) -> Vec<(Digest, usize)> {
        self.index
            .iter()
            .filter(|(_, e)| e.replicas.len() != self.replication)
            .map(|(&d, e)| (d, e.replicas.len()))
            .collect()
    }

    pub fn lost_blocks(&self) -> &BTreeSet<Digest> {
        &self.lost
    }

    pub fn is_idle(&self) -> bool {
        self.put.is_none()
            && self.gets.is_empty()
            && self.fetches.is_empty()
            && self.repairs.is_empty()
    }

    /// Rebuilds metadata from a persisted manifest, trusting its replica lists.
    pub fn restore(&mut self, manifest: Manifest) -> Result<(), DfsError> {
        validate_path(&manifest.path)?;
        let entry = FileEntry {
            total_length: manifest.total_length,
            block_size: manifest.block_size,
            blocks: manifest.blocks.iter().map(|b| (b.digest, b.size)).collect(),
        };
        let distinct: BTreeSet<Digest> = entry.blocks.iter().map(|b| b.0).collect();
        for b in &manifest.blocks {
            if !self.index.contains_key(&b.digest) {
                let replicas: BTreeSet<NodeId> = b.replicas.iter().copied().collect();
                for n in &replicas {
                    if let Some(s) = self.stored.get_mut(n) {
                        *s += b.size;
                    }
                }
                self.index.insert(
                    b.digest,
                    IndexEntry {
                        size: b.size,
                        replicas,
                        refs: 0,
                    },
                );
            }
        }
        for d in distinct {
            self.index.get_mut(&d).expect("inserted above").refs += 1;
        }
        self.files.insert(manifest.path, entry);
        Ok(())
    }

    fn op(&mut self) -> u64 {
        let op = self.next_op;
        self.next_op += 1;
        op
    }

    fn send(&mut self, to: NodeId, msg: StorageMsg) {
        self.out.push(DfsEffect::Send(to, msg));
    }

    fn flush(&mut self) -> Vec<DfsEffect> {
        std::mem::take(&mut self.out)
    }

    // ---- writes ----

    pub fn put(&mut self, req: ReqId, path: &str, data: Bytes) -> Vec<DfsEffect> {
        self.put_queue.push_back((req, path.to_string(), data));
        if self.put.is_none() {
            self.start_next_put();
        }
        self.flush()
    }

    fn start_next_put(&mut self) {
        while self.put.is_none() {
            let Some((req, path, data)) = self.put_queue.pop_front() else {
                return;
            };
            if let Err(e) = validate_path(&path) {
                self.out.push(DfsEffect::PutDone {
                    req,
                    result: Err(e),
                });
                continue;
            }
            if self.stored.len() < self.replication {
                let e = DfsError::InsufficientNodes {
                    needed: self.replication,
                    live: self.stored.len(),
                };
                self.out.push(DfsEffect::PutDone {
                    req,
                    result: Err(e),
                });
                continue;
            }
            let (manifest, blocks) = chunk(&path, &data, self.block_size);
            let mut op = PutOp {
                req,
                data: BTreeMap::new(),
                pending: BTreeMap::new(),
                acked: Vec::new(),
                tried: BTreeMap::new(),
                planned: self.stored.clone(),
                manifest,
            };
            let mut digests = Vec::new();
            for (rec, block) in op.manifest.blocks.iter().zip(blocks) {
                let stored = self
                    .index
                    .get(&rec.digest)
                    .is_some_and(|e| !e.replicas.is_empty());
                if stored || op.data.contains_key(&rec.digest) {
                    continue;
                }
                digests.push((rec.digest, rec.size));
                op.data.insert(rec.digest, block);
            }
            self.put = Some(op);
            for (digest, size) in digests {
                let planned: Vec<(NodeId, u64)> = self
                    .put_ref()
                    .planned
                    .iter()
                    .map(|(&n, &b)| (n, b))
                    .collect();
                let targets =
                    choose_replicas(&planned, self.replication).expect("live count checked");
                for node in targets {
                    *self.put_mut().planned.get_mut(&node).expect("live") += size;
                    self.put_mut().tried.entry(digest).or_default().insert(node);
                    self.send_write(digest, node, 1);
                }
            }
            self.maybe_commit();
        }
    }

    fn put_ref(&self) -> &PutOp {
        self.put.as_ref().expect("put in progress")
    }

    fn put_mut(&mut self) -> &mut PutOp {
        self.put.as_mut().expect("put in progress")
    }

    fn send_write(&mut self, digest: Digest, node: NodeId, attempts: u32) {
        let op = self.op();
        let data = self.put_ref().data[&digest].clone();
        self.put_mut().pending.insert(
            op,
            PendingWrite {
                digest,
                node,
                attempts,
            },
        );
        let reply_to = self.id;
        self.send(
            node,
            StorageMsg::Store {
                op,
                digest,
                data,
                reply_to,
            },
        );
    }

    /// Moves a failed replica write to a node that has not been tried for this block.
    fn replace_write(&mut self, digest: Digest, failed: NodeId) {
        let size = self.put_ref().data[&digest].len() as u64;
        let put = self.put_mut();
        if let Some(b) = put.planned.get_mut(&failed) {
            *b = b.saturating_sub(size);
        }
        let tried = put.tried.entry(digest).or_default();
        let candidates: Vec<(NodeId, u64)> = put
            .planned
            .iter()
            .filter(|(n, _)| !tried.contains(n))
            .map(|(&n, &b)| (n, b))
            .collect();
        match choose_replicas(&candidates, 1) {
            Ok(next) => {
                let node = next[0];
                put.tried.entry(digest).or_default().insert(node);
                *put.planned.get_mut(&node).expect("live") += size;
                self.send_write(digest, node, 1);
            }
            Err(_) => self.abort_put(DfsError::WriteFailed {
                digest,
                node: failed,
            }),
        }
    }

    fn on_write_ack(&mut self, op: u64, ok: bool) {
        let Some(w) = self.put_mut().pending.remove(&op) else {
            return;
        };
        if ok {
            self.put_mut().acked.push((w.digest, w.node));
            self.maybe_commit();
        } else if w.attempts < MAX_WRITE_ATTEMPTS {
            self.send_write(w.digest, w.node, w.attempts + 1);
        } else {
            self.replace_write(w.digest, w.node);
        }
    }

    fn abort_put(&mut self, error: DfsError) {
        let put = self.put.take().expect("put in progress");
        for (digest, node) in put.acked {
            if !self.index.contains_key(&digest) {
                self.send(node, StorageMsg::Delete { digest });
            }
        }
        self.out.push(DfsEffect::PutDone {
            req: put.req,
            result: Err(error),
        });
        self.start_next_put();
    }

    fn maybe_commit(&mut self) {
        if self.put.as_ref().is_none_or(|p| !p.pending.is_empty()) {
            return;
        }
        let put = self.put.take().expect("checked above");
        for (digest, node) in &put.acked {
            let size = put.data[digest].len() as u64;
            let entry = self.index.entry(*digest).or_insert_with(|| IndexEntry {
                size,
                replicas: BTreeSet::new(),
                refs: 0,
            });
            if entry.replicas.insert(*node) {
                *self.stored.get_mut(node).expect("acked nodes are live") += size;
            }
            self.lost.remove(digest);
        }
        let distinct: BTreeSet<Digest> = put.manifest.blocks.iter().map(|b| b.digest).collect();
        for d in &distinct {
            self.index.get_mut(d).expect("every block is indexed").refs += 1;
        }
        let path = put.manifest.path.clone();
        let entry = FileEntry {
            total_length: put.manifest.total_length,
            block_size: put.manifest.block_size,
            blocks: put
                .manifest
                .blocks
                .iter()
                .map(|b| (b.digest, b.size))
                .collect(),
        };
        if let Some(old) = self.files.insert(path.clone(), entry) {
            let old: BTreeSet<Digest> = old.blocks.iter().map(|b| b.0).collect();
            for d in old {
                self.release_block(d);
            }
        }
        let manifest = self.manifest(&path).expect("just inserted");
        self.out.push(DfsEffect::PutDone {
            req: put.req,
            result: Ok(manifest),
        });
        self.start_next_put();
    }

    fn release_block(&mut self, digest: Digest) {
        let entry = self
            .index
            .get_mut(&digest)
            .expect("referenced blocks are indexed");
        entry.refs -= 1;
        if entry.refs > 0 {
            return;
        }
        let entry = self.index.remove(&digest).expect("present");
        for node in entry.replicas {
            if let Some(s) = self.stored.get_mut(&node) {
                *s -= entry.size;
            }
            self.send(node, StorageMsg::Delete { digest });
        }
        self.cache.retain(|(d, _)| *d != digest);
        self.lost.remove(&digest);
    }

    // ---- reads ----

    /// Reads `[offset, offset+length)` of `path`. Reads that continue where the previous read of
    /// the same `stream` stopped (or start at 0) prefetch the next blocks into the cache.
    pub fn get(
        &mut self,
        req: ReqId,
        stream: u64,
        path: &str,
        offset: u64,
        length: u64,
    ) -> Vec<DfsEffect> {
        let result = self.start_get(req, stream, path, offset, length);
        if let Err(e) = result {
            self.out.push(DfsEffect::GetDone {
                req,
                result: Err(e),
            });
        }
        self.flush()
    }

    fn start_get(
        &mut self,
        req: ReqId,
        stream: u64,
        path: &str,
        offset: u64,
        length: u64,
    ) -> Result<(), DfsError> {
        let file = self
            .files
            .get(path)
            .ok_or_else(|| DfsError::NotFound(path.to_string()))?
            .clone();
        let end = offset
            .checked_add(length)
            .filter(|&e| e <= file.total_length)
            .ok_or(DfsError::RangeError {
                offset,
                length,
                total: file.total_length,
            })?;
        let key = (stream, path.to_string());
        let sequential = offset == 0 || self.streams.get(&key) == Some(&offset);
        self.streams.insert(key, end);
        let span = block_span(offset, length, file.block_size);
        let prefetch: Vec<Digest> = if sequential {
            file.blocks
                .iter()
                .skip(span.end)
                .take(self.read_ahead)
                .map(|b| b.0)
                .collect()
        } else {
            Vec::new()
        };
        let wanted: Vec<Digest> = file.blocks[span.clone()].iter().map(|b| b.0).collect();
        let mut op = GetOp {
            offset,
            length,
            span_start: span.start,
            slots: vec![None; wanted.len()],
            missing: 0,
            file,
        };
        let mut to_fetch = BTreeSet::new();
        for (slot, d) in op.slots.iter_mut().zip(&wanted) {
            match self.cached(d) {
                Some(b) => *slot = Some(b),
                None => {
                    op.missing += 1;
                    to_fetch.insert(*d);
                }
            }
        }
        self.gets.insert(req, op);
        // request in block order so replica choice is deterministic and spreads from the front
        let mut seen = BTreeSet::new();
        for d in wanted.iter().filter(|d| to_fetch.contains(d)) {
            if seen.insert(*d) {
                self.waiters.entry(*d).or_default().push(req);
                self.request_block(*d);
            }
        }
        for d in prefetch {
            if self.cached(&d).is_none() {
                self.request_block(d);
            }
        }
        self.maybe_finish_get(req);
        Ok(())
    }

    fn cached(&self, digest: &Digest) -> Option<Bytes> {
        self.cache
            .iter()
            .find(|(d, _)| d == digest)
            .map(|(_, b)| b.clone())
    }

    fn request_block(&mut self, digest: Digest) {
        if self.inflight.contains_key(&digest) {
            return;
        }
        self.start_fetch(digest, BTreeSet::new(), Vec::new());
    }

    fn start_fetch(&mut self, digest: Digest, tried: BTreeSet<NodeId>, corrupt: Vec<NodeId>) {
        let node = self.index.get(&digest).and_then(|e| {
            e.replicas
                .iter()
                .filter(|n| self.stored.contains_key(n) && !tried.contains(n))
                .min_by_key(|n| (self.outstanding.get(n).copied().unwrap_or(0), **n))
                .copied()
        });
        let Some(node) = node else {
            self.inflight.remove(&digest);
            for req in self.waiters.remove(&digest).unwrap_or_default() {
                if self.gets.remove(&req).is_some() {
                    self.out.push(DfsEffect::GetDone {
                        req,
                        result: Err(DfsError::Unavailable(digest)),
                    });
                }
            }
            return;
        };
        let op = self.op();
        *self.outstanding.entry(node).or_default() += 1;
        self.inflight.insert(digest, op);
        self.fetches.insert(
            op,
            Fetch {
                digest,
                node,
                tried,
                corrupt,
            },
        );
        self.send(node, StorageMsg::Fetch { op, digest });
    }

    fn on_fetched(&mut self, op: u64, data: Option<Bytes>) {
        let Some(mut fetch) = self.fetches.remove(&op) else {
            return;
        };
        if let Some(n) = self.outstanding.get_mut(&fetch.node) {
            *n -= 1;
        }
        let digest = fetch.digest;
        match data {
            Some(block) if Digest::of(&block) == digest => {
                self.inflight.remove(&digest);
                for node in std::mem::take(&mut fetch.corrupt) {
                    self.rewrite_corrupt(digest, fetch.node, node, block.clone());
                }
                self.cache.push_back((digest, block.clone()));
                while self.cache.len() > self.cache_blocks {
                    self.cache.pop_front();
                }
                for req in self.waiters.remove(&digest).unwrap_or_default() {
                    if let Some(get) = self.gets.get_mut(&req) {
                        let blocks =
                            &get.file.blocks[get.span_start..get.span_start + get.slots.len()];
                        for (slot, b) in get.slots.iter_mut().zip(blocks) {
                            if b.0 == digest && slot.is_none() {
                                *slot = Some(block.clone());
                                get.missing -= 1;
                            }
                        }
                        self.maybe_finish_get(req);
                    }
                }
            }
            other => {
                if other.is_some() {
                    fetch.corrupt.push(fetch.node);
                }
                fetch.tried.insert(fetch.node);
                self.start_fetch(digest, fetch.tried, fetch.corrupt);
            }
        }
    }

    fn maybe_finish_get(&mut self, req: ReqId) {
        if self.gets.get(&req).is_none_or(|g| g.missing > 0) {
            return;
        }
        let get = self.gets.remove(&req).expect("checked above");
        let blocks: Vec<Bytes> = get
            .slots
            .into_iter()
            .map(|s| s.expect("all filled"))
            .collect();
        let manifest = Manifest {
            path: String::new(),
            total_length: get.file.total_length,
            block_size: get.file.block_size,
            blocks: Vec::new(),
        };
        let data = manifest.assemble(get.offset, get.length, &blocks);
        self.out.push(DfsEffect::GetDone {
            req,
            result: Ok(data),
        });
    }

    // ---- failures and repair ----

    fn rewrite_corrupt(&mut self, digest: Digest, source: NodeId, target: NodeId, data: Bytes) {
        let action = RepairAction {
            digest,
            source: Some(source),
            target: Some(target),
            reason: RepairReason::CorruptReplica,
        };
        let op = self.op();
        let size = data.len() as u64;
        self.repairs.insert(op, RepairJob { action, size });
        self.out.push(DfsEffect::RepairScheduled(action));
        let reply_to = self.id;
        self.send(
            target,
            StorageMsg::Store {
                op,
                digest,
                data,
                reply_to,
            },
        );
    }

    /// Drops a node that the failure detector declared dead, redirects its in-flight work and
    /// starts re-replication.
    pub fn node_failed(&mut self, node: NodeId) -> Vec<DfsEffect> {
        if self.stored.remove(&node).is_none() {
            return self.flush();
        }
        for entry in self.index.values_mut() {
            entry.replicas.remove(&node);
        }
        self.outstanding.remove(&node);
        self.repairs
            .retain(|_, j| j.action.source != Some(node) && j.action.target != Some(node));

        let dead_fetches: Vec<u64> = self
            .fetches
            .iter()
            .filter(|(_, f)| f.node == node)
            .map(|(&op, _)| op)
            .collect();
        for op in dead_fetches {
            self.on_fetched(op, None);
        }

        if let Some(put) = self.put.as_mut() {
            put.planned.remove(&node);
            let mut lost: Vec<Digest> = Vec::new();
            put.pending.retain(|_, w| {
                if w.node == node {
                    lost.push(w.digest);
                }
                w.node != node
            });
            put.acked.retain(|(d, n)| {
                if *n == node {
                    lost.push(*d);
                }
                *n != node
            });
            for d in lost {
                if self.put.is_none() {
                    break;
                }
                self.replace_write(d, node);
            }
            self.maybe_commit();
        }
        self.schedule_repairs();
        self.flush()
    }

    /// A node is reachable again. It keeps its disk, so its block list is requested and
    /// re-adopted where replicas are missing.
    pub fn node_revived(&mut self, node: NodeId) -> Vec<DfsEffect> {
        if !self.stored.contains_key(&node) {
            self.stored.insert(node, 0);
            self.send(node, StorageMsg::ListBlocks);
        }
        self.flush()
    }

    fn adopt_inventory(&mut self, node: NodeId, digests: Vec<Digest>) {
        if !self.stored.contains_key(&node) {
            return;
        }
        let busy: BTreeSet<Digest> = self.repairs.values().map(|j| j.action.digest).collect();
        for d in digests {
            if busy.contains(&d) {
                continue;
            }
            if let Some(e) = self.index.get_mut(&d) {
                if e.replicas.len() < self.replication && e.replicas.insert(node) {
                    *self.stored.get_mut(&node).expect("live") += e.size;
                    self.lost.remove(&d);
                }
            }
        }
        self.schedule_repairs();
    }

    /// Plans repairs for under-replicated blocks that have no repair in flight and starts them.
    pub fn run_repair(&mut self) -> Vec<DfsEffect> {
        self.schedule_repairs();
        self.flush()
    }

    fn schedule_repairs(&mut self) {
        let busy: BTreeSet<Digest> = self.repairs.values().map(|j| j.action.digest).collect();
        let pending_put: BTreeSet<Digest> = self
            .put
            .as_ref()
            .map(|p| p.data.keys().copied().collect())
            .unwrap_or_default();
        let candidates = self
            .index
            .iter()
            .filter(|(d, _)| !busy.contains(d) && !pending_put.contains(d))
            .map(|(&d, e)| (d, e.size, &e.replicas));
        let actions = repair(candidates, &self.stored, self.replication);
        for action in actions {
            let Some(source) = action.source else {
                if self.lost.insert(action.digest) {
                    self.out.push(DfsEffect::RepairScheduled(action));
                }
                continue;
            };
            let target = action.target.expect("copy actions have a target");
            let op = self.op();
            let size = self.index[&action.digest].size;
            self.repairs.insert(op, RepairJob { action, size });
            self.out.push(DfsEffect::RepairScheduled(action));
            self.send(
                source,
                StorageMsg::Replicate {
                    op,
                    digest: action.digest,
                    target,
                },
            );
        }
    }

    fn on_repair_ack(&mut self, op: u64, ok: bool) {
        let Some(job) = self.repairs.remove(&op) else {
            return;
        };
        let digest = job.action.digest;
        let target = job.action.target.expect("executed actions have a target");
        if ok {
            if job.action.reason == RepairReason::UnderReplicated
                && self.stored.contains_key(&target)
            {
                if let Some(e) = self.index.get_mut(&digest) {
                    if e.replicas.insert(target) {
                        *self.stored.get_mut(&target).expect("live") += job.size;
                    }
                }
            }
            self.out.push(DfsEffect::RepairDone(job.action));
        } else if job.action.reason == RepairReason::UnderReplicated {
            // the source could not produce a valid copy: it is no replica at all
            let source = job.action.source.expect("executed actions have a source");
            if let Some(e) = self.index.get_mut(&digest) {
                if e.replicas.remove(&source) {
                    if let Some(s) = self.stored.get_mut(&source) {
                        *s -= job.size;
                    }
                }
            }
        }
        self.schedule_repairs();
    }

    // ---- dispatch ----

    pub fn on_message(&mut self, from: NodeId, msg: StorageMsg) -> Vec<DfsEffect> {
        match msg {
            StorageMsg::Stored { op, ok, .. } => {
                if self
                    .put
                    .as_ref()
                    .is_some_and(|p| p.pending.contains_key(&op))
                {
                    self.on_write_ack(op, ok);
                } else {
                    self.on_repair_ack(op, ok);
                }
            }
            StorageMsg::Fetched { op, data, .. } => self.on_fetched(op, data),
            StorageMsg::Inventory { digests } => self.adopt_inventory(from, digests),
            StorageMsg::Store { .. }
            | StorageMsg::Fetch { .. }
            | StorageMsg::Replicate { .. }
            | StorageMsg::Delete { .. }
            | StorageMsg::ListBlocks => {}
        }
        self.flush()
    }
}
