use std::collections::{BTreeMap, BTreeSet};

use bytes::Bytes;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dfs::{
    BlockStore, DfsCoordinator, DfsEffect, DfsError, Manifest, MemStore, ReqId, StorageMsg,
    StorageNode,
};
use crate::gateway::{GatewayError, OpenRequest, Router};
use crate::protocol::{apply_update_in_place, decode_update, full_frame, Framebuffer, InputEvent};
use crate::render::{SessionHandle, SessionId};
use crate::vmm::telemetry::{
    answer_get, decode_get_request, encode_get_request, parse_response, TELEMETRY_KEYS,
};
use crate::vmm::{min_ratio, NodeRole, NodeTelemetry, ResourceVector, Slot, VmConfig, VmManager};
use crate::{Digest, NodeId, Tick};

use super::metrics::{percentile, MetricsReport, UtilizationTrack};
use super::net::{Channel, Envelope, NetEvent, Network, HEADER_BYTES};
use super::script::{Directive, Script, ScriptLine};
use super::{SimConfig, SimError};

/// The gateway, cluster manager and block-store coordinator share this node.
pub const CONTROL: NodeId = NodeId(0);
/// Where users sit: the far end of every session stream and file download.
pub const CLIENT: NodeId = NodeId(1);

const GIB: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    Delta,
    Full,
}

#[derive(Debug, Clone)]
pub enum Payload {
    Poll(Vec<u8>),
    PollReply(Vec<u8>),
    Storage(StorageMsg),
    Open(Vec<u8>),
    Events {
        session: SessionId,
        events: Vec<InputEvent>,
    },
    Close {
        session: SessionId,
    },
    Resync {
        session: SessionId,
    },
    /// A framebuffer update with the host's frame digest after it, for end-to-end checking.
    Update {
        session: SessionId,
        kind: UpdateKind,
        frame_seq: u64,
        through_seq: u64,
        digest: Digest,
        bytes: Bytes,
    },
    Missing {
        session: SessionId,
    },
    FileReply {
        req: ReqId,
        result: Result<Bytes, DfsError>,
    },
}

impl Payload {
    fn wire_len(&self) -> usize {
        match self {
            Payload::Poll(b) | Payload::PollReply(b) | Payload::Open(b) => b.len(),
            Payload::Storage(m) => m.wire_len(),
            Payload::Events { events, .. } => {
                16 + 2 + events.iter().map(|e| 1 + e.encoded_len()).sum::<usize>()
            }
            Payload::Close { .. } | Payload::Resync { .. } | Payload::Missing { .. } => 16,
            Payload::Update { bytes, .. } => 16 + 1 + 8 + 32 + bytes.len(),
            Payload::FileReply { result, .. } => {
                8 + 1
                    + match result {
                        Ok(b) => b.len(),
                        Err(e) => e.to_string().len(),
                    }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Net(NetEvent),
    Directive(usize),
    PollRound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Control,
    Client,
    Render,
    Storage,
}

struct RenderHost {
    capacity: ResourceVector,
    sessions: BTreeMap<SessionId, (SessionHandle, ResourceVector)>,
}

struct StorageActor {
    node: StorageNode,
    capacity: ResourceVector,
}

struct View {
    fb: Framebuffer,
    tile: usize,
    next_frame_seq: u64,
    bytes: u64,
}

#[derive(Default)]
struct ClientEdge {
    views: BTreeMap<SessionId, View>,
    captured: BTreeMap<SessionId, Vec<Bytes>>,
    file_results: BTreeMap<ReqId, Result<Bytes, DfsError>>,
}

struct PendingGet {
    issued: Tick,
    expected: Option<Digest>,
}

#[derive(Debug, Default, Clone)]
struct Counters {
    sessions_opened: u64,
    sessions_rejected: u64,
    sessions_closed: u64,
    events_injected: u64,
    events_rejected: u64,
    updates_delivered: u64,
    update_bytes: u64,
    baseline_bytes: u64,
    frame_mismatches: u64,
    frame_gaps: u64,
    latencies: Vec<Tick>,
    closed_session_bytes: Vec<u64>,
    files_put: u64,
    put_errors: u64,
    put_bytes: u64,
    gets_completed: u64,
    get_errors: u64,
    get_mismatches: u64,
    get_bytes: u64,
    read_ticks: Vec<Tick>,
    failovers: u64,
    failover_ticks: Vec<Tick>,
    failures_detected: u64,
    repairs_scheduled: u64,
    repairs_done: u64,
    blocks_lost: u64,
    last_repair_tick: Tick,
    open_packaged_bytes: u64,
    open_urlencoded_bytes: u64,
    warm_reserved: u64,
    messages_dropped: u64,
}

/// Deterministic pseudo-random file content for `PUT` directives.
pub fn file_content(seed: u64, path: &str, size: u64) -> Bytes {
    let mut key = [0u8; 32];
    let mut material = seed.to_le_bytes().to_vec();
    material.extend_from_slice(path.as_bytes());
    key.copy_from_slice(&Digest::of(&material).0);
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut data = vec![0u8; size as usize];
    rng.fill_bytes(&mut data);
    Bytes::from(data)
}

/// A whole cluster on one virtual clock: every node, every link, and the metrics.
pub struct SimWorld {
    config: SimConfig,
    now: Tick,
    queue: BTreeMap<(Tick, u64), Event>,
    next_event: u64,
    net: Network<Payload>,
    roles: Vec<Role>,
    labels: Vec<String>,
    alive: Vec<bool>,
    life: Vec<u32>,
    manager: VmManager,
    dfs: DfsCoordinator,
    router: Router,
    hosts: BTreeMap<NodeId, RenderHost>,
    storage: BTreeMap<NodeId, StorageActor>,
    client: ClientEdge,
    capture: bool,
    ids: ChaCha8Rng,
    session_labels: BTreeMap<String, SessionId>,
    awaiting_poll: BTreeSet<NodeId>,
    prewarm_slot: Option<Slot>,
    next_req: ReqId,
    puts: BTreeMap<ReqId, (String, Bytes)>,
    put_results: BTreeMap<ReqId, Result<Manifest, DfsError>>,
    gets: BTreeMap<ReqId, PendingGet>,
    oracle: BTreeMap<String, Bytes>,
    injected: BTreeMap<(SessionId, u64), Tick>,
    recovering: BTreeMap<SessionId, Tick>,
    stranded: BTreeSet<SessionId>,
    killed_at: BTreeMap<NodeId, Tick>,
    script: Vec<ScriptLine>,
    directives_left: usize,
    ended: bool,
    counters: Counters,
    util: UtilizationTrack,
}

impl SimWorld {
    /// Builds a world whose storage nodes keep blocks in memory.
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        Self::with_stores(config, |_| Box::new(MemStore::new()))
    }

    /// Builds a world, asking `store` for each storage node's block store.
    pub fn with_stores(
        config: SimConfig,
        mut store: impl FnMut(NodeId) -> Box<dyn BlockStore>,
    ) -> Result<Self, SimError> {
        config.validate()?;
        let mut roles = vec![Role::Control, Role::Client];
        let mut labels = vec!["control".to_string(), "client".to_string()];
        let manager_config = VmConfig {
            policy: config.policy,
            predictor: config.predictor.clone(),
            poll_interval: config.poll_interval,
            session_quota: config.session_quota,
        };
        let mut manager =
            VmManager::new(manager_config).map_err(|e| SimError::BadConfig(e.to_string()))?;
        let mut dfs = DfsCoordinator::new(CONTROL, config.replication, config.block_size);
        dfs.set_read_ahead(config.read_ahead, (config.read_ahead * 4).max(8));
        let mut hosts = BTreeMap::new();
        let mut storage = BTreeMap::new();
        for i in 1..=config.render_nodes {
            let id = NodeId(roles.len() as u32);
            roles.push(Role::Render);
            labels.push(format!("r{i}"));
            manager.register_node(id, NodeRole::Render, config.render_capacity(), 0);
            hosts.insert(
                id,
                RenderHost {
                    capacity: config.render_capacity(),
                    sessions: BTreeMap::new(),
                },
            );
        }
        for i in 1..=config.storage_nodes {
            let id = NodeId(roles.len() as u32);
            roles.push(Role::Storage);
            labels.push(format!("s{i}"));
            let capacity =
                ResourceVector::new(0, 0, config.bandwidth_mbps, config.storage_capacity_gib);
            manager.register_node(id, NodeRole::Storage, capacity, 0);
            dfs.add_node(id);
            storage.insert(
                id,
                StorageActor {
                    node: StorageNode::new(id, store(id)),
                    capacity,
                },
            );
        }
        let n = roles.len();
        let util = UtilizationTrack::new(config.render_nodes as usize);
        let mut world = Self {
            net: Network::new(
                config.latency_ticks,
                config.bytes_per_tick(),
                config.loss,
                config.seed ^ 0x6c6f_7373,
            ),
            ids: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e55_1075),
            config,
            now: 0,
            queue: BTreeMap::new(),
            next_event: 0,
            roles,
            labels,
            alive: vec![true; n],
            life: vec![0; n],
            manager,
            dfs,
            router: Router::new(),
            hosts,
            storage,
            client: ClientEdge::default(),
            capture: false,
            session_labels: BTreeMap::new(),
            awaiting_poll: BTreeSet::new(),
            prewarm_slot: None,
            next_req: 1,
            puts: BTreeMap::new(),
            put_results: BTreeMap::new(),
            gets: BTreeMap::new(),
            oracle: BTreeMap::new(),
            injected: BTreeMap::new(),
            recovering: BTreeMap::new(),
            stranded: BTreeSet::new(),
            killed_at: BTreeMap::new(),
            script: Vec::new(),
            directives_left: 0,
            ended: false,
            counters: Counters::default(),
            util,
        };
        world.schedule(0, Event::PollRound);
        Ok(world)
    }

    // ---- inspection ----

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn manager(&self) -> &VmManager {
        &self.manager
    }

    pub fn dfs(&self) -> &DfsCoordinator {
        &self.dfs
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.roles.len()).map(|i| NodeId(i as u32))
    }

    pub fn role(&self, id: NodeId) -> Option<Role> {
        self.roles.get(id.0 as usize).copied()
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.labels.get(id.0 as usize).map(String::as_str)
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| NodeId(i as u32))
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.alive.get(id.0 as usize).copied().unwrap_or(false)
    }

    pub fn session(&self, label: &str) -> Option<SessionId> {
        self.session_labels.get(label).copied()
    }

    pub fn storage_node(&self, id: NodeId) -> Option<&StorageNode> {
        self.storage.get(&id).map(|s| &s.node)
    }

    pub fn storage_node_mut(&mut self, id: NodeId) -> Option<&mut StorageNode> {
        self.storage.get_mut(&id).map(|s| &mut s.node)
    }

    /// Digest of the frame the session's host last rendered.
    pub fn host_frame_digest(&self, session: SessionId) -> Option<Digest> {
        let host = self.router.get(session).ok()?.host;
        let (h, _) = self.hosts.get(&host)?.sessions.get(&session)?;
        Some(h.last_frame.digest())
    }

    /// Digest of the client's copy of the session's screen.
    pub fn client_frame_digest(&self, session: SessionId) -> Option<Digest> {
        self.client.views.get(&session).map(|v| v.fb.digest())
    }

    /// Latest telemetry the manager holds for every node.
    pub fn telemetry(&self) -> Vec<NodeTelemetry> {
        self.manager
            .nodes()
            .map(|(id, n)| {
                n.reported
                    .clone()
                    .unwrap_or_else(|| NodeTelemetry::new(id, n.capacity))
            })
            .collect()
    }

    /// Hash of everything that defines the world before it runs.
    pub fn state_digest(&self) -> Digest {
        let mut text = self.config.to_text();
        for id in self.node_ids() {
            text.push_str(&format!(
                "{} {:?} {}\n",
                id,
                self.role(id).unwrap(),
                self.label(id).unwrap()
            ));
        }
        let mut ids = self.ids.clone();
        text.push_str(&format!("{:x}\n", ids.random::<u128>()));
        Digest::of(text.as_bytes())
    }

    // ---- event plumbing ----

    fn schedule(&mut self, at: Tick, event: Event) {
        self.queue.insert((at, self.next_event), event);
        self.next_event += 1;
    }

    fn send(&mut self, from: NodeId, to: NodeId, channel: Channel, msg: Payload) {
        let env = Envelope {
            from,
            to,
            channel,
            size: HEADER_BYTES + msg.wire_len(),
            msg,
            from_life: self.life[from.0 as usize],
            to_life: self.life[to.0 as usize],
        };
        let (queue, next) = (&mut self.queue, &mut self.next_event);
        self.net.send(self.now, env, &mut |at, e| {
            queue.insert((at, *next), Event::Net(e));
            *next += 1;
        });
    }

    /// Loads a script, checking node names, geometries and directive order up front.
    pub fn load_script(&mut self, script: &Script) -> Result<(), SimError> {
        for line in &script.lines {
            let check_node = |name: &str| -> Result<(), SimError> {
                match self.node_by_label(name).and_then(|id| self.role(id)) {
                    Some(Role::Render | Role::Storage) => Ok(()),
                    _ => Err(SimError::Script {
                        line: line.line,
                        message: format!("no render or storage node named {name:?}"),
                    }),
                }
            };
            match &line.directive {
                Directive::Kill(n) | Directive::Revive(n) => check_node(n)?,
                Directive::Open {
                    geometry: Some((w, h)),
                    ..
                } => {
                    crate::render::AppState::new(*w, *h, self.config.tile_size).map_err(|e| {
                        SimError::Script {
                            line: line.line,
                            message: e.to_string(),
                        }
                    })?;
                }
                Directive::Put { path, .. } | Directive::Get { path, .. } => {
                    crate::dfs::validate_path(path).map_err(|e| SimError::Script {
                        line: line.line,
                        message: e.to_string(),
                    })?;
                }
                _ => {}
            }
            if line.tick < self.now {
                return Err(SimError::Script {
                    line: line.line,
                    message: format!("tick {} is in the past", line.tick),
                });
            }
        }
        for line in &script.lines {
            let idx = self.script.len();
            self.script.push(line.clone());
            self.schedule(line.tick, Event::Directive(idx));
            self.directives_left += 1;
        }
        Ok(())
    }

    /// Runs until the script has ended and all work it started is finished (or `END`, or the
    /// configured tick limit), then reports.
    pub fn run(&mut self) -> MetricsReport {
        while !self.ended {
            let Some((&(at, _), _)) = self.queue.first_key_value() else {
                break;
            };
            if at > self.config.max_ticks {
                self.now = self.config.max_ticks;
                break;
            }
            let ((at, _), event) = self.queue.pop_first().expect("peeked");
            self.now = at;
            self.handle(event);
            if self.directives_left == 0 && !self.busy() {
                break;
            }
        }
        self.report()
    }

    /// Processes every event up to and including `tick`, then sets the clock to `tick`.
    pub fn run_until(&mut self, tick: Tick) {
        while let Some((&(at, _), _)) = self.queue.first_key_value() {
            if at > tick {
                break;
            }
            let ((at, _), event) = self.queue.pop_first().expect("peeked");
            self.now = at;
            self.handle(event);
        }
        self.now = self.now.max(tick);
    }

    /// Work still in progress that a script run should wait for.
    pub fn busy(&self) -> bool {
        self.net.pending(Channel::Session) > 0
            || self.net.pending(Channel::Bulk) > 0
            || !self.dfs.is_idle()
            || !self.puts.is_empty()
            || !self.gets.is_empty()
            || !self.recovering.is_empty()
            || self.node_ids().any(|id| {
                matches!(self.role(id), Some(Role::Render | Role::Storage))
                    && self.is_alive(id) != self.manager.is_live(id)
            })
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::Net(e) => {
                let (queue, next) = (&mut self.queue, &mut self.next_event);
                let delivered = self.net.on_event(self.now, e, &mut |at, e| {
                    queue.insert((at, *next), Event::Net(e));
                    *next += 1;
                });
                if let Some(env) = delivered {
                    self.deliver(env);
                }
            }
            Event::Directive(idx) => {
                self.directives_left -= 1;
                let directive = self.script[idx].directive.clone();
                self.directive(directive);
            }
            Event::PollRound => self.poll_round(),
        }
    }

    fn deliver(&mut self, env: Envelope<Payload>) {
        let to = env.to.0 as usize;
        if !self.alive[to] || self.life[to] != env.to_life {
            self.counters.messages_dropped += 1;
            return;
        }
        match self.roles[to] {
            Role::Control => self.control(env.from, env.msg),
            Role::Client => self.client_receive(env.msg),
            Role::Render => self.host(env.to, env.from, env.msg),
            Role::Storage => self.storage_receive(env.to, env.from, env.msg),
        }
    }

    // ---- script directives ----

    fn directive(&mut self, d: Directive) {
        match d {
            Directive::Open {
                label,
                user,
                geometry,
            } => {
                let geometry = geometry.unwrap_or((self.config.width, self.config.height));
                match self.open_session(&user, geometry) {
                    Ok(id) => {
                        self.session_labels.insert(label, id);
                    }
                    Err(_) => {
                        self.session_labels.remove(&label);
                    }
                }
            }
            Directive::Event { label, action } => {
                let Some(&id) = self.session_labels.get(&label) else {
                    self.counters.events_rejected += 1;
                    return;
                };
                let seq = self.router.get(id).map_or(0, |s| s.last_seq()) + 1;
                let _ = self.submit_event(id, InputEvent::new(seq, action));
            }
            Directive::Close { label } => {
                if let Some(id) = self.session_labels.remove(&label) {
                    let _ = self.close_session(id);
                }
            }
            Directive::Put { path, size } => {
                let data = file_content(self.config.seed, &path, size);
                self.put_file(&path, data);
            }
            Directive::Get { path, range } => {
                self.get_file(&path, range);
            }
            Directive::Kill(name) => {
                let id = self.node_by_label(&name).expect("checked at load");
                self.kill(id);
            }
            Directive::Revive(name) => {
                let id = self.node_by_label(&name).expect("checked at load");
                self.revive(id);
            }
            Directive::End => self.ended = true,
        }
    }

    // ---- gateway API (scripts and the HTTP front end both come through here) ----

    /// Places a session and starts it on its host. The first update the client receives is a
    /// full frame.
    pub fn open_session(
        &mut self,
        user: &str,
        geometry: (usize, usize),
    ) -> Result<SessionId, GatewayError> {
        crate::render::AppState::new(geometry.0, geometry.1, self.config.tile_size)
            .map_err(|e| GatewayError::BadRequest(e.to_string()))?;
        let id = SessionId(self.ids.random());
        let quota = self.config.session_quota;
        let decision = match self.manager.place(id, quota) {
            Ok(d) => d,
            Err(e) => {
                self.counters.sessions_rejected += 1;
                return Err(e.into());
            }
        };
        self.counters.sessions_opened += 1;
        let req = self.router.open(
            id,
            user,
            geometry,
            self.config.tile_size,
            decision.chosen_node,
            quota,
        );
        let sessions_of_user = self
            .router
            .ids()
            .filter(|s| self.router.get(*s).is_ok_and(|r| r.user == user))
            .count() as u64;
        self.manager.observe(
            user,
            Slot::of_tick(self.now),
            &quota.scale(sessions_of_user),
        );
        self.client.views.insert(
            id,
            View {
                fb: Framebuffer::new(geometry.0, geometry.1),
                tile: self.config.tile_size,
                next_frame_seq: 0,
                bytes: 0,
            },
        );
        self.send_open(req);
        self.record_utilization();
        Ok(id)
    }

    fn send_open(&mut self, req: OpenRequest) {
        let form = req.form();
        self.counters.open_packaged_bytes += form.package().map_or(0, |b| b.len() as u64);
        let urlencoded = form_urlencoded::Serializer::new(String::new())
            .extend_pairs(form.fields.iter())
            .finish();
        self.counters.open_urlencoded_bytes += urlencoded.len() as u64;
        let host = self.router.get(req.session).expect("routed").host;
        let bytes = req.encode().expect("open request fields are short");
        self.send(CONTROL, host, Channel::Session, Payload::Open(bytes));
    }

    /// Forwards one input event to the session's host.
    pub fn submit_event(&mut self, id: SessionId, event: InputEvent) -> Result<(), GatewayError> {
        let host = match self.router.route_event(id, event) {
            Ok(h) => h,
            Err(e) => {
                self.counters.events_rejected += 1;
                return Err(e);
            }
        };
        self.counters.events_injected += 1;
        self.injected.insert((id, event.seq), self.now);
        self.send(
            CONTROL,
            host,
            Channel::Session,
            Payload::Events {
                session: id,
                events: vec![event],
            },
        );
        Ok(())
    }

    /// Asks the host for a full frame, as a client does when it (re)subscribes.
    pub fn resync(&mut self, id: SessionId) -> Result<(), GatewayError> {
        let host = self.router.get(id)?.host;
        self.send(
            CONTROL,
            host,
            Channel::Session,
            Payload::Resync { session: id },
        );
        Ok(())
    }

    pub fn close_session(&mut self, id: SessionId) -> Result<(), GatewayError> {
        let s = self.router.close(id)?;
        self.manager.release(id);
        self.recovering.remove(&id);
        self.stranded.remove(&id);
        self.injected.retain(|(s, _), _| *s != id);
        self.client.captured.remove(&id);
        if let Some(v) = self.client.views.remove(&id) {
            self.counters.closed_session_bytes.push(v.bytes);
        }
        self.counters.sessions_closed += 1;
        self.send(
            CONTROL,
            s.host,
            Channel::Session,
            Payload::Close { session: id },
        );
        self.record_utilization();
        Ok(())
    }

    pub fn put_file(&mut self, path: &str, data: Bytes) -> ReqId {
        let req = self.req();
        self.puts.insert(req, (path.to_string(), data.clone()));
        let effects = self.dfs.put(req, path, data);
        self.apply_dfs(effects);
        req
    }

    /// Reads a range (or the whole file); the bytes travel to the client.
    pub fn get_file(&mut self, path: &str, range: Option<(u64, u64)>) -> ReqId {
        let req = self.req();
        let (offset, length) = match range {
            Some(r) => r,
            None => (0, self.dfs.manifest(path).map_or(0, |m| m.total_length)),
        };
        let expected = if self.config.verify_reads {
            self.oracle.get(path).and_then(|data| {
                let end = offset
                    .checked_add(length)
                    .filter(|&e| e <= data.len() as u64)?;
                Some(Digest::of(&data[offset as usize..end as usize]))
            })
        } else {
            None
        };
        self.gets.insert(
            req,
            PendingGet {
                issued: self.now,
                expected,
            },
        );
        let effects = self.dfs.get(req, 0, path, offset, length);
        self.apply_dfs(effects);
        req
    }

    /// Keep update bytes and file results at the client for [`Self::take_updates`] and friends.
    pub fn set_capture(&mut self, on: bool) {
        self.capture = on;
    }

    pub fn take_updates(&mut self, id: SessionId) -> Vec<Bytes> {
        self.client.captured.remove(&id).unwrap_or_default()
    }

    pub fn take_put_result(&mut self, req: ReqId) -> Option<Result<Manifest, DfsError>> {
        self.put_results.remove(&req)
    }

    pub fn take_get_result(&mut self, req: ReqId) -> Option<Result<Bytes, DfsError>> {
        self.client.file_results.remove(&req)
    }

    /// Stops a node. Render hosts lose their sessions; storage nodes keep their disks.
    pub fn kill(&mut self, id: NodeId) {
        let i = id.0 as usize;
        if !self.alive[i] || matches!(self.roles[i], Role::Control | Role::Client) {
            return;
        }
        self.alive[i] = false;
        self.life[i] += 1;
        self.net.drop_queued_from(id);
        self.killed_at.insert(id, self.now);
        if let Some(h) = self.hosts.get_mut(&id) {
            h.sessions.clear();
        }
    }

    pub fn revive(&mut self, id: NodeId) {
        let i = id.0 as usize;
        if self.alive[i] {
            return;
        }
        self.alive[i] = true;
        self.life[i] += 1;
    }

    fn req(&mut self) -> ReqId {
        let r = self.next_req;
        self.next_req += 1;
        r
    }

    // ---- control node ----

    fn poll_round(&mut self) {
        for id in std::mem::take(&mut self.awaiting_poll) {
            let _ = self.manager.record_poll_timeout(id);
        }
        let report = self.manager.detect_failures(self.now);
        for &node in &report.failed {
            self.counters.failures_detected += 1;
            if self.role(node) == Some(Role::Storage) {
                let effects = self.dfs.node_failed(node);
                self.apply_dfs(effects);
            }
        }
        for (session, _) in report.orphaned {
            self.failover(session);
        }
        for session in std::mem::take(&mut self.stranded) {
            self.failover(session);
        }
        if !report.failed.is_empty() {
            self.record_utilization();
        }
        let slot = Slot::of_tick(self.now);
        if self.config.prewarm && self.prewarm_slot != Some(slot) {
            self.prewarm_slot = Some(slot);
            let plan = self.manager.plan_prewarm(slot);
            self.counters.warm_reserved += self.manager.apply_prewarm(&plan) as u64;
        }
        let request = encode_get_request(&TELEMETRY_KEYS).expect("fixed keys");
        let nodes: Vec<NodeId> = self.manager.nodes().map(|(id, _)| id).collect();
        for id in nodes {
            self.awaiting_poll.insert(id);
            self.send(CONTROL, id, Channel::Mgmt, Payload::Poll(request.clone()));
        }
        let next = self.now + self.config.poll_interval;
        self.schedule(next, Event::PollRound);
    }

    /// Re-places a session whose host failed or forgot it, and rebuilds it there.
    fn failover(&mut self, id: SessionId) {
        let Ok(s) = self.router.get(id) else {
            return;
        };
        let old_host = s.host;
        let quota = s.quota;
        self.manager.release(id);
        let since = self.killed_at.get(&old_host).copied().unwrap_or(self.now);
        self.recovering.entry(id).or_insert(since);
        match self.manager.place(id, quota) {
            Ok(d) => {
                self.counters.failovers += 1;
                let req = self
                    .router
                    .rebuild(id, d.chosen_node, self.config.tile_size)
                    .expect("routed");
                self.send_open(req);
            }
            Err(_) => {
                self.stranded.insert(id);
            }
        }
        self.record_utilization();
    }

    fn control(&mut self, from: NodeId, msg: Payload) {
        match msg {
            Payload::PollReply(bytes) => {
                self.awaiting_poll.remove(&from);
                let Ok(telemetry) = parse_response(from, &bytes, self.now) else {
                    return;
                };
                if let Ok(true) = self.manager.record_poll(telemetry, self.now) {
                    if self.role(from) == Some(Role::Storage) {
                        let effects = self.dfs.node_revived(from);
                        self.apply_dfs(effects);
                    }
                }
            }
            Payload::Storage(m) => {
                let effects = self.dfs.on_message(from, m);
                self.apply_dfs(effects);
            }
            Payload::Update {
                session,
                kind,
                frame_seq,
                through_seq,
                digest,
                bytes,
            } => {
                if self.router.accept_update(session, from, frame_seq) {
                    let msg = Payload::Update {
                        session,
                        kind,
                        frame_seq,
                        through_seq,
                        digest,
                        bytes,
                    };
                    self.send(CONTROL, CLIENT, Channel::Session, msg);
                }
            }
            Payload::Missing { session } => {
                if self.router.get(session).is_ok_and(|s| s.host == from) {
                    self.failover(session);
                }
            }
            _ => {}
        }
    }

    fn apply_dfs(&mut self, effects: Vec<DfsEffect>) {
        for e in effects {
            match e {
                DfsEffect::Send(to, m) => {
                    self.send(CONTROL, to, Channel::Bulk, Payload::Storage(m))
                }
                DfsEffect::PutDone { req, result } => {
                    let (path, data) = self.puts.remove(&req).expect("put was issued");
                    match &result {
                        Ok(_) => {
                            self.counters.files_put += 1;
                            self.counters.put_bytes += data.len() as u64;
                            if self.config.verify_reads {
                                self.oracle.insert(path, data);
                            }
                        }
                        Err(_) => self.counters.put_errors += 1,
                    }
                    if self.capture {
                        self.put_results.insert(req, result);
                    }
                }
                DfsEffect::GetDone { req, result } => {
                    if let Some(g) = self.gets.get(&req) {
                        if result.is_ok() {
                            self.counters.read_ticks.push(self.now - g.issued);
                        }
                    }
                    self.send(
                        CONTROL,
                        CLIENT,
                        Channel::Bulk,
                        Payload::FileReply { req, result },
                    );
                }
                DfsEffect::RepairScheduled(a) => {
                    if a.is_data_loss() {
                        self.counters.blocks_lost += 1;
                    } else {
                        self.counters.repairs_scheduled += 1;
                    }
                }
                DfsEffect::RepairDone(_) => {
                    self.counters.repairs_done += 1;
                    self.counters.last_repair_tick = self.now;
                }
            }
        }
    }

    fn record_utilization(&mut self) {
        let values: Vec<f64> = self
            .hosts
            .iter()
            .map(|(&id, h)| min_ratio(&self.manager.session_allocated_on(id), &h.capacity).to_f64())
            .collect();
        self.util.record(self.now, values);
    }

    // ---- render hosts ----

    fn host(&mut self, me: NodeId, from: NodeId, msg: Payload) {
        match msg {
            Payload::Poll(req) => {
                let host = &self.hosts[&me];
                let mut t = NodeTelemetry::new(me, host.capacity);
                t.allocated = host.sessions.values().map(|(_, q)| *q).sum();
                t.session_count = host.sessions.len() as u32;
                t.poll_time = self.now;
                if let Ok(keys) = decode_get_request(&req) {
                    let reply = answer_get(&t, &keys).expect("gauge values are short");
                    self.send(me, from, Channel::Mgmt, Payload::PollReply(reply));
                }
            }
            Payload::Open(bytes) => {
                let Ok(req) = OpenRequest::decode(&bytes) else {
                    return;
                };
                let Ok(mut h) = SessionHandle::open(
                    req.session,
                    req.user,
                    me,
                    req.width,
                    req.height,
                    req.tile_size,
                ) else {
                    return;
                };
                if !req.replay.is_empty() && h.step(&req.replay).is_err() {
                    return;
                }
                h.next_frame_seq = req.first_frame_seq;
                let update = h.resync();
                let bytes = Bytes::from(update.encode().expect("well-formed"));
                self.counters.update_bytes += bytes.len() as u64;
                self.counters.baseline_bytes += bytes.len() as u64;
                let msg = Payload::Update {
                    session: req.session,
                    kind: UpdateKind::Full,
                    frame_seq: update.frame_seq,
                    through_seq: h.last_seq,
                    digest: h.last_frame.digest(),
                    bytes,
                };
                self.hosts
                    .get_mut(&me)
                    .expect("host")
                    .sessions
                    .insert(req.session, (h, req.quota));
                self.send(me, from, Channel::Session, msg);
            }
            Payload::Events { session, events } => {
                let Some((h, _)) = self
                    .hosts
                    .get_mut(&me)
                    .expect("host")
                    .sessions
                    .get_mut(&session)
                else {
                    self.send(me, from, Channel::Session, Payload::Missing { session });
                    return;
                };
                let Ok(update) = h.step(&events) else {
                    self.counters.events_rejected += 1;
                    return;
                };
                let baseline = full_frame(&h.last_frame, h.tile_size, 0)
                    .expect("valid geometry")
                    .wire_len();
                self.counters.baseline_bytes += baseline as u64;
                if update.is_empty() {
                    return;
                }
                let bytes = Bytes::from(update.encode().expect("well-formed"));
                self.counters.update_bytes += bytes.len() as u64;
                let msg = Payload::Update {
                    session,
                    kind: UpdateKind::Delta,
                    frame_seq: update.frame_seq,
                    through_seq: h.last_seq,
                    digest: h.last_frame.digest(),
                    bytes,
                };
                self.send(me, from, Channel::Session, msg);
            }
            Payload::Resync { session } => {
                let Some((h, _)) = self
                    .hosts
                    .get_mut(&me)
                    .expect("host")
                    .sessions
                    .get_mut(&session)
                else {
                    self.send(me, from, Channel::Session, Payload::Missing { session });
                    return;
                };
                let update = h.resync();
                let bytes = Bytes::from(update.encode().expect("well-formed"));
                let msg = Payload::Update {
                    session,
                    kind: UpdateKind::Full,
                    frame_seq: update.frame_seq,
                    through_seq: h.last_seq,
                    digest: h.last_frame.digest(),
                    bytes,
                };
                self.send(me, from, Channel::Session, msg);
            }
            Payload::Close { session } => {
                self.hosts
                    .get_mut(&me)
                    .expect("host")
                    .sessions
                    .remove(&session);
            }
            _ => {}
        }
    }

    // ---- storage nodes ----

    fn storage_receive(&mut self, me: NodeId, from: NodeId, msg: Payload) {
        match msg {
            Payload::Poll(req) => {
                let s = &self.storage[&me];
                let mut t = NodeTelemetry::new(me, s.capacity);
                t.allocated.storage = s.node.stored_bytes().div_ceil(GIB).min(s.capacity.storage);
                t.poll_time = self.now;
                if let Ok(keys) = decode_get_request(&req) {
                    let reply = answer_get(&t, &keys).expect("gauge values are short");
                    self.send(me, from, Channel::Mgmt, Payload::PollReply(reply));
                }
            }
            Payload::Storage(m) => {
                let out = self
                    .storage
                    .get_mut(&me)
                    .expect("storage")
                    .node
                    .handle(from, m);
                for (to, reply) in out {
                    self.send(me, to, Channel::Bulk, Payload::Storage(reply));
                }
            }
            _ => {}
        }
    }

    // ---- client edge ----

    fn client_receive(&mut self, msg: Payload) {
        match msg {
            Payload::Update {
                session,
                kind,
                frame_seq,
                through_seq,
                digest,
                bytes,
            } => {
                let Some(view) = self.client.views.get_mut(&session) else {
                    return;
                };
                if frame_seq != view.next_frame_seq {
                    self.counters.frame_gaps += 1;
                }
                view.next_frame_seq = frame_seq + 1;
                view.bytes += bytes.len() as u64;
                let applied = decode_update(&bytes, view.tile)
                    .and_then(|u| apply_update_in_place(&mut view.fb, &u))
                    .is_ok();
                if !applied || view.fb.digest() != digest {
                    self.counters.frame_mismatches += 1;
                }
                self.counters.updates_delivered += 1;
                match kind {
                    UpdateKind::Delta => {
                        if let Some(t) = self.injected.remove(&(session, through_seq)) {
                            self.counters.latencies.push(self.now - t);
                        }
                    }
                    UpdateKind::Full => {
                        if let Some(since) = self.recovering.remove(&session) {
                            self.counters.failover_ticks.push(self.now - since);
                        }
                    }
                }
                self.injected
                    .retain(|(s, seq), _| *s != session || *seq > through_seq);
                if self.capture {
                    self.client.captured.entry(session).or_default().push(bytes);
                }
            }
            Payload::FileReply { req, result } => {
                let Some(g) = self.gets.remove(&req) else {
                    return;
                };
                match &result {
                    Ok(data) => {
                        self.counters.gets_completed += 1;
                        self.counters.get_bytes += data.len() as u64;
                        if let Some(expected) = g.expected {
                            if Digest::of(data) != expected {
                                self.counters.get_mismatches += 1;
                            }
                        }
                    }
                    Err(_) => self.counters.get_errors += 1,
                }
                if self.capture {
                    self.client.file_results.insert(req, result);
                }
            }
            _ => {}
        }
    }

    // ---- metrics ----

    /// Time-averaged mean render-node utilization over `[from, to)`.
    pub fn utilization(&self, from: Tick, to: Tick) -> f64 {
        self.util.average(from, to)
    }

    pub fn report(&self) -> MetricsReport {
        let c = &self.counters;
        let mut r = MetricsReport::default();
        let end = self.now;
        r.int("ticks_simulated", end, "ticks");
        r.int("render_nodes", self.config.render_nodes as u64, "count");
        r.int("storage_nodes", self.config.storage_nodes as u64, "count");
        r.int("sessions_opened", c.sessions_opened, "count");
        r.int("sessions_rejected", c.sessions_rejected, "count");
        r.int("sessions_closed", c.sessions_closed, "count");
        let per_node = self.util.per_node_average(0, end);
        r.float("utilization_mean", self.util.average(0, end), "fraction");
        r.float(
            "utilization_max",
            per_node.iter().copied().fold(0.0, f64::max),
            "fraction",
        );
        r.int("warm_sessions_reserved", c.warm_reserved, "count");
        r.int("events_injected", c.events_injected, "count");
        r.int("events_rejected", c.events_rejected, "count");
        r.int("updates_delivered", c.updates_delivered, "count");
        r.int("update_bytes", c.update_bytes, "bytes");
        r.int("full_frame_baseline_bytes", c.baseline_bytes, "bytes");
        let ratio = if c.baseline_bytes == 0 {
            0.0
        } else {
            c.update_bytes as f64 / c.baseline_bytes as f64
        };
        r.float("delta_to_baseline_ratio", ratio, "fraction");
        let mut per_session = c.closed_session_bytes.clone();
        per_session.extend(self.client.views.values().map(|v| v.bytes));
        let mean = if per_session.is_empty() {
            0.0
        } else {
            per_session.iter().sum::<u64>() as f64 / per_session.len() as f64
        };
        r.float("session_downstream_bytes_mean", mean, "bytes");
        r.int(
            "session_downstream_bytes_max",
            per_session.iter().copied().max().unwrap_or(0),
            "bytes",
        );
        r.int("frame_mismatches", c.frame_mismatches, "count");
        r.int("frame_gaps", c.frame_gaps, "count");
        let mut lat = c.latencies.clone();
        lat.sort_unstable();
        r.int("latency_samples", lat.len() as u64, "count");
        r.int("latency_p50", percentile(&lat, 50.0), "ticks");
        r.int("latency_p90", percentile(&lat, 90.0), "ticks");
        r.int("latency_p99", percentile(&lat, 99.0), "ticks");
        r.int("latency_max", lat.last().copied().unwrap_or(0), "ticks");
        r.int("files_put", c.files_put, "count");
        r.int("put_errors", c.put_errors, "count");
        r.int("put_bytes", c.put_bytes, "bytes");
        r.int("gets_completed", c.gets_completed, "count");
        r.int("get_errors", c.get_errors, "count");
        r.int("get_mismatches", c.get_mismatches, "count");
        r.int("get_bytes", c.get_bytes, "bytes");
        let read_sum: u64 = c.read_ticks.iter().sum();
        let read_mean = if c.read_ticks.is_empty() {
            0.0
        } else {
            read_sum as f64 / c.read_ticks.len() as f64
        };
        r.float("read_ticks_mean", read_mean, "ticks");
        r.int(
            "read_ticks_max",
            c.read_ticks.iter().copied().max().unwrap_or(0),
            "ticks",
        );
        let throughput = if read_sum == 0 {
            0.0
        } else {
            c.get_bytes as f64 * 8.0 / (read_sum as f64 * 1000.0)
        };
        r.float("read_throughput", throughput, "Mbit/s");
        r.int("failures_detected", c.failures_detected, "count");
        r.int("failovers", c.failovers, "count");
        let fo_mean = if c.failover_ticks.is_empty() {
            0.0
        } else {
            c.failover_ticks.iter().sum::<u64>() as f64 / c.failover_ticks.len() as f64
        };
        r.float("failover_ticks_mean", fo_mean, "ticks");
        r.int(
            "failover_ticks_max",
            c.failover_ticks.iter().copied().max().unwrap_or(0),
            "ticks",
        );
        r.int("repairs_scheduled", c.repairs_scheduled, "count");
        r.int("repairs_done", c.repairs_done, "count");
        r.int("last_repair_tick", c.last_repair_tick, "ticks");
        r.int("blocks_lost", c.blocks_lost, "count");
        r.int(
            "blocks_misreplicated",
            self.dfs.misreplicated().len() as u64,
            "count",
        );
        r.int("open_packaged_bytes", c.open_packaged_bytes, "bytes");
        r.int("open_urlencoded_bytes", c.open_urlencoded_bytes, "bytes");
        let s = &self.net.stats;
        r.int("messages_sent", s.messages, "count");
        r.int("messages_dropped", c.messages_dropped, "count");
        r.int("retransmissions", s.retransmissions, "count");
        r.int("bytes_offered", s.bytes_offered, "bytes");
        r.int(
            "bytes_offered_mgmt",
            s.bytes_by_channel[Channel::Mgmt as usize],
            "bytes",
        );
        r.int(
            "bytes_offered_session",
            s.bytes_by_channel[Channel::Session as usize],
            "bytes",
        );
        r.int(
            "bytes_offered_bulk",
            s.bytes_by_channel[Channel::Bulk as usize],
            "bytes",
        );
        r
    }
}
