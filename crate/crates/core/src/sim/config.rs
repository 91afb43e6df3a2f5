use std::str::FromStr;

use crate::protocol::DEFAULT_TILE_SIZE;
use crate::render::{DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::vmm::{habit::predictors, PolicyKind, ResourceVector};
use crate::Tick;

use super::SimError;

/// World parameters, read from `key = value` text. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub render_nodes: u32,
    pub storage_nodes: u32,
    pub replication: usize,
    pub block_size: u64,
    pub latency_ticks: Tick,
    pub bandwidth_mbps: u64,
    pub loss: f64,
    pub policy: PolicyKind,
    pub predictor: String,
    pub session_quota: ResourceVector,
    /// Sessions of `session_quota` a render node can hold.
    pub slots_per_node: u64,
    pub storage_capacity_gib: u64,
    pub poll_interval: Tick,
    pub tile_size: usize,
    pub width: usize,
    pub height: usize,
    pub read_ahead: usize,
    pub prewarm: bool,
    /// Keep the bytes of every PUT to check GET results against.
    pub verify_reads: bool,
    /// Hard stop for scripts without `END`.
    pub max_ticks: Tick,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            render_nodes: 4,
            storage_nodes: 5,
            replication: 3,
            block_size: crate::dfs::DEFAULT_BLOCK_SIZE,
            latency_ticks: 1,
            bandwidth_mbps: 1000,
            loss: 0.0,
            policy: PolicyKind::Consolidate,
            predictor: "ewma".into(),
            session_quota: ResourceVector::new(1000, 1024, 10, 1),
            slots_per_node: 8,
            storage_capacity_gib: 1024,
            poll_interval: 1000,
            tile_size: DEFAULT_TILE_SIZE,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            read_ahead: crate::dfs::DEFAULT_READ_AHEAD,
            prewarm: true,
            verify_reads: true,
            max_ticks: 7 * 24 * 3_600_000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, SimError> {
    value
        .parse()
        .map_err(|_| SimError::BadConfig(format!("{key}: cannot parse {value:?}")))
}

impl SimConfig {
    pub fn render_capacity(&self) -> ResourceVector {
        self.session_quota.scale(self.slots_per_node)
    }

    /// Link bandwidth in bytes per tick.
    pub fn bytes_per_tick(&self) -> u64 {
        self.bandwidth_mbps * 125
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SimError> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "render_nodes" => self.render_nodes = parse(key, value)?,
            "storage_nodes" => self.storage_nodes = parse(key, value)?,
            "replication" => self.replication = parse(key, value)?,
            "block_size" => self.block_size = parse(key, value)?,
            "latency_ticks" => self.latency_ticks = parse(key, value)?,
            "bandwidth_mbps" => self.bandwidth_mbps = parse(key, value)?,
            "loss" => self.loss = parse(key, value)?,
            "policy" => {
                self.policy = value
                    .parse()
                    .map_err(|e: crate::vmm::VmError| SimError::BadConfig(e.to_string()))?
            }
            "predictor" => self.predictor = value.to_string(),
            "quota.cpu" => self.session_quota.cpu = parse(key, value)?,
            "quota.mem" => self.session_quota.mem = parse(key, value)?,
            "quota.net" => self.session_quota.net = parse(key, value)?,
            "quota.storage" => self.session_quota.storage = parse(key, value)?,
            "slots_per_node" => self.slots_per_node = parse(key, value)?,
            "storage_capacity_gib" => self.storage_capacity_gib = parse(key, value)?,
            "poll_interval_ticks" => self.poll_interval = parse(key, value)?,
            "tile_size" => self.tile_size = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "read_ahead" => self.read_ahead = parse(key, value)?,
            "prewarm" => self.prewarm = parse(key, value)?,
            "verify_reads" => self.verify_reads = parse(key, value)?,
            "max_ticks" => self.max_ticks = parse(key, value)?,
            _ => return Err(SimError::BadConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut config = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::BadConfig(format!("line {}: expected key = value", n + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: &str| Err(SimError::BadConfig(m.to_string()));
        if self.render_nodes == 0 || self.storage_nodes == 0 {
            return fail("node counts must be at least 1");
        }
        if self.replication == 0 || self.replication > self.storage_nodes as usize {
            return fail("replication must be between 1 and storage_nodes");
        }
        if !(0.0..1.0).contains(&self.loss) {
            return fail("loss must lie in [0, 1)");
        }
        if self.block_size == 0 || self.bandwidth_mbps == 0 || self.poll_interval == 0 {
            return fail("block_size, bandwidth_mbps and poll_interval_ticks must be positive");
        }
        if self.tile_size == 0 || self.slots_per_node == 0 || self.session_quota.is_zero() {
            return fail("tile_size, slots_per_node and the session quota must be positive");
        }
        if predictors().get(&self.predictor).is_none() {
            return fail(&format!("unknown predictor {:?}", self.predictor));
        }
        crate::render::AppState::new(self.width, self.height, self.tile_size)
            .map_err(|e| SimError::BadConfig(e.to_string()))?;
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let q = self.session_quota;
        format!(
            "seed = {}\nrender_nodes = {}\nstorage_nodes = {}\nreplication = {}\nblock_size = {}\n\
             latency_ticks = {}\nbandwidth_mbps = {}\nloss = {}\npolicy = {}\npredictor = {}\n\
             quota.cpu = {}\nquota.mem = {}\nquota.net = {}\nquota.storage = {}\nslots_per_node = {}\n\
             storage_capacity_gib = {}\npoll_interval_ticks = {}\ntile_size = {}\nwidth = {}\nheight = {}\n\
             read_ahead = {}\nprewarm = {}\nverify_reads = {}\nmax_ticks = {}\n",
            self.seed,
            self.render_nodes,
            self.storage_nodes,
            self.replication,
            self.block_size,
            self.latency_ticks,
            self.bandwidth_mbps,
            self.loss,
            self.policy,
            self.predictor,
            q.cpu,
            q.mem,
            q.net,
            q.storage,
            self.slots_per_node,
            self.storage_capacity_gib,
            self.poll_interval,
            self.tile_size,
            self.width,
            self.height,
            self.read_ahead,
            self.prewarm,
            self.verify_reads,
            self.max_ticks,
        )
    }
}
