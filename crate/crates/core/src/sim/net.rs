//! Simulated links: per-node egress serialization, fixed latency, seeded loss and a
//! stop-and-wait transport per (sender, receiver, channel).

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{NodeId, Tick};

/// Independent ordered streams between the same two nodes, so bulk transfers do not hold up
/// telemetry or session traffic. They still share the sender's egress link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Mgmt,
    Session,
    Bulk,
}

/// Bytes of transport framing added to every payload.
pub const HEADER_BYTES: usize = 16;

pub type PairKey = (NodeId, NodeId, Channel);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NetEvent {
    /// The head message of the pair arrives.
    Arrive(PairKey),
    /// The head transmission was lost; send it again.
    Retransmit(PairKey),
    /// The ack for the previous message is back; the pair may send its next one.
    PairFree(PairKey),
}

#[derive(Debug, Clone)]
pub struct Envelope<M> {
    pub from: NodeId,
    pub to: NodeId,
    pub channel: Channel,
    pub size: usize,
    pub msg: M,
    pub from_life: u32,
    pub to_life: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetStats {
    pub messages: u64,
    /// Every byte put on a link, retransmissions included.
    pub bytes_offered: u64,
    pub bytes_by_channel: [u64; 3],
    pub retransmissions: u64,
}

struct Pair<M> {
    queue: VecDeque<Envelope<M>>,
    busy: bool,
}

pub struct Network<M> {
    latency: Tick,
    bytes_per_tick: u64,
    loss: f64,
    rng: ChaCha8Rng,
    nic_free: BTreeMap<NodeId, Tick>,
    pairs: BTreeMap<PairKey, Pair<M>>,
    in_flight: [u64; 3],
    pub stats: NetStats,
}

impl<M> Network<M> {
    pub fn new(latency: Tick, bytes_per_tick: u64, loss: f64, seed: u64) -> Self {
        assert!(bytes_per_tick > 0);
        Self {
            latency,
            bytes_per_tick,
            loss,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nic_free: BTreeMap::new(),
            pairs: BTreeMap::new(),
            in_flight: [0; 3],
            stats: NetStats::default(),
        }
    }

    /// Ticks to clock `size` bytes onto a link.
    pub fn transmit_ticks(&self, size: usize) -> Tick {
        (size as u64).div_ceil(self.bytes_per_tick)
    }

    /// Messages queued or in flight on `channel`.
    pub fn pending(&self, channel: Channel) -> u64 {
        self.in_flight[channel as usize]
    }

    pub fn send(&mut self, now: Tick, env: Envelope<M>, schedule: &mut impl FnMut(Tick, NetEvent)) {
        let key = (env.from, env.to, env.channel);
        self.in_flight[env.channel as usize] += 1;
        self.stats.messages += 1;
        let pair = self.pairs.entry(key).or_insert_with(|| Pair {
            queue: VecDeque::new(),
            busy: false,
        });
        pair.queue.push_back(env);
        if !pair.busy {
            self.transmit(now, key, schedule);
        }
    }

    fn transmit(&mut self, now: Tick, key: PairKey, schedule: &mut impl FnMut(Tick, NetEvent)) {
        let pair = self.pairs.get_mut(&key).expect("pair exists");
        let Some(head) = pair.queue.front() else {
            pair.busy = false;
            return;
        };
        pair.busy = true;
        let size = head.size;
        let duration = (size as u64).div_ceil(self.bytes_per_tick);
        let nic = self.nic_free.entry(key.0).or_insert(0);
        let start = now.max(*nic);
        *nic = start + duration;
        self.stats.bytes_offered += size as u64;
        self.stats.bytes_by_channel[key.2 as usize] += size as u64;
        let lost = self.loss > 0.0 && self.rng.random::<f64>() < self.loss;
        if lost {
            self.stats.retransmissions += 1;
            schedule(
                start + duration + 2 * self.latency + 1,
                NetEvent::Retransmit(key),
            );
        } else {
            schedule(start + self.latency + duration, NetEvent::Arrive(key));
        }
    }

    /// Handles a network event. An arrival yields the delivered envelope.
    pub fn on_event(
        &mut self,
        now: Tick,
        event: NetEvent,
        schedule: &mut impl FnMut(Tick, NetEvent),
    ) -> Option<Envelope<M>> {
        match event {
            NetEvent::Arrive(key) => {
                let env = self
                    .pairs
                    .get_mut(&key)
                    .and_then(|p| p.queue.pop_front())
                    .expect("arrival for a transmitted message");
                self.in_flight[key.2 as usize] -= 1;
                schedule(now + self.latency, NetEvent::PairFree(key));
                Some(env)
            }
            NetEvent::Retransmit(key) | NetEvent::PairFree(key) => {
                self.transmit(now, key, schedule);
                None
            }
        }
    }

    /// Forgets everything `node` had queued but not yet started sending; a message already on
    /// the wire still arrives and is discarded by the receiver's checks.
    pub fn drop_queued_from(&mut self, node: NodeId) {
        for (key, pair) in self.pairs.iter_mut().filter(|(k, _)| k.0 == node) {
            let keep = usize::from(pair.busy);
            let dropped = pair.queue.len().saturating_sub(keep);
            pair.queue.truncate(keep);
            self.in_flight[key.2 as usize] -= dropped as u64;
        }
    }
}
