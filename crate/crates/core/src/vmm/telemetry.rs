//! Keyed-gauge telemetry, polled SNMP-style with OID-like dotted keys and decimal ASCII values.
//!
//! Requests and responses are [`CompactMessage`]s: a GET lists `("get", key)` pairs, the reply
//! carries `(key, value)` pairs in the same order.

use crate::gateway::{CompactError, CompactMessage};
use crate::{NodeId, Tick};

use super::{ResourceKind, ResourceVector, VmError};

pub const OID_SESSIONS: &str = "node.sessions";

/// Every gauge a node exposes, in canonical order.
pub const TELEMETRY_KEYS: [&str; 9] = [
    "node.cpu.capacity",
    "node.cpu.allocated",
    "node.mem.capacity",
    "node.mem.allocated",
    "node.net.capacity",
    "node.net.allocated",
    "node.storage.capacity",
    "node.storage.allocated",
    OID_SESSIONS,
];

pub fn capacity_oid(kind: ResourceKind) -> &'static str {
    TELEMETRY_KEYS[kind.index() * 2]
}

pub fn allocated_oid(kind: ResourceKind) -> &'static str {
    TELEMETRY_KEYS[kind.index() * 2 + 1]
}

/// One polled snapshot of a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTelemetry {
    pub node_id: NodeId,
    pub capacity: ResourceVector,
    pub allocated: ResourceVector,
    pub session_count: u32,
    pub poll_time: Tick,
}

impl NodeTelemetry {
    pub fn new(node_id: NodeId, capacity: ResourceVector) -> Self {
        Self {
            node_id,
            capacity,
            allocated: ResourceVector::ZERO,
            session_count: 0,
            poll_time: 0,
        }
    }

    pub fn free(&self) -> ResourceVector {
        self.capacity.saturating_sub(self.allocated)
    }

    /// Looks up one gauge by key.
    pub fn gauge(&self, key: &str) -> Option<u64> {
        if key == OID_SESSIONS {
            return Some(self.session_count as u64);
        }
        ResourceKind::ALL.into_iter().find_map(|k| {
            if key == capacity_oid(k) {
                Some(self.capacity.get(k))
            } else if key == allocated_oid(k) {
                Some(self.allocated.get(k))
            } else {
                None
            }
        })
    }

    /// All gauges as `(key, decimal)` pairs.
    pub fn gauges(&self) -> Vec<(String, String)> {
        TELEMETRY_KEYS
            .iter()
            .map(|&k| (k.to_string(), self.gauge(k).unwrap_or(0).to_string()))
            .collect()
    }
}

pub fn encode_get_request(keys: &[&str]) -> Result<Vec<u8>, CompactError> {
    let fields: Vec<(&str, &str)> = keys.iter().map(|&k| ("get", k)).collect();
    crate::gateway::package_form(&fields)
}

pub fn decode_get_request(buf: &[u8]) -> Result<Vec<String>, VmError> {
    let msg = CompactMessage::unpackage(buf).map_err(|e| VmError::BadTelemetry(e.to_string()))?;
    msg.fields
        .into_iter()
        .map(|(k, v)| {
            if k == "get" {
                Ok(v)
            } else {
                Err(VmError::BadTelemetry(format!(
                    "unexpected request field {k:?}"
                )))
            }
        })
        .collect()
}

/// Answers a GET against `telemetry`. Unknown keys are omitted from the reply.
pub fn answer_get(telemetry: &NodeTelemetry, keys: &[String]) -> Result<Vec<u8>, CompactError> {
    let fields: Vec<(String, String)> = keys
        .iter()
        .filter_map(|k| telemetry.gauge(k).map(|v| (k.clone(), v.to_string())))
        .collect();
    crate::gateway::package_form(&fields)
}

/// Parses a full GET reply into telemetry stamped with `poll_time`.
pub fn parse_response(
    node_id: NodeId,
    buf: &[u8],
    poll_time: Tick,
) -> Result<NodeTelemetry, VmError> {
    let msg = CompactMessage::unpackage(buf).map_err(|e| VmError::BadTelemetry(e.to_string()))?;
    let value = |key: &str| -> Result<u64, VmError> {
        let raw = msg
            .get(key)
            .ok_or_else(|| VmError::BadTelemetry(format!("missing gauge {key}")))?;
        raw.parse()
            .map_err(|_| VmError::BadTelemetry(format!("gauge {key} = {raw:?} is not decimal")))
    };
    let mut capacity = ResourceVector::ZERO;
    let mut allocated = ResourceVector::ZERO;
    for k in ResourceKind::ALL {
        capacity.set(k, value(capacity_oid(k))?);
        allocated.set(k, value(allocated_oid(k))?);
    }
    if !allocated.fits_within(&capacity) {
        return Err(VmError::BadTelemetry(format!(
            "node {node_id} reports allocated {allocated} beyond capacity {capacity}"
        )));
    }
    let session_count = u32::try_from(value(OID_SESSIONS)?)
        .map_err(|_| VmError::BadTelemetry("session count overflow".into()))?;
    Ok(NodeTelemetry {
        node_id,
        capacity,
        allocated,
        session_count,
        poll_time,
    })
}
