//! Session routing state kept by the gateway: which host runs each session, the event log that
//! lets a session be rebuilt elsewhere, and the frame numbering seen by the client.

use std::collections::BTreeMap;

use crate::dfs::DfsError;
use crate::protocol::{InputEvent, ProtocolError};
use crate::render::SessionId;
use crate::vmm::{ResourceVector, VmError};
use crate::NodeId;

use super::{CompactError, CompactMessage};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("event seq {got} does not follow {last}")]
    OutOfOrderEvent { last: u64, got: u64 },
    #[error("event seq {seq} lies outside the {width}x{height} screen")]
    EventOutOfBounds {
        seq: u64,
        width: usize,
        height: usize,
    },
    #[error(transparent)]
    Vm(#[from] VmError),
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Compact(#[from] CompactError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl GatewayError {
    /// HTTP status for the error.
    pub fn status(&self) -> u16 {
        match self {
            GatewayError::UnknownSession(_) => 404,
            GatewayError::OutOfOrderEvent { .. } | GatewayError::EventOutOfBounds { .. } => 409,
            GatewayError::Vm(VmError::NoCapacity | VmError::EmptyCluster) => 503,
            GatewayError::Vm(_) => 500,
            GatewayError::Dfs(e) => dfs_status(e),
            GatewayError::Compact(_) | GatewayError::Protocol(_) | GatewayError::BadRequest(_) => {
                400
            }
        }
    }
}

pub fn dfs_status(e: &DfsError) -> u16 {
    match e {
        DfsError::NotFound(_) => 404,
        DfsError::RangeError { .. } => 416,
        DfsError::BadPath(_) | DfsError::BadManifest { .. } => 400,
        DfsError::InsufficientNodes { .. }
        | DfsError::Unavailable(_)
        | DfsError::WriteFailed { .. } => 503,
    }
}

/// Everything a render host needs to start (or rebuild) a session. The scalar fields travel as a
/// packaged compact form followed by the encoded replay events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenRequest {
    pub session: SessionId,
    pub user: String,
    pub width: usize,
    pub height: usize,
    pub tile_size: usize,
    pub quota: ResourceVector,
    /// Frame number of the full frame the host answers with.
    pub first_frame_seq: u64,
    pub replay: Vec<InputEvent>,
}

impl OpenRequest {
    pub fn form(&self) -> CompactMessage {
        CompactMessage::new()
            .with("session", self.session.to_string())
            .with("user", self.user.clone())
            .with("width", self.width.to_string())
            .with("height", self.height.to_string())
            .with("tile", self.tile_size.to_string())
            .with(
                "quota",
                self.quota.to_array().map(|v| v.to_string()).join(","),
            )
            .with("frame", self.first_frame_seq.to_string())
            .with("replay", self.replay.len().to_string())
    }

    pub fn encode(&self) -> Result<Vec<u8>, CompactError> {
        let form = self.form().package()?;
        let mut out = Vec::with_capacity(4 + form.len() + self.replay.len() * 13);
        out.extend_from_slice(&(form.len() as u32).to_be_bytes());
        out.extend_from_slice(&form);
        for e in &self.replay {
            let bytes = e.encode();
            out.push(bytes.len() as u8);
            out.extend_from_slice(&bytes);
        }
        Ok(out)
    }

    pub fn decode(buf: &[u8]) -> Result<Self, GatewayError> {
        let bad = |m: &str| GatewayError::BadRequest(m.to_string());
        let len = buf.get(..4).ok_or_else(|| bad("truncated open request"))?;
        let len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        let form = buf
            .get(4..4 + len)
            .ok_or_else(|| bad("truncated open request"))?;
        let form = CompactMessage::unpackage(form)?;
        let field = |k: &str| form.get(k).ok_or_else(|| bad(&format!("missing {k}")));
        let num = |k: &str| -> Result<u64, GatewayError> {
            field(k)?.parse().map_err(|_| bad(&format!("bad {k}")))
        };
        let quota: Vec<u64> = field("quota")?
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad quota"))?;
        let quota: [u64; 4] = quota.try_into().map_err(|_| bad("bad quota"))?;
        let count = num("replay")? as usize;
        let mut replay = Vec::with_capacity(count);
        let mut pos = 4 + len;
        for _ in 0..count {
            let n = *buf.get(pos).ok_or_else(|| bad("truncated replay"))? as usize;
            let bytes = buf
                .get(pos + 1..pos + 1 + n)
                .ok_or_else(|| bad("truncated replay"))?;
            replay.push(InputEvent::decode(bytes)?);
            pos += 1 + n;
        }
        if pos != buf.len() {
            return Err(bad("trailing bytes after replay"));
        }
        Ok(Self {
            session: field("session")?
                .parse()
                .map_err(|_| bad("bad session id"))?,
            user: field("user")?.to_string(),
            width: num("width")? as usize,
            height: num("height")? as usize,
            tile_size: num("tile")? as usize,
            quota: ResourceVector::from_array(quota),
            first_frame_seq: num("frame")?,
            replay,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RoutedSession {
    pub user: String,
    pub width: usize,
    pub height: usize,
    pub host: NodeId,
    pub quota: ResourceVector,
    /// Every accepted event, for rebuilding the session on another host.
    pub log: Vec<InputEvent>,
    /// Frame number the client expects next.
    pub next_frame_seq: u64,
}

impl RoutedSession {
    pub fn last_seq(&self) -> u64 {
        self.log.last().map_or(0, |e| e.seq)
    }
}

/// Per-session routing. Events are checked here, before they reach a host, so a host only ever
/// sees in-order, on-screen input.
#[derive(Debug, Default)]
pub struct Router {
    sessions: BTreeMap<SessionId, RoutedSession>,
}

impl Router {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn get(&self, id: SessionId) -> Result<&RoutedSession, GatewayError> {
        self.sessions
            .get(&id)
            .ok_or(GatewayError::UnknownSession(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = SessionId> + '_ {
        self.sessions.keys().copied()
    }

    /// Registers a freshly placed session and returns the request that starts it.
    pub fn open(
        &mut self,
        id: SessionId,
        user: &str,
        (width, height): (usize, usize),
        tile_size: usize,
        host: NodeId,
        quota: ResourceVector,
    ) -> OpenRequest {
        self.sessions.insert(
            id,
            RoutedSession {
                user: user.to_string(),
                width,
                height,
                host,
                quota,
                log: Vec::new(),
                next_frame_seq: 0,
            },
        );
        self.rebuild(id, host, tile_size).expect("just inserted")
    }

    /// Moves a session to `host`: the request replays the whole log there and answers with a
    /// full frame numbered where the client left off.
    pub fn rebuild(
        &mut self,
        id: SessionId,
        host: NodeId,
        tile_size: usize,
    ) -> Result<OpenRequest, GatewayError> {
        let s = self
            .sessions
            .get_mut(&id)
            .ok_or(GatewayError::UnknownSession(id))?;
        s.host = host;
        Ok(OpenRequest {
            session: id,
            user: s.user.clone(),
            width: s.width,
            height: s.height,
            tile_size,
            quota: s.quota,
            first_frame_seq: s.next_frame_seq,
            replay: s.log.clone(),
        })
    }

    /// Accepts an event for forwarding and returns the host to send it to.
    pub fn route_event(
        &mut self,
        id: SessionId,
        event: InputEvent,
    ) -> Result<NodeId, GatewayError> {
        let s = self
            .sessions
            .get_mut(&id)
            .ok_or(GatewayError::UnknownSession(id))?;
        let last = s.last_seq();
        if event.seq <= last {
            return Err(GatewayError::OutOfOrderEvent {
                last,
                got: event.seq,
            });
        }
        if !event.within(s.width, s.height) {
            return Err(GatewayError::EventOutOfBounds {
                seq: event.seq,
                width: s.width,
                height: s.height,
            });
        }
        s.log.push(event);
        Ok(s.host)
    }

    /// Whether an update from `from` numbered `frame_seq` should go to the client. Updates from a
    /// former host, duplicates and anything ahead of the expected frame are dropped.
    pub fn accept_update(&mut self, id: SessionId, from: NodeId, frame_seq: u64) -> bool {
        match self.sessions.get_mut(&id) {
            Some(s) if s.host == from && s.next_frame_seq == frame_seq => {
                s.next_frame_seq += 1;
                true
            }
            _ => false,
        }
    }

    pub fn sessions_on(&self, host: NodeId) -> Vec<SessionId> {
        self.sessions
            .iter()
            .filter(|(_, s)| s.host == host)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn close(&mut self, id: SessionId) -> Result<RoutedSession, GatewayError> {
        self.sessions
            .remove(&id)
            .ok_or(GatewayError::UnknownSession(id))
    }
}
