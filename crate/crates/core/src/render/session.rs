use std::fmt;
use std::str::FromStr;

use crate::protocol::{diff_framebuffer, full_frame, DirtyTileSet, Framebuffer, InputEvent};
use crate::NodeId;

use super::app::{render, AppState};
use super::RenderError;

/// 128-bit session identifier, written as 32 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionId(pub u128);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl fmt::Debug for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionId({self})")
    }
}

impl FromStr for SessionId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u128::from_str_radix(s, 16).map(SessionId)
    }
}

/// A running session on a render host.
#[derive(Debug, Clone)]
pub struct SessionHandle {
    pub session_id: SessionId,
    pub user_id: String,
    pub host_node: NodeId,
    pub state: AppState,
    pub last_frame: Framebuffer,
    pub last_seq: u64,
    pub next_frame_seq: u64,
    pub tile_size: usize,
}

impl SessionHandle {
    pub fn open(
        session_id: SessionId,
        user_id: impl Into<String>,
        host_node: NodeId,
        width: usize,
        height: usize,
        tile_size: usize,
    ) -> Result<Self, RenderError> {
        let state = AppState::new(width, height, tile_size)?;
        let last_frame = render(&state);
        Ok(Self {
            session_id,
            user_id: user_id.into(),
            host_node,
            state,
            last_frame,
            last_seq: 0,
            next_frame_seq: 0,
            tile_size,
        })
    }

    /// Checks that `events` continue the session's sequence and stay on screen.
    pub fn validate(&self, events: &[InputEvent]) -> Result<(), RenderError> {
        let mut last = self.last_seq;
        for e in events {
            if e.seq <= last {
                return Err(RenderError::OutOfOrderEvent { last, got: e.seq });
            }
            if !e.within(self.state.width(), self.state.height()) {
                return Err(RenderError::EventOutOfBounds {
                    seq: e.seq,
                    width: self.state.width(),
                    height: self.state.height(),
                });
            }
            last = e.seq;
        }
        Ok(())
    }

    /// Applies `events`, renders once and returns the tiles that changed since the last frame.
    ///
    /// Nothing changes if any event is rejected. Only non-empty updates consume a frame number,
    /// so a stream of the updates worth sending has no gaps.
    pub fn step(&mut self, events: &[InputEvent]) -> Result<DirtyTileSet, RenderError> {
        self.validate(events)?;
        for e in events {
            self.state.apply_event(e);
        }
        if let Some(e) = events.last() {
            self.last_seq = e.seq;
        }
        let frame = render(&self.state);
        let mut update = diff_framebuffer(&self.last_frame, &frame, self.tile_size)?;
        update.frame_seq = if update.is_empty() {
            self.next_frame_seq
        } else {
            self.take_frame_seq()
        };
        self.last_frame = frame;
        Ok(update)
    }

    /// A full-frame update of the current picture, consuming one frame number.
    pub fn resync(&mut self) -> DirtyTileSet {
        let seq = self.take_frame_seq();
        full_frame(&self.last_frame, self.tile_size, seq)
            .expect("session geometry is validated at open")
    }

    fn take_frame_seq(&mut self) -> u64 {
        let seq = self.next_frame_seq;
        self.next_frame_seq += 1;
        seq
    }
}
