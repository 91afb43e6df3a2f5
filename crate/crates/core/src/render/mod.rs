//! The server-side session application.
//!
//! Each session runs a small deterministic canvas: key presses write colored glyph cells on an
//! 8×16 grid, mouse drags draw white line segments. Rendering is a pure function of the state,
//! so replaying an event log reproduces the framebuffer bit for bit.

mod app;
mod raster;
mod script;
mod session;

pub use app::{glyph_color, new_session, render, AppState, GLYPH_HEIGHT, GLYPH_WIDTH};
pub use raster::line_pixels;
pub use script::{format_action, parse_action, parse_replay};
pub use session::{SessionHandle, SessionId};

use crate::protocol::ProtocolError;

/// Default session geometry: a 40×30 glyph grid, 40×30 tiles at 16 px.
pub const DEFAULT_WIDTH: usize = 640;
pub const DEFAULT_HEIGHT: usize = 480;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("geometry {width}x{height} must be a multiple of 8x16 and of the tile size {tile}")]
    BadGeometry {
        width: usize,
        height: usize,
        tile: usize,
    },
    #[error("event seq {got} does not follow {last}")]
    OutOfOrderEvent { last: u64, got: u64 },
    #[error("event seq {seq} points outside the {width}x{height} screen")]
    EventOutOfBounds {
        seq: u64,
        width: usize,
        height: usize,
    },
    #[error("line {line}: {message}")]
    Script { line: usize, message: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}
