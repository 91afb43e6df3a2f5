//! Thin-client wire protocol.
//!
//! Clients send [`InputEvent`]s upstream; servers answer with [`DirtyTileSet`] updates that carry
//! only the tiles that changed between consecutive framebuffers. All multi-byte integers on the
//! wire are big-endian.

mod diff;
mod event;
mod frame;
mod keys;
mod tile;
mod update;

pub use diff::{apply_update, apply_update_in_place, diff_framebuffer, full_frame};
pub use event::{decode_input_event, encode_input_event, Action, InputEvent};
pub use frame::Framebuffer;
pub use keys::{keycode_for, keycode_table, NAMED_KEYS};
pub use tile::{
    codecs, decode_tile, encode_tile, encode_tile_with, RawCodec, RleCodec, TileCodec,
    TileEncoding, TileMode,
};
pub use update::{decode_update, encode_update, DirtyTile, DirtyTileSet, UPDATE_MAGIC};

/// Default tile edge in pixels.
pub const DEFAULT_TILE_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed event: {0}")]
    MalformedEvent(String),
    #[error("malformed update: {0}")]
    MalformedUpdate(String),
    #[error("framebuffer dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("geometry {width}x{height} is not divisible by tile size {tile}")]
    BadGeometry {
        width: usize,
        height: usize,
        tile: usize,
    },
    #[error("tile payload has {got} bytes, expected {expected}")]
    BadTileLength { expected: usize, got: usize },
    #[error("tile payload does not decode to a full tile: {0}")]
    BadTilePayload(String),
    #[error("tile ({col},{row}) lies outside the framebuffer")]
    TileOutOfBounds { col: u16, row: u16 },
    #[error("update carries {0} tiles, more than the wire format allows")]
    TooManyTiles(usize),
}
