use std::collections::BTreeSet;

use super::tile::{TileEncoding, TileMode};
use super::ProtocolError;

/// `"CU"`, the first two bytes of every update frame.
pub const UPDATE_MAGIC: [u8; 2] = [0x43, 0x55];

const HEADER_LEN: usize = 2 + 8 + 2;
const TILE_HEADER_LEN: usize = 2 + 2 + 1 + 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirtyTile {
    pub col: u16,
    pub row: u16,
    pub encoding: TileEncoding,
}

/// The tiles that changed in one frame, in row-major tile order.
///
/// `tile_size` is session configuration and does not travel on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirtyTileSet {
    pub frame_seq: u64,
    pub tile_size: usize,
    pub tiles: Vec<DirtyTile>,
}

impl DirtyTileSet {
    pub fn empty(frame_seq: u64, tile_size: usize) -> Self {
        Self {
            frame_seq,
            tile_size,
            tiles: Vec::new(),
        }
    }

    pub fn with_frame_seq(mut self, frame_seq: u64) -> Self {
        self.frame_seq = frame_seq;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN
            + self
                .tiles
                .iter()
                .map(|t| TILE_HEADER_LEN + t.encoding.payload.len())
                .sum::<usize>()
    }

    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        encode_update(self)
    }
}

pub fn encode_update(update: &DirtyTileSet) -> Result<Vec<u8>, ProtocolError> {
    let count = u16::try_from(update.tiles.len())
        .map_err(|_| ProtocolError::TooManyTiles(update.tiles.len()))?;
    let mut out = Vec::with_capacity(update.wire_len());
    out.extend_from_slice(&UPDATE_MAGIC);
    out.extend_from_slice(&update.frame_seq.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    for tile in &update.tiles {
        out.extend_from_slice(&tile.col.to_be_bytes());
        out.extend_from_slice(&tile.row.to_be_bytes());
        out.push(tile.encoding.mode as u8);
        let len = u32::try_from(tile.encoding.payload.len())
            .map_err(|_| ProtocolError::MalformedUpdate("tile payload exceeds u32".into()))?;
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(&tile.encoding.payload);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.buf.len() - self.pos < n {
            return Err(ProtocolError::MalformedUpdate(format!(
                "truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses an update frame. Every tile payload is checked to cover exactly one tile.
pub fn decode_update(buf: &[u8], tile_size: usize) -> Result<DirtyTileSet, ProtocolError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(2)? != UPDATE_MAGIC {
        return Err(ProtocolError::MalformedUpdate("bad magic".into()));
    }
    let frame_seq = r.u64()?;
    let count = r.u16()? as usize;
    let mut seen = BTreeSet::new();
    let mut tiles = Vec::with_capacity(count);
    for _ in 0..count {
        let col = r.u16()?;
        let row = r.u16()?;
        let mode_byte = r.take(1)?[0];
        let mode = TileMode::from_byte(mode_byte).ok_or_else(|| {
            ProtocolError::MalformedUpdate(format!("unknown tile mode {mode_byte}"))
        })?;
        let len = r.u32()? as usize;
        let payload = r.take(len)?.to_vec();
        if !seen.insert((col, row)) {
            return Err(ProtocolError::MalformedUpdate(format!(
                "duplicate tile ({col},{row})"
            )));
        }
        let encoding = TileEncoding { mode, payload };
        encoding.validate(tile_size)?;
        tiles.push(DirtyTile { col, row, encoding });
    }
    if r.pos != buf.len() {
        return Err(ProtocolError::MalformedUpdate("trailing bytes".into()));
    }
    Ok(DirtyTileSet {
        frame_seq,
        tile_size,
        tiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::encode_tile;

    fn sample() -> DirtyTileSet {
        DirtyTileSet {
            frame_seq: 5,
            tile_size: 2,
            tiles: vec![
                DirtyTile {
                    col: 1,
                    row: 0,
                    encoding: encode_tile(&[3; 12], 2).unwrap(),
                },
                DirtyTile {
                    col: 0,
                    row: 2,
                    encoding: encode_tile(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], 2).unwrap(),
                },
            ],
        }
    }

    #[test]
    fn layout() {
        let bytes = encode_update(&sample()).unwrap();
        assert_eq!(&bytes[..12], &[0x43, 0x55, 0, 0, 0, 0, 0, 0, 0, 5, 0, 2]);
        // first tile: col 1, row 0, rle, len 5, run (4 × [3,3,3])
        assert_eq!(&bytes[12..26], &[0, 1, 0, 0, 1, 0, 0, 0, 5, 0, 4, 3, 3, 3]);
        assert_eq!(bytes.len(), sample().wire_len());
    }

    #[test]
    fn round_trip() {
        let u = sample();
        assert_eq!(decode_update(&encode_update(&u).unwrap(), 2).unwrap(), u);
    }

    #[test]
    fn empty_update_is_twelve_bytes() {
        let bytes = encode_update(&DirtyTileSet::empty(9, 16)).unwrap();
        assert_eq!(bytes.len(), 12);
        assert!(decode_update(&bytes, 16).unwrap().is_empty());
    }

    #[test]
    fn malformed_updates_rejected() {
        let bytes = encode_update(&sample()).unwrap();
        assert!(decode_update(&bytes[..bytes.len() - 1], 2).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_update(&extra, 2).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_update(&magic, 2).is_err());
        // wrong tile size makes the payloads invalid
        assert!(decode_update(&bytes, 4).is_err());
        let mut dup = sample();
        dup.tiles[1].col = 1;
        dup.tiles[1].row = 0;
        assert!(decode_update(&encode_update(&dup).unwrap(), 2).is_err());
    }
}
