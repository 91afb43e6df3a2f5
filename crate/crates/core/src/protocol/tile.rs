use std::sync::OnceLock;

use crate::registry::Registry;

use super::ProtocolError;

/// Wire tag of a tile payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TileMode {
    Raw = 0,
    Rle = 1,
}

impl TileMode {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(TileMode::Raw),
            1 => Some(TileMode::Rle),
            _ => None,
        }
    }
}

/// A pixel encoding for one tile.
pub trait TileCodec: Send + Sync {
    fn mode(&self) -> TileMode;

    fn encode(&self, pixels: &[u8]) -> Vec<u8>;

    fn decode(&self, payload: &[u8], pixel_count: usize) -> Result<Vec<u8>, ProtocolError>;

    /// Cheap structural check that `payload` decodes to exactly `pixel_count` pixels.
    fn validate(&self, payload: &[u8], pixel_count: usize) -> Result<(), ProtocolError>;
}

/// Pixels verbatim.
pub struct RawCodec;

impl TileCodec for RawCodec {
    fn mode(&self) -> TileMode {
        TileMode::Raw
    }

    fn encode(&self, pixels: &[u8]) -> Vec<u8> {
        pixels.to_vec()
    }

    fn decode(&self, payload: &[u8], pixel_count: usize) -> Result<Vec<u8>, ProtocolError> {
        self.validate(payload, pixel_count)?;
        Ok(payload.to_vec())
    }

    fn validate(&self, payload: &[u8], pixel_count: usize) -> Result<(), ProtocolError> {
        if payload.len() != pixel_count * 3 {
            return Err(ProtocolError::BadTileLength {
                expected: pixel_count * 3,
                got: payload.len(),
            });
        }
        Ok(())
    }
}

/// Runs of `(count: u16 BE, r, g, b)` in row-major order. Runs never leave the tile.
pub struct RleCodec;

const RUN_LEN: usize = 5;

impl TileCodec for RleCodec {
    fn mode(&self) -> TileMode {
        TileMode::Rle
    }

    fn encode(&self, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut iter = pixels.chunks_exact(3);
        let Some(first) = iter.next() else {
            return out;
        };
        let mut current = first;
        let mut count: u16 = 1;
        for px in iter {
            if px == current && count < u16::MAX {
                count += 1;
            } else {
                push_run(&mut out, count, current);
                current = px;
                count = 1;
            }
        }
        push_run(&mut out, count, current);
        out
    }

    fn decode(&self, payload: &[u8], pixel_count: usize) -> Result<Vec<u8>, ProtocolError> {
        self.validate(payload, pixel_count)?;
        let mut out = Vec::with_capacity(pixel_count * 3);
        for run in payload.chunks_exact(RUN_LEN) {
            let count = u16::from_be_bytes([run[0], run[1]]) as usize;
            for _ in 0..count {
                out.extend_from_slice(&run[2..5]);
            }
        }
        Ok(out)
    }

    fn validate(&self, payload: &[u8], pixel_count: usize) -> Result<(), ProtocolError> {
        if payload.len() % RUN_LEN != 0 {
            return Err(ProtocolError::BadTilePayload(format!(
                "rle payload length {} is not a multiple of {RUN_LEN}",
                payload.len()
            )));
        }
        let mut total = 0usize;
        for run in payload.chunks_exact(RUN_LEN) {
            let count = u16::from_be_bytes([run[0], run[1]]) as usize;
            if count == 0 {
                return Err(ProtocolError::BadTilePayload("zero-length run".into()));
            }
            total += count;
        }
        if total != pixel_count {
            return Err(ProtocolError::BadTilePayload(format!(
                "rle runs cover {total} pixels, tile has {pixel_count}"
            )));
        }
        Ok(())
    }
}

fn push_run(out: &mut Vec<u8>, count: u16, px: &[u8]) {
    out.extend_from_slice(&count.to_be_bytes());
    out.extend_from_slice(px);
}

/// Built-in codecs in tie-break order: `raw`, then `rle`.
pub fn codecs() -> &'static Registry<dyn TileCodec> {
    static CODECS: OnceLock<Registry<dyn TileCodec>> = OnceLock::new();
    CODECS.get_or_init(|| {
        let mut reg: Registry<dyn TileCodec> = Registry::new();
        reg.register("raw", Box::new(RawCodec))
            .register("rle", Box::new(RleCodec));
        reg
    })
}

fn codec_for(mode: TileMode) -> &'static dyn TileCodec {
    codecs()
        .iter()
        .map(|(_, c)| c)
        .find(|c| c.mode() == mode)
        .expect("every TileMode has a built-in codec")
}

/// An encoded tile payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileEncoding {
    pub mode: TileMode,
    pub payload: Vec<u8>,
}

impl TileEncoding {
    pub fn validate(&self, tile_size: usize) -> Result<(), ProtocolError> {
        codec_for(self.mode).validate(&self.payload, tile_size * tile_size)
    }
}

/// Encodes with the shortest codec in `registry`; earlier registrations win ties.
pub fn encode_tile_with(
    registry: &Registry<dyn TileCodec>,
    raw_pixels: &[u8],
    tile_size: usize,
) -> Result<TileEncoding, ProtocolError> {
    let expected = tile_size * tile_size * 3;
    if raw_pixels.len() != expected {
        return Err(ProtocolError::BadTileLength {
            expected,
            got: raw_pixels.len(),
        });
    }
    let mut best: Option<TileEncoding> = None;
    for (_, codec) in registry.iter() {
        let payload = codec.encode(raw_pixels);
        if best
            .as_ref()
            .is_none_or(|b| payload.len() < b.payload.len())
        {
            best = Some(TileEncoding {
                mode: codec.mode(),
                payload,
            });
        }
    }
    best.ok_or_else(|| ProtocolError::BadTilePayload("no tile codecs registered".into()))
}

/// Encodes a `tile_size`×`tile_size` tile as Raw or RLE, whichever is shorter (Raw on ties).
pub fn encode_tile(raw_pixels: &[u8], tile_size: usize) -> Result<TileEncoding, ProtocolError> {
    encode_tile_with(codecs(), raw_pixels, tile_size)
}

pub fn decode_tile(enc: &TileEncoding, tile_size: usize) -> Result<Vec<u8>, ProtocolError> {
    codec_for(enc.mode).decode(&enc.payload, tile_size * tile_size)
}
