use std::fmt::Write as _;
use std::ops::Range;

use bytes::Bytes;

use super::{validate_path, DfsError};
use crate::{Digest, NodeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRecord {
    pub digest: Digest,
    pub size: u64,
    pub replicas: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub path: String,
    pub total_length: u64,
    pub block_size: u64,
    pub blocks: Vec<BlockRecord>,
}

/// Splits `data` into `block_size` blocks (the last one short). Replica sets are left empty.
pub fn chunk(path: &str, data: &Bytes, block_size: u64) -> (Manifest, Vec<Bytes>) {
    assert!(block_size > 0, "block size must be positive");
    let step = block_size as usize;
    let mut blocks = Vec::with_capacity(data.len().div_ceil(step));
    let mut records = Vec::with_capacity(blocks.capacity());
    for start in (0..data.len()).step_by(step) {
        let block = data.slice(start..data.len().min(start + step));
        records.push(BlockRecord {
            digest: Digest::of(&block),
            size: block.len() as u64,
            replicas: Vec::new(),
        });
        blocks.push(block);
    }
    let manifest = Manifest {
        path: path.to_string(),
        total_length: data.len() as u64,
        block_size,
        blocks: records,
    };
    (manifest, blocks)
}

/// Indices of the blocks overlapping `[offset, offset + length)`.
pub fn block_span(offset: u64, length: u64, block_size: u64) -> Range<usize> {
    if length == 0 {
        return 0..0;
    }
    let first = offset / block_size;
    let last = (offset + length - 1) / block_size;
    first as usize..last as usize + 1
}

impl Manifest {
    pub fn check_range(&self, offset: u64, length: u64) -> Result<(), DfsError> {
        match offset.checked_add(length) {
            Some(end) if end <= self.total_length => Ok(()),
            _ => Err(DfsError::RangeError {
                offset,
                length,
                total: self.total_length,
            }),
        }
    }

    /// Cuts `[offset, offset+length)` out of the blocks in `span`, given in order.
    pub fn assemble(&self, offset: u64, length: u64, span_blocks: &[Bytes]) -> Bytes {
        let span = block_span(offset, length, self.block_size);
        debug_assert_eq!(span.len(), span_blocks.len());
        if span_blocks.len() == 1 {
            let start = (offset - span.start as u64 * self.block_size) as usize;
            return span_blocks[0].slice(start..start + length as usize);
        }
        let mut out = Vec::with_capacity(length as usize);
        let mut pos = span.start as u64 * self.block_size;
        let end = offset + length;
        for block in span_blocks {
            let lo = offset.max(pos) - pos;
            let hi = end.min(pos + block.len() as u64) - pos;
            out.extend_from_slice(&block[lo as usize..hi as usize]);
            pos += block.len() as u64;
        }
        Bytes::from(out)
    }

    pub fn check_invariants(&self) -> bool {
        let sum: u64 = self.blocks.iter().map(|b| b.size).sum();
        let n = self.blocks.len();
        sum == self.total_length
            && self.blocks.iter().enumerate().all(|(i, b)| {
                b.size > 0 && (i + 1 == n || b.size == self.block_size) && b.size <= self.block_size
            })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.path, self.total_length, self.block_size);
        for b in &self.blocks {
            let nodes: Vec<String> = b.replicas.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{} {} {}", b.digest, b.size, nodes.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DfsError> {
        let bad = |line: usize, message: &str| DfsError::BadManifest {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        let [path, total, block_size] = fields[..] else {
            return Err(bad(1, "header needs path, total length and block size"));
        };
        validate_path(path).map_err(|_| bad(1, "invalid path"))?;
        let total_length = total.parse().map_err(|_| bad(1, "bad total length"))?;
        let block_size: u64 = block_size.parse().map_err(|_| bad(1, "bad block size"))?;
        if block_size == 0 {
            return Err(bad(1, "block size must be positive"));
        }
        let mut blocks = Vec::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(' ').collect();
            let [digest, size, nodes] = fields[..] else {
                return Err(bad(n, "block line needs digest, size and replicas"));
            };
            let digest = digest.parse().map_err(|_| bad(n, "bad digest"))?;
            let size = size.parse().map_err(|_| bad(n, "bad size"))?;
            let replicas = if nodes.is_empty() {
                Vec::new()
            } else {
                nodes
                    .split(',')
                    .map(|s| s.parse().map(NodeId))
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(n, "bad replica list"))?
            };
            blocks.push(BlockRecord {
                digest,
                size,
                replicas,
            });
        }
        let manifest = Manifest {
            path: path.to_string(),
            total_length,
            block_size,
            blocks,
        };
        if !manifest.check_invariants() {
            return Err(bad(1, "block sizes do not add up"));
        }
        Ok(manifest)
    }
}
