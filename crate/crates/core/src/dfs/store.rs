use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use bytes::Bytes;

use crate::Digest;

/// Raw block storage of one node. Stores accept whatever they are given; integrity is checked by
/// the callers, which is also what makes stored-corruption tests possible.
pub trait BlockStore: Send {
    fn put(&mut self, digest: Digest, data: Bytes) -> io::Result<()>;
    fn get(&self, digest: &Digest) -> io::Result<Option<Bytes>>;
    fn delete(&mut self, digest: &Digest) -> io::Result<()>;
    fn digests(&self) -> io::Result<Vec<Digest>>;
    /// Stored length of a block, if present.
    fn size_of(&self, digest: &Digest) -> io::Result<Option<u64>>;
}

#[derive(Debug, Default, Clone)]
pub struct MemStore {
    blocks: BTreeMap<Digest, Bytes>,
}

impl MemStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

impl BlockStore for MemStore {
    fn put(&mut self, digest: Digest, data: Bytes) -> io::Result<()> {
        self.blocks.insert(digest, data);
        Ok(())
    }

    fn get(&self, digest: &Digest) -> io::Result<Option<Bytes>> {
        Ok(self.blocks.get(digest).cloned())
    }

    fn delete(&mut self, digest: &Digest) -> io::Result<()> {
        self.blocks.remove(digest);
        Ok(())
    }

    fn digests(&self) -> io::Result<Vec<Digest>> {
        Ok(self.blocks.keys().copied().collect())
    }

    fn size_of(&self, digest: &Digest) -> io::Result<Option<u64>> {
        Ok(self.blocks.get(digest).map(|b| b.len() as u64))
    }
}

/// One file per block under `root`, named by the lowercase hex digest.
#[derive(Debug, Clone)]
pub struct DiskStore {
    root: PathBuf,
}

impl DiskStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_of(&self, digest: &Digest) -> PathBuf {
        self.root.join(digest.to_hex())
    }
}

impl BlockStore for DiskStore {
    fn put(&mut self, digest: Digest, data: Bytes) -> io::Result<()> {
        let tmp = self.root.join(format!("{}.tmp", digest.to_hex()));
        fs::write(&tmp, &data)?;
        fs::rename(tmp, self.path_of(&digest))
    }

    fn get(&self, digest: &Digest) -> io::Result<Option<Bytes>> {
        match fs::read(self.path_of(digest)) {
            Ok(data) => Ok(Some(Bytes::from(data))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn delete(&mut self, digest: &Digest) -> io::Result<()> {
        match fs::remove_file(self.path_of(digest)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    fn digests(&self) -> io::Result<Vec<Digest>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name();
            // skips leftover temp files and anything foreign
            if let Some(d) = name.to_str().and_then(|n| n.parse().ok()) {
                out.push(d);
            }
        }
        out.sort();
        Ok(out)
    }

    fn size_of(&self, digest: &Digest) -> io::Result<Option<u64>> {
        match fs::metadata(self.path_of(digest)) {
            Ok(m) => Ok(Some(m.len())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}
