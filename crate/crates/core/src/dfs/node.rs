use bytes::Bytes;

use super::BlockStore;
use crate::{Digest, NodeId};

/// Messages between the coordinator and storage nodes (and between storage nodes, for repair
/// copies).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StorageMsg {
    /// Store a block; the ack goes to `reply_to`.
    Store {
        op: u64,
        digest: Digest,
        data: Bytes,
        reply_to: NodeId,
    },
    Stored {
        op: u64,
        digest: Digest,
        ok: bool,
    },
    Fetch {
        op: u64,
        digest: Digest,
    },
    Fetched {
        op: u64,
        digest: Digest,
        data: Option<Bytes>,
    },
    /// Push a local copy of `digest` to `target`, which acks to the requester.
    Replicate {
        op: u64,
        digest: Digest,
        target: NodeId,
    },
    Delete {
        digest: Digest,
    },
    ListBlocks,
    Inventory {
        digests: Vec<Digest>,
    },
}

impl StorageMsg {
    /// Payload size on the wire, excluding transport framing.
    pub fn wire_len(&self) -> usize {
        1 + match self {
            StorageMsg::Store { data, .. } => 8 + 32 + 4 + data.len() + 4,
            StorageMsg::Stored { .. } => 8 + 32 + 1,
            StorageMsg::Fetch { .. } => 8 + 32,
            StorageMsg::Fetched { data, .. } => {
                8 + 32 + 1 + 4 + data.as_ref().map_or(0, Bytes::len)
            }
            StorageMsg::Replicate { .. } => 8 + 32 + 4,
            StorageMsg::Delete { .. } => 32,
            StorageMsg::ListBlocks => 0,
            StorageMsg::Inventory { digests } => 4 + 32 * digests.len(),
        }
    }
}

/// A storage node: a block store behind the message interface.
pub struct StorageNode {
    id: NodeId,
    store: Box<dyn BlockStore>,
    bytes: u64,
}

impl StorageNode {
    pub fn new(id: NodeId, store: Box<dyn BlockStore>) -> Self {
        let bytes = store
            .digests()
            .unwrap_or_default()
            .iter()
            .filter_map(|d| store.size_of(d).ok().flatten())
            .sum();
        Self { id, store, bytes }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn store(&self) -> &dyn BlockStore {
        self.store.as_ref()
    }

    pub fn store_mut(&mut self) -> &mut dyn BlockStore {
        self.store.as_mut()
    }

    /// Bytes written through the message interface (direct store edits are not tracked).
    pub fn stored_bytes(&self) -> u64 {
        self.bytes
    }

    fn size(&self, digest: &Digest) -> u64 {
        self.store.size_of(digest).ok().flatten().unwrap_or(0)
    }

    pub fn handle(&mut self, from: NodeId, msg: StorageMsg) -> Vec<(NodeId, StorageMsg)> {
        match msg {
            StorageMsg::Store {
                op,
                digest,
                data,
                reply_to,
            } => {
                let len = data.len() as u64;
                let old = self.size(&digest);
                let ok = Digest::of(&data) == digest && self.store.put(digest, data).is_ok();
                if ok {
                    self.bytes = self.bytes - old + len;
                }
                vec![(reply_to, StorageMsg::Stored { op, digest, ok })]
            }
            StorageMsg::Fetch { op, digest } => {
                let data = self.store.get(&digest).ok().flatten();
                vec![(from, StorageMsg::Fetched { op, digest, data })]
            }
            StorageMsg::Replicate { op, digest, target } => {
                match self.store.get(&digest).ok().flatten() {
                    Some(data) if Digest::of(&data) == digest => vec![(
                        target,
                        StorageMsg::Store {
                            op,
                            digest,
                            data,
                            reply_to: from,
                        },
                    )],
                    _ => vec![(
                        from,
                        StorageMsg::Stored {
                            op,
                            digest,
                            ok: false,
                        },
                    )],
                }
            }
            StorageMsg::Delete { digest } => {
                let old = self.size(&digest);
                if self.store.delete(&digest).is_ok() {
                    self.bytes -= old;
                }
                Vec::new()
            }
            StorageMsg::ListBlocks => {
                let digests = self.store.digests().unwrap_or_default();
                vec![(from, StorageMsg::Inventory { digests })]
            }
            // replies are never addressed to storage nodes
            StorageMsg::Stored { .. }
            | StorageMsg::Fetched { .. }
            | StorageMsg::Inventory { .. } => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfs::MemStore;

    const COORD: NodeId = NodeId(0);

    #[test]
    fn store_rejects_mismatched_content() {
        let mut n = StorageNode::new(NodeId(3), Box::new(MemStore::new()));
        let data = Bytes::from_static(b"block");
        let d = Digest::of(&data);
        let out = n.handle(
            COORD,
            StorageMsg::Store {
                op: 1,
                digest: d,
                data: data.clone(),
                reply_to: COORD,
            },
        );
        assert_eq!(
            out,
            [(
                COORD,
                StorageMsg::Stored {
                    op: 1,
                    digest: d,
                    ok: true
                }
            )]
        );
        let wrong = Digest::of(b"other");
        let out = n.handle(
            COORD,
            StorageMsg::Store {
                op: 2,
                digest: wrong,
                data,
                reply_to: COORD,
            },
        );
        assert_eq!(
            out,
            [(
                COORD,
                StorageMsg::Stored {
                    op: 2,
                    digest: wrong,
                    ok: false
                }
            )]
        );
        assert_eq!(n.stored_bytes(), 5);
    }

    #[test]
    fn replicate_pushes_to_target() {
        let mut n = StorageNode::new(NodeId(3), Box::new(MemStore::new()));
        let data = Bytes::from_static(b"block");
        let d = Digest::of(&data);
        n.store_mut().put(d, data.clone()).unwrap();
        let out = n.handle(
            COORD,
            StorageMsg::Replicate {
                op: 4,
                digest: d,
                target: NodeId(5),
            },
        );
        assert_eq!(
            out,
            [(
                NodeId(5),
                StorageMsg::Store {
                    op: 4,
                    digest: d,
                    data,
                    reply_to: COORD
                }
            )]
        );
        let missing = Digest::of(b"nope");
        let out = n.handle(
            COORD,
            StorageMsg::Replicate {
                op: 5,
                digest: missing,
                target: NodeId(5),
            },
        );
        assert_eq!(
            out,
            [(
                COORD,
                StorageMsg::Stored {
                    op: 5,
                    digest: missing,
                    ok: false
                }
            )]
        );
    }
}
