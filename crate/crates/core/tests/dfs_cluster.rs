//! The block store end to end: disk-backed nodes, random operation sequences with failures,
//! checked against a plain map of what each path should hold.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bytes::Bytes;
use proptest::prelude::*;

use cumulus_core::dfs::{BlockStore, DfsError, DiskStore, LocalCluster, Manifest};
use cumulus_core::{Digest, NodeId};

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("cumulus-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&p);
        std::fs::create_dir_all(&p).unwrap();
        Self(p)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn bytes(seed: u8, len: usize) -> Bytes {
    (0..len)
        .map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed))
        .collect()
}

#[test]
fn disk_backed_cluster_survives_restart_of_its_stores() {
    let dir = TempDir::new("disk");
    let root = dir.0.clone();
    let mut c = LocalCluster::with_stores(4, 2, 1000, |id| {
        Box::new(DiskStore::open(root.join(id.to_string())).unwrap())
    });
    let data = bytes(3, 4500);
    let m = c.put("photos/cat.raw", data.clone()).unwrap();
    assert_eq!(m.blocks.len(), 5);
    assert_eq!(
        c.get("photos/cat.raw", 999, 2002).unwrap(),
        data.slice(999..3001)
    );

    // Files on disk are named by digest and hold exactly the block bytes.
    for b in &m.blocks {
        for r in &b.replicas {
            let path = dir.0.join(r.to_string()).join(b.digest.to_hex());
            let on_disk = std::fs::read(&path).unwrap();
            assert_eq!(Digest::of(&on_disk), b.digest);
        }
    }
    // A fresh store over the same directory sees the same blocks.
    let n1 = m.blocks[0].replicas[0];
    let reopened = DiskStore::open(dir.0.join(n1.to_string())).unwrap();
    assert!(reopened.digests().unwrap().contains(&m.blocks[0].digest));
}

#[test]
fn manifest_text_survives_a_round_trip() {
    let mut c = LocalCluster::new(5, 3, 64);
    let m = c.put("a/b", bytes(1, 1000)).unwrap();
    let parsed = Manifest::parse(&m.to_text()).unwrap();
    assert_eq!(parsed, m);
    assert!(parsed.check_invariants());
}

#[derive(Debug, Clone)]
enum Op {
    Put(u8, usize),
    Get(u8, usize, usize),
    Kill(u32),
    Revive,
    Corrupt(u32, usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0u8..4, 0usize..600).prop_map(|(p, n)| Op::Put(p, n)),
        4 => (0u8..4, 0usize..700, 0usize..700).prop_map(|(p, o, n)| Op::Get(p, o, n)),
        1 => (1u32..=5).prop_map(Op::Kill),
        1 => Just(Op::Revive),
        1 => (1u32..=5, any::<usize>()).prop_map(|(n, i)| Op::Corrupt(n, i)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With at most one node down at a time and one corrupt replica per block at most, every
    /// read returns exactly what the model holds.
    #[test]
    fn reads_match_model(ops in prop::collection::vec(op(), 1..60)) {
        let mut c = LocalCluster::new(5, 3, 100);
        let mut model: BTreeMap<String, Bytes> = BTreeMap::new();
        let mut down: Option<NodeId> = None;
        let mut corrupted = std::collections::BTreeSet::new();
        for (i, op) in ops.into_iter().enumerate() {
            match op {
                Op::Put(p, n) => {
                    let path = format!("p{p}");
                    let data = bytes(i as u8, n);
                    c.put(&path, data.clone()).unwrap();
                    model.insert(path, data);
                }
                Op::Get(p, off, n) => {
                    let path = format!("p{p}");
                    let got = c.get(&path, off as u64, n as u64);
                    match model.get(&path) {
                        None => prop_assert_eq!(got, Err(DfsError::NotFound(path))),
                        Some(d) if off + n > d.len() => {
                            let is_range_error = matches!(got, Err(DfsError::RangeError { .. }));
                            prop_assert!(is_range_error);
                        }
                        Some(d) => prop_assert_eq!(got.unwrap(), d.slice(off..off + n)),
                    }
                }
                Op::Kill(n) => {
                    if down.is_none() {
                        c.kill(NodeId(n));
                        c.repair();
                        down = Some(NodeId(n));
                    }
                }
                Op::Revive => {
                    if let Some(n) = down.take() {
                        c.revive(n);
                        c.repair();
                    }
                }
                Op::Corrupt(n, pick) => {
                    let id = NodeId(n);
                    if Some(id) == down {
                        continue;
                    }
                    let digests = c.node(id).unwrap().store().digests().unwrap();
                    if digests.is_empty() {
                        continue;
                    }
                    let d = digests[pick % digests.len()];
                    if corrupted.insert(d) {
                        c.node_mut(id).unwrap().store_mut().put(d, Bytes::from_static(b"garbage")).unwrap();
                    }
                }
            }
        }
        c.repair();
        for (path, data) in &model {
            prop_assert_eq!(&c.get(path, 0, data.len() as u64).unwrap(), data);
        }
    }
}
