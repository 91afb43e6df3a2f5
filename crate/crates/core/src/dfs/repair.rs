use std::collections::{BTreeMap, BTreeSet};

use super::choose_replicas;
use crate::{Digest, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RepairReason {
    UnderReplicated,
    CorruptReplica,
}

/// Copy `digest` from `source` to `target`. A missing source means every replica is gone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepairAction {
    pub digest: Digest,
    pub source: Option<NodeId>,
    pub target: Option<NodeId>,
    pub reason: RepairReason,
}

impl RepairAction {
    pub fn is_data_loss(&self) -> bool {
        self.source.is_none()
    }
}

/// Copy actions that bring every block back to `r` live replicas.
///
/// `blocks` yields each block's digest, size and replica set; `live` maps every live storage
/// node to its stored bytes. Targets are the least-loaded live non-holders (accounting for copies
/// planned earlier in the same pass); sources rotate over the live holders, least-used first.
pub fn repair<'a>(
    blocks: impl IntoIterator<Item = (Digest, u64, &'a BTreeSet<NodeId>)>,
    live: &BTreeMap<NodeId, u64>,
    r: usize,
) -> Vec<RepairAction> {
    let mut stored = live.clone();
    let mut source_load: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut actions = Vec::new();
    for (digest, size, replicas) in blocks {
        let holders: Vec<NodeId> = replicas
            .iter()
            .copied()
            .filter(|n| live.contains_key(n))
            .collect();
        if holders.len() >= r {
            continue;
        }
        if holders.is_empty() {
            actions.push(RepairAction {
                digest,
                source: None,
                target: None,
                reason: RepairReason::UnderReplicated,
            });
            continue;
        }
        let candidates: Vec<(NodeId, u64)> = stored
            .iter()
            .filter(|(n, _)| !replicas.contains(n))
            .map(|(&n, &b)| (n, b))
            .collect();
        let want = (r - holders.len()).min(candidates.len());
        if want == 0 {
            continue;
        }
        let targets = choose_replicas(&candidates, want).expect("want bounded by candidates");
        for target in targets {
            let source = *holders
                .iter()
                .min_by_key(|n| (source_load.get(n).copied().unwrap_or(0), **n))
                .expect("holders non-empty");
            *source_load.entry(source).or_default() += 1;
            *stored.get_mut(&target).expect("target is live") += size;
            actions.push(RepairAction {
                digest,
                source: Some(source),
                target: Some(target),
                reason: RepairReason::UnderReplicated,
            });
        }
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[u32]) -> BTreeSet<NodeId> {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    fn live(ids: &[u32]) -> BTreeMap<NodeId, u64> {
        ids.iter().map(|&i| (NodeId(i), 0)).collect()
    }

    #[test]
    fn healthy_cluster_needs_nothing() {
        let reps = set(&[1, 2, 3]);
        let blocks = [(Digest::of(b"a"), 4, &reps)];
        assert!(repair(blocks, &live(&[1, 2, 3, 4, 5]), 3).is_empty());
    }

    #[test]
    fn one_dead_holder_means_one_copy_per_block() {
        let sets = [set(&[1, 2, 3]), set(&[1, 4, 5]), set(&[1, 2, 4])];
        let blocks: Vec<_> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (Digest::of(&[i as u8]), 4, s))
            .collect();
        let actions = repair(blocks, &live(&[2, 3, 4, 5]), 3);
        assert_eq!(actions.len(), 3);
        for (a, s) in actions.iter().zip(&sets) {
            assert_eq!(a.reason, RepairReason::UnderReplicated);
            let target = a.target.unwrap();
            assert!(!s.contains(&target));
            assert!(s.contains(&a.source.unwrap()));
        }
    }

    #[test]
    fn all_holders_dead_flags_loss() {
        let reps = set(&[1, 2, 3]);
        let d = Digest::of(b"a");
        let actions = repair([(d, 4, &reps)], &live(&[4, 5]), 3);
        assert_eq!(actions.len(), 1);
        assert!(actions[0].is_data_loss());
        assert_eq!(actions[0].digest, d);
    }

    #[test]
    fn stops_when_nodes_run_out() {
        let reps = set(&[1]);
        let actions = repair([(Digest::of(b"a"), 4, &reps)], &live(&[1, 2]), 3);
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].target, Some(NodeId(2)));
    }
}
