use super::DfsError;
use crate::NodeId;

/// The `r` nodes with the fewest stored bytes, ties to the lower id.
pub fn choose_replicas(nodes: &[(NodeId, u64)], r: usize) -> Result<Vec<NodeId>, DfsError> {
    assert!(r >= 1, "replication factor must be at least 1");
    if nodes.len() < r {
        return Err(DfsError::InsufficientNodes {
            needed: r,
            live: nodes.len(),
        });
    }
    let mut chosen: Vec<(u64, NodeId)> = Vec::with_capacity(r);
    for &(id, bytes) in nodes {
        let pos = chosen.partition_point(|&c| c < (bytes, id));
        if pos < r {
            if chosen.len() == r {
                chosen.pop();
            }
            chosen.insert(pos, (bytes, id));
        }
    }
    Ok(chosen.into_iter().map(|(_, id)| id).collect())
}
