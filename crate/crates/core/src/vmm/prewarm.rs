use crate::render::SessionId;
use crate::NodeId;

use super::habit::Slot;
use super::placement::{place_session, Consolidate};
use super::{NodeTelemetry, ResourceKind, ResourceVector};

/// Warm session slots to reserve ahead of a time slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrewarmPlan {
    pub slot: Slot,
    /// `(node, sessions_to_warm)` in order of first assignment.
    pub actions: Vec<(NodeId, u32)>,
    /// Predicted sessions that did not fit anywhere.
    pub shortfall: u32,
}

impl PrewarmPlan {
    pub fn total(&self) -> u32 {
        self.actions.iter().map(|(_, n)| n).sum()
    }
}

/// Sessions needed to cover `demand` at `quota` per session: the largest per-kind ceiling.
pub fn sessions_for(demand: &ResourceVector, quota: &ResourceVector) -> u32 {
    ResourceKind::ALL
        .iter()
        .filter(|&&k| quota.get(k) > 0)
        .map(|&k| demand.get(k).div_ceil(quota.get(k)))
        .max()
        .unwrap_or(0) as u32
}

/// Reserves enough warm sessions to cover the summed predictions, less the `warm_free` sessions
/// already idle, placing each one best-fit.
pub fn prewarm_plan(
    slot: Slot,
    predictions: &[ResourceVector],
    cluster: &[NodeTelemetry],
    warm_free: u32,
    quota: &ResourceVector,
) -> PrewarmPlan {
    let aggregate: ResourceVector = predictions.iter().copied().sum();
    let required = sessions_for(&aggregate, quota).saturating_sub(warm_free);
    let mut scratch = cluster.to_vec();
    let mut actions: Vec<(NodeId, u32)> = Vec::new();
    let mut shortfall = 0;
    for i in 0..required {
        match place_session(SessionId(i as u128), quota, &mut scratch, &Consolidate) {
            Ok(d) => match actions.iter_mut().find(|(n, _)| *n == d.chosen_node) {
                Some((_, count)) => *count += 1,
                None => actions.push((d.chosen_node, 1)),
            },
            Err(_) => {
                shortfall = required - i;
                break;
            }
        }
    }
    PrewarmPlan {
        slot,
        actions,
        shortfall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quota() -> ResourceVector {
        ResourceVector::new(1000, 1024, 10, 1)
    }

    fn cluster(nodes: u32, slots: u64) -> Vec<NodeTelemetry> {
        (0..nodes)
            .map(|i| NodeTelemetry::new(NodeId(i + 1), quota().scale(slots)))
            .collect()
    }

    #[test]
    fn warms_the_difference() {
        let plan = prewarm_plan(
            Slot::new(8).unwrap(),
            &[quota().scale(5)],
            &cluster(2, 8),
            2,
            &quota(),
        );
        assert_eq!(plan.total(), 3);
        assert_eq!(plan.actions, [(NodeId(1), 3)]);
        assert_eq!(plan.shortfall, 0);
    }

    #[test]
    fn nothing_predicted() {
        let plan = prewarm_plan(Slot::new(0).unwrap(), &[], &cluster(2, 8), 0, &quota());
        assert!(plan.actions.is_empty());
        assert_eq!(plan.shortfall, 0);
    }

    #[test]
    fn saturation_reports_shortfall() {
        let plan = prewarm_plan(
            Slot::new(0).unwrap(),
            &[quota().scale(6)],
            &cluster(2, 2),
            0,
            &quota(),
        );
        assert_eq!(plan.total(), 4);
        assert_eq!(plan.shortfall, 2);
    }

    #[test]
    fn per_user_predictions_are_summed_before_rounding() {
        let half = ResourceVector::new(500, 0, 0, 0);
        assert_eq!(sessions_for(&(half + half + half), &quota()), 2);
        assert_eq!(
            sessions_for(&ResourceVector::new(0, 1025, 0, 0), &quota()),
            2
        );
    }
}
