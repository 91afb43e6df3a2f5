use crate::{NodeId, Tick};

/// Declares a node failed once its last successful poll is more than `missed_polls` intervals old.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailureDetector {
    pub poll_interval: Tick,
    pub missed_polls: u64,
}

impl FailureDetector {
    pub fn new(poll_interval: Tick) -> Self {
        Self {
            poll_interval,
            missed_polls: 3,
        }
    }

    pub fn is_failed(&self, last_ok: Tick, now: Tick) -> bool {
        now.saturating_sub(last_ok) > self.missed_polls * self.poll_interval
    }

    pub fn detect(
        &self,
        last_ok: impl IntoIterator<Item = (NodeId, Tick)>,
        now: Tick,
    ) -> Vec<NodeId> {
        last_ok
            .into_iter()
            .filter(|&(_, t)| self.is_failed(t, now))
            .map(|(n, _)| n)
            .collect()
    }
}
