//! Per-user demand habits: a 24 hour-slot × 4 resource-kind matrix of smoothed observations.

use std::sync::OnceLock;

use crate::registry::Registry;
use crate::Tick;

use super::{ResourceKind, ResourceVector};

pub const SLOTS: usize = 24;
pub const KINDS: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.3;

const TICKS_PER_HOUR: Tick = 3_600_000;

/// Hour-of-day slot in `[0, 24)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot(u8);

impl Slot {
    pub fn new(hour: usize) -> Option<Self> {
        (hour < SLOTS).then_some(Slot(hour as u8))
    }

    /// Slot containing virtual time `t` (one tick is one millisecond).
    pub fn of_tick(t: Tick) -> Self {
        Slot(((t / TICKS_PER_HOUR) % SLOTS as u64) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A demand model that learns from per-slot observations.
pub trait DemandPredictor: Send {
    fn observe(&mut self, slot: Slot, kind: ResourceKind, observed: f64);

    /// Predicted demand for each resource kind in `slot`.
    fn predict(&self, slot: Slot) -> [f64; KINDS];
}

/// EWMA habit matrix. Unobserved cells hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HabitProfile {
    pub user_id: String,
    pub alpha: f64,
    matrix: [[f64; KINDS]; SLOTS],
    counts: [[u32; KINDS]; SLOTS],
}

impl HabitProfile {
    pub fn new(user_id: impl Into<String>, alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        Self {
            user_id: user_id.into(),
            alpha,
            matrix: [[0.0; KINDS]; SLOTS],
            counts: [[0; KINDS]; SLOTS],
        }
    }

    pub fn cell(&self, slot: Slot, kind: ResourceKind) -> f64 {
        self.matrix[slot.index()][kind.index()]
    }

    pub fn count(&self, slot: Slot, kind: ResourceKind) -> u32 {
        self.counts[slot.index()][kind.index()]
    }

    /// First observation seeds the cell; later ones blend in with weight `alpha`.
    /// Negative or non-finite observations are ignored.
    pub fn update(&mut self, slot: Slot, kind: ResourceKind, observed: f64) {
        if !observed.is_finite() || observed < 0.0 {
            return;
        }
        let (s, k) = (slot.index(), kind.index());
        let cell = &mut self.matrix[s][k];
        *cell = if self.counts[s][k] == 0 {
            observed
        } else {
            self.alpha * observed + (1.0 - self.alpha) * *cell
        };
        self.counts[s][k] += 1;
    }

    /// Row `slot` of the matrix, rounded to whole units.
    pub fn predict_demand(&self, slot: Slot) -> ResourceVector {
        to_vector(self.predict(slot))
    }
}

impl DemandPredictor for HabitProfile {
    fn observe(&mut self, slot: Slot, kind: ResourceKind, observed: f64) {
        self.update(slot, kind, observed);
    }

    fn predict(&self, slot: Slot) -> [f64; KINDS] {
        self.matrix[slot.index()]
    }
}

/// Baseline: each cell repeats the most recent observation for that slot and kind.
#[derive(Debug, Clone, PartialEq)]
pub struct LastValueProfile {
    matrix: [[f64; KINDS]; SLOTS],
}

impl Default for LastValueProfile {
    fn default() -> Self {
        Self {
            matrix: [[0.0; KINDS]; SLOTS],
        }
    }
}

impl DemandPredictor for LastValueProfile {
    fn observe(&mut self, slot: Slot, kind: ResourceKind, observed: f64) {
        if observed.is_finite() && observed >= 0.0 {
            self.matrix[slot.index()][kind.index()] = observed;
        }
    }

    fn predict(&self, slot: Slot) -> [f64; KINDS] {
        self.matrix[slot.index()]
    }
}

pub fn to_vector(values: [f64; KINDS]) -> ResourceVector {
    ResourceVector::from_array(values.map(|v| v.max(0.0).round() as u64))
}

/// Builds fresh per-user predictors.
pub trait PredictorFactory: Send + Sync {
    fn create(&self, user_id: &str) -> Box<dyn DemandPredictor>;
}

struct EwmaFactory;

impl PredictorFactory for EwmaFactory {
    fn create(&self, user_id: &str) -> Box<dyn DemandPredictor> {
        Box::new(HabitProfile::new(user_id, DEFAULT_ALPHA))
    }
}

struct LastValueFactory;

impl PredictorFactory for LastValueFactory {
    fn create(&self, _user_id: &str) -> Box<dyn DemandPredictor> {
        Box::new(LastValueProfile::default())
    }
}

/// `ewma` (alpha 0.3) and `last-value`.
pub fn predictors() -> &'static Registry<dyn PredictorFactory> {
    static PREDICTORS: OnceLock<Registry<dyn PredictorFactory>> = OnceLock::new();
    PREDICTORS.get_or_init(|| {
        let mut reg: Registry<dyn PredictorFactory> = Registry::new();
        reg.register("ewma", Box::new(EwmaFactory))
            .register("last-value", Box::new(LastValueFactory));
        reg
    })
}
