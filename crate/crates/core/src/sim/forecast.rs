//! Habit-forecast experiment: users with a daily routine plus noise, observed hourly by two
//! cluster managers that differ only in their demand predictor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vmm::{ResourceKind, ResourceVector, Slot, VmConfig, VmError, VmManager};

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub seed: u64,
    pub users: usize,
    pub days: usize,
    /// Peak sessions a user runs in the middle of their working day.
    pub peak_sessions: f64,
    /// Half-width of the uniform noise added to each hourly session count.
    pub noise: f64,
    pub quota: ResourceVector,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            users: 8,
            days: 14,
            peak_sessions: 4.0,
            noise: 1.5,
            quota: ResourceVector::new(1000, 1024, 10, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    /// Mean absolute error per predictor, in sessions' worth of quota, averaged over kinds.
    pub mae: Vec<(String, f64)>,
    pub samples: usize,
}

impl ForecastResult {
    pub fn mae_of(&self, predictor: &str) -> Option<f64> {
        self.mae
            .iter()
            .find(|(n, _)| n == predictor)
            .map(|(_, v)| *v)
    }
}

/// Expected sessions at `hour` for user `u`: idle at night, a raised-cosine working day whose
/// start shifts a little per user.
pub fn routine(u: usize, hour: usize, peak: f64) -> f64 {
    let start = 7 + (u % 3);
    let len = 10;
    let h = (hour + 24 - start) % 24;
    if h >= len {
        return 0.0;
    }
    let phase = (h as f64 + 0.5) / len as f64;
    peak * (std::f64::consts::PI * phase).sin()
}

/// Runs the experiment. Day 0 only trains: nothing has been seen yet, so both predictors say zero.
pub fn run_forecast(
    config: &ForecastConfig,
    predictors: &[&str],
) -> Result<ForecastResult, VmError> {
    let mut managers = predictors
        .iter()
        .map(|&p| {
            VmManager::new(VmConfig {
                predictor: p.to_string(),
                session_quota: config.quota,
                ..VmConfig::default()
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let users: Vec<String> = (0..config.users).map(|u| format!("user{u}")).collect();
    let mut err = vec![0.0f64; predictors.len()];
    let mut samples = 0;
    for day in 0..config.days {
        for hour in 0..24 {
            let slot = Slot::new(hour).expect("hour of day");
            for (u, user) in users.iter().enumerate() {
                let jitter = rng.random_range(-config.noise..=config.noise);
                let sessions = (routine(u, hour, config.peak_sessions) + jitter)
                    .round()
                    .max(0.0) as u64;
                let demand = config.quota.scale(sessions);
                for (m, e) in managers.iter_mut().zip(err.iter_mut()) {
                    if day > 0 {
                        let predicted = m.predict(user, slot);
                        *e += ResourceKind::ALL
                            .iter()
                            .map(|&k| {
                                predicted.get(k).abs_diff(demand.get(k)) as f64
                                    / config.quota.get(k) as f64
                            })
                            .sum::<f64>()
                            / ResourceKind::ALL.len() as f64;
                    }
                    m.observe(user, slot, &demand);
                }
                if day > 0 {
                    samples += 1;
                }
            }
        }
    }
    let mae = predictors
        .iter()
        .zip(err)
        .map(|(p, e)| {
            (
                p.to_string(),
                if samples == 0 {
                    0.0
                } else {
                    e / samples as f64
                },
            )
        })
        .collect();
    Ok(ForecastResult { mae, samples })
}
