//! The discrete-event harness: a seeded, single-threaded world in which every node, link and
//! workload runs on virtual time, plus the metrics a run reports.

mod config;
pub mod forecast;
pub mod metrics;
pub mod net;
mod script;
mod world;

pub use config::SimConfig;
pub use metrics::{MetricsReport, UtilizationTrack, Value};
pub use script::{Directive, Script, ScriptLine};
pub use world::{file_content, Payload, Role, SimWorld, UpdateKind, CLIENT, CONTROL};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
}

/// Builds a world from `config`, runs `script` on it and reports.
pub fn run_workload(config: &SimConfig, script: &Script) -> Result<MetricsReport, SimError> {
    let mut world = SimWorld::new(config.clone())?;
    world.load_script(script)?;
    Ok(world.run())
}
