//! Monte Carlo experiments over the jamsim chain: scenario files, single snapshots,
//! parameter sweeps with Wilson intervals, and deterministic exports.

pub mod chain;
pub mod export;
pub mod oracle;
pub mod scenario;
pub mod stats;
pub mod sweep;

use thiserror::Error;

pub use chain::{run_snapshot, run_snapshot_with, Snapshot};
pub use scenario::Scenario;
pub use sweep::{SweepPoint, SweepResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("infeasible strategy: {0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] jamsim::geometry::GeometryError),
    #[error(transparent)]
    Waveform(#[from] jamsim::waveform::WaveformError),
    #[error(transparent)]
    Channel(#[from] jamsim::channel::ChannelError),
    #[error(transparent)]
    Sync(#[from] jamsim::sync::SyncError),
    #[error(transparent)]
    Radar(#[from] jamsim::radar::RadarError),
    #[error(transparent)]
    Jammer(jamsim::jammer::JammerError),
}

impl From<jamsim::jammer::JammerError> for HarnessError {
    fn from(e: jamsim::jammer::JammerError) -> Self {
        use jamsim::jammer::JammerError as J;
        match e {
            J::Infeasible { .. } => Self::Infeasible(e.to_string()),
            J::Strategy(_) | J::NoArray | J::Array(_) | J::BadDelay { .. } => Self::Config(e.to_string()),
            other => Self::Jammer(other),
        }
    }
}

impl HarnessError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Geometry(_) => 2,
            Self::Radar(jamsim::radar::RadarError::Cfar(_)) => 2,
            Self::Infeasible(_) => 3,
            _ => 1,
        }
    }
}
