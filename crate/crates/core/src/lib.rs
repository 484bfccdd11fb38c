pub mod baselines;
pub mod descriptors;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod leaderboard;
pub mod metrics;
pub mod orchestrator;
pub mod panel;
pub mod protocol;
pub mod stats;
pub mod store;
pub mod types;

pub use error::{Error, Result};
