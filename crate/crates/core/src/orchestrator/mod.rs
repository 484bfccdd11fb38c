//! Stage runner for the ingest, forecast and evaluate phases.
//!
//! Every stage is a set of units with content-addressed inputs; re-running a
//! stage skips units whose inputs and outputs are unchanged. See
//! [`layout`] for where artifacts live under the data root.

pub mod config;
pub mod manifest;
mod stages;

pub use config::{default_config_toml, RunConfig};
pub use manifest::{require_upstream, Stage, StageManifest, StageReport};
pub use stages::{FileCheck, JobSelection, LeaderboardOptions, Orchestrator, StageStatus, StatusReport};

/// Artifact paths, relative to the data root.
pub mod layout {
    use crate::panel::partition_path;
    use crate::types::{path_stamp, EventKind, Freq, Timestamp};

    pub const PRESENCE: &str = "data/presence.csv";
    pub const STRATA: &str = "data/panel/strata.csv";
    pub const PANEL_MANIFEST: &str = "data/panel/manifest.json";
    pub const COLLECT_REPORT: &str = "reports/collect.json";
    pub const LEADERBOARD_CSV: &str = "reports/leaderboard.csv";
    pub const LEADERBOARD_JSON: &str = "reports/leaderboard.json";
    pub const LEADERBOARD_TXT: &str = "reports/leaderboard.txt";

    pub fn hour_file(hour: Timestamp) -> String {
        format!("data/hourly/{}.csv", path_stamp(hour))
    }

    pub fn partition(freq: Freq, kind: EventKind) -> String {
        format!("data/panel/{}", partition_path(freq, kind))
    }

    pub fn jobs(freq: Freq, cutoff: Timestamp) -> String {
        format!("jobs/{freq}/{}/jobs.jsonl", path_stamp(cutoff))
    }

    pub fn forecasts(model: &str, freq: Freq, cutoff: Timestamp) -> String {
        format!("forecasts/{model}/{freq}/{}.jsonl", path_stamp(cutoff))
    }

    pub fn metrics(model: &str, freq: Freq, cutoff: Timestamp) -> String {
        format!("metrics/{model}/{freq}/{}.jsonl", path_stamp(cutoff))
    }

    pub fn metrics_tally(model: &str, freq: Freq, cutoff: Timestamp) -> String {
        format!("metrics/{model}/{freq}/{}.tally.json", path_stamp(cutoff))
    }

    pub fn floors(freq: Freq) -> String {
        format!("reports/floors/{freq}.json")
    }

    pub fn descriptors(freq: Freq) -> String {
        format!("reports/descriptors/{freq}.csv")
    }
}
