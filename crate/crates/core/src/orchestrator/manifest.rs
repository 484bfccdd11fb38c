//! Stage manifests and the per-unit skip/recompute bookkeeping.
//!
//! A unit is fresh when its recorded inputs hash equals the current one and
//! every recorded output exists with its recorded hash. Outputs are written
//! atomically; an existing file is overwritten only when this stage recorded
//! it before, its content is already identical, or `force` is set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{atomic_write, file_hash, hash_parts, read, sha256_hex};
use crate::types::format_ts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Rollup,
    Jobs,
    Baselines,
    Collect,
    Evaluate,
    Leaderboard,
    Describe,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Rollup,
        Stage::Jobs,
        Stage::Baselines,
        Stage::Collect,
        Stage::Evaluate,
        Stage::Leaderboard,
        Stage::Describe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Rollup => "rollup",
            Stage::Jobs => "jobs",
            Stage::Baselines => "baselines",
            Stage::Collect => "collect",
            Stage::Evaluate => "evaluate",
            Stage::Leaderboard => "leaderboard",
            Stage::Describe => "describe",
        }
    }

    /// Stages whose outputs this stage reads.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Rollup => &[Stage::Ingest],
            Stage::Jobs => &[Stage::Rollup],
            Stage::Baselines => &[Stage::Jobs],
            Stage::Collect => &[Stage::Jobs, Stage::Baselines],
            Stage::Evaluate => &[Stage::Rollup, Stage::Collect],
            Stage::Leaderboard => &[Stage::Rollup, Stage::Evaluate],
            Stage::Describe => &[Stage::Rollup],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the data root.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub inputs_hash: String,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: Stage,
    /// Hash over every unit's id and inputs hash.
    pub inputs_hash: String,
    pub units: BTreeMap<String, UnitRecord>,
    pub completed_at: Option<String>,
}

impl StageManifest {
    pub fn empty(stage: Stage) -> Self {
        StageManifest {
            stage,
            inputs_hash: hash_parts::<_, &str>([]),
            units: BTreeMap::new(),
            completed_at: None,
        }
    }

    pub fn path(root: &Path, stage: Stage) -> PathBuf {
        root.join("manifests").join(format!("{stage}.json"))
    }

    /// The recorded manifest, or `None` when the stage never completed.
    pub fn load(root: &Path, stage: Stage) -> Result<Option<Self>> {
        let path = Self::path(root, stage);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = read(&path)?;
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| Error::decode(&path, e))
    }

    fn recompute_inputs_hash(&mut self) {
        self.inputs_hash = hash_parts(
            self.units
                .iter()
                .flat_map(|(id, u)| [id.as_str(), u.inputs_hash.as_str()]),
        );
    }

    pub fn outputs(&self) -> impl Iterator<Item = &OutputRecord> {
        self.units.values().flat_map(|u| &u.outputs)
    }

    /// Recorded outputs that are missing or whose content changed.
    pub fn damaged_outputs(&self, root: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for o in self.outputs() {
            if file_hash(&root.join(&o.path))?.as_deref() != Some(o.sha256.as_str()) {
                bad.push(o.path.clone());
            }
        }
        Ok(bad)
    }

    /// Complete iff it finished once and every output verifies.
    pub fn is_complete(&self, root: &Path) -> Result<bool> {
        Ok(self.completed_at.is_some() && self.damaged_outputs(root)?.is_empty())
    }
}

/// What one stage invocation did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageReport {
    pub stage: Option<Stage>,
    pub executed: usize,
    pub skipped: usize,
    /// Paths (relative to the data root) whose bytes changed on disk.
    pub written: Vec<String>,
    pub notes: Vec<String>,
}

impl StageReport {
    pub fn merge(&mut self, other: StageReport) {
        self.executed += other.executed;
        self.skipped += other.skipped;
        self.written.extend(other.written);
        self.notes.extend(other.notes);
    }
}

/// Bookkeeping for one stage invocation.
pub struct StageRun {
    root: PathBuf,
    stage: Stage,
    force: bool,
    prev: Option<StageManifest>,
    next: StageManifest,
    recorded_paths: BTreeSet<String>,
    report: StageReport,
}

impl StageRun {
    pub fn start(root: &Path, stage: Stage, force: bool) -> Result<Self> {
        let prev = StageManifest::load(root, stage)?;
        let next = prev.clone().unwrap_or_else(|| StageManifest::empty(stage));
        let recorded_paths = next.outputs().map(|o| o.path.clone()).collect();
        Ok(StageRun {
            root: root.to_path_buf(),
            stage,
            force,
            prev,
            next,
            recorded_paths,
            report: StageReport {
                stage: Some(stage),
                ..StageReport::default()
            },
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// The unit as recorded so far in this run.
    pub fn unit(&self, id: &str) -> Option<&UnitRecord> {
        self.next.units.get(id)
    }

    /// True when `unit` may be skipped. Counts the skip.
    pub fn check_fresh(&mut self, unit: &str, inputs_hash: &str) -> Result<bool> {
        if self.force {
            return Ok(false);
        }
        let Some(rec) = self.next.units.get(unit) else {
            return Ok(false);
        };
        if rec.inputs_hash != inputs_hash {
            return Ok(false);
        }
        for o in &rec.outputs {
            if file_hash(&self.root.join(&o.path))?.as_deref() != Some(o.sha256.as_str()) {
                log::info!("{}: output {} is missing or altered; recomputing unit {unit}", self.stage, o.path);
                return Ok(false);
            }
        }
        self.report.skipped += 1;
        Ok(true)
    }

    /// Writes a unit's outputs and records it.
    pub fn commit(&mut self, unit: &str, inputs_hash: String, outputs: Vec<(String, Vec<u8>)>) -> Result<()> {
        let mut records = Vec::with_capacity(outputs.len());
        for (rel, bytes) in outputs {
            let sha256 = sha256_hex(&bytes);
            let path = self.root.join(&rel);
            match file_hash(&path)? {
                Some(existing) if existing == sha256 => {}
                Some(_) if !self.force && !self.recorded_paths.contains(&rel) => {
                    return Err(Error::ForceRequired(path));
                }
                _ => {
                    atomic_write(&path, &bytes)?;
                    self.report.written.push(rel.clone());
                }
            }
            self.recorded_paths.insert(rel.clone());
            records.push(OutputRecord { path: rel, sha256 });
        }
        self.next.units.insert(
            unit.to_string(),
            UnitRecord {
                inputs_hash,
                outputs: records,
            },
        );
        self.report.executed += 1;
        Ok(())
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.report.notes.push(note.into());
    }

    /// Saves the manifest when anything changed and returns the report.
    pub fn finish(mut self) -> Result<StageReport> {
        self.next.recompute_inputs_hash();
        let unchanged = self.prev.as_ref().is_some_and(|p| {
            p.units == self.next.units && p.completed_at.is_some()
        });
        if !unchanged {
            self.next.completed_at = Some(format_ts(chrono::Utc::now()));
            let mut bytes = serde_json::to_vec_pretty(&self.next).expect("manifest serializes");
            bytes.push(b'\n');
            atomic_write(&StageManifest::path(&self.root, self.stage), &bytes)?;
        }
        Ok(self.report)
    }
}

/// Fails unless every upstream stage of `stage` is complete.
pub fn require_upstream(root: &Path, stage: Stage) -> Result<()> {
    for &up in stage.upstream() {
        let complete = match StageManifest::load(root, up)? {
            Some(m) => m.is_complete(root)?,
            None => false,
        };
        if !complete {
            return Err(Error::IncompleteUpstream(up.to_string()));
        }
    }
    Ok(())
}
