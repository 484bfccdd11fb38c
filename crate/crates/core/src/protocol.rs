//! Prequential protocol: per-frequency cutoff schedules, leak-proof forecast
//! jobs, and the job/forecast exchange files with strict validation.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PanelStore;
use crate::store::hash_parts;
use crate::types::{format_ts, parse_ts, EventKind, Freq, SeriesKey, Timestamp};

/// Number of quantile levels every forecast carries.
pub const NUM_LEVELS: usize = 9;

/// The levels 0.1, 0.2, …, 0.9.
pub fn quantile_levels() -> Vec<f64> {
    (1..=NUM_LEVELS).map(|i| i as f64 / 10.0).collect()
}

/// Protocol parameters for one frequency. `step` is measured in periods of
/// `freq` and must equal `horizon`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub freq: Freq,
    pub horizon: usize,
    pub max_context: usize,
    pub step: usize,
    pub first_cutoff: Timestamp,
}

impl CutoffSpec {
    pub fn default_for(freq: Freq) -> Self {
        let (horizon, max_context, first) = match freq {
            Freq::Hourly => (24, 1024, "2026-02-08"),
            Freq::Daily => (7, 512, "2026-01-04"),
            Freq::Weekly => (1, 114, "2026-01-04"),
            Freq::Monthly => (1, 24, "2025-10-01"),
        };
        CutoffSpec {
            freq,
            horizon,
            max_context,
            step: horizon,
            first_cutoff: parse_ts(first).expect("static date"),
        }
    }

    pub fn defaults() -> Vec<CutoffSpec> {
        Freq::ALL.into_iter().map(CutoffSpec::default_for).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.max_context == 0 {
            return Err(Error::Config(format!("{}: horizon and max_context must be positive", self.freq)));
        }
        if self.step != self.horizon {
            return Err(Error::Config(format!(
                "{}: cutoff step ({}) must equal the horizon ({})",
                self.freq, self.step, self.horizon
            )));
        }
        Ok(())
    }

    /// The `k`-th cutoff of the schedule.
    pub fn cutoff(&self, k: usize) -> Timestamp {
        self.freq.advance(self.first_cutoff, (k * self.step) as i64)
    }

    /// Period starts of the forecast horizon for `cutoff`. A cutoff that is
    /// not on a period boundary forecasts from the next boundary.
    pub fn target_periods(&self, cutoff: Timestamp) -> Vec<Timestamp> {
        let start = self.freq.ceil(cutoff);
        (0..self.horizon as i64).map(|i| self.freq.advance(start, i)).collect()
    }
}

/// Cutoffs `first, first + step, …` whose full horizon starts at or before
/// `data_end`, with the most recent one removed.
pub fn generate_cutoffs(spec: &CutoffSpec, data_end: Timestamp) -> Vec<Timestamp> {
    let mut cutoffs = Vec::new();
    if data_end < spec.first_cutoff {
        return cutoffs;
    }
    for k in 0.. {
        let cutoff = spec.cutoff(k);
        match spec.target_periods(cutoff).last() {
            Some(&last) if last <= data_end => cutoffs.push(cutoff),
            _ => break,
        }
    }
    cutoffs.pop();
    cutoffs
}

/// Stable 128-bit id of a (series, cutoff) task, hex encoded.
pub fn job_id(key: &SeriesKey, cutoff: Timestamp) -> String {
    let full = hash_parts([
        key.repo.as_str(),
        key.kind.as_str(),
        key.freq.as_str(),
        &format_ts(cutoff),
    ]);
    full[..32].to_string()
}

/// One forecasting task, as written to job files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastJob {
    pub job_id: String,
    pub repo: String,
    pub kind: EventKind,
    pub freq: Freq,
    #[serde(with = "rfc3339")]
    pub cutoff: Timestamp,
    pub h: usize,
    pub quantile_levels: Vec<f64>,
    pub context: Vec<f64>,
}

impl ForecastJob {
    pub fn key(&self) -> SeriesKey {
        SeriesKey::new(self.repo.clone(), self.kind, self.freq)
    }
}

/// A job together with the period starts of its context values.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltJob {
    pub job: ForecastJob,
    pub context_periods: Vec<Timestamp>,
}

/// Builds the job for `key` at `cutoff` from complete periods that end at or
/// before the cutoff. Returns `None` (and logs) when there are none.
pub fn build_job(key: &SeriesKey, cutoff: Timestamp, spec: &CutoffSpec, panel: &PanelStore) -> Result<Option<BuiltJob>> {
    if key.freq != spec.freq {
        return Err(Error::Invalid(format!("series {key} does not match a {} spec", spec.freq)));
    }
    // Only periods that end by the cutoff; for an unaligned cutoff the
    // straddling period is in neither context nor horizon.
    let window = panel.read_window(key, cutoff, spec.max_context)?;
    if window.is_empty() {
        log::debug!("skipping {key} at {}: empty context", format_ts(cutoff));
        return Ok(None);
    }
    Ok(Some(BuiltJob {
        job: ForecastJob {
            job_id: job_id(key, cutoff),
            repo: key.repo.clone(),
            kind: key.kind,
            freq: key.freq,
            cutoff,
            h: spec.horizon,
            quantile_levels: quantile_levels(),
            context: window.iter().map(|p| p.value as f64).collect(),
        },
        context_periods: window.iter().map(|p| p.period_start).collect(),
    }))
}

/// An `h x 9` quantile forecast; `values[i][j]` is step `i` at level `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub job_id: String,
    pub model: String,
    pub values: Vec<Vec<f64>>,
}

impl QuantileForecast {
    /// Every step's value at the level closest to 0.5.
    pub fn median_path(&self, levels: &[f64]) -> Vec<f64> {
        let j = median_level_index(levels);
        self.values.iter().map(|row| row[j]).collect()
    }
}

pub fn median_level_index(levels: &[f64]) -> usize {
    levels
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    JobIdMismatch { expected: String, got: String },
    StepCount { expected: usize, got: usize },
    LevelCount { expected: usize, got: usize },
    NonFinite { step: usize, level: usize },
    QuantileCrossing { step: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::JobIdMismatch { expected, got } => write!(f, "job_id mismatch: expected {expected}, got {got}"),
            Violation::StepCount { expected, got } => write!(f, "expected {expected} steps, got {got}"),
            Violation::LevelCount { expected, got } => write!(f, "expected {expected} levels, got {got}"),
            Violation::NonFinite { step, level } => write!(f, "non-finite value at step {step}, level {level}"),
            Violation::QuantileCrossing { step } => write!(f, "quantile crossing at step {step}"),
        }
    }
}

/// Checks a forecast against its job. Violations reject the forecast; it is
/// never repaired.
pub fn validate_forecast(f: &QuantileForecast, job: &ForecastJob) -> std::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if f.job_id != job.job_id {
        violations.push(Violation::JobIdMismatch {
            expected: job.job_id.clone(),
            got: f.job_id.clone(),
        });
    }
    if f.values.len() != job.h {
        violations.push(Violation::StepCount {
            expected: job.h,
            got: f.values.len(),
        });
    }
    let levels = job.quantile_levels.len();
    let mut reported_widths = Vec::new();
    for (step, row) in f.values.iter().enumerate() {
        if row.len() != levels {
            if !reported_widths.contains(&row.len()) {
                reported_widths.push(row.len());
                violations.push(Violation::LevelCount {
                    expected: levels,
                    got: row.len(),
                });
            }
            continue;
        }
        let mut finite = true;
        for (level, v) in row.iter().enumerate() {
            if !v.is_finite() {
                finite = false;
                violations.push(Violation::NonFinite { step, level });
            }
        }
        if finite && row.windows(2).any(|w| w[1] < w[0]) {
            violations.push(Violation::QuantileCrossing { step });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Newline-delimited JSON, one record per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize");
        out.push(b'\n');
    }
    out
}

pub fn from_jsonl<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>> {
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .filter(|(_, l)| !l.trim_ascii().is_empty())
        .map(|(i, l)| serde_json::from_slice(l).map_err(|e| Error::Invalid(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Like [`from_jsonl`] but keeps going past undecodable lines, returning
/// them as `(line number, message)` pairs.
pub fn from_jsonl_lenient<T: DeserializeOwned>(bytes: &[u8]) -> (Vec<T>, Vec<(usize, String)>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
        if line.trim_ascii().is_empty() {
            continue;
        }
        match serde_json::from_slice(line) {
            Ok(v) => ok.push(v),
            Err(e) => bad.push((i + 1, e.to_string())),
        }
    }
    (ok, bad)
}

pub(crate) mod rfc3339 {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::types::{format_ts, parse_ts, Timestamp};

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ts(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        parse_ts(&s).map_err(serde::de::Error::custom)
    }
}
