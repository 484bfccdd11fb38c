//! Run configuration, read from TOML. Relative paths resolve against the
//! config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{SeasonalityTable, HISTORIC_AVERAGE, SEASONAL_NAIVE, ZERO_MODEL};
use crate::descriptors::DescriptorParams;
use crate::error::{Error, Result};
use crate::panel::Thresholds;
use crate::protocol::{quantile_levels, CutoffSpec};
use crate::types::{Freq, Timestamp};

/// Per-frequency protocol parameters as written in the config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffParams {
    pub horizon: usize,
    pub max_context: usize,
    pub step: usize,
    #[serde(with = "crate::protocol::rfc3339")]
    pub first_cutoff: Timestamp,
}

impl CutoffParams {
    fn into_spec(self, freq: Freq) -> CutoffSpec {
        CutoffSpec {
            freq,
            horizon: self.horizon,
            max_context: self.max_context,
            step: self.step,
            first_cutoff: self.first_cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data_root: PathBuf,
    archive_dir: PathBuf,
    #[serde(with = "crate::protocol::rfc3339")]
    start: Timestamp,
    #[serde(with = "crate::protocol::rfc3339")]
    end: Timestamp,
    universe_file: PathBuf,
    universe_size: usize,
    #[serde(default)]
    exclude_bots: bool,
    #[serde(default = "default_workers")]
    workers: usize,
    #[serde(default = "default_strata")]
    strata: usize,
    #[serde(default = "default_freqs")]
    freqs: Vec<Freq>,
    #[serde(default = "default_models")]
    models: Vec<String>,
    #[serde(default = "quantile_levels")]
    quantile_levels: Vec<f64>,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default)]
    seasonality: SeasonalityTable,
    #[serde(default)]
    descriptors: DescriptorParams,
    #[serde(default)]
    cutoffs: BTreeMap<Freq, CutoffParams>,
}

fn default_workers() -> usize {
    4
}

fn default_strata() -> usize {
    3
}

fn default_freqs() -> Vec<Freq> {
    Freq::ALL.to_vec()
}

fn default_models() -> Vec<String> {
    [ZERO_MODEL, HISTORIC_AVERAGE, SEASONAL_NAIVE].map(String::from).to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_root: PathBuf,
    pub archive_dir: PathBuf,
    /// First hour ingested.
    pub start: Timestamp,
    /// Ingestion stops before this hour.
    pub end: Timestamp,
    pub universe_file: PathBuf,
    pub universe_size: usize,
    pub exclude_bots: bool,
    pub workers: usize,
    pub freqs: Vec<Freq>,
    /// Leaderboard roster; built-in baselines among them are run by the
    /// engine, others are expected as external forecast files.
    pub models: Vec<String>,
    pub thresholds: Thresholds,
    pub seasonality: SeasonalityTable,
    pub descriptors: DescriptorParams,
    pub cutoffs: BTreeMap<Freq, CutoffSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        if raw.strata != 3 {
            return Err(Error::Config(format!("only 3 strata are supported, got {}", raw.strata)));
        }
        if raw.quantile_levels != quantile_levels() {
            return Err(Error::Config("quantile_levels must be 0.1, 0.2, ..., 0.9".into()));
        }
        if raw.start >= raw.end || !Freq::Hourly.is_aligned(raw.start) || !Freq::Hourly.is_aligned(raw.end) {
            return Err(Error::Config("start and end must be whole hours with start < end".into()));
        }
        if raw.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for t in [raw.thresholds.daily, raw.thresholds.weekly, raw.thresholds.monthly] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("completeness threshold {t} outside (0, 1]")));
            }
        }
        raw.seasonality.validate()?;
        raw.descriptors.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = raw.models.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::Config(format!("model `{dup}` listed twice")));
        }
        if let Some(bad) = raw.models.iter().find(|m| m.is_empty() || m.contains(['/', '\\']) || m.starts_with('.')) {
            return Err(Error::Config(format!("model name `{bad}` is not usable as a directory name")));
        }
        let mut cutoffs: BTreeMap<Freq, CutoffSpec> = Freq::ALL.into_iter().map(|f| (f, CutoffSpec::default_for(f))).collect();
        for (freq, params) in raw.cutoffs {
            cutoffs.insert(freq, params.into_spec(freq));
        }
        for spec in cutoffs.values() {
            spec.validate()?;
        }
        let mut freqs = raw.freqs;
        freqs.sort();
        freqs.dedup();
        Ok(RunConfig {
            data_root: resolve(raw.data_root),
            archive_dir: resolve(raw.archive_dir),
            start: raw.start,
            end: raw.end,
            universe_file: resolve(raw.universe_file),
            universe_size: raw.universe_size,
            exclude_bots: raw.exclude_bots,
            workers: raw.workers,
            freqs,
            models: raw.models,
            thresholds: raw.thresholds,
            seasonality: raw.seasonality,
            descriptors: raw.descriptors,
            cutoffs,
        })
    }

    pub fn spec(&self, freq: Freq) -> &CutoffSpec {
        &self.cutoffs[&freq]
    }
}

/// A config file listing every parameter at its default value.
pub fn default_config_toml() -> String {
    let mut s = String::from(
        "data_root = \"artifacts\"\n\
         archive_dir = \"archive\"\n\
         start = \"2026-01-01T00:00:00Z\"\n\
         end = \"2026-03-01T00:00:00Z\"\n\
         universe_file = \"universe.csv\"\n\
         universe_size = 400\n\
         exclude_bots = false\n\
         workers = 4\n\
         strata = 3\n\
         freqs = [\"hourly\", \"daily\", \"weekly\", \"monthly\"]\n\
         models = [\"ZeroModel\", \"HistoricAverage\", \"SeasonalNaive\"]\n\
         quantile_levels = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]\n\n\
         [thresholds]\ndaily = 0.9\nweekly = 0.95\nmonthly = 0.99\n\n\
         [seasonality]\nhourly = 24\ndaily = 7\nweekly = 52\nmonthly = 12\n\n\
         [descriptors]\nbandpower_split = 0.125\npe_order = 3\npe_delay = 1\n",
    );
    for spec in CutoffSpec::defaults() {
        s.push_str(&format!(
            "\n[cutoffs.{}]\nhorizon = {}\nmax_context = {}\nstep = {}\nfirst_cutoff = \"{}\"\n",
            spec.freq,
            spec.horizon,
            spec.max_context,
            spec.step,
            crate::types::format_ts(spec.first_cutoff)
        ));
    }
    s
}
