use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::layout;
use super::manifest::{require_upstream, Stage, StageManifest, StageReport, StageRun};
use crate::baselines::{builtin, ZERO_MODEL};
use crate::descriptors::{summaries_to_csv, summarize, SpectralSummary};
use crate::error::{Error, Result};
use crate::evaluate::{CutoffContext, FloorTable, RawScore};
use crate::ingest::{load_universe, read_hour_file, write_hour_file, ArchiveDir, HourIngest, IngestOptions, RepoUniverse};
use crate::leaderboard::LeaderboardReport;
use crate::metrics::MetricRecord;
use crate::panel::{
    partition_from_csv, partition_to_csv, rollup_partition, stratify, PanelManifest, PanelStore, PresenceLedger, Strata,
    Subdataset, TimeSeries,
};
use crate::protocol::{from_jsonl, from_jsonl_lenient, generate_cutoffs, to_jsonl, validate_forecast, build_job, ForecastJob, QuantileForecast};
use crate::store::{file_hash, hash_parts, read};
use crate::types::{format_ts, parse_path_stamp, path_stamp, EventKind, Freq, Timestamp};

/// Restricts `emit-jobs` to one frequency and/or cutoff.
#[derive(Debug, Clone, Copy, Default)]
pub struct JobSelection {
    pub freq: Option<Freq>,
    pub cutoff: Option<Timestamp>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LeaderboardOptions {
    pub as_of: Option<Timestamp>,
    pub worst_first: bool,
}

/// Result of checking one forecast file against its job file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileCheck {
    pub model: String,
    pub freq: Freq,
    pub cutoff: String,
    pub present: bool,
    pub jobs: usize,
    pub forecasts: usize,
    pub valid: usize,
    /// `(line, message)` for lines that are not forecast records.
    pub undecodable: Vec<(usize, String)>,
    /// `(job_id, messages)` for forecasts that fail validation.
    pub violations: Vec<(String, Vec<String>)>,
    pub unknown_job_ids: Vec<String>,
    pub duplicate_job_ids: Vec<String>,
    pub jobs_without_forecast: usize,
}

impl FileCheck {
    pub fn is_clean(&self) -> bool {
        self.present
            && self.undecodable.is_empty()
            && self.violations.is_empty()
            && self.unknown_job_ids.is_empty()
            && self.duplicate_job_ids.is_empty()
    }
}

/// Checks forecast bytes against jobs without touching the filesystem.
pub fn check_forecasts(model: &str, freq: Freq, cutoff: Timestamp, jobs: &[ForecastJob], bytes: Option<&[u8]>) -> FileCheck {
    let mut check = FileCheck {
        model: model.to_string(),
        freq,
        cutoff: format_ts(cutoff),
        present: bytes.is_some(),
        jobs: jobs.len(),
        forecasts: 0,
        valid: 0,
        undecodable: Vec::new(),
        violations: Vec::new(),
        unknown_job_ids: Vec::new(),
        duplicate_job_ids: Vec::new(),
        jobs_without_forecast: jobs.len(),
    };
    let Some(bytes) = bytes else {
        return check;
    };
    let (forecasts, bad): (Vec<QuantileForecast>, _) = from_jsonl_lenient(bytes);
    check.undecodable = bad;
    check.forecasts = forecasts.len();
    let by_id: BTreeMap<&str, &ForecastJob> = jobs.iter().map(|j| (j.job_id.as_str(), j)).collect();
    let mut seen = BTreeSet::new();
    for f in &forecasts {
        if !seen.insert(f.job_id.as_str()) {
            check.duplicate_job_ids.push(f.job_id.clone());
            continue;
        }
        match by_id.get(f.job_id.as_str()) {
            None => check.unknown_job_ids.push(f.job_id.clone()),
            Some(job) => match validate_forecast(f, job) {
                Ok(()) => check.valid += 1,
                Err(v) => check
                    .violations
                    .push((f.job_id.clone(), v.iter().map(|x| x.to_string()).collect())),
            },
        }
    }
    check.jobs_without_forecast = jobs.iter().filter(|j| !seen.contains(j.job_id.as_str())).count();
    check
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageStatus {
    pub stage: Stage,
    /// `pending`, `complete`, or `damaged`.
    pub state: String,
    pub units: usize,
    pub outputs: usize,
    pub damaged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatusReport {
    pub stages: Vec<StageStatus>,
    /// `(model, freq, cutoff)` with a job file but no forecast file.
    pub pending_forecasts: Vec<(String, Freq, String)>,
    /// `(model, freq, cutoff)` with a forecast file but no metric record.
    pub pending_metrics: Vec<(String, Freq, String)>,
}

/// A job file recorded by the jobs stage.
#[derive(Debug, Clone)]
struct JobUnit {
    freq: Freq,
    cutoff: Timestamp,
    sha256: String,
}

pub struct Orchestrator {
    pub config: RunConfig,
    pub force: bool,
    pool: rayon::ThreadPool,
}

fn stamp_unit(freq: Freq, cutoff: Timestamp) -> String {
    format!("{freq}/{}", path_stamp(cutoff))
}

fn bool_tag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl Orchestrator {
    pub fn new(config: RunConfig, force: bool) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(Orchestrator { config, force, pool })
    }

    pub fn root(&self) -> &Path {
        &self.config.data_root
    }

    fn gate(&self, stage: Stage) -> Result<()> {
        if self.force {
            return Ok(());
        }
        require_upstream(self.root(), stage)
    }

    fn manifest(&self, stage: Stage) -> Result<StageManifest> {
        StageManifest::load(self.root(), stage)?.ok_or_else(|| Error::IncompleteUpstream(stage.to_string()))
    }

    fn read_rel(&self, rel: &str) -> Result<Vec<u8>> {
        read(&self.root().join(rel))
    }

    fn universe(&self) -> Result<RepoUniverse> {
        load_universe(&self.config.universe_file, self.config.universe_size)
    }

    fn hours(&self) -> Vec<Timestamp> {
        let mut out = Vec::new();
        let mut h = self.config.start;
        while h < self.config.end {
            out.push(h);
            h = Freq::Hourly.advance(h, 1);
        }
        out
    }

    // ---- ingest -------------------------------------------------------

    pub fn ingest(&self) -> Result<StageReport> {
        let universe = self.universe()?;
        let uhash = hash_parts(universe.repos());
        let opts = IngestOptions {
            exclude_bots: self.config.exclude_bots,
        };
        let archive = ArchiveDir::new(&self.config.archive_dir);
        let hours = self.hours();
        let mut run = StageRun::start(self.root(), Stage::Ingest, self.force)?;

        let inputs: Vec<String> = self.pool.install(|| {
            hours
                .par_iter()
                .map(|&h| {
                    let fh = file_hash(&archive.path_for(h))?;
                    Ok(hash_parts([
                        "ingest",
                        fh.as_deref().unwrap_or("absent"),
                        &uhash,
                        bool_tag(opts.exclude_bots),
                    ]))
                })
                .collect::<Result<_>>()
        })?;
        let mut todo = Vec::new();
        for (i, &h) in hours.iter().enumerate() {
            if !run.check_fresh(&format!("hour/{}", path_stamp(h)), &inputs[i])? {
                todo.push(i);
            }
        }
        let results: Vec<HourIngest> = self
            .pool
            .install(|| todo.par_iter().map(|&i| archive.ingest_hour(hours[i], &universe, opts)).collect());
        for (&i, res) in todo.iter().zip(&results) {
            let h = hours[i];
            if res.skipped_lines > 0 {
                run.note(format!("{}: skipped {} undecodable lines", format_ts(h), res.skipped_lines));
            }
            run.commit(
                &format!("hour/{}", path_stamp(h)),
                inputs[i].clone(),
                vec![(layout::hour_file(h), write_hour_file(res))],
            )?;
        }

        let mut parts = vec![format_ts(self.config.start), format_ts(self.config.end)];
        for &h in &hours {
            let rec = run
                .unit(&format!("hour/{}", path_stamp(h)))
                .expect("every hour was committed or fresh");
            parts.push(rec.outputs[0].sha256.clone());
        }
        let presence_hash = hash_parts(&parts);
        if !run.check_fresh("presence", &presence_hash)? {
            let ledger = self.presence_from_hour_files(&hours)?;
            run.commit("presence", presence_hash, vec![(layout::PRESENCE.to_string(), ledger.to_csv())])?;
        }
        run.finish()
    }

    fn read_hours(&self, hours: &[Timestamp]) -> Result<Vec<HourIngest>> {
        self.pool.install(|| {
            hours
                .par_iter()
                .map(|&h| {
                    let rel = layout::hour_file(h);
                    let bytes = self.read_rel(&rel)?;
                    read_hour_file(&bytes).map_err(|e| Error::decode(self.root().join(&rel), e))
                })
                .collect()
        })
    }

    fn presence_from_hour_files(&self, hours: &[Timestamp]) -> Result<PresenceLedger> {
        let ingested = self.read_hours(hours)?;
        PresenceLedger::new(self.config.start, self.config.end, ingested.iter().map(|h| h.presence()))
    }

    // ---- rollup -------------------------------------------------------

    pub fn rollup(&self) -> Result<StageReport> {
        self.gate(Stage::Rollup)?;
        let ingest = self.manifest(Stage::Ingest)?;
        let universe = self.universe()?;
        let uhash = hash_parts(universe.repos());
        let hours = self.hours();
        let mut parts = vec!["rollup".to_string(), uhash.clone()];
        for &h in &hours {
            let unit = ingest
                .units
                .get(&format!("hour/{}", path_stamp(h)))
                .ok_or_else(|| Error::IncompleteUpstream(Stage::Ingest.to_string()))?;
            parts.push(unit.outputs[0].sha256.clone());
        }
        let presence = ingest
            .units
            .get("presence")
            .ok_or_else(|| Error::IncompleteUpstream(Stage::Ingest.to_string()))?;
        parts.push(presence.outputs[0].sha256.clone());
        let base = hash_parts(&parts);

        let mut run = StageRun::start(self.root(), Stage::Rollup, self.force)?;
        let mut stale = Vec::new();
        for &freq in &self.config.freqs {
            let inputs = hash_parts([base.as_str(), freq.as_str(), &self.config.thresholds.for_freq(freq).to_string()]);
            for kind in EventKind::ALL {
                let unit = format!("{freq}/{kind}");
                if !run.check_fresh(&unit, &inputs)? {
                    stale.push((unit, inputs.clone(), freq, kind));
                }
            }
        }
        let strata_inputs = hash_parts(["strata", uhash.as_str()]);
        let strata_stale = !run.check_fresh("strata", &strata_inputs)?;

        if !stale.is_empty() || strata_stale {
            let counts: Vec<_> = self.read_hours(&hours)?.into_iter().flat_map(|h| h.counts).collect();
            let ledger = PresenceLedger::from_csv(&self.read_rel(layout::PRESENCE)?, self.config.start, self.config.end)?;
            let thresholds = self.config.thresholds;
            let built: Vec<Vec<u8>> = self.pool.install(|| {
                stale
                    .par_iter()
                    .map(|(_, _, freq, kind)| {
                        let series = rollup_partition(&counts, &ledger, &universe, *kind, *freq, &thresholds);
                        partition_to_csv(&series.iter().collect::<Vec<_>>())
                    })
                    .collect()
            });
            for ((unit, inputs, freq, kind), bytes) in stale.into_iter().zip(built) {
                run.commit(&unit, inputs, vec![(layout::partition(freq, kind), bytes)])?;
            }
            if strata_stale {
                let hourly: Vec<TimeSeries> = EventKind::ALL
                    .into_iter()
                    .flat_map(|kind| rollup_partition(&counts, &ledger, &universe, kind, Freq::Hourly, &thresholds))
                    .collect();
                let strata = Strata::new(stratify(&hourly)?);
                run.commit("strata", strata_inputs, vec![(layout::STRATA.to_string(), strata.to_csv())])?;
            }
        }

        let mut manifest_parts = Vec::new();
        for &freq in &self.config.freqs {
            for kind in EventKind::ALL {
                let rec = run.unit(&format!("{freq}/{kind}")).expect("partition recorded");
                manifest_parts.push(rec.outputs[0].sha256.clone());
            }
        }
        let manifest_inputs = hash_parts(&manifest_parts);
        if !run.check_fresh("manifest", &manifest_inputs)? {
            let mut pm = PanelManifest::default();
            for &freq in &self.config.freqs {
                for kind in EventKind::ALL {
                    let bytes = self.read_rel(&layout::partition(freq, kind))?;
                    pm.partitions.push(PanelManifest::entry(freq, kind, &bytes));
                }
            }
            let mut bytes = serde_json::to_vec_pretty(&pm).expect("manifest serializes");
            bytes.push(b'\n');
            run.commit("manifest", manifest_inputs, vec![(layout::PANEL_MANIFEST.to_string(), bytes)])?;
        }
        run.finish()
    }

    fn panel_manifest(&self) -> Result<PanelManifest> {
        let bytes = self.read_rel(layout::PANEL_MANIFEST)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::decode(self.root().join(layout::PANEL_MANIFEST), e))
    }

    /// Loads every partition of `freq`.
    pub fn load_panel(&self, freq: Freq) -> Result<PanelStore> {
        let mut store = PanelStore::default();
        for kind in EventKind::ALL {
            let rel = layout::partition(freq, kind);
            let bytes = self.read_rel(&rel)?;
            for s in partition_from_csv(&bytes, kind, freq).map_err(|e| Error::decode(self.root().join(&rel), e))? {
                store.insert(s);
            }
        }
        Ok(store)
    }

    pub fn load_strata(&self) -> Result<Strata> {
        Strata::from_csv(&self.read_rel(layout::STRATA)?)
    }

    fn data_version(&self) -> Result<String> {
        let pm = file_hash(&self.root().join(layout::PANEL_MANIFEST))?.unwrap_or_default();
        let st = file_hash(&self.root().join(layout::STRATA))?.unwrap_or_default();
        Ok(hash_parts([pm, st]))
    }

    // ---- jobs ---------------------------------------------------------

    pub fn emit_jobs(&self, sel: JobSelection) -> Result<StageReport> {
        self.gate(Stage::Jobs)?;
        let pm = self.panel_manifest()?;
        let mut run = StageRun::start(self.root(), Stage::Jobs, self.force)?;
        let mut cutoff_found = sel.cutoff.is_none();
        for &freq in self.config.freqs.iter().filter(|&&f| sel.freq.is_none_or(|s| s == f)) {
            let spec = self.config.spec(freq);
            let panel = self.load_panel(freq)?;
            let Some(data_end) = panel.data_end(freq) else {
                run.note(format!("{freq}: panel is empty"));
                continue;
            };
            let mut cutoffs = generate_cutoffs(spec, data_end);
            if let Some(c) = sel.cutoff {
                cutoffs.retain(|&x| x == c);
                cutoff_found |= !cutoffs.is_empty();
            }
            let spec_tag = format!("{}|{}|{}|{}", spec.horizon, spec.max_context, spec.step, format_ts(spec.first_cutoff));
            let freq_hash = pm.freq_hash(freq);
            let mut stale = Vec::new();
            for cutoff in cutoffs {
                let inputs = hash_parts(["jobs", freq_hash.as_str(), &spec_tag, &format_ts(cutoff)]);
                if !run.check_fresh(&stamp_unit(freq, cutoff), &inputs)? {
                    stale.push((cutoff, inputs));
                }
            }
            let keys: Vec<_> = panel.series(freq).map(|s| s.key.clone()).collect();
            let built: Vec<Vec<u8>> = self.pool.install(|| {
                stale
                    .par_iter()
                    .map(|(cutoff, _)| {
                        let mut jobs = Vec::new();
                        for key in &keys {
                            if let Some(b) = build_job(key, *cutoff, spec, &panel)? {
                                jobs.push(b.job);
                            }
                        }
                        Ok(to_jsonl(&jobs))
                    })
                    .collect::<Result<_>>()
            })?;
            for ((cutoff, inputs), bytes) in stale.into_iter().zip(built) {
                run.commit(&stamp_unit(freq, cutoff), inputs, vec![(layout::jobs(freq, cutoff), bytes)])?;
            }
        }
        if !cutoff_found {
            return Err(Error::Invalid(format!(
                "{} is not a scheduled cutoff",
                format_ts(sel.cutoff.expect("checked"))
            )));
        }
        run.finish()
    }

    fn job_units(&self) -> Result<Vec<JobUnit>> {
        let m = self.manifest(Stage::Jobs)?;
        let mut out = Vec::new();
        for (id, rec) in &m.units {
            let (freq, stamp) = id
                .split_once('/')
                .ok_or_else(|| Error::Invalid(format!("bad jobs unit `{id}`")))?;
            let freq: Freq = freq.parse()?;
            if !self.config.freqs.contains(&freq) {
                continue;
            }
            out.push(JobUnit {
                freq,
                cutoff: parse_path_stamp(stamp)?,
                sha256: rec.outputs[0].sha256.clone(),
            });
        }
        out.sort_by_key(|u| (u.freq, u.cutoff));
        Ok(out)
    }

    pub fn load_jobs(&self, freq: Freq, cutoff: Timestamp) -> Result<Vec<ForecastJob>> {
        let rel = layout::jobs(freq, cutoff);
        from_jsonl(&self.read_rel(&rel)?).map_err(|e| Error::decode(self.root().join(&rel), e))
    }

    /// Built-in baselines to run: ZeroModel always, others when on the roster.
    fn baseline_models(&self) -> Vec<String> {
        let mut models = vec![ZERO_MODEL.to_string()];
        for m in &self.config.models {
            if m != ZERO_MODEL && builtin(m, self.config.seasonality).is_some() {
                models.push(m.clone());
            }
        }
        models
    }

    // ---- baselines ----------------------------------------------------

    pub fn run_baselines(&self) -> Result<StageReport> {
        self.gate(Stage::Baselines)?;
        let units = self.job_units()?;
        let mut run = StageRun::start(self.root(), Stage::Baselines, self.force)?;
        let mut stale = Vec::new();
        for model in self.baseline_models() {
            for u in &units {
                let m = self.config.seasonality.period(u.freq).to_string();
                let inputs = hash_parts(["baseline", model.as_str(), &u.sha256, &m]);
                let id = format!("{model}/{}", stamp_unit(u.freq, u.cutoff));
                if !run.check_fresh(&id, &inputs)? {
                    stale.push((id, inputs, model.clone(), u.clone()));
                }
            }
        }
        let built: Vec<Vec<u8>> = self.pool.install(|| {
            stale
                .par_iter()
                .map(|(_, _, model, u)| {
                    let f = builtin(model, self.config.seasonality).expect("built-in model");
                    let jobs = self.load_jobs(u.freq, u.cutoff)?;
                    let forecasts = jobs.iter().map(|j| f.forecast(j)).collect::<Result<Vec<_>>>()?;
                    Ok(to_jsonl(&forecasts))
                })
                .collect::<Result<_>>()
        })?;
        for ((id, inputs, model, u), bytes) in stale.into_iter().zip(built) {
            run.commit(&id, inputs, vec![(layout::forecasts(&model, u.freq, u.cutoff), bytes)])?;
        }
        run.finish()
    }

    // ---- collect / validate -------------------------------------------

    /// Validates one forecast file against its job file.
    pub fn validate(&self, model: &str, freq: Freq, cutoff: Timestamp) -> Result<FileCheck> {
        let jobs = self.load_jobs(freq, cutoff)?;
        let path = self.root().join(layout::forecasts(model, freq, cutoff));
        let bytes = if path.exists() { Some(read(&path)?) } else { None };
        Ok(check_forecasts(model, freq, cutoff, &jobs, bytes.as_deref()))
    }

    fn roster_with_zero(&self) -> Vec<String> {
        let mut models = self.config.models.clone();
        if !models.iter().any(|m| m == ZERO_MODEL) {
            models.insert(0, ZERO_MODEL.to_string());
        }
        models
    }

    pub fn collect(&self) -> Result<StageReport> {
        self.gate(Stage::Collect)?;
        let units = self.job_units()?;
        let models = self.roster_with_zero();
        let mut parts = vec!["collect".to_string()];
        for model in &models {
            for u in &units {
                let fh = file_hash(&self.root().join(layout::forecasts(model, u.freq, u.cutoff)))?;
                parts.extend([model.clone(), stamp_unit(u.freq, u.cutoff), u.sha256.clone(), fh.unwrap_or_default()]);
            }
        }
        let inputs = hash_parts(&parts);
        let mut run = StageRun::start(self.root(), Stage::Collect, self.force)?;
        if !run.check_fresh("summary", &inputs)? {
            let mut checks = Vec::new();
            for model in &models {
                for u in &units {
                    checks.push(self.validate(model, u.freq, u.cutoff)?);
                }
            }
            let missing = checks.iter().filter(|c| !c.present).count();
            let unclean = checks.iter().filter(|c| c.present && !c.is_clean()).count();
            if missing > 0 {
                run.note(format!("{missing} forecast files not yet submitted"));
            }
            if unclean > 0 {
                run.note(format!("{unclean} forecast files contain rejected records"));
            }
            let mut bytes = serde_json::to_vec_pretty(&checks).expect("report serializes");
            bytes.push(b'\n');
            run.commit("summary", inputs, vec![(layout::COLLECT_REPORT.to_string(), bytes)])?;
        }
        run.finish()
    }

    // ---- evaluate -----------------------------------------------------

    pub fn evaluate(&self) -> Result<StageReport> {
        self.gate(Stage::Evaluate)?;
        let strata = self.load_strata()?;
        let strata_hash = file_hash(&self.root().join(layout::STRATA))?.unwrap_or_default();
        let units = self.job_units()?;
        let mut run = StageRun::start(self.root(), Stage::Evaluate, self.force)?;

        for &freq in &self.config.freqs {
            let spec = self.config.spec(freq);
            let m = self.config.seasonality.period(freq);
            let panel = self.load_panel(freq)?;
            let cut_units: Vec<&JobUnit> = units.iter().filter(|u| u.freq == freq).collect();

            struct Cut {
                cutoff: Timestamp,
                job_sha: String,
                zero_sha: String,
                truth_hash: String,
                jobs: Vec<ForecastJob>,
                zero: BTreeMap<String, (Subdataset, RawScore)>,
            }
            let cuts: Vec<Cut> = self.pool.install(|| {
                cut_units
                    .par_iter()
                    .map(|u| {
                        let jobs = self.load_jobs(freq, u.cutoff)?;
                        let zrel = layout::forecasts(ZERO_MODEL, freq, u.cutoff);
                        let zpath = self.root().join(&zrel);
                        if !zpath.exists() {
                            return Err(Error::IncompleteUpstream(Stage::Baselines.to_string()));
                        }
                        let zbytes = read(&zpath)?;
                        let zf: Vec<QuantileForecast> = from_jsonl(&zbytes).map_err(|e| Error::decode(&zpath, e))?;
                        let ctx = CutoffContext { spec, jobs: &jobs, panel: &panel, strata: &strata, seasonal_period: m };
                        let zero = ctx.zero_scores(&zf)?;
                        let mut tparts = Vec::with_capacity(jobs.len());
                        for j in &jobs {
                            let t = crate::evaluate::ground_truth(j, spec, &panel)?;
                            tparts.push(format!("{}:{:?}", j.job_id, t));
                        }
                        Ok(Cut {
                            cutoff: u.cutoff,
                            job_sha: u.sha256.clone(),
                            zero_sha: crate::store::sha256_hex(&zbytes),
                            truth_hash: hash_parts(&tparts),
                            jobs,
                            zero,
                        })
                    })
                    .collect::<Result<_>>()
            })?;

            let floors = FloorTable::build(
                cuts.iter()
                    .flat_map(|c| c.zero.values().map(move |(s, r)| (*s, freq, r))),
            )?;
            let floors_hash = floors.freq_hash(freq);
            let floors_inputs = hash_parts(
                std::iter::once(format!("floors|{freq}"))
                    .chain(cuts.iter().flat_map(|c| [c.zero_sha.clone(), c.truth_hash.clone(), c.job_sha.clone()])),
            );
            let funit = format!("floors/{freq}");
            if !run.check_fresh(&funit, &floors_inputs)? {
                let list: Vec<_> = floors.iter().collect();
                let mut bytes = serde_json::to_vec_pretty(&list).expect("floors serialize");
                bytes.push(b'\n');
                run.commit(&funit, floors_inputs, vec![(layout::floors(freq), bytes)])?;
            }

            let mut stale = Vec::new();
            for model in &self.config.models {
                for (ci, c) in cuts.iter().enumerate() {
                    let Some(fsha) = file_hash(&self.root().join(layout::forecasts(model, freq, c.cutoff)))? else {
                        continue;
                    };
                    let inputs = hash_parts([
                        "evaluate",
                        model.as_str(),
                        &c.job_sha,
                        &fsha,
                        &c.zero_sha,
                        &c.truth_hash,
                        &strata_hash,
                        &floors_hash,
                        &m.to_string(),
                    ]);
                    let id = format!("{model}/{}", stamp_unit(freq, c.cutoff));
                    if !run.check_fresh(&id, &inputs)? {
                        stale.push((id, inputs, model.clone(), ci));
                    }
                }
            }
            let built: Vec<(Vec<u8>, Vec<u8>)> = self.pool.install(|| {
                stale
                    .par_iter()
                    .map(|(_, _, model, ci)| {
                        let c = &cuts[*ci];
                        let rel = layout::forecasts(model, freq, c.cutoff);
                        let (forecasts, bad): (Vec<QuantileForecast>, _) = from_jsonl_lenient(&self.read_rel(&rel)?);
                        if !bad.is_empty() {
                            log::warn!("{rel}: {} undecodable lines ignored", bad.len());
                        }
                        let ctx = CutoffContext { spec, jobs: &c.jobs, panel: &panel, strata: &strata, seasonal_period: m };
                        let (records, tally) = ctx.evaluate(model, &forecasts, &c.zero, &floors)?;
                        let mut tbytes = serde_json::to_vec_pretty(&tally).expect("tally serializes");
                        tbytes.push(b'\n');
                        Ok((to_jsonl(&records), tbytes))
                    })
                    .collect::<Result<_>>()
            })?;
            for ((id, inputs, model, ci), (records, tally)) in stale.into_iter().zip(built) {
                let cutoff = cuts[ci].cutoff;
                run.commit(
                    &id,
                    inputs,
                    vec![
                        (layout::metrics(&model, freq, cutoff), records),
                        (layout::metrics_tally(&model, freq, cutoff), tally),
                    ],
                )?;
            }
        }
        run.finish()
    }

    /// Metric records of roster models, optionally only up to `as_of`.
    pub fn load_metrics(&self, as_of: Option<Timestamp>) -> Result<(Vec<MetricRecord>, Vec<(String, String)>)> {
        let m = self.manifest(Stage::Evaluate)?;
        let mut records = Vec::new();
        let mut files = Vec::new();
        for model in &self.config.models {
            for (id, rec) in m.units.range(format!("{model}/")..) {
                let Some(rest) = id.strip_prefix(&format!("{model}/")) else {
                    break;
                };
                let Some((freq, stamp)) = rest.split_once('/') else {
                    continue;
                };
                let freq: Freq = freq.parse()?;
                let cutoff = parse_path_stamp(stamp)?;
                if !self.config.freqs.contains(&freq) || as_of.is_some_and(|a| cutoff > a) {
                    continue;
                }
                let out = &rec.outputs[0];
                let bytes = self.read_rel(&out.path)?;
                records.extend(from_jsonl::<MetricRecord>(&bytes).map_err(|e| Error::decode(self.root().join(&out.path), e))?);
                files.push((id.clone(), out.sha256.clone()));
            }
        }
        Ok((records, files))
    }

    // ---- leaderboard --------------------------------------------------

    pub fn leaderboard(&self, opts: LeaderboardOptions) -> Result<StageReport> {
        self.gate(Stage::Leaderboard)?;
        let (records, files) = self.load_metrics(opts.as_of)?;
        let version = self.data_version()?;
        let mut parts = vec![
            "leaderboard".to_string(),
            version.clone(),
            opts.as_of.map(format_ts).unwrap_or_default(),
            bool_tag(opts.worst_first).to_string(),
        ];
        parts.extend(self.config.models.iter().cloned());
        for (id, sha) in files {
            parts.extend([id, sha]);
        }
        let inputs = hash_parts(&parts);
        let mut run = StageRun::start(self.root(), Stage::Leaderboard, self.force)?;
        if !run.check_fresh("leaderboard", &inputs)? {
            let report = LeaderboardReport::new(&records, &self.config.models, opts.worst_first, version, opts.as_of);
            run.commit(
                "leaderboard",
                inputs,
                vec![
                    (layout::LEADERBOARD_CSV.to_string(), report.to_csv()?),
                    (layout::LEADERBOARD_JSON.to_string(), report.to_json()),
                    (layout::LEADERBOARD_TXT.to_string(), report.to_table().into_bytes()),
                ],
            )?;
        }
        run.finish()
    }

    // ---- describe -----------------------------------------------------

    pub fn describe(&self) -> Result<StageReport> {
        self.gate(Stage::Describe)?;
        let pm = self.panel_manifest()?;
        let params = self.config.descriptors;
        let mut run = StageRun::start(self.root(), Stage::Describe, self.force)?;
        for &freq in &self.config.freqs {
            let inputs = hash_parts([
                "describe",
                pm.freq_hash(freq).as_str(),
                &format!("{}|{}|{}", params.bandpower_split, params.pe_order, params.pe_delay),
            ]);
            let unit = freq.to_string();
            if run.check_fresh(&unit, &inputs)? {
                continue;
            }
            let panel = self.load_panel(freq)?;
            let series: Vec<&TimeSeries> = panel.series(freq).collect();
            let rows: Vec<SpectralSummary> = self.pool.install(|| {
                series
                    .par_iter()
                    .map(|s| {
                        let values = s.complete_values();
                        summarize(s.key.clone(), &values, &params).unwrap_or(SpectralSummary {
                            key: s.key.clone(),
                            n: values.len(),
                            centroid: None,
                            entropy: None,
                            log_bandpower_ratio: None,
                            permutation_entropy: None,
                        })
                    })
                    .collect()
            });
            run.commit(&unit, inputs, vec![(layout::descriptors(freq), summaries_to_csv(&rows, &params))])?;
        }
        run.finish()
    }

    // ---- cycle / status -----------------------------------------------

    pub fn run_cycle(&self) -> Result<Vec<StageReport>> {
        Ok(vec![
            self.ingest()?,
            self.rollup()?,
            self.emit_jobs(JobSelection::default())?,
            self.run_baselines()?,
            self.collect()?,
            self.evaluate()?,
            self.leaderboard(LeaderboardOptions::default())?,
            self.describe()?,
        ])
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageReport> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Rollup => self.rollup(),
            Stage::Jobs => self.emit_jobs(JobSelection::default()),
            Stage::Baselines => self.run_baselines(),
            Stage::Collect => self.collect(),
            Stage::Evaluate => self.evaluate(),
            Stage::Leaderboard => self.leaderboard(LeaderboardOptions::default()),
            Stage::Describe => self.describe(),
        }
    }

    pub fn status(&self) -> Result<StatusReport> {
        let root = self.root();
        let mut stages = Vec::new();
        for stage in Stage::ALL {
            let st = match StageManifest::load(root, stage)? {
                None => StageStatus {
                    stage,
                    state: "pending".into(),
                    units: 0,
                    outputs: 0,
                    damaged: Vec::new(),
                },
                Some(m) => {
                    let damaged = m.damaged_outputs(root)?;
                    StageStatus {
                        stage,
                        state: if !damaged.is_empty() {
                            "damaged"
                        } else if m.completed_at.is_some() {
                            "complete"
                        } else {
                            "pending"
                        }
                        .into(),
                        units: m.units.len(),
                        outputs: m.outputs().count(),
                        damaged,
                    }
                }
            };
            stages.push(st);
        }
        let mut pending_forecasts = Vec::new();
        let mut pending_metrics = Vec::new();
        if StageManifest::load(root, Stage::Jobs)?.is_some() {
            let evaluated: BTreeSet<String> = StageManifest::load(root, Stage::Evaluate)?
                .map(|m| m.units.into_keys().collect())
                .unwrap_or_default();
            for model in &self.config.models {
                for u in self.job_units()? {
                    let triple = (model.clone(), u.freq, format_ts(u.cutoff));
                    if !root.join(layout::forecasts(model, u.freq, u.cutoff)).exists() {
                        pending_forecasts.push(triple);
                    } else if !evaluated.contains(&format!("{model}/{}", stamp_unit(u.freq, u.cutoff))) {
                        pending_metrics.push(triple);
                    }
                }
            }
        }
        Ok(StatusReport {
            stages,
            pending_forecasts,
            pending_metrics,
        })
    }
}
