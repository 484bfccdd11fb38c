//! Joins jobs, forecasts and observed truth into metric records: raw
//! scores per instance, zero-model floors per (subdataset, freq, metric),
//! and per-series scaling.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::baselines::ZERO_MODEL;
use crate::error::{Error, Result};
use crate::metrics::{compute_floor, crps, mase, scale, Metric, MetricRecord, ScalingFloor};
use crate::panel::{PanelStore, Strata, Subdataset};
use crate::protocol::{validate_forecast, CutoffSpec, ForecastJob, QuantileForecast};
use crate::store::sha256_hex;
use crate::types::Freq;

/// Observed values for a job's horizon; `None` marks a step whose period is
/// incomplete. Returns `Ok(None)` while any target period is not yet in the
/// panel.
pub fn ground_truth(job: &ForecastJob, spec: &CutoffSpec, panel: &PanelStore) -> Result<Option<Vec<Option<f64>>>> {
    let key = job.key();
    let series = panel
        .get(&key)
        .ok_or_else(|| Error::UnknownSeries(key.to_string()))?;
    let mut steps = Vec::with_capacity(spec.horizon);
    for period in spec.target_periods(job.cutoff) {
        match series.point_at(period) {
            Some(p) => steps.push(p.complete.then_some(p.value as f64)),
            None => return Ok(None),
        }
    }
    Ok(Some(steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawScore {
    pub mase: Option<f64>,
    pub crps: f64,
    pub n_scored_steps: usize,
}

/// Scores a validated forecast on the steps with known truth. Returns
/// `Ok(None)` when no step is scoreable.
pub fn score(job: &ForecastJob, forecast: &QuantileForecast, truth: &[Option<f64>], m: usize) -> Result<Option<RawScore>> {
    if truth.len() != forecast.values.len() {
        return Err(Error::Shape(format!(
            "truth has {} steps, forecast {}",
            truth.len(),
            forecast.values.len()
        )));
    }
    let point = forecast.median_path(&job.quantile_levels);
    let mut actual = Vec::new();
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        if let Some(y) = t {
            actual.push(*y);
            points.push(point[i]);
            rows.push(forecast.values[i].clone());
        }
    }
    if actual.is_empty() {
        return Ok(None);
    }
    Ok(Some(RawScore {
        mase: mase(&actual, &points, &job.context, m)?,
        crps: crps(&actual, &rows, &job.quantile_levels)?,
        n_scored_steps: actual.len(),
    }))
}

/// Floors for every (subdataset, freq, metric) cell with zero-model scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FloorTable {
    floors: BTreeMap<(Subdataset, Freq, Metric), ScalingFloor>,
}

impl FloorTable {
    /// Pools zero-model scores across cutoffs within each cell.
    pub fn build<'a>(zero_scores: impl IntoIterator<Item = (Subdataset, Freq, &'a RawScore)>) -> Result<Self> {
        let mut cells: BTreeMap<(Subdataset, Freq, Metric), Vec<f64>> = BTreeMap::new();
        for (sub, freq, s) in zero_scores {
            if let Some(b) = s.mase {
                cells.entry((sub, freq, Metric::Mase)).or_default().push(b);
            }
            cells.entry((sub, freq, Metric::Crps)).or_default().push(s.crps);
        }
        let mut floors = BTreeMap::new();
        for ((sub, freq, metric), b) in cells {
            floors.insert((sub, freq, metric), compute_floor(sub, freq, metric, b)?);
        }
        Ok(FloorTable { floors })
    }

    pub fn get(&self, sub: Subdataset, freq: Freq, metric: Metric) -> Option<&ScalingFloor> {
        self.floors.get(&(sub, freq, metric))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScalingFloor> {
        self.floors.values()
    }

    /// Hash over the floors of one frequency (b values excluded: only the
    /// resulting tau0 affects scaling).
    pub fn freq_hash(&self, freq: Freq) -> String {
        let canon: Vec<String> = self
            .floors
            .values()
            .filter(|f| f.freq == freq)
            .map(|f| format!("{}|{}|{:?}", f.subdataset, f.metric, f.tau0))
            .collect();
        sha256_hex(canon.join("\n").as_bytes())
    }
}

/// Outcome tallies for one (model, freq, cutoff) evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EvalTally {
    pub scored: usize,
    pub missing_forecast: usize,
    pub rejected: usize,
    pub no_truth: usize,
    pub mase_undefined: usize,
}

/// Everything needed to score one (freq, cutoff) job file.
pub struct CutoffContext<'a> {
    pub spec: &'a CutoffSpec,
    pub jobs: &'a [ForecastJob],
    pub panel: &'a PanelStore,
    pub strata: &'a Strata,
    pub seasonal_period: usize,
}

impl CutoffContext<'_> {
    /// Raw scores for every job with truth and a valid forecast.
    pub fn raw_scores(&self, forecasts: &[QuantileForecast], tally: &mut EvalTally) -> Result<Vec<(usize, RawScore)>> {
        let by_id: HashMap<&str, &QuantileForecast> = forecasts.iter().map(|f| (f.job_id.as_str(), f)).collect();
        let mut out = Vec::new();
        for (i, job) in self.jobs.iter().enumerate() {
            let Some(f) = by_id.get(job.job_id.as_str()) else {
                tally.missing_forecast += 1;
                continue;
            };
            if validate_forecast(f, job).is_err() {
                tally.rejected += 1;
                continue;
            }
            let Some(truth) = ground_truth(job, self.spec, self.panel)? else {
                tally.no_truth += 1;
                continue;
            };
            match score(job, f, &truth, self.seasonal_period)? {
                Some(s) => out.push((i, s)),
                None => tally.no_truth += 1,
            }
        }
        Ok(out)
    }

    /// Zero-model raw scores keyed by job id, with each job's subdataset.
    pub fn zero_scores(&self, zero: &[QuantileForecast]) -> Result<BTreeMap<String, (Subdataset, RawScore)>> {
        let mut tally = EvalTally::default();
        let mut out = BTreeMap::new();
        for (i, s) in self.raw_scores(zero, &mut tally)? {
            let job = &self.jobs[i];
            let sub = self.subdataset(job)?;
            out.insert(job.job_id.clone(), (sub, s));
        }
        Ok(out)
    }

    fn subdataset(&self, job: &ForecastJob) -> Result<Subdataset> {
        self.strata
            .subdataset(&job.repo, job.kind)
            .ok_or_else(|| Error::Invalid(format!("no stratum for {}/{}", job.repo, job.kind)))
    }

    /// Scored and scaled records for one model.
    pub fn evaluate(
        &self,
        model: &str,
        forecasts: &[QuantileForecast],
        zero: &BTreeMap<String, (Subdataset, RawScore)>,
        floors: &FloorTable,
    ) -> Result<(Vec<MetricRecord>, EvalTally)> {
        let mut tally = EvalTally::default();
        let raw = self.raw_scores(forecasts, &mut tally)?;
        let mut records = Vec::with_capacity(raw.len());
        for (i, s) in raw {
            let job = &self.jobs[i];
            let sub = self.subdataset(job)?;
            let b = zero.get(&job.job_id).map(|(_, z)| z);
            let scaled = |metric: Metric, v: Option<f64>, b: Option<f64>| -> Option<f64> {
                let floor = floors.get(sub, job.freq, metric)?;
                scale(v?, floor, b?)
            };
            let mase_scaled = scaled(Metric::Mase, s.mase, b.and_then(|z| z.mase));
            let crps_scaled = scaled(Metric::Crps, Some(s.crps), b.map(|z| z.crps));
            if s.mase.is_none() {
                tally.mase_undefined += 1;
            }
            tally.scored += 1;
            records.push(MetricRecord {
                model: model.to_string(),
                repo: job.repo.clone(),
                kind: job.kind,
                freq: job.freq,
                stratum: sub.stratum,
                cutoff: job.cutoff,
                mase_raw: s.mase,
                crps_raw: s.crps,
                mase_scaled,
                crps_scaled,
                n_scored_steps: s.n_scored_steps,
            });
        }
        Ok((records, tally))
    }
}

/// Convenience: is `model` the scaling reference?
pub fn is_zero_model(model: &str) -> bool {
    model == ZERO_MODEL
}
