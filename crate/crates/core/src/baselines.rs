//! Reference forecasters: ZeroModel, HistoricAverage and SeasonalNaive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ForecastJob, QuantileForecast};
use crate::stats::quantile_sorted;
use crate::types::Freq;

pub const ZERO_MODEL: &str = "ZeroModel";
pub const HISTORIC_AVERAGE: &str = "HistoricAverage";
pub const SEASONAL_NAIVE: &str = "SeasonalNaive";

/// Seasonal period per frequency, shared by SeasonalNaive and the MASE
/// denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeasonalityTable {
    pub hourly: usize,
    pub daily: usize,
    pub weekly: usize,
    pub monthly: usize,
}

impl Default for SeasonalityTable {
    fn default() -> Self {
        SeasonalityTable {
            hourly: 24,
            daily: 7,
            weekly: 52,
            monthly: 12,
        }
    }
}

impl SeasonalityTable {
    pub fn period(&self, freq: Freq) -> usize {
        match freq {
            Freq::Hourly => self.hourly,
            Freq::Daily => self.daily,
            Freq::Weekly => self.weekly,
            Freq::Monthly => self.monthly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if Freq::ALL.into_iter().any(|f| self.period(f) == 0) {
            return Err(Error::Config("seasonal periods must be at least 1".into()));
        }
        Ok(())
    }
}

pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;
    fn forecast(&self, job: &ForecastJob) -> Result<QuantileForecast>;
}

fn flat(job: &ForecastJob, model: &str, path: impl Fn(usize) -> f64) -> QuantileForecast {
    QuantileForecast {
        job_id: job.job_id.clone(),
        model: model.to_string(),
        values: (0..job.h).map(|i| vec![path(i); job.quantile_levels.len()]).collect(),
    }
}

pub fn zero_forecast(job: &ForecastJob) -> QuantileForecast {
    flat(job, ZERO_MODEL, |_| 0.0)
}

/// Every step forecasts the empirical quantiles of the context.
pub fn historic_average(job: &ForecastJob) -> Result<QuantileForecast> {
    let mut sorted = job.context.clone();
    sorted.sort_by(f64::total_cmp);
    let row: Vec<f64> = job
        .quantile_levels
        .iter()
        .map(|&tau| quantile_sorted(&sorted, tau))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Invalid(format!("job {} has an empty context", job.job_id)))?;
    Ok(QuantileForecast {
        job_id: job.job_id.clone(),
        model: HISTORIC_AVERAGE.to_string(),
        values: vec![row; job.h],
    })
}

/// Repeats the last observed season; shorter contexts repeat the last
/// value. All levels carry the point path.
pub fn seasonal_naive(job: &ForecastJob, m: usize) -> Result<QuantileForecast> {
    let ctx = &job.context;
    let len = ctx.len();
    if len == 0 {
        return Err(Error::Invalid(format!("job {} has an empty context", job.job_id)));
    }
    if m == 0 {
        return Err(Error::Invalid("seasonal period must be at least 1".into()));
    }
    Ok(flat(job, SEASONAL_NAIVE, |i| {
        if len >= m {
            ctx[len - m + i % m]
        } else {
            ctx[len - 1]
        }
    }))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroModel;

impl Forecaster for ZeroModel {
    fn name(&self) -> &str {
        ZERO_MODEL
    }

    fn forecast(&self, job: &ForecastJob) -> Result<QuantileForecast> {
        Ok(zero_forecast(job))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HistoricAverage;

impl Forecaster for HistoricAverage {
    fn name(&self) -> &str {
        HISTORIC_AVERAGE
    }

    fn forecast(&self, job: &ForecastJob) -> Result<QuantileForecast> {
        historic_average(job)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SeasonalNaive {
    pub seasonality: SeasonalityTable,
}

impl Forecaster for SeasonalNaive {
    fn name(&self) -> &str {
        SEASONAL_NAIVE
    }

    fn forecast(&self, job: &ForecastJob) -> Result<QuantileForecast> {
        seasonal_naive(job, self.seasonality.period(job.freq))
    }
}

/// Looks up a built-in baseline by its model name.
pub fn builtin(name: &str, seasonality: SeasonalityTable) -> Option<Box<dyn Forecaster>> {
    match name {
        ZERO_MODEL => Some(Box::new(ZeroModel)),
        HISTORIC_AVERAGE => Some(Box::new(HistoricAverage)),
        SEASONAL_NAIVE => Some(Box::new(SeasonalNaive { seasonality })),
        _ => None,
    }
}
