//! Scoring kernels: MASE, pinball loss, quantile-approximated CRPS, and the
//! zero-model scaling with its percentile floor.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Stratum, Subdataset};
use crate::stats::quantile;
use crate::types::{EventKind, Freq, SeriesKey, Timestamp};

/// Percentile of strictly positive zero-model scores used as the floor.
pub const FLOOR_PERCENTILE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mase,
    Crps,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Mase, Metric::Crps];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Mase => "mase",
            Metric::Crps => "crps",
        })
    }
}

/// Mean absolute error of `point` against `actual`, scaled by the in-sample
/// mean absolute lag-`m` difference of `train`.
///
/// Returns `Ok(None)` when `train` has no more than `m` values or its lag-`m`
/// differences are all zero.
pub fn mase(actual: &[f64], point: &[f64], train: &[f64], m: usize) -> Result<Option<f64>> {
    if actual.is_empty() || actual.len() != point.len() {
        return Err(Error::Shape(format!(
            "mase needs equal non-empty actual/point, got {} and {}",
            actual.len(),
            point.len()
        )));
    }
    if m == 0 {
        return Err(Error::Invalid("seasonal period must be at least 1".into()));
    }
    if train.len() <= m {
        return Ok(None);
    }
    let denom = train.windows(m + 1).map(|w| (w[m] - w[0]).abs()).sum::<f64>() / (train.len() - m) as f64;
    if denom == 0.0 {
        return Ok(None);
    }
    let num = actual.iter().zip(point).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64;
    Ok(Some(num / denom))
}

/// Quantile (pinball) loss `u * (tau - 1{u < 0})` with `u = y - q`.
pub fn pinball(y: f64, q: f64, tau: f64) -> f64 {
    let u = y - q;
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Mean over steps of twice the mean pinball loss across `levels`.
pub fn crps(actual: &[f64], qmatrix: &[Vec<f64>], levels: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != qmatrix.len() {
        return Err(Error::Shape(format!(
            "crps needs one quantile row per actual, got {} rows for {} actuals",
            qmatrix.len(),
            actual.len()
        )));
    }
    if levels.is_empty() {
        return Err(Error::Shape("crps needs at least one quantile level".into()));
    }
    let weight = 2.0 / levels.len() as f64;
    let mut total = 0.0;
    for (i, (&y, row)) in actual.iter().zip(qmatrix).enumerate() {
        if row.len() != levels.len() {
            return Err(Error::Shape(format!(
                "row {i} has {} quantiles, expected {}",
                row.len(),
                levels.len()
            )));
        }
        total += weight * row.iter().zip(levels).map(|(&q, &tau)| pinball(y, q, tau)).sum::<f64>();
    }
    Ok(total / actual.len() as f64)
}

/// Zero-model scores for one (subdataset, freq, metric) cell and the floor
/// derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFloor {
    pub subdataset: Subdataset,
    pub freq: Freq,
    pub metric: Metric,
    pub b_values: Vec<f64>,
    /// 10th percentile of the strictly positive `b_values`; `None` when
    /// there are none.
    pub tau0: Option<f64>,
}

pub fn compute_floor(subdataset: Subdataset, freq: Freq, metric: Metric, b_values: Vec<f64>) -> Result<ScalingFloor> {
    if b_values.is_empty() {
        return Err(Error::Invalid(format!(
            "no zero-model scores for {subdataset} {freq} {metric}"
        )));
    }
    let positive: Vec<f64> = b_values.iter().copied().filter(|&b| b > 0.0).collect();
    let tau0 = quantile(&positive, FLOOR_PERCENTILE);
    Ok(ScalingFloor {
        subdataset,
        freq,
        metric,
        b_values,
        tau0,
    })
}

/// `v / max(b, tau0)`, or `None` when the floor is undefined.
pub fn scale(v: f64, floor: &ScalingFloor, b: f64) -> Option<f64> {
    floor.tau0.map(|tau0| v / b.max(tau0))
}

/// One (model, series, cutoff) evaluation result. Field order is the
/// on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: String,
    pub repo: String,
    pub kind: EventKind,
    pub freq: Freq,
    pub stratum: Stratum,
    #[serde(with = "crate::protocol::rfc3339")]
    pub cutoff: Timestamp,
    pub mase_raw: Option<f64>,
    pub crps_raw: f64,
    pub mase_scaled: Option<f64>,
    pub crps_scaled: Option<f64>,
    pub n_scored_steps: usize,
}

impl MetricRecord {
    pub fn key(&self) -> SeriesKey {
        SeriesKey::new(self.repo.clone(), self.kind, self.freq)
    }

    pub fn subdataset(&self) -> Subdataset {
        Subdataset {
            kind: self.kind,
            stratum: self.stratum,
        }
    }

    pub fn scaled(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Mase => self.mase_scaled,
            Metric::Crps => self.crps_scaled,
        }
    }
}
