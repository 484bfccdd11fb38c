//! Leaderboard aggregation.
//!
//! Ranks are computed per group (subdataset, freq, cutoff) on the group's
//! median scaled metric, then averaged over cutoffs, subdatasets and
//! frequencies in that order. Every averaging level iterates sorted keys so
//! floating-point sums are reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricRecord};
use crate::panel::Subdataset;
use crate::stats::median;
use crate::types::{format_ts, Freq, Timestamp};

type GroupKey = (Subdataset, Freq, Timestamp);

/// Median scaled (mase, crps) over every defined instance of `model`.
pub fn median_values(records: &[MetricRecord], model: &str) -> (Option<f64>, Option<f64>) {
    let pick = |metric: Metric| {
        let v: Vec<f64> = records
            .iter()
            .filter(|r| r.model == model)
            .filter_map(|r| r.scaled(metric))
            .collect();
        median(&v)
    };
    (pick(Metric::Mase), pick(Metric::Crps))
}

/// Fractional ranks (1-based, ties share the mean position) of `values`.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Per-group median of `metric` for each model with a defined value there.
pub fn group_medians(records: &[MetricRecord], metric: Metric) -> BTreeMap<GroupKey, BTreeMap<String, f64>> {
    let mut values: BTreeMap<GroupKey, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        if let Some(v) = r.scaled(metric) {
            values
                .entry((r.subdataset(), r.freq, r.cutoff))
                .or_default()
                .entry(r.model.clone())
                .or_default()
                .push(v);
        }
    }
    values
        .into_iter()
        .map(|(g, models)| {
            let meds = models
                .into_iter()
                .filter_map(|(m, v)| median(&v).map(|x| (m, x)))
                .collect();
            (g, meds)
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Hierarchical mean rank of each model for one metric. Models without any
/// group are absent from the result.
pub fn hierarchical_mean_rank(records: &[MetricRecord], metric: Metric) -> BTreeMap<String, f64> {
    // model -> freq -> subdataset -> ranks over cutoffs
    let mut tree: BTreeMap<String, BTreeMap<Freq, BTreeMap<Subdataset, Vec<f64>>>> = BTreeMap::new();
    for ((sub, freq, _), meds) in group_medians(records, metric) {
        let values: Vec<f64> = meds.values().copied().collect();
        for (model, rank) in meds.keys().zip(fractional_ranks(&values)) {
            tree.entry(model.clone())
                .or_default()
                .entry(freq)
                .or_default()
                .entry(sub)
                .or_default()
                .push(rank);
        }
    }
    tree.into_iter()
        .map(|(model, freqs)| {
            let per_freq: Vec<f64> = freqs
                .values()
                .map(|subs| mean(&subs.values().map(|cut| mean(cut)).collect::<Vec<_>>()))
                .collect();
            (model, mean(&per_freq))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub model: String,
    pub median_mase_scaled: Option<f64>,
    pub median_crps_scaled: Option<f64>,
    pub mean_rank_mase: Option<f64>,
    pub mean_rank_crps: Option<f64>,
    pub sort_key: Option<f64>,
    /// Some metric had no defined instance or no ranked group.
    pub incomplete: bool,
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> std::cmp::Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    }
}

/// Rows for `models` (or every model seen when empty), best first.
/// Incomplete rows sort after complete ones.
pub fn build_leaderboard(records: &[MetricRecord], models: &[String], worst_first: bool) -> Vec<LeaderboardRow> {
    let roster: BTreeSet<String> = if models.is_empty() {
        records.iter().map(|r| r.model.clone()).collect()
    } else {
        models.iter().cloned().collect()
    };
    let rank_mase = hierarchical_mean_rank(records, Metric::Mase);
    let rank_crps = hierarchical_mean_rank(records, Metric::Crps);
    let mut rows: Vec<LeaderboardRow> = roster
        .into_iter()
        .map(|model| {
            let (mm, mc) = median_values(records, &model);
            let rm = rank_mase.get(&model).copied();
            let rc = rank_crps.get(&model).copied();
            let sort_key = rm.zip(rc).map(|(a, b)| (a + b) / 2.0);
            LeaderboardRow {
                incomplete: mm.is_none() || mc.is_none() || sort_key.is_none(),
                model,
                median_mase_scaled: mm,
                median_crps_scaled: mc,
                mean_rank_mase: rm,
                mean_rank_crps: rc,
                sort_key,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        cmp_opt(a.sort_key, b.sort_key)
            .then_with(|| cmp_opt(a.median_crps_scaled, b.median_crps_scaled))
            .then_with(|| a.model.cmp(&b.model))
    });
    if worst_first {
        rows.reverse();
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardReport {
    pub data_version: String,
    pub as_of: Option<String>,
    pub first_cutoff: Option<String>,
    pub last_cutoff: Option<String>,
    pub order: String,
    pub instances: usize,
    pub mase_undefined: usize,
    pub rows: Vec<LeaderboardRow>,
}

impl LeaderboardReport {
    pub fn new(records: &[MetricRecord], models: &[String], worst_first: bool, data_version: String, as_of: Option<Timestamp>) -> Self {
        let first = records.iter().map(|r| r.cutoff).min();
        let last = records.iter().map(|r| r.cutoff).max();
        LeaderboardReport {
            data_version,
            as_of: as_of.map(format_ts),
            first_cutoff: first.map(format_ts),
            last_cutoff: last.map(format_ts),
            order: if worst_first { "worst_first" } else { "best_first" }.into(),
            instances: records.len(),
            mase_undefined: records.iter().filter(|r| r.mase_raw.is_none()).count(),
            rows: build_leaderboard(records, models, worst_first),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let meta = format!(
            "# data_version: {}\n# cutoffs: {} .. {}\n# order: {}\n",
            self.data_version,
            self.first_cutoff.as_deref().unwrap_or("-"),
            self.last_cutoff.as_deref().unwrap_or("-"),
            self.order
        );
        out.extend_from_slice(meta.as_bytes());
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let csv_err = |e: csv::Error| Error::Invalid(format!("leaderboard csv: {e}"));
        w.write_record([
            "model",
            "median_mase_scaled",
            "median_crps_scaled",
            "mean_rank_mase",
            "mean_rank_crps",
            "sort_key",
            "incomplete",
        ])
        .map_err(csv_err)?;
        for row in &self.rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Invalid(format!("leaderboard csv: {e}")))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("report serializes");
        v.push(b'\n');
        v
    }

    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>10}  {:>10}  {:>9}  {:>9}  {:>8}",
            "model", "MASE", "CRPS", "rank_mase", "rank_crps", "sort_key"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>10}  {:>10}  {:>9}  {:>9}  {:>8}{}",
                r.model,
                fmt(r.median_mase_scaled),
                fmt(r.median_crps_scaled),
                fmt(r.mean_rank_mase),
                fmt(r.mean_rank_crps),
                fmt(r.sort_key),
                if r.incomplete { "  (incomplete)" } else { "" }
            );
        }
        let _ = writeln!(
            s,
            "order: {}; cutoffs {} .. {}; data {}",
            self.order,
            self.first_cutoff.as_deref().unwrap_or("-"),
            self.last_cutoff.as_deref().unwrap_or("-"),
            &self.data_version[..self.data_version.len().min(12)]
        );
        s
    }
}
