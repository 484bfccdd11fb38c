//! Panel construction: roll hourly counts up to coarser frequencies under
//! completeness thresholds, stratify (repo, kind) pairs by activity, and
//! persist the panel as one delimited file per (kind, freq) partition.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{HourPresence, HourlyCount, PresenceStatus, RepoUniverse};
use crate::store::sha256_hex;
use crate::types::{format_ts, parse_ts, EventKind, Freq, SeriesKey, Timestamp};

/// Minimum fraction of present constituent hours for a period to count as
/// complete. Hourly periods are complete iff the hour itself is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub daily: f64,
    pub weekly: f64,
    pub monthly: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            daily: 0.90,
            weekly: 0.95,
            monthly: 0.99,
        }
    }
}

impl Thresholds {
    pub fn for_freq(&self, freq: Freq) -> f64 {
        match freq {
            Freq::Hourly => 1.0,
            Freq::Daily => self.daily,
            Freq::Weekly => self.weekly,
            Freq::Monthly => self.monthly,
        }
    }

    pub fn is_complete(&self, freq: Freq, present: i64, total: i64) -> bool {
        total > 0 && present as f64 / total as f64 >= self.for_freq(freq)
    }
}

/// Status of every hour in `[start, end)`. Hours outside the range are
/// treated as missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresenceLedger {
    start: Timestamp,
    end: Timestamp,
    statuses: BTreeMap<Timestamp, PresenceStatus>,
}

impl PresenceLedger {
    pub fn new(start: Timestamp, end: Timestamp, hours: impl IntoIterator<Item = HourPresence>) -> Result<Self> {
        if !Freq::Hourly.is_aligned(start) || !Freq::Hourly.is_aligned(end) || end < start {
            return Err(Error::Invalid(format!(
                "ledger range {}..{} must be hour-aligned and ordered",
                format_ts(start),
                format_ts(end)
            )));
        }
        let mut statuses = BTreeMap::new();
        for h in hours {
            if h.hour < start || h.hour >= end || !Freq::Hourly.is_aligned(h.hour) {
                return Err(Error::Invalid(format!("hour {} outside ledger range", format_ts(h.hour))));
            }
            if statuses.insert(h.hour, h.status).is_some() {
                return Err(Error::Invalid(format!("hour {} listed twice", format_ts(h.hour))));
            }
        }
        let expected = (end - start).num_hours() as usize;
        if statuses.len() != expected {
            return Err(Error::Invalid(format!(
                "ledger covers {} of {expected} hours",
                statuses.len()
            )));
        }
        Ok(PresenceLedger { start, end, statuses })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn status(&self, hour: Timestamp) -> PresenceStatus {
        self.statuses.get(&hour).copied().unwrap_or(PresenceStatus::Missing)
    }

    pub fn is_present(&self, hour: Timestamp) -> bool {
        self.status(hour) == PresenceStatus::Present
    }

    pub fn present_hours_in(&self, from: Timestamp, to: Timestamp) -> i64 {
        self.statuses
            .range(from..to)
            .filter(|(_, s)| **s == PresenceStatus::Present)
            .count() as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = HourPresence> + '_ {
        self.statuses.iter().map(|(&hour, &status)| HourPresence { hour, status })
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["hour", "status"]).expect("in-memory write");
        for h in self.iter() {
            w.write_record([format_ts(h.hour), h.status.to_string()])
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn from_csv(bytes: &[u8], start: Timestamp, end: Timestamp) -> Result<Self> {
        let mut hours = Vec::new();
        for row in csv::Reader::from_reader(bytes).records() {
            let row = row.map_err(|e| Error::Invalid(format!("ledger row: {e}")))?;
            hours.push(HourPresence {
                hour: parse_ts(&row[0])?,
                status: row[1].parse()?,
            });
        }
        PresenceLedger::new(start, end, hours)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub period_start: Timestamp,
    pub value: u64,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub key: SeriesKey,
    pub points: Vec<Point>,
}

impl TimeSeries {
    /// The modeling view: complete periods only.
    pub fn complete_points(&self) -> impl Iterator<Item = &Point> {
        self.points.iter().filter(|p| p.complete)
    }

    pub fn complete_values(&self) -> Vec<f64> {
        self.complete_points().map(|p| p.value as f64).collect()
    }

    pub fn point_at(&self, period_start: Timestamp) -> Option<&Point> {
        self.points
            .binary_search_by_key(&period_start, |p| p.period_start)
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn total(&self) -> u64 {
        self.points.iter().map(|p| p.value).sum()
    }
}

/// Rolls hourly counts into series for every (repo, kind) of the universe.
pub fn rollup(
    hourly: &[HourlyCount],
    presence: &PresenceLedger,
    universe: &RepoUniverse,
    freq: Freq,
    thresholds: &Thresholds,
) -> Vec<TimeSeries> {
    let mut out: Vec<TimeSeries> = EventKind::ALL
        .into_iter()
        .flat_map(|kind| rollup_partition(hourly, presence, universe, kind, freq, thresholds))
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

/// Rolls up one (kind, freq) partition. Periods cover every period that
/// overlaps the ledger range; values sum counts of present hours only.
pub fn rollup_partition(
    hourly: &[HourlyCount],
    presence: &PresenceLedger,
    universe: &RepoUniverse,
    kind: EventKind,
    freq: Freq,
    thresholds: &Thresholds,
) -> Vec<TimeSeries> {
    let mut periods = Vec::new();
    let mut p = freq.floor(presence.start());
    while p < presence.end() {
        periods.push(p);
        p = freq.advance(p, 1);
    }
    let index: HashMap<Timestamp, usize> = periods.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let complete: Vec<bool> = periods
        .iter()
        .map(|&p| {
            let end = freq.period_end(p);
            thresholds.is_complete(freq, presence.present_hours_in(p, end), freq.hours_in(p))
        })
        .collect();

    let mut sums: HashMap<&str, Vec<u64>> = universe
        .repos()
        .iter()
        .map(|r| (r.as_str(), vec![0; periods.len()]))
        .collect();
    for c in hourly.iter().filter(|c| c.kind == kind && presence.is_present(c.hour)) {
        if let (Some(row), Some(&i)) = (sums.get_mut(c.repo.as_str()), index.get(&freq.floor(c.hour))) {
            row[i] += c.count;
        }
    }

    let mut repos: Vec<&String> = universe.repos().iter().collect();
    repos.sort();
    repos
        .into_iter()
        .map(|repo| {
            let values = &sums[repo.as_str()];
            TimeSeries {
                key: SeriesKey::new(repo.clone(), kind, freq),
                points: periods
                    .iter()
                    .zip(values)
                    .zip(&complete)
                    .map(|((&period_start, &value), &complete)| Point {
                        period_start,
                        value,
                        complete,
                    })
                    .collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Low,
    Mid,
    High,
}

impl Stratum {
    pub const ALL: [Stratum; 3] = [Stratum::Low, Stratum::Mid, Stratum::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Low => "low",
            Stratum::Mid => "mid",
            Stratum::High => "high",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stratum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stratum::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown stratum `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumLabel {
    pub repo: String,
    pub kind: EventKind,
    pub total: u64,
    pub stratum: Stratum,
}

/// An (event kind, activity stratum) cell; metrics are medianed per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Subdataset {
    pub kind: EventKind,
    pub stratum: Stratum,
}

impl fmt::Display for Subdataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.stratum)
    }
}

/// Splits (repo, kind) pairs into activity terciles by total hourly volume.
///
/// Pairs are sorted by descending total, ties by repo then kind. The high
/// and low strata each take `round(n / 3)` pairs from their end of the
/// order and the middle stratum takes the rest.
pub fn stratify(panel: &[TimeSeries]) -> Result<Vec<StratumLabel>> {
    let mut pairs: Vec<(&str, EventKind, u64)> = panel
        .iter()
        .filter(|s| s.key.freq == Freq::Hourly)
        .map(|s| (s.key.repo.as_str(), s.key.kind, s.total()))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Invalid("cannot stratify an empty panel".into()));
    }
    pairs.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)).then_with(|| a.1.cmp(&b.1)));
    let n = pairs.len();
    let outer = (n + 1) / 3;
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(i, (repo, kind, total))| StratumLabel {
            repo: repo.to_string(),
            kind,
            total,
            stratum: if i < outer {
                Stratum::High
            } else if i >= n - outer {
                Stratum::Low
            } else {
                Stratum::Mid
            },
        })
        .collect())
}

/// Lookup from (repo, kind) to stratum.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Strata {
    labels: BTreeMap<(String, EventKind), StratumLabel>,
}

impl Strata {
    pub fn new(labels: Vec<StratumLabel>) -> Self {
        Strata {
            labels: labels.into_iter().map(|l| ((l.repo.clone(), l.kind), l)).collect(),
        }
    }

    pub fn subdataset(&self, repo: &str, kind: EventKind) -> Option<Subdataset> {
        self.labels.get(&(repo.to_string(), kind)).map(|l| Subdataset {
            kind,
            stratum: l.stratum,
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = &StratumLabel> {
        self.labels.values()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["repo", "kind", "total", "stratum"]).expect("in-memory write");
        for l in self.labels() {
            w.write_record([l.repo.as_str(), l.kind.as_str(), &l.total.to_string(), l.stratum.as_str()])
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut labels = Vec::new();
        for row in csv::Reader::from_reader(bytes).deserialize::<StratumLabel>() {
            labels.push(row.map_err(|e| Error::Invalid(format!("strata row: {e}")))?);
        }
        Ok(Strata::new(labels))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PanelRow {
    repo: String,
    period_start: String,
    value: u64,
    complete: bool,
}

/// Serializes a (kind, freq) partition: header `repo,period_start,value,complete`,
/// rows ordered by repo then period.
pub fn partition_to_csv(series: &[&TimeSeries]) -> Vec<u8> {
    let mut sorted: Vec<&&TimeSeries> = series.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["repo", "period_start", "value", "complete"])
        .expect("in-memory write");
    for s in sorted {
        for p in &s.points {
            w.serialize(PanelRow {
                repo: s.key.repo.clone(),
                period_start: format_ts(p.period_start),
                value: p.value,
                complete: p.complete,
            })
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn partition_from_csv(bytes: &[u8], kind: EventKind, freq: Freq) -> Result<Vec<TimeSeries>> {
    let mut by_repo: BTreeMap<String, Vec<Point>> = BTreeMap::new();
    for row in csv::Reader::from_reader(bytes).deserialize::<PanelRow>() {
        let row = row.map_err(|e| Error::Invalid(format!("panel row: {e}")))?;
        by_repo.entry(row.repo).or_default().push(Point {
            period_start: parse_ts(&row.period_start)?,
            value: row.value,
            complete: row.complete,
        });
    }
    by_repo
        .into_iter()
        .map(|(repo, points)| {
            if points.windows(2).any(|w| w[0].period_start >= w[1].period_start)
                || points.iter().any(|p| !freq.is_aligned(p.period_start))
            {
                return Err(Error::Invalid(format!(
                    "series {repo}/{kind}/{freq} has unordered or misaligned periods"
                )));
            }
            Ok(TimeSeries {
                key: SeriesKey::new(repo, kind, freq),
                points,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub freq: Freq,
    pub kind: EventKind,
    /// Relative to the panel directory.
    pub path: String,
    pub rows: usize,
    pub sha256: String,
}

/// Lists every partition with its row count and content hash.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelManifest {
    pub partitions: Vec<PartitionEntry>,
}

impl PanelManifest {
    pub fn entry(freq: Freq, kind: EventKind, bytes: &[u8]) -> PartitionEntry {
        let rows = bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(1);
        PartitionEntry {
            freq,
            kind,
            path: partition_path(freq, kind),
            rows,
            sha256: sha256_hex(bytes),
        }
    }

    /// Combined hash of all partitions of one frequency.
    pub fn freq_hash(&self, freq: Freq) -> String {
        crate::store::hash_parts(
            self.partitions
                .iter()
                .filter(|p| p.freq == freq)
                .flat_map(|p| [p.path.as_str(), p.sha256.as_str()]),
        )
    }
}

pub fn partition_path(freq: Freq, kind: EventKind) -> String {
    format!("{freq}/{kind}.csv")
}

/// In-memory panel indexed by series key.
#[derive(Debug, Clone, Default)]
pub struct PanelStore {
    series: BTreeMap<SeriesKey, TimeSeries>,
}

impl PanelStore {
    pub fn new(series: impl IntoIterator<Item = TimeSeries>) -> Self {
        PanelStore {
            series: series.into_iter().map(|s| (s.key.clone(), s)).collect(),
        }
    }

    pub fn insert(&mut self, series: TimeSeries) {
        self.series.insert(series.key.clone(), series);
    }

    pub fn get(&self, key: &SeriesKey) -> Option<&TimeSeries> {
        self.series.get(key)
    }

    pub fn series(&self, freq: Freq) -> impl Iterator<Item = &TimeSeries> {
        self.series.values().filter(move |s| s.key.freq == freq)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Latest period start present for `freq`, complete or not.
    pub fn data_end(&self, freq: Freq) -> Option<Timestamp> {
        self.series(freq).filter_map(|s| s.points.last()).map(|p| p.period_start).max()
    }

    /// At most `max_len` most recent complete periods lying wholly before
    /// `end`, in time order. Incomplete periods are dropped before truncation.
    pub fn read_window(&self, key: &SeriesKey, end: Timestamp, max_len: usize) -> Result<Vec<Point>> {
        let series = self
            .get(key)
            .ok_or_else(|| Error::UnknownSeries(key.to_string()))?;
        let freq = key.freq;
        let eligible: Vec<Point> = series
            .complete_points()
            .filter(|p| freq.period_end(p.period_start) <= end)
            .copied()
            .collect();
        let skip = eligible.len().saturating_sub(max_len);
        Ok(eligible[skip..].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        parse_ts(s).unwrap()
    }

    fn universe() -> RepoUniverse {
        RepoUniverse::from_repos(vec!["o/a".into(), "o/b".into()], "test").unwrap()
    }

    /// Ledger over `[start, start + hours)` where `missing` hour offsets are absent.
    fn ledger(start: &str, hours: i64, missing: &[i64]) -> PresenceLedger {
        let s = ts(start);
        PresenceLedger::new(
            s,
            s + chrono::Duration::hours(hours),
            (0..hours).map(|i| HourPresence {
                hour: s + chrono::Duration::hours(i),
                status: if missing.contains(&i) {
                    PresenceStatus::Missing
                } else {
                    PresenceStatus::Present
                },
            }),
        )
        .unwrap()
    }

    fn count(repo: &str, kind: EventKind, hour: Timestamp, n: u64) -> HourlyCount {
        HourlyCount { repo: repo.into(), kind, hour, count: n }
    }

    #[test]
    fn daily_threshold_boundaries() {
        // day one misses 2 hours, day two misses 3
        let l = ledger("2026-01-01", 48, &[0, 1, 24, 25, 26]);
        let s = rollup(&[], &l, &universe(), Freq::Daily, &Thresholds::default());
        let pts = &s[0].points;
        assert!(pts[0].complete, "22/24 is complete");
        assert!(!pts[1].complete, "21/24 is incomplete");
    }

    #[test]
    fn weekly_threshold_boundary() {
        // 2026-01-05 is a Monday
        let eight: Vec<i64> = (0..8).collect();
        let nine: Vec<i64> = (0..9).collect();
        let ok = rollup(&[], &ledger("2026-01-05", 168, &eight), &universe(), Freq::Weekly, &Thresholds::default());
        assert!(ok[0].points[0].complete);
        let bad = rollup(&[], &ledger("2026-01-05", 168, &nine), &universe(), Freq::Weekly, &Thresholds::default());
        assert!(!bad[0].points[0].complete);
    }

    #[test]
    fn values_sum_present_hours_only() {
        let l = ledger("2026-01-01", 24, &[5]);
        let day = ts("2026-01-01");
        let counts = vec![
            count("o/a", EventKind::Pushes, day + chrono::Duration::hours(1), 3),
            count("o/a", EventKind::Pushes, day + chrono::Duration::hours(5), 100),
            count("o/a", EventKind::Stars, day, 7),
            count("o/zzz", EventKind::Pushes, day, 9),
        ];
        let s = rollup(&counts, &l, &universe(), Freq::Daily, &Thresholds::default());
        assert_eq!(s.len(), 8, "2 repos x 4 kinds");
        let push = s.iter().find(|x| x.key == SeriesKey::new("o/a", EventKind::Pushes, Freq::Daily)).unwrap();
        assert_eq!(push.points[0].value, 3);
        let hourly = rollup(&counts, &l, &universe(), Freq::Hourly, &Thresholds::default());
        let h = hourly.iter().find(|x| x.key == SeriesKey::new("o/a", EventKind::Pushes, Freq::Hourly)).unwrap();
        assert_eq!(h.points.len(), 24);
        assert!(!h.points[5].complete);
        assert_eq!(h.points[5].value, 0);
    }

    #[test]
    fn partial_leading_period_is_incomplete() {
        // ledger starts on a Thursday; the first ISO week only partially overlaps
        let l = ledger("2026-01-01", 24 * 11, &[]);
        let s = rollup(&[], &l, &universe(), Freq::Weekly, &Thresholds::default());
        assert_eq!(s[0].points[0].period_start, ts("2025-12-29"));
        assert!(!s[0].points[0].complete);
        assert!(s[0].points[1].complete);
    }

    fn hourly_series(repo: &str, kind: EventKind, total: u64) -> TimeSeries {
        TimeSeries {
            key: SeriesKey::new(repo, kind, Freq::Hourly),
            points: vec![Point { period_start: ts("2026-01-01"), value: total, complete: true }],
        }
    }

    fn strata_of(labels: &[StratumLabel]) -> Vec<(u64, Stratum)> {
        labels.iter().map(|l| (l.total, l.stratum)).collect()
    }

    #[test]
    fn stratify_six() {
        let panel: Vec<TimeSeries> = [60, 50, 40, 30, 20, 10]
            .iter()
            .enumerate()
            .map(|(i, &t)| hourly_series(&format!("r{i}"), EventKind::Pushes, t))
            .collect();
        let got = strata_of(&stratify(&panel).unwrap());
        use Stratum::*;
        assert_eq!(got, vec![(60, High), (50, High), (40, Mid), (30, Mid), (20, Low), (10, Low)]);
    }

    #[test]
    fn stratify_two_and_ties() {
        let panel = vec![hourly_series("a", EventKind::Stars, 1), hourly_series("b", EventKind::Stars, 9)];
        let got = strata_of(&stratify(&panel).unwrap());
        assert_eq!(got, vec![(9, Stratum::High), (1, Stratum::Low)]);

        let tied: Vec<TimeSeries> = ["c", "a", "b"].iter().map(|r| hourly_series(r, EventKind::Stars, 5)).collect();
        let labels = stratify(&tied).unwrap();
        let order: Vec<(&str, Stratum)> = labels.iter().map(|l| (l.repo.as_str(), l.stratum)).collect();
        assert_eq!(order, vec![("a", Stratum::High), ("b", Stratum::Mid), ("c", Stratum::Low)]);

        assert!(stratify(&[]).is_err());
    }

    #[test]
    fn stratify_is_a_partition() {
        for n in 1..40 {
            let panel: Vec<TimeSeries> = (0..n).map(|i| hourly_series(&format!("r{i:02}"), EventKind::Pushes, (i * 7 % 13) as u64)).collect();
            let labels = stratify(&panel).unwrap();
            assert_eq!(labels.len(), n);
            let high = labels.iter().filter(|l| l.stratum == Stratum::High).count();
            let low = labels.iter().filter(|l| l.stratum == Stratum::Low).count();
            assert_eq!(high, low);
            assert_eq!(high, (n + 1) / 3);
        }
    }

    fn daily_store(n: usize, incomplete: &[usize]) -> (PanelStore, SeriesKey) {
        let key = SeriesKey::new("o/a", EventKind::Pushes, Freq::Daily);
        let start = ts("2024-01-01");
        let points = (0..n)
            .map(|i| Point {
                period_start: Freq::Daily.advance(start, i as i64),
                value: i as u64,
                complete: !incomplete.contains(&i),
            })
            .collect();
        (PanelStore::new([TimeSeries { key: key.clone(), points }]), key)
    }

    #[test]
    fn read_window_truncates_to_most_recent() {
        let (store, key) = daily_store(600, &[]);
        let end = Freq::Daily.advance(ts("2024-01-01"), 600);
        let w = store.read_window(&key, end, 512).unwrap();
        assert_eq!(w.len(), 512);
        assert_eq!(w.first().unwrap().value, 88);
        assert_eq!(w.last().unwrap().value, 599);
    }

    #[test]
    fn read_window_edges() {
        let (store, key) = daily_store(10, &[3, 7]);
        let w = store.read_window(&key, ts("2030-01-01"), 100).unwrap();
        assert_eq!(w.len(), 8);
        assert!(store.read_window(&key, ts("2023-01-01"), 100).unwrap().is_empty());
        let unknown = SeriesKey::new("x/y", EventKind::Pushes, Freq::Daily);
        assert!(matches!(store.read_window(&unknown, ts("2030-01-01"), 5), Err(Error::UnknownSeries(_))));
        // a period that ends after `end` is excluded even if it starts before
        let w = store.read_window(&key, ts("2024-01-02T12:00:00Z"), 100).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn partition_round_trip() {
        let l = ledger("2026-01-01", 72, &[30]);
        let counts = vec![count("o/b", EventKind::Pushes, ts("2026-01-02T03:00:00Z"), 4)];
        let s = rollup_partition(&counts, &l, &universe(), EventKind::Pushes, Freq::Daily, &Thresholds::default());
        let refs: Vec<&TimeSeries> = s.iter().collect();
        let bytes = partition_to_csv(&refs);
        assert!(bytes.starts_with(b"repo,period_start,value,complete\no/a,2026-01-01T00:00:00Z,0,true\n"));
        assert_eq!(partition_from_csv(&bytes, EventKind::Pushes, Freq::Daily).unwrap(), s);
        let entry = PanelManifest::entry(Freq::Daily, EventKind::Pushes, &bytes);
        assert_eq!(entry.rows, 6);
        assert_eq!(entry.path, "daily/pushes.csv");
    }

    #[test]
    fn ledger_validation() {
        let s = ts("2026-01-01");
        assert!(PresenceLedger::new(s, s + chrono::Duration::hours(2), []).is_err());
        let l = ledger("2026-01-01", 3, &[1]);
        assert_eq!(l.status(ts("2026-01-01T01:00:00Z")), PresenceStatus::Missing);
        assert_eq!(l.status(ts("2027-01-01")), PresenceStatus::Missing);
        assert!(l.to_csv().starts_with(b"hour,status\n2026-01-01T00:00:00Z,present\n"));
    }
}
