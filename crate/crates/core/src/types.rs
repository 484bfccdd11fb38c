//! Shared domain vocabulary: event kinds, frequencies, series keys and
//! UTC period arithmetic.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, Months, NaiveDate, SecondsFormat, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    IssuesOpened,
    PrsOpened,
    Pushes,
    Stars,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::IssuesOpened,
        EventKind::PrsOpened,
        EventKind::Pushes,
        EventKind::Stars,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::IssuesOpened => "issues_opened",
            EventKind::PrsOpened => "prs_opened",
            EventKind::Pushes => "pushes",
            EventKind::Stars => "stars",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown event kind `{s}`")))
    }
}

/// Series frequency. Periods are aligned to UTC hours, UTC days, ISO weeks
/// (Monday 00:00 UTC) and calendar months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Freq {
    Hourly,
    Daily,
    Weekly,
    Monthly,
}

impl Freq {
    pub const ALL: [Freq; 4] = [Freq::Hourly, Freq::Daily, Freq::Weekly, Freq::Monthly];

    pub fn as_str(self) -> &'static str {
        match self {
            Freq::Hourly => "hourly",
            Freq::Daily => "daily",
            Freq::Weekly => "weekly",
            Freq::Monthly => "monthly",
        }
    }

    /// Start of the period containing `ts`.
    pub fn floor(self, ts: Timestamp) -> Timestamp {
        let hour = ts
            .with_nanosecond(0)
            .and_then(|t| t.with_second(0))
            .and_then(|t| t.with_minute(0))
            .expect("zeroing sub-hour fields is always valid");
        let day = midnight(hour.date_naive());
        match self {
            Freq::Hourly => hour,
            Freq::Daily => day,
            Freq::Weekly => day - Duration::days(i64::from(day.weekday().num_days_from_monday())),
            Freq::Monthly => midnight(
                NaiveDate::from_ymd_opt(ts.year(), ts.month(), 1).expect("first of month exists"),
            ),
        }
    }

    /// Smallest period boundary at or after `ts`.
    pub fn ceil(self, ts: Timestamp) -> Timestamp {
        let start = self.floor(ts);
        if start == ts {
            start
        } else {
            self.advance(start, 1)
        }
    }

    pub fn is_aligned(self, ts: Timestamp) -> bool {
        self.floor(ts) == ts
    }

    /// Moves a period start by `n` periods (negative moves back).
    pub fn advance(self, ts: Timestamp, n: i64) -> Timestamp {
        match self {
            Freq::Hourly => ts + Duration::hours(n),
            Freq::Daily => ts + Duration::days(n),
            Freq::Weekly => ts + Duration::weeks(n),
            Freq::Monthly => {
                let months = Months::new(n.unsigned_abs() as u32);
                if n >= 0 {
                    ts.checked_add_months(months)
                } else {
                    ts.checked_sub_months(months)
                }
                .expect("month arithmetic stays in chrono range")
            }
        }
    }

    pub fn period_end(self, start: Timestamp) -> Timestamp {
        self.advance(start, 1)
    }

    /// Number of constituent hours of the period starting at `start`.
    pub fn hours_in(self, start: Timestamp) -> i64 {
        (self.period_end(start) - start).num_hours()
    }
}

impl fmt::Display for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Freq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Freq::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown frequency `{s}`")))
    }
}

/// One (repository, event kind, frequency) count series.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub repo: String,
    pub kind: EventKind,
    pub freq: Freq,
}

impl SeriesKey {
    pub fn new(repo: impl Into<String>, kind: EventKind, freq: Freq) -> Self {
        SeriesKey {
            repo: repo.into(),
            kind,
            freq,
        }
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.repo, self.kind, self.freq)
    }
}

fn midnight(date: NaiveDate) -> Timestamp {
    Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight exists"))
}

/// RFC 3339 with second precision and a `Z` suffix.
pub fn format_ts(ts: Timestamp) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Compact form used in artifact paths, e.g. `20260104T000000Z`.
pub fn path_stamp(ts: Timestamp) -> String {
    ts.format("%Y%m%dT%H%M%SZ").to_string()
}

pub fn parse_path_stamp(s: &str) -> Result<Timestamp> {
    chrono::NaiveDateTime::parse_from_str(s, "%Y%m%dT%H%M%SZ")
        .map(|n| Utc.from_utc_datetime(&n))
        .map_err(|e| Error::Invalid(format!("bad path stamp `{s}`: {e}")))
}

/// Accepts RFC 3339 timestamps or bare `YYYY-MM-DD` dates (midnight UTC).
pub fn parse_ts(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Ok(ts.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(midnight)
        .map_err(|_| Error::Invalid(format!("cannot parse timestamp `{s}`")))
}
