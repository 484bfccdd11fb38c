//! GH Archive ingestion: decode one hourly gzip archive, keep the four
//! tracked event kinds for in-universe repositories, and emit per-hour counts
//! together with the hour's presence status.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, ErrorKind, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{format_ts, parse_ts, EventKind, Timestamp};

pub const ARCHIVE_BASE_URL: &str = "https://data.gharchive.org";

/// Matching rule for one tracked event kind: archive `type` plus an
/// optional required `payload.action`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEventFilter {
    pub kind: EventKind,
    pub event_type: &'static str,
    pub action: Option<&'static str>,
}

pub const EVENT_FILTERS: [RawEventFilter; 4] = [
    RawEventFilter {
        kind: EventKind::IssuesOpened,
        event_type: "IssuesEvent",
        action: Some("opened"),
    },
    RawEventFilter {
        kind: EventKind::PrsOpened,
        event_type: "PullRequestEvent",
        action: Some("opened"),
    },
    RawEventFilter {
        kind: EventKind::Pushes,
        event_type: "PushEvent",
        action: None,
    },
    RawEventFilter {
        kind: EventKind::Stars,
        event_type: "WatchEvent",
        action: Some("started"),
    },
];

impl RawEventFilter {
    pub fn matches(&self, event_type: &str, action: Option<&str>) -> bool {
        self.event_type == event_type && self.action.is_none_or(|a| action == Some(a))
    }
}

/// The subset of an archive record the ingester reads. Unknown fields are
/// ignored.
#[derive(Debug, Clone, Deserialize)]
pub struct ArchiveRecord {
    #[serde(rename = "type")]
    pub event_type: String,
    #[serde(default)]
    pub repo: Option<RepoRef>,
    #[serde(default)]
    pub actor: Option<ActorRef>,
    #[serde(default)]
    pub payload: Option<Payload>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RepoRef {
    pub name: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ActorRef {
    #[serde(default)]
    pub login: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Payload {
    #[serde(default)]
    pub action: Option<String>,
}

impl ArchiveRecord {
    pub fn action(&self) -> Option<&str> {
        self.payload.as_ref().and_then(|p| p.action.as_deref())
    }

    fn is_bot(&self) -> bool {
        self.actor
            .as_ref()
            .and_then(|a| a.login.as_deref())
            .is_some_and(|login| login.ends_with("[bot]"))
    }
}

pub fn classify_event(record: &ArchiveRecord) -> Option<EventKind> {
    let action = record.action();
    EVENT_FILTERS
        .iter()
        .find(|f| f.matches(&record.event_type, action))
        .map(|f| f.kind)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HourlyCount {
    pub repo: String,
    pub kind: EventKind,
    pub hour: Timestamp,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresenceStatus {
    Present,
    Missing,
    Malformed,
}

impl PresenceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PresenceStatus::Present => "present",
            PresenceStatus::Missing => "missing",
            PresenceStatus::Malformed => "malformed",
        }
    }
}

impl fmt::Display for PresenceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresenceStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "present" => Ok(PresenceStatus::Present),
            "missing" => Ok(PresenceStatus::Missing),
            "malformed" => Ok(PresenceStatus::Malformed),
            other => Err(Error::Invalid(format!("unknown presence status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourPresence {
    pub hour: Timestamp,
    pub status: PresenceStatus,
}

/// Repositories tracked by a benchmark instance, in rank order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoUniverse {
    repos: Vec<String>,
    members: HashSet<String>,
    pub selected_at: Option<Timestamp>,
    pub criterion: String,
}

impl RepoUniverse {
    pub fn from_repos(repos: Vec<String>, criterion: impl Into<String>) -> Result<Self> {
        let members: HashSet<String> = repos.iter().cloned().collect();
        if members.len() != repos.len() {
            return Err(Error::Invalid("universe contains duplicate repositories".into()));
        }
        Ok(RepoUniverse {
            repos,
            members,
            selected_at: None,
            criterion: criterion.into(),
        })
    }

    pub fn repos(&self) -> &[String] {
        &self.repos
    }

    pub fn len(&self) -> usize {
        self.repos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.repos.is_empty()
    }

    pub fn contains(&self, repo: &str) -> bool {
        self.members.contains(repo)
    }
}

#[derive(Debug, Deserialize)]
struct UniverseEntry {
    repo: String,
    stars: u64,
}

/// Loads a universe file and keeps the top `size` repositories by star
/// count, ties broken by name.
///
/// The file is CSV with a `repo,stars` header. An optional leading comment
/// `# selected_at: <RFC 3339>` records when the star counts were taken.
pub fn load_universe(path: &Path, size: usize) -> Result<RepoUniverse> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_universe(&text, size).map_err(|e| match e {
        Error::Invalid(msg) => Error::decode(path, msg),
        other => other,
    })
}

pub fn parse_universe(text: &str, size: usize) -> Result<RepoUniverse> {
    let selected_at = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("selected_at:"))
        .map(parse_ts)
        .transpose()?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for row in reader.deserialize::<UniverseEntry>() {
        entries.push(row.map_err(|e| Error::Invalid(format!("universe entry: {e}")))?);
    }
    let mut seen = HashSet::new();
    if let Some(dup) = entries.iter().find(|e| !seen.insert(e.repo.as_str())) {
        return Err(Error::Invalid(format!("duplicate universe entry `{}`", dup.repo)));
    }
    if entries.len() < size {
        return Err(Error::UniverseDeficit {
            need: size,
            have: entries.len(),
        });
    }
    entries.sort_by(|a, b| b.stars.cmp(&a.stars).then_with(|| a.repo.cmp(&b.repo)));
    let repos = entries.into_iter().take(size).map(|e| e.repo).collect();
    let mut universe = RepoUniverse::from_repos(repos, format!("top {size} repositories by star count"))?;
    universe.selected_at = selected_at;
    Ok(universe)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Drop events whose actor login ends in `[bot]`. Off by default.
    pub exclude_bots: bool,
}

/// Result of ingesting one archive hour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourIngest {
    pub hour: Timestamp,
    pub status: PresenceStatus,
    /// Sorted by (repo, kind); only non-zero pairs.
    pub counts: Vec<HourlyCount>,
    /// Lines that failed to decode as a record and were skipped.
    pub skipped_lines: u64,
}

impl HourIngest {
    pub fn missing(hour: Timestamp) -> Self {
        HourIngest {
            hour,
            status: PresenceStatus::Missing,
            counts: Vec::new(),
            skipped_lines: 0,
        }
    }

    pub fn presence(&self) -> HourPresence {
        HourPresence {
            hour: self.hour,
            status: self.status,
        }
    }
}

/// Decodes one gzip-compressed newline-delimited archive hour.
///
/// Lines that fail to decode are tallied and skipped. A decompression or
/// read failure aborts the hour: it is marked malformed and its counts are
/// discarded.
pub fn parse_archive_hour<R: Read>(
    stream: R,
    hour: Timestamp,
    universe: &RepoUniverse,
    opts: IngestOptions,
) -> HourIngest {
    let mut reader = BufReader::new(MultiGzDecoder::new(stream));
    let mut tally: BTreeMap<(String, EventKind), u64> = BTreeMap::new();
    let mut skipped = 0u64;
    let mut line = Vec::new();
    loop {
        line.clear();
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                log::warn!("archive hour {} is malformed: {e}", format_ts(hour));
                return HourIngest {
                    hour,
                    status: PresenceStatus::Malformed,
                    counts: Vec::new(),
                    skipped_lines: skipped,
                };
            }
        }
        let trimmed = line.trim_ascii();
        if trimmed.is_empty() {
            continue;
        }
        let record: ArchiveRecord = match serde_json::from_slice(trimmed) {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let Some(kind) = classify_event(&record) else {
            continue;
        };
        let Some(repo) = record.repo.as_ref().map(|r| r.name.as_str()) else {
            continue;
        };
        if !universe.contains(repo) || (opts.exclude_bots && record.is_bot()) {
            continue;
        }
        *tally.entry((repo.to_string(), kind)).or_insert(0) += 1;
    }
    HourIngest {
        hour,
        status: PresenceStatus::Present,
        counts: tally
            .into_iter()
            .map(|((repo, kind), count)| HourlyCount {
                repo,
                kind,
                hour,
                count,
            })
            .collect(),
        skipped_lines: skipped,
    }
}

/// Archive file name for an hour, e.g. `2026-01-04-7.json.gz`.
pub fn archive_file_name(hour: Timestamp) -> String {
    format!("{}-{}.json.gz", hour.format("%Y-%m-%d"), hour.format("%-H"))
}

pub fn archive_url(hour: Timestamp) -> String {
    format!("{ARCHIVE_BASE_URL}/{}", archive_file_name(hour))
}

/// A local directory mirroring the archive's flat file layout.
#[derive(Debug, Clone)]
pub struct ArchiveDir {
    pub root: PathBuf,
}

impl ArchiveDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArchiveDir { root: root.into() }
    }

    pub fn path_for(&self, hour: Timestamp) -> PathBuf {
        self.root.join(archive_file_name(hour))
    }

    /// Ingests one hour; an absent or unreadable file yields a missing hour.
    pub fn ingest_hour(&self, hour: Timestamp, universe: &RepoUniverse, opts: IngestOptions) -> HourIngest {
        let path = self.path_for(hour);
        match File::open(&path) {
            Ok(file) => parse_archive_hour(file, hour, universe, opts),
            Err(e) => {
                if e.kind() != ErrorKind::NotFound {
                    log::warn!("cannot read {}: {e}", path.display());
                }
                HourIngest::missing(hour)
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    repo: String,
    kind: EventKind,
    hour: String,
    count: u64,
}

/// Serializes an ingested hour: a `# hour=… status=… skipped=…` presence
/// line, then CSV with header `repo,kind,hour,count`.
pub fn write_hour_file(hour: &HourIngest) -> Vec<u8> {
    let mut out = format!(
        "# hour={} status={} skipped={}\n",
        format_ts(hour.hour),
        hour.status,
        hour.skipped_lines
    )
    .into_bytes();
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer
        .write_record(["repo", "kind", "hour", "count"])
        .expect("in-memory write");
    for c in &hour.counts {
        writer
            .serialize(CountRow {
                repo: c.repo.clone(),
                kind: c.kind,
                hour: format_ts(c.hour),
                count: c.count,
            })
            .expect("in-memory write");
    }
    out.extend(writer.into_inner().expect("in-memory flush"));
    out
}

pub fn read_hour_file(bytes: &[u8]) -> Result<HourIngest> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))?;
    let (header, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::Invalid("hour file lacks a presence line".into()))?;
    let mut hour = None;
    let mut status = None;
    let mut skipped = 0;
    for field in header.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("hour", v)) => hour = Some(parse_ts(v)?),
            Some(("status", v)) => status = Some(v.parse()?),
            Some(("skipped", v)) => {
                skipped = v.parse().map_err(|_| Error::Invalid(format!("bad skip tally `{v}`")))?
            }
            _ => {}
        }
    }
    let (Some(hour), Some(status)) = (hour, status) else {
        return Err(Error::Invalid("incomplete presence line".into()));
    };
    let mut counts = Vec::new();
    for row in csv::Reader::from_reader(body.as_bytes()).deserialize::<CountRow>() {
        let row = row.map_err(|e| Error::Invalid(e.to_string()))?;
        counts.push(HourlyCount {
            repo: row.repo,
            kind: row.kind,
            hour: parse_ts(&row.hour)?,
            count: row.count,
        });
    }
    Ok(HourIngest {
        hour,
        status,
        counts,
        skipped_lines: skipped,
    })
}
