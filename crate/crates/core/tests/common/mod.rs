//! Deterministic fixture tree: a universe file, sixty days of synthetic
//! hourly archive files and a run config.

#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, Timelike};
use flate2::write::GzEncoder;
use flate2::Compression;
use livebench::ingest::archive_file_name;
use livebench::orchestrator::{Orchestrator, RunConfig};
use livebench::types::{parse_ts, Timestamp};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;
use tempfile::TempDir;

pub const START: &str = "2026-01-01T00:00:00Z";
pub const END: &str = "2026-03-02T00:00:00Z";
pub const HOURS: usize = 60 * 24;
pub const UNIVERSE_FILE_REPOS: usize = 26;
pub const UNIVERSE_SIZE: usize = 24;

/// Hour indices with no archive file.
pub const MISSING_HOURS: [usize; 6] = [100, 101, 1100, 1200, 1201, 1202];
/// Hour whose file is not gzip at all.
pub const GARBAGE_HOUR: usize = 300;
/// Hour whose gzip stream is cut short.
pub const TRUNCATED_HOUR: usize = 900;
/// Hour containing one undecodable line.
pub const BAD_LINE_HOUR: usize = 50;

pub fn repo_name(i: usize) -> String {
    format!("org{}/proj{i:02}", i % 5)
}

pub fn hour_at(i: usize) -> Timestamp {
    parse_ts(START).unwrap() + Duration::hours(i as i64)
}

fn poisson(rng: &mut StdRng, lambda: f64) -> u32 {
    let limit = (-lambda).exp();
    let mut k = 0;
    let mut p = rng.random::<f64>();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

fn event(kind: &str, repo: &str, action: Option<&str>, actor: &str) -> serde_json::Value {
    let payload = match action {
        Some(a) => json!({ "action": a, "number": 1 }),
        None => json!({ "size": 1 }),
    };
    json!({
        "id": "1",
        "type": kind,
        "actor": { "login": actor },
        "repo": { "name": repo },
        "payload": payload,
        "public": true,
    })
}

/// Newline-delimited events of hour `i`.
pub fn hour_lines(i: usize) -> Vec<String> {
    let hour = hour_at(i);
    let mut rng = StdRng::seed_from_u64(0x5eed_0000 + i as u64);
    let hod = hour.hour() as f64;
    let daily = 1.0 + 0.6 * (2.0 * std::f64::consts::PI * (hod - 8.0) / 24.0).sin();
    let weekly = if hour.weekday().num_days_from_monday() >= 5 { 0.6 } else { 1.0 };
    let kinds = [
        ("IssuesEvent", Some("opened"), 0.6),
        ("PullRequestEvent", Some("opened"), 0.4),
        ("PushEvent", None, 1.5),
        ("WatchEvent", Some("started"), 1.0),
    ];
    let mut lines = Vec::new();
    for r in 0..UNIVERSE_FILE_REPOS {
        let repo = repo_name(r);
        let base = 3.0 * 0.85f64.powi(r as i32) * daily * weekly;
        for (ty, action, factor) in kinds {
            for _ in 0..poisson(&mut rng, base * factor) {
                let actor = if rng.random::<f64>() < 0.1 { "dependabot[bot]" } else { "someone" };
                lines.push(event(ty, &repo, action, actor).to_string());
            }
        }
        if rng.random::<f64>() < 0.3 {
            lines.push(event("IssuesEvent", &repo, Some("closed"), "someone").to_string());
            lines.push(event("PullRequestEvent", &repo, Some("closed"), "someone").to_string());
            lines.push(event("ForkEvent", &repo, None, "someone").to_string());
        }
    }
    lines.push(event("WatchEvent", "elsewhere/noise", Some("started"), "someone").to_string());
    if i == BAD_LINE_HOUR {
        lines.insert(lines.len() / 2, "{\"type\": \"IssuesEvent\", broken".to_string());
    }
    lines
}

fn gzip(text: &str) -> Vec<u8> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
    enc.write_all(text.as_bytes()).unwrap();
    enc.finish().unwrap()
}

pub fn write_archive(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..HOURS {
        if MISSING_HOURS.contains(&i) {
            continue;
        }
        let path = dir.join(archive_file_name(hour_at(i)));
        let bytes = match i {
            GARBAGE_HOUR => b"this is not an archive file".to_vec(),
            TRUNCATED_HOUR => {
                let full = gzip(&(hour_lines(i).join("\n") + "\n"));
                full[..full.len() / 2].to_vec()
            }
            _ => gzip(&(hour_lines(i).join("\n") + "\n")),
        };
        std::fs::write(path, bytes).unwrap();
    }
}

pub fn write_universe(path: &Path) {
    let mut text = String::from("# selected_at: 2025-12-31T00:00:00Z\nrepo,stars\n");
    for r in 0..UNIVERSE_FILE_REPOS {
        text.push_str(&format!("{},{}\n", repo_name(r), 10_000 - 100 * r));
    }
    std::fs::write(path, text).unwrap();
}

pub struct Fixture {
    pub dir: TempDir,
}

impl Fixture {
    /// A fresh tree for `freqs` and the model roster `models`.
    pub fn new(freqs: &[&str], models: &[&str]) -> Self {
        let dir = TempDir::new().unwrap();
        write_universe(&dir.path().join("universe.csv"));
        write_archive(&dir.path().join("archive"));
        let quote = |v: &[&str]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ");
        let config = format!(
            "data_root = \"artifacts\"\narchive_dir = \"archive\"\nstart = \"{START}\"\nend = \"{END}\"\n\
             universe_file = \"universe.csv\"\nuniverse_size = {UNIVERSE_SIZE}\nworkers = 4\n\
             freqs = [{}]\nmodels = [{}]\n",
            quote(freqs),
            quote(models)
        );
        std::fs::write(dir.path().join("livebench.toml"), config).unwrap();
        Fixture { dir }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn config_path(&self) -> PathBuf {
        self.root().join("livebench.toml")
    }

    pub fn data_root(&self) -> PathBuf {
        self.root().join("artifacts")
    }

    pub fn config(&self) -> RunConfig {
        RunConfig::load(&self.config_path()).unwrap()
    }

    pub fn orchestrator(&self, force: bool) -> Orchestrator {
        Orchestrator::new(self.config(), force).unwrap()
    }
}

/// Every file under `root` with its size and modification time.
pub fn snapshot(root: &Path) -> std::collections::BTreeMap<PathBuf, (u64, std::time::SystemTime)> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let entry = entry.unwrap();
            let meta = entry.metadata().unwrap();
            if meta.is_dir() {
                stack.push(entry.path());
            } else {
                let rel = entry.path().strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, (meta.len(), meta.modified().unwrap()));
            }
        }
    }
    out
}
