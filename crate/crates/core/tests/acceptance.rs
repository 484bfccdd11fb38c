//! Acceptance suite. Each criterion prints one `PASS` or `FAIL` line with its
//! wall time; the process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::Duration as Span;
use livebench::baselines::{seasonal_naive, zero_forecast};
use livebench::descriptors::{permutation_entropy, power_spectrum, spectral_centroid, spectral_entropy};
use livebench::evaluate::{ground_truth, score, FloorTable, RawScore};
use livebench::ingest::{HourPresence, HourlyCount, PresenceStatus, RepoUniverse};
use livebench::leaderboard::{build_leaderboard, hierarchical_mean_rank};
use livebench::metrics::{compute_floor, crps, mase, pinball, scale, Metric, MetricRecord};
use livebench::orchestrator::{layout, StageReport};
use livebench::panel::{rollup_partition, PanelStore, Point, PresenceLedger, Stratum, Subdataset, Thresholds, TimeSeries};
use livebench::protocol::{build_job, generate_cutoffs, quantile_levels, validate_forecast, CutoffSpec, ForecastJob};
use livebench::types::{format_ts, parse_ts, EventKind, Freq, SeriesKey, Timestamp};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ts(s: &str) -> Timestamp {
    parse_ts(s).unwrap()
}

// ---- protocol parameters ---------------------------------------------------

fn unit(freq: Freq) -> &'static str {
    match freq {
        Freq::Hourly => "h",
        Freq::Daily => "d",
        Freq::Weekly => "w",
        Freq::Monthly => "mo",
    }
}

fn render_schedule(spec: &CutoffSpec, data_end: Timestamp) -> String {
    let join = |v: &[Timestamp]| v.iter().map(|&t| format_ts(t)).collect::<Vec<_>>().join(" ");
    let schedule: Vec<Timestamp> = (0..5).map(|k| spec.cutoff(k)).collect();
    let targets = spec.target_periods(spec.first_cutoff);
    format!(
        "{} h={} context={} step={}{} first={}\n  schedule: {}\n  first targets: {} .. {} ({})\n  data_end {}: {}\n",
        spec.freq,
        spec.horizon,
        spec.max_context,
        spec.step,
        unit(spec.freq),
        format_ts(spec.first_cutoff),
        join(&schedule),
        format_ts(targets[0]),
        format_ts(*targets.last().unwrap()),
        targets.len(),
        format_ts(data_end),
        join(&generate_cutoffs(spec, data_end)),
    )
}

fn protocol_parameters() -> Outcome {
    let ends = [
        (Freq::Hourly, "2026-02-12T23:00:00Z"),
        (Freq::Daily, "2026-02-07"),
        (Freq::Weekly, "2026-02-02"),
        (Freq::Monthly, "2026-02-01"),
    ];
    let mut text = String::new();
    for (freq, end) in ends {
        text.push_str(&render_schedule(&CutoffSpec::default_for(freq), ts(end)));
    }
    let golden = include_str!("golden/cutoff_schedule.txt");
    ensure!(text == golden, "schedule differs from golden file:\n{text}");
    let config = livebench::orchestrator::RunConfig::parse(&livebench::orchestrator::default_config_toml(), std::path::Path::new("."))
        .map_err(|e| e.to_string())?;
    for spec in CutoffSpec::defaults() {
        ensure!(config.spec(spec.freq) == &spec, "default config disagrees for {}", spec.freq);
    }
    Ok("4 schedules match".into())
}

// ---- leak-proofness --------------------------------------------------------

fn synthetic_panel(rng: &mut StdRng, repos: usize) -> PanelStore {
    let spans = [
        (Freq::Hourly, "2025-12-01", "2026-03-01"),
        (Freq::Daily, "2024-06-01", "2026-03-01"),
        (Freq::Weekly, "2023-06-05", "2026-03-02"),
        (Freq::Monthly, "2023-01-01", "2026-04-01"),
    ];
    let mut store = PanelStore::default();
    for (freq, from, to) in spans {
        for r in 0..repos {
            for kind in EventKind::ALL {
                let mut points = Vec::new();
                let mut p = ts(from);
                while p < ts(to) {
                    points.push(Point {
                        period_start: p,
                        value: rng.random_range(0..50),
                        complete: rng.random::<f64>() > 0.05,
                    });
                    p = freq.advance(p, 1);
                }
                store.insert(TimeSeries {
                    key: SeriesKey::new(format!("o/r{r}"), kind, freq),
                    points,
                });
            }
        }
    }
    store
}

fn synthetic_jobs(store: &PanelStore) -> Result<Vec<(CutoffSpec, livebench::protocol::BuiltJob)>, String> {
    let mut out = Vec::new();
    for spec in CutoffSpec::defaults() {
        let freq = spec.freq;
        let mut cutoffs = generate_cutoffs(&spec, store.data_end(freq).unwrap());
        let shifted: Vec<Timestamp> = cutoffs.iter().take(3).map(|&c| c + Span::minutes(13 * 60 + 7)).collect();
        cutoffs.extend(shifted);
        for cutoff in cutoffs {
            for s in store.series(freq) {
                if let Some(b) = build_job(&s.key, cutoff, &spec, store).map_err(|e| e.to_string())? {
                    out.push((spec.clone(), b));
                }
            }
        }
    }
    Ok(out)
}

fn leak_proofness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let store = synthetic_panel(&mut rng, 6);
    let jobs = synthetic_jobs(&store)?;
    let mut per_freq: BTreeMap<Freq, usize> = BTreeMap::new();
    for (spec, b) in &jobs {
        let freq = spec.freq;
        let job = &b.job;
        *per_freq.entry(freq).or_default() += 1;
        let series = store.get(&job.key()).unwrap();
        ensure!(job.context.len() == b.context_periods.len() && job.context.len() <= spec.max_context, "context length of {}", job.job_id);
        for (&p, &v) in b.context_periods.iter().zip(&job.context) {
            ensure!(freq.period_end(p) <= job.cutoff, "{freq} job at {} uses period {} ending after it", format_ts(job.cutoff), format_ts(p));
            let point = series.point_at(p).unwrap();
            ensure!(point.complete && point.value as f64 == v, "context value at {} is not the panel's complete value", format_ts(p));
        }
        ensure!(b.context_periods.windows(2).all(|w| w[0] < w[1]), "context out of order");
        ensure!(spec.target_periods(job.cutoff)[0] >= job.cutoff, "target before cutoff");
        let usable = series
            .complete_points()
            .filter(|p| freq.period_end(p.period_start) <= job.cutoff)
            .count();
        ensure!(job.context.len() == usable.min(spec.max_context), "context of {} is not the full usable window", job.job_id);
    }
    ensure!(jobs.len() >= 1000, "only {} jobs", jobs.len());
    ensure!(per_freq.len() == 4, "frequencies covered: {per_freq:?}");
    Ok(format!("{} jobs {:?}", jobs.len(), per_freq))
}

// ---- metric oracle ---------------------------------------------------------

fn brute_mase(actual: &[f64], point: &[f64], train: &[f64], m: usize) -> Option<f64> {
    let t = train.len();
    if t <= m {
        return None;
    }
    let mut den = 0.0;
    for i in m..t {
        den += (train[i] - train[i - m]).abs();
    }
    den /= (t - m) as f64;
    if den == 0.0 {
        return None;
    }
    let mut num = 0.0;
    for i in 0..actual.len() {
        num += (actual[i] - point[i]).abs();
    }
    Some(num / actual.len() as f64 / den)
}

fn brute_pinball(y: f64, q: f64, tau: f64) -> f64 {
    (tau * (y - q)).max((tau - 1.0) * (y - q))
}

fn brute_crps(actual: &[f64], qs: &[Vec<f64>], levels: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in actual.iter().enumerate() {
        let mut step = 0.0;
        for (j, &tau) in levels.iter().enumerate() {
            let q = qs[i][j];
            let ind = if y < q { 1.0 } else { 0.0 };
            step += (ind - tau) * (q - y);
        }
        total += 2.0 * step / levels.len() as f64;
    }
    total / actual.len() as f64
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn metric_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let levels = quantile_levels();
    let mut undefined = 0;
    let draw = |rng: &mut StdRng| -> f64 {
        if rng.random::<f64>() < 0.5 {
            rng.random_range(0..6) as f64
        } else {
            rng.random_range(-5.0..50.0)
        }
    };
    for case in 0..10_000 {
        let h = rng.random_range(1..=5);
        let t = rng.random_range(1..=20);
        let m = rng.random_range(1..=8);
        let train: Vec<f64> = if rng.random::<f64>() < 0.05 {
            vec![3.0; t]
        } else {
            (0..t).map(|_| draw(&mut rng)).collect()
        };
        let actual: Vec<f64> = (0..h).map(|_| draw(&mut rng)).collect();
        let qs: Vec<Vec<f64>> = (0..h).map(|_| (0..levels.len()).map(|_| draw(&mut rng)).collect()).collect();
        let point: Vec<f64> = qs.iter().map(|r| r[4]).collect();

        let got = mase(&actual, &point, &train, m).map_err(|e| e.to_string())?;
        let want = brute_mase(&actual, &point, &train, m);
        match (got, want) {
            (Some(a), Some(b)) => ensure!(close(a, b), "case {case}: mase {a} vs {b}"),
            (None, None) => undefined += 1,
            _ => return Err(format!("case {case}: mase {got:?} vs {want:?}")),
        }
        for (i, &y) in actual.iter().enumerate() {
            for (j, &tau) in levels.iter().enumerate() {
                let (a, b) = (pinball(y, qs[i][j], tau), brute_pinball(y, qs[i][j], tau));
                ensure!(close(a, b), "case {case}: pinball {a} vs {b}");
            }
        }
        let (a, b) = (crps(&actual, &qs, &levels).map_err(|e| e.to_string())?, brute_crps(&actual, &qs, &levels));
        ensure!(close(a, b), "case {case}: crps {a} vs {b}");
    }
    Ok(format!("10000 instances, {undefined} with undefined MASE on both sides"))
}

// ---- scaling ---------------------------------------------------------------

fn scaling_semantics() -> Outcome {
    let sub = Subdataset {
        kind: EventKind::Stars,
        stratum: Stratum::Mid,
    };
    let mut b: Vec<f64> = (1..=10).map(f64::from).collect();
    b.extend([0.0, 0.0]);
    let floor = compute_floor(sub, Freq::Daily, Metric::Crps, b.clone()).map_err(|e| e.to_string())?;
    ensure!(floor.tau0 == Some(1.9), "tau0 = {:?}", floor.tau0);

    let raws: Vec<RawScore> = b
        .iter()
        .map(|&x| RawScore {
            mase: Some(x),
            crps: x,
            n_scored_steps: 1,
        })
        .collect();
    let table = FloorTable::build(raws.iter().map(|r| (sub, Freq::Daily, r))).map_err(|e| e.to_string())?;
    for metric in Metric::ALL {
        let t = table.get(sub, Freq::Daily, metric).and_then(|f| f.tau0);
        ensure!(t == Some(1.9), "{metric} floor from table = {t:?}");
    }

    for v in [0.0, 0.3, 1.0, 7.5] {
        for (bv, denom) in [(0.0, 1.9), (0.5, 1.9), (5.0, 5.0)] {
            let got = scale(v, &floor, bv);
            ensure!(got == Some(v / denom), "scale({v}, b={bv}) = {got:?}");
        }
    }
    for &bv in &b {
        let own = scale(bv, &floor, bv).unwrap();
        if bv >= 1.9 {
            ensure!(own == 1.0, "zero model self-score {own} at b={bv}");
        } else {
            ensure!(own == bv / 1.9, "floored self-score {own} at b={bv}");
        }
    }
    let none = compute_floor(sub, Freq::Daily, Metric::Crps, vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    ensure!(none.tau0.is_none() && scale(1.0, &none, 0.0).is_none(), "all-zero cell must leave scaling undefined");
    Ok("tau0 = 1.9".into())
}

// ---- completeness ----------------------------------------------------------

/// One repo with one event in every hour of `[from, to)`, and `absent` hours
/// marked missing (even index) or malformed (odd index).
fn one_series(freq: Freq, from: &str, to: &str, absent: &[Timestamp]) -> Result<TimeSeries, String> {
    let (from, to) = (ts(from), ts(to));
    let mut hours = Vec::new();
    let mut counts = Vec::new();
    let mut h = from;
    while h < to {
        let status = match absent.iter().position(|&a| a == h) {
            Some(i) if i % 2 == 0 => PresenceStatus::Missing,
            Some(_) => PresenceStatus::Malformed,
            None => PresenceStatus::Present,
        };
        hours.push(HourPresence { hour: h, status });
        counts.push(HourlyCount {
            repo: "o/a".into(),
            kind: EventKind::Pushes,
            hour: h,
            count: 1,
        });
        h += Span::hours(1);
    }
    let ledger = PresenceLedger::new(from, to, hours).map_err(|e| e.to_string())?;
    let universe = RepoUniverse::from_repos(vec!["o/a".into()], "test").map_err(|e| e.to_string())?;
    let mut out = rollup_partition(&counts, &ledger, &universe, EventKind::Pushes, freq, &Thresholds::default());
    Ok(out.remove(0))
}

fn hours_from(start: &str, n: usize) -> Vec<Timestamp> {
    (0..n).map(|i| ts(start) + Span::hours(3 * i as i64)).collect()
}

fn completeness_thresholds() -> Outcome {
    // (freq, period start, period end, absent hours, expected complete)
    let cases = [
        (Freq::Daily, "2026-01-07", "2026-01-08", 3, false),
        (Freq::Daily, "2026-01-07", "2026-01-08", 2, true),
        (Freq::Weekly, "2026-01-05", "2026-01-12", 8, true),
        (Freq::Weekly, "2026-01-05", "2026-01-12", 9, false),
        (Freq::Monthly, "2026-01-01", "2026-02-01", 7, true),
        (Freq::Monthly, "2026-01-01", "2026-02-01", 8, false),
        (Freq::Monthly, "2026-04-01", "2026-05-01", 7, true),
        (Freq::Monthly, "2026-04-01", "2026-05-01", 8, false),
        (Freq::Monthly, "2026-02-01", "2026-03-01", 6, true),
        (Freq::Monthly, "2026-02-01", "2026-03-01", 7, false),
    ];
    let mut lines = Vec::new();
    for (freq, from, to, n_absent, want) in cases {
        let absent = hours_from(from, n_absent);
        let s = one_series(freq, from, to, &absent)?;
        ensure!(s.points.len() == 1, "{freq} {from}: {} periods", s.points.len());
        let p = s.points[0];
        let total = freq.hours_in(p.period_start);
        ensure!(p.complete == want, "{freq} {from}: {}/{total} present judged complete={}", total - n_absent as i64, p.complete);
        ensure!(p.value == (total - n_absent as i64) as u64, "{freq} {from}: value {} counts absent hours", p.value);
        lines.push(format!("{}/{total}{}", total - n_absent as i64, if want { "+" } else { "-" }));
    }
    Ok(lines.join(" "))
}

// ---- leaderboard -----------------------------------------------------------

fn ref_median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn ref_rank(x: f64, all: &[f64]) -> f64 {
    let less = all.iter().filter(|&&y| y < x).count() as f64;
    let equal = all.iter().filter(|&&y| y == x).count() as f64;
    less + (equal + 1.0) / 2.0
}

const MODELS: [&str; 3] = ["Alpha", "Beta", "Gamma"];

fn ref_mean_ranks(records: &[MetricRecord], metric: Metric) -> BTreeMap<String, f64> {
    let subs = [
        Subdataset { kind: EventKind::IssuesOpened, stratum: Stratum::Low },
        Subdataset { kind: EventKind::Stars, stratum: Stratum::High },
    ];
    let mut out = BTreeMap::new();
    for model in MODELS {
        let mut freq_means = Vec::new();
        for freq in [Freq::Daily, Freq::Weekly] {
            let mut sub_means = Vec::new();
            for sub in subs {
                let mut cut_ranks = Vec::new();
                let mut cutoffs: Vec<Timestamp> = records.iter().map(|r| r.cutoff).collect();
                cutoffs.sort();
                cutoffs.dedup();
                for c in cutoffs {
                    let group_median = |name: &str| {
                        let mut v: Vec<f64> = records
                            .iter()
                            .filter(|r| r.model == name && r.freq == freq && r.subdataset() == sub && r.cutoff == c)
                            .filter_map(|r| r.scaled(metric))
                            .collect();
                        (!v.is_empty()).then(|| ref_median(&mut v))
                    };
                    let all: Vec<f64> = MODELS.iter().filter_map(|m| group_median(m)).collect();
                    if let Some(x) = group_median(model) {
                        cut_ranks.push(ref_rank(x, &all));
                    }
                }
                if !cut_ranks.is_empty() {
                    sub_means.push(cut_ranks.iter().sum::<f64>() / cut_ranks.len() as f64);
                }
            }
            if !sub_means.is_empty() {
                freq_means.push(sub_means.iter().sum::<f64>() / sub_means.len() as f64);
            }
        }
        if !freq_means.is_empty() {
            out.insert(model.to_string(), freq_means.iter().sum::<f64>() / freq_means.len() as f64);
        }
    }
    out
}

fn random_records(rng: &mut StdRng) -> Vec<MetricRecord> {
    let mut out = Vec::new();
    let cutoffs = [ts("2026-01-04"), ts("2026-01-11"), ts("2026-01-18")];
    let subs = [(EventKind::IssuesOpened, Stratum::Low), (EventKind::Stars, Stratum::High)];
    let drop_mase = rng.random::<f64>() < 0.1;
    for model in MODELS {
        for freq in [Freq::Daily, Freq::Weekly] {
            for (kind, stratum) in subs {
                for &cutoff in &cutoffs {
                    if rng.random::<f64>() < 0.1 {
                        continue;
                    }
                    for s in 0..rng.random_range(1..=3) {
                        let mase = (!(drop_mase && model == "Gamma") && rng.random::<f64>() > 0.15)
                            .then(|| rng.random_range(1..=12) as f64 / 4.0);
                        let crps = rng.random_range(1..=12) as f64 / 4.0;
                        out.push(MetricRecord {
                            model: model.into(),
                            repo: format!("o/r{s}"),
                            kind,
                            freq,
                            stratum,
                            cutoff,
                            mase_raw: mase,
                            crps_raw: crps,
                            mase_scaled: mase,
                            crps_scaled: Some(crps),
                            n_scored_steps: 1,
                        });
                    }
                }
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

type RefRow = (String, Option<f64>, Option<f64>, bool);

/// `a` may precede `b`: rows with a sort key first, then by sort key, median
/// scaled CRPS and name.
fn precedes(a: &RefRow, b: &RefRow) -> bool {
    let key = |r: &RefRow| (r.1.is_none(), r.1.unwrap_or(0.0), r.2.is_none(), r.2.unwrap_or(0.0), r.0.clone());
    key(a).partial_cmp(&key(b)) != Some(std::cmp::Ordering::Greater)
}

fn leaderboard_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let roster: Vec<String> = MODELS.iter().map(|s| s.to_string()).collect();
    let mut incomplete_seen = 0;
    for trial in 0..100 {
        let records = random_records(&mut rng);
        let rm = ref_mean_ranks(&records, Metric::Mase);
        let rc = ref_mean_ranks(&records, Metric::Crps);
        ensure!(hierarchical_mean_rank(&records, Metric::Mase) == rm, "trial {trial}: mase ranks differ");
        ensure!(hierarchical_mean_rank(&records, Metric::Crps) == rc, "trial {trial}: crps ranks differ");

        let rows: Vec<RefRow> = MODELS
            .iter()
            .map(|&m| {
                let med = |metric: Metric| {
                    let mut v: Vec<f64> = records.iter().filter(|r| r.model == m).filter_map(|r| r.scaled(metric)).collect();
                    (!v.is_empty()).then(|| ref_median(&mut v))
                };
                let key = rm.get(m).zip(rc.get(m)).map(|(a, b)| (a + b) / 2.0);
                let incomplete = key.is_none() || med(Metric::Mase).is_none() || med(Metric::Crps).is_none();
                (m.to_string(), key, med(Metric::Crps), incomplete)
            })
            .collect();
        let valid: Vec<Vec<usize>> = permutations(rows.len())
            .into_iter()
            .filter(|p| p.windows(2).all(|w| precedes(&rows[w[0]], &rows[w[1]])))
            .collect();
        ensure!(valid.len() == 1, "trial {trial}: {} admissible orders", valid.len());
        let want: Vec<&str> = valid[0].iter().map(|&i| rows[i].0.as_str()).collect();

        let board = build_leaderboard(&records, &roster, false);
        let got: Vec<&str> = board.iter().map(|r| r.model.as_str()).collect();
        ensure!(got == want, "trial {trial}: order {got:?}, reference {want:?}");
        for r in &board {
            let reference = rows.iter().find(|x| x.0 == r.model).unwrap();
            ensure!(r.sort_key == reference.1 && r.incomplete == reference.3, "trial {trial}: row {} differs", r.model);
        }
        incomplete_seen += board.iter().filter(|r| r.incomplete).count();
        let worst: Vec<String> = build_leaderboard(&records, &roster, true).into_iter().map(|r| r.model).collect();
        let mut rev: Vec<&str> = want.clone();
        rev.reverse();
        ensure!(worst == rev, "trial {trial}: worst-first is not the reverse");
    }
    Ok(format!("100 trials, {incomplete_seen} incomplete rows"))
}

// ---- descriptors -----------------------------------------------------------

fn descriptor_checks() -> Outcome {
    let constant = power_spectrum(&[4.0; 64]).map_err(|e| e.to_string())?;
    ensure!(spectral_centroid(&constant) == Some(0.0), "constant centroid");
    ensure!(spectral_entropy(&constant) == Some(0.0), "constant entropy");

    let alt: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let c = spectral_centroid(&power_spectrum(&alt).map_err(|e| e.to_string())?).unwrap();
    ensure!((c - 0.5).abs() < 1e-12, "alternating centroid {c}");

    let n = 128;
    let two: Vec<f64> = (0..n)
        .map(|t| {
            let w = 2.0 * std::f64::consts::PI * t as f64 / n as f64;
            (5.0 * w).cos() + (17.0 * w).cos()
        })
        .collect();
    let spec = power_spectrum(&two).map_err(|e| e.to_string())?;
    let h = spectral_entropy(&spec).unwrap();
    let want = 2f64.ln() / (spec.bins() as f64).ln();
    ensure!((h - want).abs() < 1e-9, "two-bin entropy {h} vs {want}");

    let mut rng = StdRng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for len in 2..=256 {
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..10.0)).collect();
        let spec = power_spectrum(&x).map_err(|e| e.to_string())?;
        for k in 0..spec.bins() {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t % len) as f64 / len as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            let diff = (spec.magnitudes[k] - re.hypot(im)).abs();
            worst = worst.max(diff);
            ensure!(diff <= 1e-9 * re.hypot(im).max(1.0), "n={len} k={k}: |X| differs by {diff}");
        }
    }

    let mono: Vec<f64> = (0..500).map(f64::from).collect();
    let pe = permutation_entropy(&mono, 3, 1).map_err(|e| e.to_string())?;
    ensure!(pe == 0.0, "monotone permutation entropy {pe}");
    let noise: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let pe = permutation_entropy(&noise, 3, 1).map_err(|e| e.to_string())?;
    ensure!((pe - 1.0).abs() <= 0.02, "noise permutation entropy {pe}");
    Ok(format!("max |X| error {worst:.1e}, noise PE {pe:.4}"))
}

// ---- end to end ------------------------------------------------------------

const BOARD_FILES: [&str; 3] = [layout::LEADERBOARD_CSV, layout::LEADERBOARD_JSON, layout::LEADERBOARD_TXT];
const ALL_FREQS: [&str; 4] = ["hourly", "daily", "weekly", "monthly"];
const BASELINES: [&str; 3] = ["ZeroModel", "HistoricAverage", "SeasonalNaive"];

fn written(reports: &[StageReport]) -> Vec<String> {
    reports.iter().flat_map(|r| r.written.clone()).collect()
}

fn end_to_end() -> Outcome {
    let a = common::Fixture::new(&ALL_FREQS, &BASELINES);
    let b = common::Fixture::new(&ALL_FREQS, &BASELINES);
    let oa = a.orchestrator(false);
    oa.run_cycle().map_err(|e| e.to_string())?;
    b.orchestrator(false).run_cycle().map_err(|e| e.to_string())?;
    for f in BOARD_FILES {
        let (x, y) = (std::fs::read(a.data_root().join(f)).unwrap(), std::fs::read(b.data_root().join(f)).unwrap());
        ensure!(x == y, "{f} differs between the two runs");
    }
    let board = std::fs::read_to_string(a.data_root().join(layout::LEADERBOARD_CSV)).unwrap();
    ensure!(board.lines().filter(|l| !l.starts_with('#')).count() == 4, "leaderboard rows:\n{board}");

    let victim = layout::metrics("HistoricAverage", Freq::Hourly, ts("2026-02-08"));
    ensure!(a.data_root().join(&victim).exists(), "{victim} was not produced");
    std::fs::remove_file(a.data_root().join(&victim)).unwrap();
    let before = common::snapshot(&a.data_root());
    let third = oa.run_cycle().map_err(|e| e.to_string())?;
    let after = common::snapshot(&a.data_root());
    ensure!(written(&third) == vec![victim.clone()], "third run wrote {:?}", written(&third));
    let changed: Vec<_> = after.iter().filter(|(p, m)| before.get(*p) != Some(m)).map(|(p, _)| p.clone()).collect();
    ensure!(changed == vec![std::path::PathBuf::from(&victim)], "files touched: {changed:?}");
    for f in BOARD_FILES {
        let (x, y) = (std::fs::read(a.data_root().join(f)).unwrap(), std::fs::read(b.data_root().join(f)).unwrap());
        ensure!(x == y, "{f} changed after regeneration");
    }
    Ok(format!("{} files in tree", after.len()))
}

// ---- baselines -------------------------------------------------------------

/// A series that repeats a fixed season, with its first value bumped by
/// `bump`, long enough for `len` context periods plus the horizon.
fn seasonal_panel(freq: Freq, m: usize, len: usize, h: usize, start: Timestamp, bump: u64) -> (PanelStore, SeriesKey) {
    let key = SeriesKey::new("o/periodic", EventKind::Stars, freq);
    let points = (0..len + h)
        .map(|t| Point {
            period_start: freq.advance(start, t as i64),
            value: ((t % m) * 7 % 11 + 2) as u64 + if t == 0 { bump } else { 0 },
            complete: true,
        })
        .collect();
    (PanelStore::new([TimeSeries { key: key.clone(), points }]), key)
}

fn baseline_sanity() -> Outcome {
    let mut lines = Vec::new();
    for (freq, m, len, start) in [
        (Freq::Hourly, 24, 200, "2026-01-01"),
        (Freq::Daily, 7, 60, "2025-11-01"),
        (Freq::Weekly, 52, 110, "2023-12-04"),
        (Freq::Monthly, 12, 24, "2024-01-01"),
    ] {
        let start = ts(start);
        let mut spec = CutoffSpec::default_for(freq);
        spec.first_cutoff = freq.advance(start, len as i64);
        for bump in [3, 0] {
            let (panel, key) = seasonal_panel(freq, m, len, spec.horizon, start, bump);
            let job = build_job(&key, spec.first_cutoff, &spec, &panel)
                .map_err(|e| e.to_string())?
                .ok_or("no job")?
                .job;
            ensure!(job.context.len() == len, "{freq}: context {}", job.context.len());
            let f = seasonal_naive(&job, m).map_err(|e| e.to_string())?;
            let truth = ground_truth(&job, &spec, &panel).map_err(|e| e.to_string())?.ok_or("no truth")?;
            let s = score(&job, &f, &truth, m).map_err(|e| e.to_string())?.ok_or("not scored")?;
            if bump > 0 {
                ensure!(s.mase == Some(0.0), "{freq}: SeasonalNaive MASE {:?}", s.mase);
            } else {
                ensure!(s.mase.is_none(), "{freq}: flat lag-{m} history must leave MASE undefined, got {:?}", s.mase);
            }
        }
        lines.push(format!("{freq} m={m}"));
    }

    let mut rng = StdRng::seed_from_u64(17);
    let store = synthetic_panel(&mut rng, 4);
    let jobs: Vec<ForecastJob> = synthetic_jobs(&store)?.into_iter().map(|(_, b)| b.job).collect();
    for job in &jobs {
        if let Err(v) = validate_forecast(&zero_forecast(job), job) {
            return Err(format!("zero forecast for {} rejected: {v:?}", job.job_id));
        }
    }
    Ok(format!("MASE 0 at {}; {} zero forecasts valid", lines.join(", "), jobs.len()))
}

// ---- runner ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("protocol parameters", Duration::from_secs(1), protocol_parameters),
        ("leak-proofness", Duration::from_secs(10), leak_proofness),
        ("metric oracle equivalence", Duration::from_secs(30), metric_oracle),
        ("scaling semantics", Duration::from_secs(1), scaling_semantics),
        ("completeness thresholds", Duration::from_secs(5), completeness_thresholds),
        ("leaderboard brute-force equivalence", Duration::from_secs(10), leaderboard_equivalence),
        ("descriptor checks", Duration::from_secs(60), descriptor_checks),
        ("end-to-end determinism and idempotence", Duration::from_secs(300), end_to_end),
        ("baseline sanity", Duration::from_secs(5), baseline_sanity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = t0.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; exceeded {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name:<40} {:>8.2}s  {detail}", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<40} {:>8.2}s  {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
