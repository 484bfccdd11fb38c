use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use livebench::orchestrator::{layout, JobSelection, LeaderboardOptions, Orchestrator, RunConfig, StageReport};
use livebench::types::{parse_ts, Freq, Timestamp};
use livebench::{Error, Result};

#[derive(Parser)]
#[command(name = "livebench", version, about = "Live prequential forecasting benchmark over repository activity")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "livebench.toml")]
    config: PathBuf,
    /// Recompute every unit and overwrite files this stage did not record.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count events per (repo, kind, hour) from the archive mirror.
    Ingest,
    /// Roll hourly counts into the panel and freeze activity strata.
    Rollup,
    /// Write job files for scheduled cutoffs.
    EmitJobs {
        #[arg(long)]
        freq: Option<Freq>,
        #[arg(long, value_parser = parse_ts_arg)]
        cutoff: Option<Timestamp>,
    },
    /// Run the built-in baselines on every job file.
    RunBaselines,
    /// Check submitted forecast files and summarize what is missing.
    Collect,
    /// Validate one forecast file against its job file.
    Validate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        freq: Freq,
        #[arg(long, value_parser = parse_ts_arg)]
        cutoff: Timestamp,
    },
    /// Score forecasts against observed truth.
    Evaluate,
    /// Aggregate metrics into the ranked leaderboard.
    Leaderboard {
        /// Only use cutoffs at or before this date.
        #[arg(long, value_parser = parse_ts_arg)]
        as_of: Option<Timestamp>,
        #[arg(long)]
        worst_first: bool,
    },
    /// Spectral and ordinal descriptors of every panel series.
    Describe,
    /// Every stage in order.
    RunCycle,
    /// Per-stage completion and pending work.
    Status,
    /// Print a config file with every parameter at its default.
    DefaultConfig,
}

fn parse_ts_arg(s: &str) -> std::result::Result<Timestamp, String> {
    parse_ts(s).map_err(|e| e.to_string())
}

fn print_report(r: &StageReport) {
    let stage = r.stage.map(|s| s.to_string()).unwrap_or_default();
    println!("{stage}: {} units run, {} skipped, {} files written", r.executed, r.skipped, r.written.len());
    for note in &r.notes {
        println!("  {note}");
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::DefaultConfig = cli.command {
        print!("{}", livebench::orchestrator::default_config_toml());
        return Ok(true);
    }
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        config.workers = w;
    }
    let orch = Orchestrator::new(config, cli.force)?;
    let report = match cli.command {
        Command::Ingest => orch.ingest()?,
        Command::Rollup => orch.rollup()?,
        Command::EmitJobs { freq, cutoff } => orch.emit_jobs(JobSelection { freq, cutoff })?,
        Command::RunBaselines => orch.run_baselines()?,
        Command::Collect => orch.collect()?,
        Command::Evaluate => orch.evaluate()?,
        Command::Leaderboard { as_of, worst_first } => {
            let r = orch.leaderboard(LeaderboardOptions { as_of, worst_first })?;
            let table = std::fs::read_to_string(orch.root().join(layout::LEADERBOARD_TXT))
                .map_err(|e| Error::io(orch.root().join(layout::LEADERBOARD_TXT), e))?;
            print!("{table}");
            r
        }
        Command::Describe => orch.describe()?,
        Command::RunCycle => {
            for r in orch.run_cycle()? {
                print_report(&r);
            }
            return Ok(true);
        }
        Command::Validate { model, freq, cutoff } => {
            let check = orch.validate(&model, freq, cutoff)?;
            println!("{}", serde_json::to_string_pretty(&check).expect("check serializes"));
            return Ok(check.is_clean());
        }
        Command::Status => {
            let s = orch.status()?;
            for st in &s.stages {
                println!("{:<12} {:<9} units={} outputs={}", st.stage.to_string(), st.state, st.units, st.outputs);
                for d in &st.damaged {
                    println!("  damaged: {d}");
                }
            }
            for (m, f, c) in &s.pending_forecasts {
                println!("pending forecast: {m} {f} {c}");
            }
            for (m, f, c) in &s.pending_metrics {
                println!("pending evaluation: {m} {f} {c}");
            }
            return Ok(true);
        }
        Command::DefaultConfig => unreachable!(),
    };
    print_report(&report);
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
