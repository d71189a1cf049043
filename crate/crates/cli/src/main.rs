mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};

use exit::USAGE;

#[derive(Parser)]
#[command(name = "vulnprop", version, about = "Function-level vulnerability propagation over a dependency ecosystem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a snapshot directory; writes validation.json.
    Ingest {
        snapshot: PathBuf,
        /// Also write the project dependency graph as pgraph.json.
        #[arg(long)]
        export_pgraph: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Extract a function map from brace-delimited sources and print it.
    ///
    /// Each SOURCE is `path` or `path=name`, where `name` is the file name
    /// used in the patch.
    Funcmap {
        #[arg(value_parser = ["pre", "post"])]
        side: String,
        #[arg(required = true)]
        sources: Vec<String>,
    },
    /// Identify vulnerable functions from a patch; writes vfs.json.
    Vf {
        diff: PathBuf,
        pre_map: PathBuf,
        post_map: PathBuf,
        #[arg(long, default_value = "CVE-UNKNOWN")]
        cve: String,
        /// Remote classifier endpoint; heuristic filtering when absent.
        #[arg(long, env = "VULNPROP_CLASSIFIER_URL")]
        classifier: Option<String>,
        /// Per-request timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        /// Extra attempts after a transport failure.
        #[arg(long, default_value_t = 1)]
        retries: u32,
        /// JSON array of {"fqn", "verdict", "reason"} overrides.
        #[arg(long)]
        manual: Option<PathBuf>,
        /// TOML file with a `logging` list of line patterns.
        #[arg(long)]
        filters: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Propagate a vulnerability; writes result.json and passlog.jsonl.
    Analyze {
        snapshot: PathBuf,
        vuln: PathBuf,
        /// Persist engine state here and resume from it if present.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Save and stop after this many passes.
        #[arg(long, requires = "cache")]
        stop_after: Option<usize>,
        /// Passes between cache checkpoints.
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        checkpoint_every: u64,
        /// `fifo`, `seeded:N` or `ranked:FILE` (one project per line).
        #[arg(long, default_value = "fifo", value_parser = parse_order)]
        order: OrderArg,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        max_passes: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Score a result over time; writes vpss.json and vpss.csv.
    Score {
        result: PathBuf,
        snapshot: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Single time point (RFC 3339 or YYYY-MM-DD); defaults to the
        /// latest release in the snapshot.
        #[arg(long, value_parser = parse_time, conflicts_with = "series")]
        at: Option<DateTime<Utc>>,
        /// `t0,interval_days,count`.
        #[arg(long, value_parser = parse_series)]
        series: Option<Series>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Print a text summary of a result.
    Report {
        result: PathBuf,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// vpss.json written by `score`.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Generate a synthetic ecosystem with planted ground truth.
    Gen {
        config: PathBuf,
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-check the engine against the brute-force oracle, on a snapshot
    /// or on a range of generated ecosystems.
    Oraclecheck {
        #[arg(required_unless_present = "gen_config", requires = "vuln")]
        snapshot: Option<PathBuf>,
        vuln: Option<PathBuf>,
        #[arg(long, conflicts_with = "snapshot")]
        gen_config: Option<PathBuf>,
        #[arg(long, default_value_t = 20, requires = "gen_config")]
        seeds: u64,
        #[arg(long, default_value_t = vulnprop::oracle::DEFAULT_NODE_CAP)]
        node_cap: usize,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Clone, Debug)]
enum OrderArg {
    Fifo,
    Seeded(u64),
    Ranked(PathBuf),
}

#[derive(Clone, Copy, Debug)]
struct Series {
    t0: DateTime<Utc>,
    interval_days: i64,
    count: usize,
}

fn parse_order(s: &str) -> Result<OrderArg, String> {
    match s.split_once(':') {
        None if s == "fifo" => Ok(OrderArg::Fifo),
        Some(("seeded", n)) => n.parse().map(OrderArg::Seeded).map_err(|e| format!("bad seed `{n}`: {e}")),
        Some(("ranked", path)) if !path.is_empty() => Ok(OrderArg::Ranked(path.into())),
        _ => Err(format!("unknown order `{s}`, expected fifo, seeded:N or ranked:FILE")),
    }
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc())
        .map_err(|_| format!("`{s}` is neither RFC 3339 nor YYYY-MM-DD"))
}

fn parse_series(s: &str) -> Result<Series, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [t0, interval, count] = parts[..] else {
        return Err("expected t0,interval_days,count".into());
    };
    let interval_days: i64 = interval.trim().parse().map_err(|e| format!("interval `{interval}`: {e}"))?;
    let count: usize = count.trim().parse().map_err(|e| format!("count `{count}`: {e}"))?;
    if interval_days <= 0 || count == 0 {
        return Err("interval and count must be positive".into());
    }
    Ok(Series { t0: parse_time(t0.trim())?, interval_days, count })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
