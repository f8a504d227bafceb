//! Command-line harness for chaoslab: reads a TOML config, runs one
//! experiment family and writes a CSV table (optionally an SVG plot) plus a
//! `run.json` record.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod svg;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::report::{digest, RunRecord, Stage, TOOL_VERSION};

#[derive(Parser, Debug)]
#[command(name = "chaoslab", version, about = "Secular coefficients of holomorphic multiplicative chaos")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "CHAOSLAB_WORKERS")]
    pub workers: Option<usize>,
    /// Output directory; without it the CSV goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[value(name = "csv")]
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Exact second moments from the partition expansion.
    Oracle,
    /// Monte Carlo low moments against the predicted regime.
    Moments,
    /// Regimes and fitted slopes over a grid of tail parameters.
    PhaseScan,
    /// Total-mass moments and barrier probabilities of the truncated chaos.
    Chaos,
    /// Percentiles of the weighted coefficients.
    Tightness,
    /// Partial sums of the negative Sobolev norm.
    Sobolev,
    /// Engine timings.
    Bench,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Oracle => "oracle",
            Command::Moments => "moments",
            Command::PhaseScan => "phase-scan",
            Command::Chaos => "chaos",
            Command::Tightness => "tightness",
            Command::Sobolev => "sobolev",
            Command::Bench => "bench",
        }
    }
}

#[derive(Serialize)]
struct DigestInput<'a, T: Serialize> {
    command: &'a str,
    defaults: &'a config::Defaults,
    section: &'a T,
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("config has no [{name}] section")))
}

/// Runs the parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("chaoslab: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None if cli.command == Command::Bench => Config::default(),
        None => return Err(CliError::Usage("--config is required".into())),
    };
    if cli.format == Format::CsvSvg && cli.out.is_none() {
        return Err(CliError::Usage("--format csv+svg needs --out".into()));
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = cli.workers {
            if w == 0 {
                return Err(CliError::Usage("--workers must be positive".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| CliError::Usage(e.to_string()))?
    };
    let name = cli.command.name();
    let d = &cfg.defaults;
    let bench_default = config::BenchConfig::default();
    let started = Instant::now();
    let (run_digest, output) = pool.install(|| -> CliResult<_> {
        Ok(match cli.command {
            Command::Oracle => {
                let s = section(&cfg.oracle, "oracle")?;
                (digest_of(name, d, s), commands::oracle(s, d)?)
            }
            Command::Moments => {
                let s = section(&cfg.moments, "moments")?;
                (digest_of(name, d, s), commands::moments(s, seed)?)
            }
            Command::PhaseScan => {
                let s = section(&cfg.phase_scan, "phase_scan")?;
                (digest_of(name, d, s), commands::phase_scan(s, seed)?)
            }
            Command::Chaos => {
                let s = section(&cfg.chaos, "chaos")?;
                (digest_of(name, d, s), commands::chaos(s, d, seed)?)
            }
            Command::Tightness => {
                let s = section(&cfg.tightness, "tightness")?;
                (digest_of(name, d, s), commands::tightness(s, seed)?)
            }
            Command::Sobolev => {
                let s = section(&cfg.sobolev, "sobolev")?;
                (digest_of(name, d, s), commands::sobolev(s, seed)?)
            }
            Command::Bench => {
                let s = cfg.bench.as_ref().unwrap_or(&bench_default);
                (digest_of(name, d, s), commands::bench(s, seed)?)
            }
        })
    })?;
    let compute = started.elapsed().as_secs_f64();
    for w in &output.warnings {
        eprintln!("chaoslab: warning: {w}");
    }
    let csv = output.table.to_csv(&run_digest, seed)?;
    let Some(dir) = &cli.out else {
        use std::io::Write;
        std::io::stdout().write_all(&csv)?;
        return Ok(());
    };
    let write_start = Instant::now();
    std::fs::create_dir_all(dir)?;
    let mut files = vec![dir.join(format!("{name}.csv"))];
    std::fs::write(&files[0], &csv)?;
    if cli.format == Format::CsvSvg {
        let svg = dir.join(format!("{name}.svg"));
        std::fs::write(&svg, output.plot.render())?;
        files.push(svg);
    }
    let record = RunRecord {
        command: name.into(),
        config_digest: run_digest,
        master_seed: seed,
        tool_version: TOOL_VERSION.into(),
        defaults_version: config::DEFAULTS_VERSION,
        stages: vec![
            Stage {
                name: "compute".into(),
                seconds: compute,
            },
            Stage {
                name: "write".into(),
                seconds: write_start.elapsed().as_secs_f64(),
            },
        ],
        files,
    };
    record.write(dir)?;
    Ok(())
}

fn digest_of<T: Serialize>(command: &str, defaults: &config::Defaults, section: &T) -> String {
    digest(&DigestInput {
        command,
        defaults,
        section,
    })
}
