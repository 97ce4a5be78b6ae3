//! `spinbath` — runs the purification, Zeno/anti-Zeno and lifetime
//! protocols from a TOML config and writes their data files plus a
//! checksummed manifest; `selfcheck` compares the engine against the
//! brute-force oracle.
//!
//! Exit codes: 0 success, 2 config or I/O error, 3 forbidden outcome
//! string, 4 invariant or fit failure.

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use spinbath::oracle::{run_selfcheck, SelfCheckOptions, SELFCHECK_LENGTH, SELFCHECK_SPINS};
use spinbath::protocols::{
    run_lifetime, run_purification, run_zeno_aze_comparison, Artifact, CurveFormat, ProtocolConfig, ProtocolError,
    ENGINE_VERSION,
};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spinbath", version, about = "Probe-spin dephasing under selective measurements of a spin bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Condition the bath on one outcome string and compare FIDs before/after.
    Purify(RunArgs),
    /// Conditioned FIDs per outcome class at several intervals.
    Compare(RunArgs),
    /// Relaxation of a purified bath back to thermal.
    Lifetime(RunArgs),
    /// Engine-vs-oracle comparison on a small random bath.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run description.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Exact output directory (default: config `output_dir`, else
    /// `runs/<UTC timestamp>-<command>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Curve file format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Seed for the random couplings.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Print results as JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Fault injection: perturb one engine coupling by 1%.
    #[arg(long, hide = true)]
    corrupt_coupling: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for CurveFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => CurveFormat::Csv,
            Format::Json => CurveFormat::Json,
        }
    }
}

enum Failure {
    Config(String),
    Forbidden(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Forbidden(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Forbidden(m) => write!(f, "forbidden: {m}"),
            Failure::Invariant(m) => write!(f, "invariant failure: {m}"),
        }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Forbidden { .. } => Failure::Forbidden(e.to_string()),
            ProtocolError::Fit(_) => Failure::Invariant(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    engine_version: &'a str,
    seed: u64,
    config_path: String,
    config: &'a ProtocolConfig,
    format: CurveFormat,
    threads: usize,
    started_utc: String,
    finished_utc: String,
    files: Vec<FileEntry>,
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads {n}: {e}")))?;
    }
    Ok(())
}

fn output_dir(args: &RunArgs, config: &ProtocolConfig, command: &str) -> PathBuf {
    args.out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("runs").join(format!("{}-{command}", Utc::now().format("%Y%m%dT%H%M%SZ"))))
}

fn write_run(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<FileEntry>, Failure> {
    let io = |path: &Path, e: std::io::Error| Failure::Config(format!("cannot write {}: {e}", path.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.bytes).map_err(|e| io(&path, e))?;
            Ok(FileEntry { name: a.name.clone(), bytes: a.bytes.len(), sha256: hex::encode(Sha256::digest(&a.bytes)) })
        })
        .collect()
}

fn run_protocol(command: &str, args: RunArgs) -> Result<(), Failure> {
    let started_utc = timestamp();
    set_threads(args.threads)?;
    let mut config = ProtocolConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let format = CurveFormat::from(args.format);
    let artifacts = match command {
        "purify" => run_purification(&config)?.artifacts(format),
        "compare" => run_zeno_aze_comparison(&config)?.artifacts(format),
        "lifetime" => run_lifetime(&config)?.artifacts(format),
        _ => unreachable!("subcommands are fixed"),
    };
    let dir = output_dir(&args, &config, command);
    let files = write_run(&dir, &artifacts)?;
    let count = files.len();
    let manifest = RunManifest {
        command,
        engine_version: ENGINE_VERSION,
        seed: config.seed,
        config_path: args.config.display().to_string(),
        config: &config,
        format,
        threads: rayon::current_num_threads(),
        started_utc,
        finished_utc: timestamp(),
        files,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_run(&dir, &[Artifact { name: "manifest.json".into(), bytes }])?;
    println!("{command}: wrote {count} files and manifest.json to {}", dir.display());
    Ok(())
}

fn selfcheck(args: SelfcheckArgs) -> Result<(), Failure> {
    set_threads(args.threads)?;
    let results = run_selfcheck(SelfCheckOptions { seed: args.seed, corrupt_coupling: args.corrupt_coupling });
    if args.json {
        println!("{}", serde_json::to_string_pretty(&results).expect("results serialize"));
    } else {
        println!("selfcheck: N = {SELFCHECK_SPINS}, all {} strings of length {SELFCHECK_LENGTH}", 1 << SELFCHECK_LENGTH);
        println!("{:<42} {:>6} {:>10} {:>10}", "check", "result", "deviation", "tolerance");
        for r in &results {
            let verdict = if r.passed { "ok" } else { "FAIL" };
            println!("{:<42} {verdict:>6} {:>10.2e} {:>10.0e}", r.name, r.deviation, r.tolerance);
        }
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(failed.join("; ")))
    }
}

fn main() -> ExitCode {
    let outcome = match Cli::parse().command {
        Command::Purify(a) => run_protocol("purify", a),
        Command::Compare(a) => run_protocol("compare", a),
        Command::Lifetime(a) => run_protocol("lifetime", a),
        Command::Selfcheck(a) => selfcheck(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spinbath: {f}");
            ExitCode::from(f.code())
        }
    }
}
