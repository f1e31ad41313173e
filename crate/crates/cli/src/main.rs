mod cache;
mod config;
mod run;
mod svg;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use cache::{sha256_hex, Cache};
use config::Command;
use run::{Check, Outcome};

const SCHEMA: &str = "1";

/// Torsion-problem laboratory: solves, identity checks, stability sweeps and
/// closed-form oracles, driven by a JSON config.
#[derive(Parser)]
#[command(name = "symlab", version)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    command: Command,
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "symlab-out")]
    out: PathBuf,
    /// Suppress progress and failure tables on stderr.
    #[arg(long)]
    quiet: bool,
}

fn module_of(err: &symlab::Error) -> &'static str {
    use symlab::Error::*;
    match err {
        InvalidCurve(_) | NotStarShaped { .. } => "geometry",
        Meshing(_) => "mesh",
        Assembly(_) | SolverDiverged { .. } => "torsion",
        InvalidParameter(_) | Precondition(_) | Consistency(_) => "numerics",
        Serde(_) => "serialization",
    }
}

fn write_outputs(out: &Path, outcome: &Outcome, results: &[u8]) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("results.json"), results)?;
    std::fs::write(out.join("summary.csv"), &outcome.summary_csv)?;
    if !outcome.plots.is_empty() {
        let dir = out.join("plots");
        std::fs::create_dir_all(&dir)?;
        for (name, svg) in &outcome.plots {
            std::fs::write(dir.join(name), svg)?;
        }
    }
    Ok(())
}

fn failure_table(failed: &[&Check]) -> String {
    let width = failed.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:>14}  {:>2}  {:>14}\n", "check", "value", "", "threshold");
    for c in failed {
        s.push_str(&format!("{:<width$}  {:>14.6e}  {:>2}  {:>14.6e}\n", c.name, c.value, c.relation, c.threshold));
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let say = |msg: &str| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };

    let (config, config_bytes) = match config::load(&cli.config, cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return ExitCode::from(2);
        }
    };
    let config_hash = sha256_hex(&config_bytes);
    let cache = Cache::new(config.cache_dir.clone().unwrap_or_else(|| cli.out.join("cache")));

    say(&format!("symlab {}: running", cli.command.name()));
    let outcome = match run::execute(cli.command, &config, &cache) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("numerical failure in {}: {e}", module_of(&e));
            return ExitCode::from(3);
        }
    };
    if let Err(e) = cache.flush() {
        say(&format!("warning: cache not written: {e}"));
    }

    let failed: Vec<&Check> = outcome.checks.iter().filter(|c| !c.passed).collect();
    let document = json!({
        "schema": SCHEMA,
        "tool": "symlab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config_hash": config_hash,
        "config": config,
        "status": if failed.is_empty() { "pass" } else { "fail" },
        "checks": outcome.checks,
        "results": outcome.results,
    });
    let mut results = match serde_json::to_vec_pretty(&document) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("numerical failure in serialization: {e}");
            return ExitCode::from(3);
        }
    };
    results.push(b'\n');
    if let Err(e) = write_outputs(&cli.out, &outcome, &results) {
        eprintln!("cannot write outputs to {}: {e}", cli.out.display());
        return ExitCode::from(3);
    }

    let mut files = vec!["results.json".to_string(), "summary.csv".to_string()];
    files.extend(outcome.plots.iter().map(|(n, _)| format!("plots/{n}")));
    let manifest = json!({
        "schema": SCHEMA,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config_path": cli.config,
        "config_hash": config_hash,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "cache": {
            "dir": cache.dir(),
            "hits": cache.hits(),
            "misses": cache.misses(),
        },
        "files": files,
    });
    let manifest_written = serde_json::to_vec_pretty(&manifest)
        .map_err(std::io::Error::other)
        .and_then(|mut bytes| {
            bytes.push(b'\n');
            std::fs::write(cli.out.join("manifest.json"), bytes)
        });
    if let Err(e) = manifest_written {
        eprintln!("cannot write manifest: {e}");
        return ExitCode::from(3);
    }

    if failed.is_empty() {
        say(&format!("all {} checks passed; outputs in {}", outcome.checks.len(), cli.out.display()));
        ExitCode::SUCCESS
    } else {
        if !cli.quiet {
            let mut err = std::io::stderr().lock();
            let _ = writeln!(err, "{} of {} checks failed:", failed.len(), outcome.checks.len());
            let _ = write!(err, "{}", failure_table(&failed));
        }
        ExitCode::from(1)
    }
}
