//! `davydov`: batch front-end for the multi-D2 Rabi-dimer simulator.
//!
//! Exit status: 0 when every run completed, 1 for invalid input (nothing is
//! computed), 2 when any trajectory aborted.

mod config;
mod run;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use config::ConfigDocument;
use run::{execute, run_directory, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Variational,
    Oracle,
}

#[derive(Debug, Parser)]
#[command(version, about = "Variational dynamics of the dissipative, driven Rabi dimer")]
struct Args {
    /// TOML run configuration.
    config: PathBuf,
    /// Override a key, e.g. `--set g=0.2`. Repeatable; applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Propagation engine (overrides `mode`).
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory (overrides `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
}

const VALIDATION: u8 = 1;
const ABORT: u8 = 2;

fn main() -> ExitCode {
    let args = Args::parse();
    let path = args.config.display().to_string();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {path}: {e}");
            return ExitCode::from(VALIDATION);
        }
    };
    let runs = match prepare(&text, &args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {path}: {e}");
            return ExitCode::from(VALIDATION);
        }
    };
    let root = PathBuf::from(runs[0].output());
    let sweep = runs.iter().any(|r| !r.sweep_point.is_empty());

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(VALIDATION);
        }
    };
    let outcomes: Vec<_> = pool.install(|| {
        runs.par_iter()
            .map(|r| {
                let dir = run_directory(&root, r);
                (dir.clone(), execute(r, &dir))
            })
            .collect()
    });

    let mut code = 0;
    let mut manifest = String::from("run\tstatus\tpath");
    if let Some(first) = runs.first() {
        for (k, _) in &first.sweep_point {
            write!(manifest, "\t{k}").unwrap();
        }
    }
    manifest.push('\n');
    for (i, ((dir, outcome), r)) in outcomes.iter().zip(&runs).enumerate() {
        let status = match outcome {
            Ok(_) => "completed",
            Err(RunError::Aborted(m)) => {
                eprintln!("run {i} aborted ({}): {m}", dir.display());
                code = code.max(ABORT);
                "aborted"
            }
            Err(RunError::Setup(m)) => {
                eprintln!("run {i} failed ({}): {m}", dir.display());
                code = code.max(VALIDATION);
                "failed"
            }
        };
        let rel = dir.strip_prefix(&root).unwrap_or(dir).display().to_string();
        write!(manifest, "{i}\t{status}\t{}", if rel.is_empty() { "." } else { &rel }).unwrap();
        for (_, v) in &r.sweep_point {
            write!(manifest, "\t{v}").unwrap();
        }
        manifest.push('\n');
    }
    if sweep {
        if let Err(e) = fs::create_dir_all(&root).and_then(|_| fs::write(root.join("manifest.tsv"), manifest)) {
            eprintln!("error: writing manifest: {e}");
            code = code.max(VALIDATION);
        }
    }
    ExitCode::from(code)
}

fn prepare(text: &str, args: &Args) -> Result<Vec<config::RunConfig>, config::ConfigError> {
    let mut doc = ConfigDocument::parse(text)?;
    for o in &args.overrides {
        doc.apply_override(o)?;
    }
    if let Some(mode) = args.mode {
        let m = match mode {
            ModeArg::Variational => "variational",
            ModeArg::Oracle => "oracle",
        };
        doc.apply_override(&format!("mode={m}"))?;
    }
    if let Some(out) = &args.out {
        doc.apply_override(&format!("output=\"{}\"", out.display()))?;
    }
    doc.expand()
}
