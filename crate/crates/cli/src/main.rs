use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dafs::corpus::{generate, write_jsonl, GoldKey};
use dafs::engine::{preset, report, run_matrix, EngineError, ExperimentConfig, ReportOptions, SpecSource};

#[derive(Parser)]
#[command(name = "dafs", version, about = "Simulate buying source-domain annotations for a target domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic corpora as one JSONL file per domain.
    Gen {
        /// Generator spec as JSON, or a preset name (sentiment, tagging, confuser).
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every method, target and seed of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Summarize a results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Also write mean learning curves per target.
        #[arg(long)]
        per_iteration: bool,
        /// Also write the per-target domain distance matrix.
        #[arg(long)]
        pad_matrix: bool,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_FAILURES: u8 = 2;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load_spec(arg: &str) -> Result<dafs::corpus::SyntheticSpec, EngineError> {
    let path = Path::new(arg);
    if !path.exists() {
        return preset(arg);
    }
    let text = fs::read_to_string(path)?;
    let source: SpecSource = serde_json::from_str(&text).map_err(|e| EngineError::Config(format!("{arg}: {e}")))?;
    source.resolve()
}

fn gen(spec: &str, out: &Path, seed: u64) -> Result<Vec<PathBuf>, EngineError> {
    let spec = load_spec(spec)?;
    let corpora = generate(&spec, seed)?;
    fs::create_dir_all(out)?;
    let key = GoldKey::unlock();
    let mut written = Vec::new();
    for corpus in &corpora {
        let path = out.join(format!("{}.jsonl", corpus.domain));
        write_jsonl(std::slice::from_ref(corpus), File::create(&path)?, &key)?;
        written.push(path);
    }
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { spec, out, seed } => match gen(&spec, &out, seed) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, e),
        },
        Command::Run { config, jobs } => {
            let cfg = match ExperimentConfig::load(&config).and_then(|c| c.resolve().map(|_| c)) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match run_matrix(&cfg, jobs) {
                Ok(report) => {
                    println!(
                        "{} runs executed, {} resumed, {} failed; results in {}",
                        report.executed,
                        report.resumed,
                        report.failures.len(),
                        report.output_dir.display()
                    );
                    for (method, target, seed, error) in &report.failures {
                        eprintln!("failed: {method} {target} seed {seed}: {error}");
                    }
                    if report.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILURES)
                    }
                }
                Err(
                    e @ (EngineError::Config(_)
                    | EngineError::TooFewDomains(_)
                    | EngineError::UnknownTarget(_)
                    | EngineError::Corpus(_)),
                ) => fail(EXIT_CONFIG, e),
                Err(e) => fail(EXIT_FAILURES, e),
            }
        }
        Command::Report { results, per_iteration, pad_matrix } => {
            match report(&results, ReportOptions { per_iteration, pad_matrix }) {
                Ok(out) => {
                    print!("{}", out.table);
                    for p in out.written {
                        eprintln!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
    }
}
