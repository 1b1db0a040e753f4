//! The experiment matrix and its on-disk record.
//!
//! `runs.csv` marks a triple complete; rows of every other file count only
//! for complete triples. Rows are appended as runs finish and all files are
//! rewritten in canonical order at the end, so the final bytes do not
//! depend on scheduling or on interruptions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ResolvedConfig, Targets};
use super::protocol::{run_single, RunOutcome, TargetData};
use super::EngineError;
use crate::corpus::DomainCorpus;

pub const RESULTS_FILE: &str = "results.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const PAD_FILE: &str = "pad.csv";
pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const RESULTS_HEADER: [&str; 6] = ["method", "target", "seed", "budget", "metric", "value"];
const RUNS_HEADER: [&str; 6] = ["method", "target", "seed", "status", "auc", "error"];
const PAD_HEADER: [&str; 7] = ["method", "target", "seed", "source", "epsilon", "pad", "nearest"];
const ANNOTATIONS_HEADER: [&str; 6] = ["method", "target", "seed", "order", "id", "domain"];

type Triple = (String, String, u64);
type Row = Vec<String>;

/// All rows one run contributes.
#[derive(Debug, Clone, Default, PartialEq)]
struct RunRows {
    run: Row,
    results: Vec<Row>,
    pad: Vec<Row>,
    annotations: Vec<Row>,
}

impl RunRows {
    fn ok(o: &RunOutcome) -> Self {
        let head = || vec![o.method.clone(), o.target.clone(), o.seed.to_string()];
        let with = |extra: Vec<String>| {
            let mut r = head();
            r.extend(extra);
            r
        };
        let results = o
            .points
            .iter()
            .map(|(b, v)| with(vec![b.to_string(), o.metric.to_string(), format!("{v}")]))
            .collect();
        let pad = o
            .similarity
            .iter()
            .flat_map(|s| {
                s.per_source.iter().map(|(src, pad)| {
                    with(vec![
                        src.clone(),
                        format!("{}", s.epsilons[src]),
                        format!("{pad}"),
                        u8::from(*src == s.nearest).to_string(),
                    ])
                })
            })
            .collect();
        let annotations = o
            .annotations
            .iter()
            .enumerate()
            .map(|(i, (id, d))| with(vec![i.to_string(), id.clone(), d.clone()]))
            .collect();
        Self { run: with(vec!["ok".into(), format!("{}", o.auc), String::new()]), results, pad, annotations }
    }

    fn failed(t: &Triple, error: &str) -> Self {
        let run = vec![t.0.clone(), t.1.clone(), t.2.to_string(), "failed".into(), String::new(), error.to_string()];
        Self { run, ..Self::default() }
    }

    fn succeeded(&self) -> bool {
        self.run[3] == "ok"
    }
}

/// Outcome of [`run_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixReport {
    pub output_dir: PathBuf,
    pub executed: usize,
    pub resumed: usize,
    /// `(method, target, seed, error)` of every failed triple.
    pub failures: Vec<(String, String, u64, String)>,
    /// Mean AUC per method and target, plus `"AVG"` over targets.
    pub summary: BTreeMap<String, BTreeMap<String, f64>>,
}

fn csv_err(e: csv::Error) -> EngineError {
    EngineError::Output(e.to_string())
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Row>, EngineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        // A truncated last line from an interrupted append is dropped.
        let Ok(rec) = rec else { continue };
        if rec.len() == width {
            rows.push(rec.iter().map(String::from).collect());
        }
    }
    Ok(rows)
}

fn triple_of(row: &Row) -> Option<Triple> {
    Some((row[0].clone(), row[1].clone(), row[2].parse().ok()?))
}

/// Completed triples recorded under `dir`.
fn load_completed(dir: &Path) -> Result<HashMap<Triple, RunRows>, EngineError> {
    let mut done: HashMap<Triple, RunRows> = HashMap::new();
    for row in read_rows(&dir.join(RUNS_FILE), RUNS_HEADER.len())? {
        if row[3] == "ok" {
            if let Some(t) = triple_of(&row) {
                done.insert(t, RunRows { run: row, ..RunRows::default() });
            }
        }
    }
    let mut attach = |file: &str, width: usize, pick: fn(&mut RunRows) -> &mut Vec<Row>| -> Result<(), EngineError> {
        for row in read_rows(&dir.join(file), width)? {
            if let Some(entry) = triple_of(&row).and_then(|t| done.get_mut(&t)) {
                pick(entry).push(row);
            }
        }
        Ok(())
    };
    attach(RESULTS_FILE, RESULTS_HEADER.len(), |r| &mut r.results)?;
    attach(PAD_FILE, PAD_HEADER.len(), |r| &mut r.pad)?;
    attach(ANNOTATIONS_FILE, ANNOTATIONS_HEADER.len(), |r| &mut r.annotations)?;
    Ok(done)
}

type Picker = fn(&RunRows) -> Vec<&Row>;

struct Appender {
    files: [(csv::Writer<File>, Picker); 4],
}

impl Appender {
    fn open(dir: &Path) -> Result<Self, EngineError> {
        let open = |name: &str| -> Result<csv::Writer<File>, EngineError> {
            let file = OpenOptions::new().append(true).open(dir.join(name))?;
            Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
        };
        Ok(Self {
            files: [
                (open(RESULTS_FILE)?, |r| r.results.iter().collect()),
                (open(PAD_FILE)?, |r| r.pad.iter().collect()),
                (open(ANNOTATIONS_FILE)?, |r| r.annotations.iter().collect()),
                (open(RUNS_FILE)?, |r| vec![&r.run]),
            ],
        })
    }

    /// The run row goes last so a triple is marked complete only after
    /// its other rows are on disk.
    fn append(&mut self, rows: &RunRows) -> Result<(), EngineError> {
        for (w, pick) in &mut self.files {
            for row in pick(rows) {
                w.write_record(row).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Row>) -> Result<(), EngineError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_all(dir: &Path, ordered: &[&RunRows]) -> Result<(), EngineError> {
    write_table(&dir.join(RESULTS_FILE), &RESULTS_HEADER, ordered.iter().flat_map(|r| r.results.clone()))?;
    write_table(&dir.join(PAD_FILE), &PAD_HEADER, ordered.iter().flat_map(|r| r.pad.clone()))?;
    write_table(&dir.join(ANNOTATIONS_FILE), &ANNOTATIONS_HEADER, ordered.iter().flat_map(|r| r.annotations.clone()))?;
    write_table(&dir.join(RUNS_FILE), &RUNS_HEADER, ordered.iter().map(|r| r.run.clone()))?;
    Ok(())
}

/// Mean AUC per (method, target) over successful seeds, and the mean of
/// those per-target means as `"AVG"`.
fn summarize(ordered: &[&RunRows]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in ordered.iter().filter(|r| r.succeeded()) {
        let auc: f64 = r.run[4].parse().unwrap_or(f64::NAN);
        let e = sums.entry(r.run[0].clone()).or_default().entry(r.run[1].clone()).or_insert((0.0, 0));
        e.0 += auc;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(m, per)| {
            let mut row: BTreeMap<String, f64> = per.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect();
            let avg = row.values().sum::<f64>() / row.len() as f64;
            row.insert("AVG".into(), avg);
            (m, row)
        })
        .collect()
}

/// Loads the corpora named by `config` and runs its matrix.
pub fn run_matrix(config: &ExperimentConfig, jobs: usize) -> Result<MatrixReport, EngineError> {
    let resolved = config.resolve()?;
    let corpora = config.load_corpora()?;
    run_matrix_on(&resolved, &corpora, jobs)
}

/// Runs every (method × target × seed) triple not already complete under
/// the output directory, `jobs` at a time.
pub fn run_matrix_on(cfg: &ResolvedConfig, corpora: &[DomainCorpus], jobs: usize) -> Result<MatrixReport, EngineError> {
    let domains: Vec<String> = corpora.iter().map(|c| c.domain.clone()).collect();
    if domains.len() < 2 {
        return Err(EngineError::TooFewDomains(domains.len()));
    }
    let targets: Vec<String> = match &cfg.targets {
        Targets::All => domains.clone(),
        Targets::List(list) => {
            for t in list {
                if !domains.contains(t) {
                    return Err(EngineError::UnknownTarget(t.clone()));
                }
            }
            list.clone()
        }
    };
    let triples: Vec<Triple> = cfg
        .methods
        .iter()
        .flat_map(|m| targets.iter().flat_map(move |t| cfg.seeds.iter().map(move |&s| (m.name.to_string(), t.clone(), s))))
        .collect();

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut done = load_completed(dir)?;
    let wanted: HashSet<&Triple> = triples.iter().collect();
    done.retain(|t, _| wanted.contains(t));
    let resumed = done.len();
    let kept: Vec<&RunRows> = triples.iter().filter_map(|t| done.get(t)).collect();
    write_all(dir, &kept)?;

    let pending: Vec<&Triple> = triples.iter().filter(|t| !done.contains_key(*t)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EngineError::Config(format!("thread pool: {e}")))?;

    let pending_targets: Vec<&String> = targets.iter().filter(|t| pending.iter().any(|p| &p.1 == *t)).collect();
    let new_rows: Vec<(Triple, RunRows)> = pool.install(|| -> Result<_, EngineError> {
        let data: HashMap<&String, Result<Arc<TargetData>, String>> = pending_targets
            .par_iter()
            .map(|t| (*t, TargetData::prepare(corpora, t, cfg).map(Arc::new).map_err(|e| e.to_string())))
            .collect();
        let appender = Mutex::new(Appender::open(dir)?);
        let total = pending.len();
        let finished = Mutex::new(0usize);
        pending
            .par_iter()
            .map(|&t| {
                let spec = cfg.methods.iter().find(|m| m.name == t.0).copied().expect("method resolved");
                let rows = match &data[&t.1] {
                    Err(e) => RunRows::failed(t, e),
                    Ok(d) => match run_single(d, cfg, spec, t.2) {
                        Ok(o) => RunRows::ok(&o),
                        Err(e) => RunRows::failed(t, &e.to_string()),
                    },
                };
                appender.lock().expect("writer lock").append(&rows)?;
                let mut n = finished.lock().expect("counter lock");
                *n += 1;
                eprintln!("[{n}/{total}] {} {} seed {}: {}", t.0, t.1, t.2, if rows.succeeded() { &rows.run[4] } else { "failed" });
                Ok((t.clone(), rows))
            })
            .collect()
    })?;

    let executed = new_rows.len();
    done.extend(new_rows);
    let ordered: Vec<&RunRows> = triples.iter().filter_map(|t| done.get(t)).collect();
    write_all(dir, &ordered)?;
    let summary = summarize(&ordered);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| EngineError::Output(e.to_string()))?;
    fs::write(dir.join(SUMMARY_FILE), json + "\n")?;

    let failures = ordered
        .iter()
        .filter(|r| !r.succeeded())
        .map(|r| (r.run[0].clone(), r.run[1].clone(), r.run[2].parse().unwrap_or(0), r.run[5].clone()))
        .collect();
    Ok(MatrixReport { output_dir: dir.clone(), executed, resumed, failures, summary })
}
