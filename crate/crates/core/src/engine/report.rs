//! Tables and curves derived from a finished results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::matrix::{PAD_FILE, RESULTS_FILE, RUNS_FILE};
use super::EngineError;
use crate::adapt::nearest_source;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    pub per_iteration: bool,
    pub pad_matrix: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    /// Human-readable AUC table.
    pub table: String,
    pub written: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<Vec<csv::StringRecord>, EngineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| EngineError::Output(format!("{}: {e}", path.display())))?;
    r.records().collect::<Result<_, _>>().map_err(|e| EngineError::Output(format!("{}: {e}", path.display())))
}

/// Epsilons and distances observed for one source.
type Samples = (Vec<f64>, Vec<f64>);

fn push_unique(v: &mut Vec<String>, s: &str) {
    if !v.iter().any(|x| x == s) {
        v.push(s.to_string());
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<(), EngineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| EngineError::Output(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| EngineError::Output(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `table.csv` (mean AUC per method and target plus `AVG`) and,
/// on request, `curves/<target>.csv` and `pad/<target>.csv`.
pub fn report(dir: &Path, opts: ReportOptions) -> Result<ReportOutput, EngineError> {
    let runs = read(&dir.join(RUNS_FILE))?;
    let mut methods = Vec::new();
    let mut targets = Vec::new();
    let mut aucs: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in &runs {
        push_unique(&mut methods, &r[0]);
        push_unique(&mut targets, &r[1]);
        if &r[3] == "ok" {
            let auc: f64 = r[4].parse().map_err(|_| EngineError::Output(format!("bad auc `{}`", &r[4])))?;
            aucs.entry((r[0].to_string(), r[1].to_string())).or_default().push(auc);
        }
    }

    let mut header = vec!["method".to_string()];
    header.extend(targets.iter().cloned());
    header.push("AVG".into());
    let mut rows = vec![header.clone()];
    let mut table = String::new();
    let width = methods.iter().map(String::len).max().unwrap_or(6).max(6);
    let _ = write!(table, "{:width$}", "method");
    for h in &header[1..] {
        let _ = write!(table, " {:>11}", h);
    }
    table.push('\n');
    for m in &methods {
        let per: Vec<Option<f64>> =
            targets.iter().map(|t| aucs.get(&(m.clone(), t.clone())).map(|v| mean(v))).collect();
        let present: Vec<f64> = per.iter().flatten().copied().collect();
        let avg = (!present.is_empty()).then(|| mean(&present));
        let mut row = vec![m.clone()];
        let _ = write!(table, "{m:width$}");
        for v in per.iter().chain(std::iter::once(&avg)) {
            row.push(v.map_or(String::new(), |x| format!("{x}")));
            let _ = write!(table, " {:>11}", v.map_or("-".to_string(), |x| format!("{x:.4}")));
        }
        table.push('\n');
        rows.push(row);
    }
    let mut written = vec![dir.join("table.csv")];
    write_csv(&written[0], &rows)?;

    if opts.per_iteration {
        let results = read(&dir.join(RESULTS_FILE))?;
        let mut values: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
        for r in &results {
            let budget: usize = r[3].parse().map_err(|_| EngineError::Output(format!("bad budget `{}`", &r[3])))?;
            let v: f64 = r[5].parse().map_err(|_| EngineError::Output(format!("bad value `{}`", &r[5])))?;
            values.entry((r[1].to_string(), budget, r[0].to_string())).or_default().push(v);
        }
        for t in &targets {
            let mut budgets: Vec<usize> = values.keys().filter(|k| &k.0 == t).map(|k| k.1).collect();
            budgets.dedup();
            let mut rows = vec![std::iter::once("budget".to_string()).chain(methods.iter().cloned()).collect::<Vec<_>>()];
            for b in budgets {
                let mut row = vec![b.to_string()];
                for m in &methods {
                    row.push(values.get(&(t.clone(), b, m.clone())).map_or(String::new(), |v| format!("{}", mean(v))));
                }
                rows.push(row);
            }
            let path = dir.join("curves").join(format!("{t}.csv"));
            write_csv(&path, &rows)?;
            written.push(path);
        }
    }

    if opts.pad_matrix {
        let pad_rows = if dir.join(PAD_FILE).exists() { read(&dir.join(PAD_FILE))? } else { Vec::new() };
        let mut per: BTreeMap<String, BTreeMap<String, Samples>> = BTreeMap::new();
        for r in &pad_rows {
            let eps: f64 = r[4].parse().map_err(|_| EngineError::Output(format!("bad epsilon `{}`", &r[4])))?;
            let pad: f64 = r[5].parse().map_err(|_| EngineError::Output(format!("bad pad `{}`", &r[5])))?;
            let e = per.entry(r[1].to_string()).or_default().entry(r[3].to_string()).or_default();
            e.0.push(eps);
            e.1.push(pad);
        }
        for (target, sources) in &per {
            let means: BTreeMap<String, f64> = sources.iter().map(|(s, (_, p))| (s.clone(), mean(p))).collect();
            let nearest = nearest_source(&means).map(str::to_string);
            let mut rows = vec![["source", "epsilon", "pad", "nearest_flag"].map(String::from).to_vec()];
            for (s, (eps, pads)) in sources {
                let flag = u8::from(nearest.as_deref() == Some(s.as_str()));
                rows.push(vec![s.clone(), format!("{}", mean(eps)), format!("{}", mean(pads)), flag.to_string()]);
            }
            let path = dir.join("pad").join(format!("{target}.csv"));
            write_csv(&path, &rows)?;
            written.push(path);
        }
    }
    Ok(ReportOutput { table, written })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_from_handwritten_results() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        fs::write(
            d.join(RUNS_FILE),
            "method,target,seed,status,auc,error\nV,a,0,ok,0.5,\nV,a,1,ok,0.7,\nT,a,0,ok,0.9,\nT,b,0,failed,,oops\n",
        )
        .unwrap();
        fs::write(
            d.join(RESULTS_FILE),
            "method,target,seed,budget,metric,value\nV,a,0,1,accuracy,0.4\nV,a,0,2,accuracy,0.6\nV,a,1,1,accuracy,0.6\nV,a,1,2,accuracy,0.8\nT,a,0,1,accuracy,0.9\nT,a,0,2,accuracy,0.9\n",
        )
        .unwrap();
        fs::write(
            d.join(PAD_FILE),
            "method,target,seed,source,epsilon,pad,nearest\nT,a,0,x,0.25,1,0\nT,a,0,y,0.45,0.2,1\n",
        )
        .unwrap();
        let out = report(d, ReportOptions { per_iteration: true, pad_matrix: true }).unwrap();
        let table = fs::read_to_string(d.join("table.csv")).unwrap();
        assert_eq!(table, "method,a,b,AVG\nV,0.6,,0.6\nT,0.9,,0.9\n");
        assert!(out.table.contains("0.6000"));
        let curve = fs::read_to_string(d.join("curves/a.csv")).unwrap();
        assert_eq!(curve, "budget,V,T\n1,0.5,0.9\n2,0.7,0.9\n");
        let pad = fs::read_to_string(d.join("pad/a.csv")).unwrap();
        assert_eq!(pad, "source,epsilon,pad,nearest_flag\nx,0.25,1,0\ny,0.45,0.2,1\n");
    }
}
