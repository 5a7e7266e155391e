//! CSV files: `trials.csv` (one row per trial and estimator) and
//! `summary.csv` (mean and standard deviation per cell and metric).
//!
//! Floats are written like C's `%.17g`, which round-trips every `f64`.
//! Absent values are empty fields.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{Estimator, SweepVar};
use crate::experiment::{SummaryRow, TrialResult};
use crate::HarnessError;

pub const TRIALS_HEADER: [&str; 11] = [
    "estimator",
    "sweep_var",
    "sweep_value",
    "rep",
    "seed",
    "sin_theta",
    "transfer_error_sq",
    "baseline_error_sq",
    "optimizer_iters",
    "in_constraint_set",
    "wall_millis",
];

pub const SUMMARY_HEADER: [&str; 6] = ["estimator", "sweep_value", "metric", "mean", "std", "reps"];

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// `%.17g`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if x < 0.0 { "-" } else { "" };
    if !(-4..17).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        let dot = if frac.is_empty() { "" } else { "." };
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{}{dot}{frac}e{esign}{:02}", &digits[..1], exp.abs());
    }
    let (int, frac) = if exp >= 0 {
        let split = exp as usize + 1;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        ("0".to_string(), "0".repeat((-exp - 1) as usize) + &digits)
    };
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map_or_else(String::new, f)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer")
}

pub fn trials_csv(trials: &[TrialResult]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(TRIALS_HEADER).expect("in-memory writer");
    for t in trials {
        w.write_record([
            t.estimator.as_str().to_string(),
            t.sweep_var.as_str().to_string(),
            t.sweep_value.to_string(),
            t.rep.to_string(),
            t.seed.to_string(),
            opt(t.sin_theta, format_float),
            opt(t.transfer_error_sq, format_float),
            opt(t.baseline_error_sq, format_float),
            opt(t.optimizer_iters, |n| n.to_string()),
            opt(t.in_constraint_set, |b| b.to_string()),
            opt(t.wall_millis, |n| n.to_string()),
        ])
        .expect("in-memory writer");
    }
    finish(w)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(SUMMARY_HEADER).expect("in-memory writer");
    for s in rows {
        w.write_record([
            s.estimator.as_str().to_string(),
            s.sweep_value.to_string(),
            s.metric.as_str().to_string(),
            format_float(s.mean),
            format_float(s.std),
            s.reps.to_string(),
        ])
        .expect("in-memory writer");
    }
    finish(w)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Writes `trials.csv` and `summary.csv` into `out_dir`, creating it if
/// needed. Returns the two paths.
pub fn write_results(trials: &[TrialResult], summary: &[SummaryRow], out_dir: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let trials_path = out_dir.join(TRIALS_FILE);
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_atomic(&trials_path, &trials_csv(trials))?;
    write_atomic(&summary_path, &summary_csv(summary))?;
    Ok((trials_path, summary_path))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, v: &str) -> Result<Option<T>, HarnessError> {
    if v.is_empty() {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad {name} value `{v}`"),
    })
}

fn required<T>(path: &Path, line: u64, name: &str, v: Option<T>) -> Result<T, HarnessError> {
    v.ok_or_else(|| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("missing {name}"),
    })
}

/// Parses a `trials.csv` file.
pub fn read_trials(path: &Path) -> Result<Vec<TrialResult>, HarnessError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_trials(path, &bytes)
}

pub fn parse_trials(path: &Path, bytes: &[u8]) -> Result<Vec<TrialResult>, HarnessError> {
    let parse_err = |line: u64, message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().ne(TRIALS_HEADER) {
        return Err(parse_err(1, "header does not match the trials schema".into()));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let f = |i: usize| &record[i];
        let estimator = Estimator::parse(f(0)).ok_or_else(|| parse_err(line, format!("unknown estimator `{}`", f(0))))?;
        let sweep_var = SweepVar::parse(f(1)).ok_or_else(|| parse_err(line, format!("unknown sweep_var `{}`", f(1))))?;
        out.push(TrialResult {
            estimator,
            sweep_var,
            sweep_value: required(path, line, "sweep_value", parse_field(path, line, "sweep_value", f(2))?)?,
            rep: required(path, line, "rep", parse_field(path, line, "rep", f(3))?)?,
            seed: required(path, line, "seed", parse_field(path, line, "seed", f(4))?)?,
            sin_theta: parse_field(path, line, "sin_theta", f(5))?,
            transfer_error_sq: parse_field(path, line, "transfer_error_sq", f(6))?,
            baseline_error_sq: parse_field(path, line, "baseline_error_sq", f(7))?,
            optimizer_iters: parse_field(path, line, "optimizer_iters", f(8))?,
            in_constraint_set: parse_field(path, line, "in_constraint_set", f(9))?,
            wall_millis: parse_field(path, line, "wall_millis", f(10))?,
        });
    }
    Ok(out)
}
