//! Bit-exact persistence: error-matrix text files (the bring-your-own-model
//! boundary), schedule JSON, and report CSV.
//!
//! Numbers are written in shortest round-trip decimal form and parse back to
//! the identical value, so files produced by other exporters agree with ours
//! byte for byte on the payload. Writes are whole-file atomic
//! (write-temp-then-rename); line endings are always `\n`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CemError, Result};
use crate::error_model::{CellStats, ErrorMatrix};
use crate::evaluate::{SweepOutcome, SweepRecord};
use crate::scheduler::{derive_compute_steps, CacheSchedule};

const MATRIX_HEADER: &str = "#cem-error-matrix v1";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

/// Render a matrix in the interchange format: header line, a metadata line
/// `T=<int> intervals=<ints> samples=<int>`, then one data line per timestep
/// descending from `T` to 1 with `t,<means>,<variances>` and absent cells as
/// `NA`.
pub fn matrix_to_string(matrix: &ErrorMatrix) -> String {
    let intervals: Vec<String> = matrix.intervals().iter().map(|n| n.to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "{MATRIX_HEADER}");
    let _ = writeln!(
        out,
        "T={} intervals={} samples={}",
        matrix.total_steps(),
        intervals.join(","),
        matrix.num_samples()
    );
    for t in (1..=matrix.total_steps()).rev() {
        let mut fields = Vec::with_capacity(1 + 2 * matrix.intervals().len());
        fields.push(t.to_string());
        for &n in matrix.intervals() {
            fields.push(fmt_opt(matrix.mean(t, n)));
        }
        for &n in matrix.intervals() {
            fields.push(fmt_opt(matrix.variance(t, n)));
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> CemError {
    CemError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_kv<'a>(token: &'a str, key: &str, line: usize) -> Result<&'a str> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected `{key}=<value>`, got `{token}`")))
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, format!("invalid {what}: `{s}`")))
}

fn parse_cell(s: &str, line: usize) -> Result<Option<f64>> {
    if s == "NA" {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("non-numeric cell `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite cell `{s}`")));
    }
    Ok(Some(v))
}

/// Parse the interchange format. Errors carry the offending 1-based line.
pub fn matrix_from_str(text: &str) -> Result<ErrorMatrix> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header != MATRIX_HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{MATRIX_HEADER}`, got `{header}`"),
        ));
    }
    let meta = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing metadata line"))?;
    let tokens: Vec<&str> = meta.split(' ').collect();
    if tokens.len() != 3 {
        return Err(parse_err(
            2,
            "metadata line must be `T=<int> intervals=<ints> samples=<int>`",
        ));
    }
    let total_steps = parse_usize(parse_kv(tokens[0], "T", 2)?, 2, "step count")?;
    let intervals: Vec<usize> = parse_kv(tokens[1], "intervals", 2)?
        .split(',')
        .map(|s| parse_usize(s, 2, "interval"))
        .collect::<Result<_>>()?;
    let num_samples = parse_usize(parse_kv(tokens[2], "samples", 2)?, 2, "sample count")?;
    if total_steps == 0 {
        return Err(parse_err(2, "T must be >= 1"));
    }
    crate::error_model::validate_intervals(&intervals).map_err(|e| parse_err(2, e.to_string()))?;
    if num_samples == 0 {
        return Err(parse_err(2, "samples must be >= 1"));
    }

    let k = intervals.len();
    let mut cells: Vec<Option<CellStats>> = vec![None; total_steps * k];
    let mut seen = vec![false; total_steps + 1];
    let mut expected_t = total_steps;
    let mut rows = 0usize;
    for (offset, row) in lines.enumerate() {
        let line = 3 + offset;
        if row.is_empty() {
            // a single trailing newline produces one empty tail; anything
            // else is a malformed row
            if rows == total_steps {
                continue;
            }
            return Err(parse_err(line, "unexpected blank line"));
        }
        if rows == total_steps {
            return Err(parse_err(
                line,
                format!("expected exactly {total_steps} data rows"),
            ));
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 1 + 2 * k {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", 1 + 2 * k, fields.len()),
            ));
        }
        let t = parse_usize(fields[0], line, "timestep")?;
        if t == 0 || t > total_steps {
            return Err(parse_err(line, format!("timestep {t} out of range")));
        }
        if seen[t] {
            return Err(parse_err(line, format!("duplicate timestep {t}")));
        }
        if t != expected_t {
            return Err(parse_err(
                line,
                format!("expected timestep {expected_t} (rows descend from T), got {t}"),
            ));
        }
        seen[t] = true;
        expected_t = expected_t.saturating_sub(1);
        rows += 1;
        for (ki, &n) in intervals.iter().enumerate() {
            let mean = parse_cell(fields[1 + ki], line)?;
            let variance = parse_cell(fields[1 + k + ki], line)?;
            let cell = match (mean, variance) {
                (Some(mean), Some(variance)) => Some(CellStats { mean, variance }),
                (None, None) => None,
                _ => {
                    return Err(parse_err(
                        line,
                        format!("cell (t={t}, n={n}) mixes NA and numeric mean/variance"),
                    ))
                }
            };
            if cell.is_some() && t + n > total_steps {
                return Err(parse_err(
                    line,
                    format!(
                        "cell (t={t}, n={n}) lies beyond the last computable step and must be NA"
                    ),
                ));
            }
            cells[(t - 1) * k + ki] = cell;
        }
    }
    if rows != total_steps {
        return Err(parse_err(
            3 + rows,
            format!("file ends after {rows} data rows, expected {total_steps}"),
        ));
    }
    ErrorMatrix::new(total_steps, intervals, cells, num_samples)
        .map_err(|e| parse_err(0, e.to_string()))
}

/// Atomic whole-file write: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_file_name(format!(
        "{}.{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into()),
        std::process::id()
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_error_matrix(matrix: &ErrorMatrix, path: &Path) -> Result<()> {
    atomic_write(path, &matrix_to_string(matrix))
}

pub fn read_error_matrix(path: &Path) -> Result<ErrorMatrix> {
    matrix_from_str(&fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
struct ScheduleFileV1 {
    version: u32,
    total_steps: usize,
    num_caching: usize,
    candidates: Vec<usize>,
    weights: Vec<f64>,
    intervals: Vec<usize>,
    compute_steps: Vec<usize>,
    total_cost: Option<f64>,
}

pub fn schedule_to_string(schedule: &CacheSchedule) -> String {
    let dto = ScheduleFileV1 {
        version: 1,
        total_steps: schedule.total_steps(),
        num_caching: schedule.num_caching(),
        candidates: schedule.candidates().to_vec(),
        weights: schedule.weights().to_vec(),
        intervals: schedule.intervals().to_vec(),
        compute_steps: schedule.compute_steps().to_vec(),
        total_cost: schedule.total_cost(),
    };
    let mut s = serde_json::to_string_pretty(&dto).expect("schedule serialization is infallible");
    s.push('\n');
    s
}

pub fn schedule_from_str(text: &str) -> Result<CacheSchedule> {
    let dto: ScheduleFileV1 = serde_json::from_str(text).map_err(|e| CemError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if dto.version != 1 {
        return Err(CemError::Parse {
            line: 1,
            message: format!("unsupported schedule version {}", dto.version),
        });
    }
    if dto.num_caching != dto.intervals.len() {
        return Err(CemError::Integrity(format!(
            "num_caching is {} but {} intervals are listed",
            dto.num_caching,
            dto.intervals.len()
        )));
    }
    // compute_steps are derived; re-derive and insist the file agrees
    let derived = derive_compute_steps(dto.total_steps, &dto.intervals);
    if derived != dto.compute_steps {
        return Err(CemError::Integrity(format!(
            "compute_steps {:?} contradict the intervals (expected {:?})",
            dto.compute_steps, derived
        )));
    }
    CacheSchedule::new(
        dto.total_steps,
        dto.candidates,
        dto.weights,
        dto.intervals,
        dto.total_cost,
    )
}

pub fn write_schedule(schedule: &CacheSchedule, path: &Path) -> Result<()> {
    atomic_write(path, &schedule_to_string(schedule))
}

pub fn read_schedule(path: &Path) -> Result<CacheSchedule> {
    schedule_from_str(&fs::read_to_string(path)?)
}

/// Sweep report CSV: one record per line plus a trailing summary comment
/// with the rank-correlation statistic (`NA` when undefined).
pub fn render_sweep_csv(outcome: &SweepOutcome, spearman: Option<f64>) -> String {
    let mut out = String::from("schedule_id,total_cost,terminal_cosine_distance\n");
    for SweepRecord {
        schedule_id,
        total_cost,
        terminal_cosine_distance,
    } in &outcome.records
    {
        let _ = writeln!(out, "{schedule_id},{total_cost},{terminal_cosine_distance}");
    }
    let _ = writeln!(out, "# spearman={}", fmt_opt(spearman));
    out
}

/// One row of the fidelity report CSV.
#[derive(Debug, Clone)]
pub struct FidelityCsvRow {
    pub label: String,
    pub mode: String,
    pub num_caching: usize,
    pub total_cost: Option<f64>,
    pub terminal_cosine_distance: f64,
    pub terminal_relative_l2: f64,
}

pub fn render_fidelity_csv(rows: &[FidelityCsvRow]) -> String {
    let mut out = String::from(
        "schedule,mode,num_caching,total_cost,terminal_cosine_distance,terminal_relative_l2\n",
    );
    for r in rows {
        debug_assert!(!r.label.contains(','), "labels must stay comma-free");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.label,
            r.mode,
            r.num_caching,
            fmt_opt(r.total_cost),
            r.terminal_cosine_distance,
            r.terminal_relative_l2
        );
    }
    out
}
