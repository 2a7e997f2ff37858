//! Best-effort adapters from the Google and Alibaba trace schemas to the
//! canonical checkpointed format.
//!
//! Both archives report per-task resource usage as measurement windows
//! (`start_time`/`end_time` plus usage columns), one row per task per window.
//! The mapping assumptions are:
//!
//! - every task is treated as starting at job time zero, so window ends
//!   become task-relative snapshot times and per-task latency is the span
//!   from its first window start to its last window end;
//! - the job's checkpoint schedule is the union of all tasks' relative
//!   window-end times, and each task's windows are re-gridded onto that
//!   schedule by carrying the most recent window's features forward (the
//!   first window's features fill checkpoints before it closes);
//! - missing feature values are imputed with the per-job feature mean and
//!   counted in the returned [`AdaptReport`].
//!
//! For the Alibaba archive the "task" plays the role of a canonical job and
//! its instances play the role of tasks.

use std::collections::BTreeMap;
use std::io::Read;

use super::{FeatureVector, JobTrace, TaskRecord};
use crate::error::{Error, Result};

/// Task feature columns expected from the Google traces, mapped to f0..f14.
pub const GOOGLE_FEATURES: [&str; 15] = [
    "MCU", "MAXCPU", "SCPU", "CMU", "AMU", "MAXMU", "UPC", "TPC", "MIO", "MAXIO", "MDK", "CPI",
    "MAI", "EV", "FL",
];

/// Instance feature columns expected from the Alibaba traces, mapped to f0..f3.
pub const ALIBABA_FEATURES: [&str; 4] = ["cpu_avg", "cpu_max", "mem_avg", "mem_max"];

/// What the adapter had to patch up while mapping.
#[derive(Debug, Default, Clone)]
pub struct AdaptReport {
    /// Count of missing feature values imputed with the per-job mean.
    pub imputed_values: usize,
}

struct WindowRow {
    job_id: String,
    task_id: String,
    start: f64,
    end: f64,
    features: Vec<Option<f64>>,
}

/// Adapts Google task-usage style rows
/// (`job_id,task_id,start_time,end_time,MCU,...,FL`) to canonical traces.
pub fn adapt_google<R: Read>(raw_rows: R) -> Result<(Vec<JobTrace>, AdaptReport)> {
    adapt_windows(raw_rows, &["job_id", "task_id"], &GOOGLE_FEATURES)
}

/// Adapts Alibaba batch-instance style rows
/// (`task_id,instance_id,start_time,end_time,cpu_avg,cpu_max,mem_avg,mem_max`)
/// to canonical traces; tasks become jobs and instances become tasks.
pub fn adapt_alibaba<R: Read>(raw_rows: R) -> Result<(Vec<JobTrace>, AdaptReport)> {
    adapt_windows(raw_rows, &["task_id", "instance_id"], &ALIBABA_FEATURES)
}

fn adapt_windows<R: Read>(
    raw_rows: R,
    id_columns: &[&str; 2],
    feature_names: &[&str],
) -> Result<(Vec<JobTrace>, AdaptReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(raw_rows);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let job_col = find(id_columns[0])?;
    let task_col = find(id_columns[1])?;
    let start_col = find("start_time")?;
    let end_col = find("end_time")?;
    let feature_cols: Vec<usize> = feature_names
        .iter()
        .map(|name| find(name))
        .collect::<Result<_>>()?;

    let mut rows: Vec<WindowRow> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |col: usize, what: &str| -> Result<&str> {
            rec.get(col).ok_or_else(|| Error::Parse {
                line,
                msg: format!("missing field {what}"),
            })
        };
        let parse_time = |raw: &str, what: &str| -> Result<f64> {
            raw.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("cannot parse {what} from {raw:?}"),
            })
        };
        let start = parse_time(get(start_col, "start_time")?, "start_time")?;
        let end = parse_time(get(end_col, "end_time")?, "end_time")?;
        if !end.is_finite() || !start.is_finite() || end <= start {
            return Err(Error::Validation(format!(
                "window at line {line} has end {end} <= start {start}"
            )));
        }
        let mut features = Vec::with_capacity(feature_cols.len());
        for (&col, name) in feature_cols.iter().zip(feature_names) {
            let raw = get(col, name)?.trim();
            if raw.is_empty() {
                features.push(None);
            } else {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("cannot parse {name} from {raw:?}"),
                })?;
                features.push(if v.is_finite() { Some(v) } else { None });
            }
        }
        rows.push(WindowRow {
            job_id: get(job_col, id_columns[0])?.trim().to_string(),
            task_id: get(task_col, id_columns[1])?.trim().to_string(),
            start,
            end,
            features,
        });
    }

    let mut report = AdaptReport::default();
    let dim = feature_names.len();

    // Group windows per (job, task), preserving a deterministic order.
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<WindowRow>>> = BTreeMap::new();
    for row in rows {
        grouped
            .entry(row.job_id.clone())
            .or_default()
            .entry(row.task_id.clone())
            .or_default()
            .push(row);
    }

    let mut traces = Vec::new();
    for (job_id, mut tasks) in grouped {
        // Per-job feature means for imputation.
        let mut sums = vec![0.0f64; dim];
        let mut counts = vec![0usize; dim];
        for windows in tasks.values() {
            for w in windows {
                for (j, v) in w.features.iter().enumerate() {
                    if let Some(v) = v {
                        sums[j] += v;
                        counts[j] += 1;
                    }
                }
            }
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();

        // Task-relative window ends and imputed feature series.
        struct TaskWindows {
            ends: Vec<f64>,
            features: Vec<Vec<f64>>,
            latency: f64,
        }
        let mut prepared: BTreeMap<String, TaskWindows> = BTreeMap::new();
        let mut schedule: Vec<f64> = Vec::new();
        for (task_id, windows) in tasks.iter_mut() {
            windows.sort_by(|a, b| {
                a.start
                    .partial_cmp(&b.start)
                    .unwrap()
                    .then(a.end.partial_cmp(&b.end).unwrap())
            });
            let first_start = windows[0].start;
            let last_end = windows.last().unwrap().end;
            let latency = last_end - first_start;
            let mut ends = Vec::with_capacity(windows.len());
            let mut features = Vec::with_capacity(windows.len());
            for w in windows.iter() {
                ends.push(w.end - first_start);
                let vals: Vec<f64> = w
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v.unwrap_or_else(|| {
                            report.imputed_values += 1;
                            means[j]
                        })
                    })
                    .collect();
                features.push(vals);
            }
            schedule.extend_from_slice(&ends);
            prepared.insert(
                task_id.clone(),
                TaskWindows {
                    ends,
                    features,
                    latency,
                },
            );
        }
        schedule.sort_by(|a, b| a.partial_cmp(b).unwrap());
        schedule.dedup();

        // Re-grid each task onto the shared schedule with carry-forward.
        let mut records = Vec::with_capacity(prepared.len());
        for (task_id, tw) in prepared {
            let finish = schedule
                .iter()
                .position(|&tau| tau >= tw.latency)
                .expect("latency is one of the schedule times");
            let mut snapshots = BTreeMap::new();
            for (t, &tau) in schedule.iter().enumerate().take(finish + 1) {
                // Latest window closed by tau; before the first close, use the
                // first window's features.
                let idx = tw.ends.iter().rposition(|&e| e <= tau).unwrap_or(0);
                let idx = if t == finish { tw.ends.len() - 1 } else { idx };
                snapshots.insert(t, FeatureVector::new(tw.features[idx].clone())?);
            }
            records.push(TaskRecord {
                job_id: job_id.clone(),
                task_id,
                snapshots,
                latency: tw.latency,
            });
        }

        let trace = JobTrace {
            job_id,
            tasks: records,
            checkpoints: schedule,
            feature_dim: dim,
        };
        trace.validate()?;
        traces.push(trace);
    }
    Ok((traces, report))
}
