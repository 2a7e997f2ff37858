//! Canonical checkpointed job traces.
//!
//! A job is a set of tasks observed at a shared schedule of wall-clock
//! checkpoints. Every task carries one feature snapshot per checkpoint from
//! the job start up to the checkpoint at which it finishes, plus its true
//! final latency. The canonical on-disk form is two flat CSV files: a task
//! manifest (`job_id,task_id,latency`) and a snapshot log
//! (`job_id,task_id,t,time,f0,...,f{d-1}`).

mod adapt;
mod synthetic;

pub use adapt::{adapt_alibaba, adapt_google, AdaptReport, ALIBABA_FEATURES, GOOGLE_FEATURES};
pub use synthetic::{generate_synthetic, LatencyShape, SyntheticConfig};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// One task's observed features at a single checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    /// Builds a feature vector, rejecting NaN and infinite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value at index {bad}"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One task: identity, per-checkpoint snapshots, and true final latency.
#[derive(Debug, Clone)]
pub struct TaskRecord {
    pub job_id: String,
    pub task_id: String,
    /// Snapshot per checkpoint index; a contiguous prefix of the job schedule
    /// ending at the task's finish checkpoint.
    pub snapshots: BTreeMap<usize, FeatureVector>,
    /// True final latency in seconds; strictly positive.
    pub latency: f64,
}

impl TaskRecord {
    /// Checkpoint index of the task's last snapshot (its finish checkpoint).
    pub fn final_checkpoint(&self) -> usize {
        *self.snapshots.keys().next_back().expect("validated non-empty")
    }

    /// The snapshot taken when the task finished.
    pub fn final_snapshot(&self) -> &FeatureVector {
        self.snapshots
            .values()
            .next_back()
            .expect("validated non-empty")
    }

    pub fn snapshot_at(&self, t: usize) -> Option<&FeatureVector> {
        self.snapshots.get(&t)
    }
}

/// A job's task set plus its checkpoint schedule; the unit of simulation.
#[derive(Debug, Clone)]
pub struct JobTrace {
    pub job_id: String,
    /// Tasks sorted by `task_id`.
    pub tasks: Vec<TaskRecord>,
    /// Wall-clock time of each checkpoint, strictly increasing, in seconds.
    pub checkpoints: Vec<f64>,
    pub feature_dim: usize,
}

impl JobTrace {
    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_checkpoints(&self) -> usize {
        self.checkpoints.len()
    }

    /// Checks every structural invariant of the canonical format.
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Validation(format!(
                "job {} has no tasks",
                self.job_id
            )));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::Validation(format!(
                "job {} has no checkpoints",
                self.job_id
            )));
        }
        for w in self.checkpoints.windows(2) {
            if !w[0].is_finite() || !w[1].is_finite() || w[0] >= w[1] {
                return Err(Error::Validation(format!(
                    "job {}: checkpoint times not strictly increasing ({} then {})",
                    self.job_id, w[0], w[1]
                )));
            }
        }
        for task in &self.tasks {
            if task.job_id != self.job_id {
                return Err(Error::Validation(format!(
                    "task {} belongs to job {}, found in job {}",
                    task.task_id, task.job_id, self.job_id
                )));
            }
            if !task.latency.is_finite() || task.latency <= 0.0 {
                return Err(Error::Validation(format!(
                    "task {}/{}: latency must be positive, got {}",
                    self.job_id, task.task_id, task.latency
                )));
            }
            if task.snapshots.is_empty() {
                return Err(Error::Validation(format!(
                    "task {}/{} has no snapshots",
                    self.job_id, task.task_id
                )));
            }
            for (t, snap) in &task.snapshots {
                if snap.len() != self.feature_dim {
                    return Err(Error::Dimension {
                        expected: self.feature_dim,
                        got: snap.len(),
                    });
                }
                if *t >= self.checkpoints.len() {
                    return Err(Error::Validation(format!(
                        "task {}/{}: snapshot index {} beyond schedule of length {}",
                        self.job_id,
                        task.task_id,
                        t,
                        self.checkpoints.len()
                    )));
                }
            }
            // Snapshot indices must form the contiguous prefix 0..=finish.
            let finish = task.final_checkpoint();
            if task.snapshots.len() != finish + 1 {
                return Err(Error::Validation(format!(
                    "task {}/{}: snapshot indices are not contiguous from 0",
                    self.job_id, task.task_id
                )));
            }
            // The finish checkpoint is the first whose time covers the latency.
            let expected = self
                .checkpoints
                .iter()
                .position(|&tau| tau >= task.latency);
            match expected {
                Some(idx) if idx == finish => {}
                Some(idx) => {
                    return Err(Error::Validation(format!(
                        "task {}/{}: final snapshot at checkpoint {} but latency {} \
                         is first covered at checkpoint {}",
                        self.job_id, task.task_id, finish, task.latency, idx
                    )));
                }
                None => {
                    return Err(Error::Validation(format!(
                        "task {}/{}: latency {} exceeds the last checkpoint time",
                        self.job_id, task.task_id, task.latency
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Retains exactly the jobs with at least `min_tasks` tasks, preserving order.
pub fn filter_jobs(traces: Vec<JobTrace>, min_tasks: usize) -> Vec<JobTrace> {
    traces
        .into_iter()
        .filter(|j| j.n_tasks() >= min_tasks)
        .collect()
}

fn parse_field<T: std::str::FromStr>(raw: &str, what: &str, line: u64) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {what} from {raw:?}"),
    })
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses the canonical task manifest and snapshot log into validated traces.
///
/// The checkpoint schedule of each job is inferred as the sorted distinct
/// snapshot times seen for that job; every snapshot's `t` column must agree
/// with its time's position in that schedule.
pub fn parse_canonical<R1: Read, R2: Read>(
    tasks_stream: R1,
    snapshots_stream: R2,
) -> Result<Vec<JobTrace>> {
    let mut tasks_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(tasks_stream);
    {
        let headers = tasks_reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let expected = ["job_id", "task_id", "latency"];
        for (i, name) in expected.iter().enumerate() {
            if headers.get(i).map(str::trim) != Some(*name) {
                return Err(Error::Schema((*name).to_string()));
            }
        }
    }

    // (job_id, task_id) -> latency
    let mut latencies: HashMap<(String, String), f64> = HashMap::new();
    let mut job_order: Vec<String> = Vec::new();
    let mut seen_jobs: BTreeSet<String> = BTreeSet::new();
    for rec in tasks_reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        let job_id = rec[0].trim().to_string();
        let task_id = rec[1].trim().to_string();
        let latency: f64 = parse_field(&rec[2], "latency", line)?;
        if seen_jobs.insert(job_id.clone()) {
            job_order.push(job_id.clone());
        }
        if latencies
            .insert((job_id.clone(), task_id.clone()), latency)
            .is_some()
        {
            return Err(Error::Validation(format!(
                "duplicate task row {job_id}/{task_id}"
            )));
        }
    }

    let mut snaps_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(snapshots_stream);
    let feature_dim = {
        let headers = snaps_reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let fixed = ["job_id", "task_id", "t", "time"];
        for (i, name) in fixed.iter().enumerate() {
            if headers.get(i).map(str::trim) != Some(*name) {
                return Err(Error::Schema((*name).to_string()));
            }
        }
        let dim = headers.len().saturating_sub(fixed.len());
        for (j, col) in headers.iter().skip(fixed.len()).enumerate() {
            if col.trim() != format!("f{j}") {
                return Err(Error::Schema(format!("f{j}")));
            }
        }
        dim
    };
    if feature_dim == 0 {
        return Err(Error::Schema("f0".to_string()));
    }

    // (job, task) -> raw snapshot rows (t, time, features)
    type RawSnap = (usize, f64, Vec<f64>);
    let mut by_task: HashMap<(String, String), Vec<RawSnap>> = HashMap::new();
    for rec in snaps_reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record_line(&rec);
        if rec.len() != 4 + feature_dim {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, got {}", 4 + feature_dim, rec.len()),
            });
        }
        let job_id = rec[0].trim().to_string();
        let task_id = rec[1].trim().to_string();
        let key = (job_id.clone(), task_id.clone());
        if !latencies.contains_key(&key) {
            return Err(Error::Validation(format!(
                "snapshot at line {line} references unknown task {job_id}/{task_id}"
            )));
        }
        let t: usize = parse_field(&rec[2], "checkpoint index", line)?;
        let time: f64 = parse_field(&rec[3], "checkpoint time", line)?;
        if !time.is_finite() {
            return Err(Error::Parse {
                line,
                msg: format!("non-finite checkpoint time {time}"),
            });
        }
        let mut values = Vec::with_capacity(feature_dim);
        for j in 0..feature_dim {
            let v: f64 = parse_field(&rec[4 + j], &format!("feature f{j}"), line)?;
            values.push(v);
        }
        by_task.entry(key).or_default().push((t, time, values));
    }

    let mut traces = Vec::new();
    for job_id in job_order {
        // Schedule: sorted distinct snapshot times for this job.
        let mut times: Vec<f64> = by_task
            .iter()
            .filter(|((j, _), _)| *j == job_id)
            .flat_map(|(_, rows)| rows.iter().map(|(_, time, _)| *time))
            .collect();
        if times.is_empty() {
            return Err(Error::Validation(format!(
                "job {job_id} has tasks but no snapshots"
            )));
        }
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        times.dedup();
        let index_of = |time: f64| times.iter().position(|&x| x == time);

        let mut task_ids: Vec<String> = latencies
            .keys()
            .filter(|(j, _)| *j == job_id)
            .map(|(_, t)| t.clone())
            .collect();
        task_ids.sort();

        let mut tasks = Vec::with_capacity(task_ids.len());
        for task_id in task_ids {
            let key = (job_id.clone(), task_id.clone());
            let rows = by_task.remove(&key).ok_or_else(|| {
                Error::Validation(format!("task {job_id}/{task_id} has no snapshots"))
            })?;
            let mut snapshots = BTreeMap::new();
            for (t, time, values) in rows {
                match index_of(time) {
                    Some(idx) if idx == t => {}
                    _ => {
                        return Err(Error::Validation(format!(
                            "task {job_id}/{task_id}: snapshot index {t} does not match \
                             time {time} in the job schedule"
                        )));
                    }
                }
                if snapshots.insert(t, FeatureVector::new(values)?).is_some() {
                    return Err(Error::Validation(format!(
                        "task {job_id}/{task_id}: duplicate snapshot at checkpoint {t}"
                    )));
                }
            }
            tasks.push(TaskRecord {
                job_id: job_id.clone(),
                task_id,
                snapshots,
                latency: latencies[&key],
            });
        }

        let trace = JobTrace {
            job_id,
            tasks,
            checkpoints: times,
            feature_dim,
        };
        trace.validate()?;
        traces.push(trace);
    }
    Ok(traces)
}

/// Writes traces in the canonical two-file format.
///
/// Floats are written in shortest round-trip form, so
/// `parse_canonical(write_canonical(x))` reproduces `x` exactly.
pub fn write_canonical<W1: Write, W2: Write>(
    traces: &[JobTrace],
    mut tasks_out: W1,
    mut snapshots_out: W2,
) -> Result<()> {
    let dim = traces.first().map(|t| t.feature_dim).unwrap_or(0);
    writeln!(tasks_out, "job_id,task_id,latency")?;
    write!(snapshots_out, "job_id,task_id,t,time")?;
    for j in 0..dim {
        write!(snapshots_out, ",f{j}")?;
    }
    writeln!(snapshots_out)?;
    for trace in traces {
        if trace.feature_dim != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: trace.feature_dim,
            });
        }
        for task in &trace.tasks {
            writeln!(
                tasks_out,
                "{},{},{}",
                trace.job_id, task.task_id, task.latency
            )?;
            for (t, snap) in &task.snapshots {
                write!(
                    snapshots_out,
                    "{},{},{},{}",
                    trace.job_id, task.task_id, t, trace.checkpoints[*t]
                )?;
                for v in snap.values() {
                    write!(snapshots_out, ",{v}")?;
                }
                writeln!(snapshots_out)?;
            }
        }
    }
    Ok(())
}
