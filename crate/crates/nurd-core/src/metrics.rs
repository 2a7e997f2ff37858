//! Confusion metrics, F1-over-normalized-time curves, and cross-job
//! aggregation.
//!
//! A task's final verdict is straggler if it was ever flagged, else
//! non-straggler. Curves sample F1 at ten normalized times, treating tasks
//! flagged at or before each cutoff as the positives of that moment.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::nurd::PredictionLog;
use crate::trace::JobTrace;

/// Final confusion counts for one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Rates derived from confusion counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub f1: f64,
}

/// F1 at the ten normalized times 0.1, 0.2, ..., 1.0.
#[derive(Debug, Clone)]
pub struct TimeSeriesF1 {
    pub points: Vec<(f64, f64)>,
}

/// Final per-task verdicts versus ground truth.
///
/// Errors if the log mentions a task the job does not contain.
pub fn final_confusion(
    log: &PredictionLog,
    truth: &BTreeSet<String>,
    job: &JobTrace,
) -> Result<ConfusionCounts> {
    let task_ids: BTreeSet<&str> = job.tasks.iter().map(|t| t.task_id.as_str()).collect();
    for entry in &log.entries {
        if !task_ids.contains(entry.task_id.as_str()) {
            return Err(Error::Validation(format!(
                "log references task {} absent from job {}",
                entry.task_id, job.job_id
            )));
        }
    }
    let flagged: BTreeSet<String> = log.flag_checkpoints().into_keys().collect();
    confusion_from_sets(&flagged, truth, job.n_tasks())
}

fn confusion_from_sets(
    flagged: &BTreeSet<String>,
    truth: &BTreeSet<String>,
    n_tasks: usize,
) -> Result<ConfusionCounts> {
    let tp = flagged.intersection(truth).count();
    let fp = flagged.len() - tp;
    let fne = truth.len() - tp;
    let covered = tp + fp + fne;
    if covered > n_tasks {
        return Err(Error::Validation(
            "flagged/truth sets exceed the job's task count".into(),
        ));
    }
    Ok(ConfusionCounts {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fne,
        true_negatives: n_tasks - covered,
    })
}

/// TPR, FPR, FNR, and F1 with zero-denominator conventions: a rate with an
/// empty denominator is 0, and F1 is defined as 1 when there is nothing to
/// find and nothing was claimed (tp = fp = fn = 0).
pub fn rates(c: &ConfusionCounts) -> Rates {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let positives = c.true_positives + c.false_negatives;
    let negatives = c.false_positives + c.true_negatives;
    let f1_den = 2 * c.true_positives + c.false_positives + c.false_negatives;
    let f1 = if f1_den == 0 {
        1.0
    } else {
        2.0 * c.true_positives as f64 / f1_den as f64
    };
    Rates {
        tpr: ratio(c.true_positives, positives),
        fpr: ratio(c.false_positives, negatives),
        fnr: ratio(c.false_negatives, positives),
        f1,
    }
}

/// F1 sampled at ten normalized times across the job's schedule.
///
/// At cutoff q the positives are the tasks flagged at a checkpoint whose
/// wall-clock time is within q of the job's total running time.
pub fn f1_curve(log: &PredictionLog, truth: &BTreeSet<String>, job: &JobTrace) -> TimeSeriesF1 {
    let total = *job
        .checkpoints
        .last()
        .expect("validated jobs have checkpoints");
    let flags = log.flag_checkpoints();
    let slop = 1e-9 * total.max(1.0);
    let mut points = Vec::with_capacity(10);
    for step in 1..=10usize {
        let q = step as f64 / 10.0;
        let cutoff = q * total + slop;
        let flagged: BTreeSet<String> = flags
            .iter()
            .filter(|(_, &t)| job.checkpoints[t] <= cutoff)
            .map(|(id, _)| id.clone())
            .collect();
        let counts =
            confusion_from_sets(&flagged, truth, job.n_tasks()).expect("subsets of the job");
        points.push((q, rates(&counts).f1));
    }
    TimeSeriesF1 { points }
}

/// Unweighted arithmetic mean of each rate across jobs.
pub fn aggregate(per_job_rows: &[Rates]) -> Rates {
    assert!(!per_job_rows.is_empty(), "aggregate of zero jobs");
    let n = per_job_rows.len() as f64;
    Rates {
        tpr: per_job_rows.iter().map(|r| r.tpr).sum::<f64>() / n,
        fpr: per_job_rows.iter().map(|r| r.fpr).sum::<f64>() / n,
        fnr: per_job_rows.iter().map(|r| r.fnr).sum::<f64>() / n,
        f1: per_job_rows.iter().map(|r| r.f1).sum::<f64>() / n,
    }
}
