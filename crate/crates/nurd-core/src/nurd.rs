//! The online straggler-prediction loop.
//!
//! The loop replays a job's checkpoints. Once a warm-up count of tasks has
//! finished, it computes feature centroids of the finished and running
//! populations, turns their geometry into a latency indicator `rho` and a
//! calibration term `delta`, then at every later checkpoint refits a latency
//! model on finished tasks and a propensity model on finished-versus-running
//! features. Each running task's predicted latency is divided by
//! `max(epsilon, min(z + delta, 1))`; predictions at or above the straggling
//! threshold move the task to the predicted set and end its evaluation.
//!
//! Besides the full method (`Mode::Nurd`) the loop supports the uncalibrated
//! variant (`Mode::NurdNc`, weight = propensity score), the unweighted
//! supervised baseline (`Mode::Gbtr`), and a ground-truth oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::error::{Error, Result};
use crate::models::{fit_gbt, fit_logistic, GbtHyperparams, LatencyModel, PropensityModel};
use crate::trace::JobTrace;

/// Cap applied to the latency indicator when the centroids coincide.
pub const RHO_CAP: f64 = 1e6;

/// Defaults for the logistic propensity fit.
const PS_L2: f64 = 1e-4;
const PS_MAX_ITER: usize = 500;

/// Prediction mode for one run of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Reweighted predictions with centroid calibration.
    Nurd,
    /// No calibration: the weight is the raw propensity score.
    NurdNc,
    /// Supervised baseline: weight fixed at 1.
    Gbtr,
    /// Ground truth: flags exactly the true stragglers still running.
    Oracle,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nurd" => Ok(Mode::Nurd),
            "nurd_nc" | "nurd-nc" | "nurdnc" => Ok(Mode::NurdNc),
            "gbtr" => Ok(Mode::Gbtr),
            "oracle" => Ok(Mode::Oracle),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Nurd => "nurd",
            Mode::NurdNc => "nurd_nc",
            Mode::Gbtr => "gbtr",
            Mode::Oracle => "oracle",
        };
        write!(f, "{s}")
    }
}

/// Calibration state computed once per job at the warm-up checkpoint.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub delta: f64,
}

impl CalibrationParams {
    /// Derives the calibration from centroids of min-max-normalized features.
    pub fn from_centroids(c_fin: &[f64], c_run: &[f64], alpha: f64, epsilon: f64) -> Self {
        let rho = latency_indicator(c_fin, c_run, RHO_CAP);
        CalibrationParams {
            alpha,
            epsilon,
            rho,
            delta: calibration_term(rho, alpha),
        }
    }
}

/// Coordinate-wise means of the two feature populations.
pub fn compute_centroids<X: AsRef<[f64]>>(
    x_fin: &[X],
    x_run: &[X],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mean = |rows: &[X], which: &str| -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Err(Error::EmptyClass(which.into()));
        }
        let dim = rows[0].as_ref().len();
        let mut acc = vec![0.0; dim];
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= rows.len() as f64;
        }
        Ok(acc)
    };
    let c_fin = mean(x_fin, "finished")?;
    let c_run = mean(x_run, "running")?;
    if c_fin.len() != c_run.len() {
        return Err(Error::Dimension {
            expected: c_fin.len(),
            got: c_run.len(),
        });
    }
    Ok((c_fin, c_run))
}

/// `rho = ||c_fin||^2 / ||c_run - c_fin||^2`, capped; a near-zero denominator
/// returns the cap outright.
pub fn latency_indicator(c_fin: &[f64], c_run: &[f64], cap: f64) -> f64 {
    assert_eq!(c_fin.len(), c_run.len(), "centroid dimensions differ");
    let num: f64 = c_fin.iter().map(|v| v * v).sum();
    let den: f64 = c_fin
        .iter()
        .zip(c_run)
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    if den < 1e-12 {
        cap
    } else {
        (num / den).min(cap)
    }
}

/// `delta = 1 / (1 + rho) - alpha`, always in `(-alpha, 1 - alpha]`.
pub fn calibration_term(rho: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + rho) - alpha
}

/// Final weighting function `w = max(epsilon, min(z + delta, 1))`.
pub fn weight(z: f64, delta: f64, epsilon: f64) -> f64 {
    (z + delta).min(1.0).max(epsilon)
}

/// Adjusted prediction `y_hat / w`; amplification-only since `w <= 1`.
pub fn adjust(y_hat: f64, w: f64) -> f64 {
    y_hat / w
}

/// Verdict recorded for one task at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Straggler,
    KeepRunning,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Straggler => write!(f, "straggler"),
            Verdict::KeepRunning => write!(f, "keep_running"),
        }
    }
}

/// One per-task, per-checkpoint prediction record.
#[derive(Debug, Clone)]
pub struct LogEntry {
    pub task_id: String,
    pub checkpoint: usize,
    pub y_hat: f64,
    pub z: f64,
    pub w: f64,
    pub y_adj: f64,
    pub verdict: Verdict,
}

/// The full prediction record of one run; the source for all metrics.
#[derive(Debug, Clone, Default)]
pub struct PredictionLog {
    pub entries: Vec<LogEntry>,
}

impl PredictionLog {
    /// Serializes as `job_id,task_id,t,y_hat,z,w,y_adj,verdict`.
    pub fn write_csv<W: Write>(&self, job_id: &str, mut out: W) -> Result<()> {
        writeln!(out, "job_id,task_id,t,y_hat,z,w,y_adj,verdict")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                job_id, e.task_id, e.checkpoint, e.y_hat, e.z, e.w, e.y_adj, e.verdict
            )?;
        }
        Ok(())
    }

    /// Checkpoint at which each task was flagged, if ever.
    pub fn flag_checkpoints(&self) -> BTreeMap<String, usize> {
        let mut flags = BTreeMap::new();
        for e in &self.entries {
            if e.verdict == Verdict::Straggler {
                flags.entry(e.task_id.clone()).or_insert(e.checkpoint);
            }
        }
        flags
    }
}

/// Configuration of one prediction run.
#[derive(Debug, Clone)]
pub struct NurdConfig {
    pub mode: Mode,
    pub alpha: f64,
    pub epsilon: f64,
    /// Percentile of the job's true latencies defining the straggling
    /// threshold (oracle threshold, nearest-rank).
    pub threshold_percentile: f64,
    /// If set, overrides the percentile with an absolute threshold (seconds).
    pub absolute_threshold: Option<f64>,
    /// Fraction of tasks that must finish before prediction starts.
    pub warmup_fraction: f64,
    /// Refit models at checkpoints with new finished tasks whose index is a
    /// multiple of this cadence.
    pub retrain_every: usize,
    pub seed: u64,
    /// Diagnostic override of the calibration term; bypasses centroids.
    pub delta_override: Option<f64>,
}

impl Default for NurdConfig {
    fn default() -> Self {
        NurdConfig {
            mode: Mode::Nurd,
            alpha: 0.5,
            epsilon: 0.05,
            threshold_percentile: 90.0,
            absolute_threshold: None,
            warmup_fraction: 0.04,
            retrain_every: 1,
            seed: 0,
            delta_override: None,
        }
    }
}

impl NurdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be in (0,1), got {}",
                self.epsilon
            )));
        }
        if !(self.threshold_percentile > 0.0 && self.threshold_percentile < 100.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold_percentile must be in (0,100), got {}",
                self.threshold_percentile
            )));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "warmup_fraction must be in (0,1), got {}",
                self.warmup_fraction
            )));
        }
        if self.retrain_every < 1 {
            return Err(Error::InvalidConfig("retrain_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// The evolving partition of the job's tasks at one checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointState {
    pub t: usize,
    pub finished: BTreeSet<String>,
    pub running: BTreeSet<String>,
    pub predicted_stragglers: BTreeSet<String>,
}

/// Everything a prediction run produces.
#[derive(Debug, Clone)]
pub struct PredictionOutcome {
    pub predicted_stragglers: BTreeSet<String>,
    pub log: PredictionLog,
    /// The straggling threshold the run used.
    pub threshold: f64,
    /// Calibration state, for modes that compute one.
    pub calibration: Option<CalibrationParams>,
    /// Checkpoint index at which warm-up completed, when it did.
    pub warmup_checkpoint: Option<usize>,
}

impl PredictionOutcome {
    fn empty(threshold: f64) -> Self {
        PredictionOutcome {
            predicted_stragglers: BTreeSet::new(),
            log: PredictionLog::default(),
            threshold,
            calibration: None,
            warmup_checkpoint: None,
        }
    }
}

/// Nearest-rank percentile: the value at rank `ceil(p/100 * n)` (1-based) of
/// the sorted sample.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let raw = p * n as f64 / 100.0;
    let rank = ((raw - 1e-9).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// The job's straggling threshold implied by the percentile.
pub fn latency_threshold(job: &JobTrace, threshold_percentile: f64) -> f64 {
    let lats: Vec<f64> = job.tasks.iter().map(|t| t.latency).collect();
    percentile_nearest_rank(&lats, threshold_percentile)
}

/// Tasks whose true latency is at or above the percentile threshold.
pub fn straggler_truth(job: &JobTrace, threshold_percentile: f64) -> BTreeSet<String> {
    let tau = latency_threshold(job, threshold_percentile);
    job.tasks
        .iter()
        .filter(|t| t.latency >= tau)
        .map(|t| t.task_id.clone())
        .collect()
}

/// Frozen per-feature min-max scaling fitted at the calibration checkpoint.
struct MinMaxScaler {
    lo: Vec<f64>,
    scale: Vec<f64>,
}

impl MinMaxScaler {
    /// Fits over every snapshot visible at checkpoint `upto_t` (all tasks,
    /// snapshot indices `<= upto_t`).
    fn fit(job: &JobTrace, upto_t: usize) -> MinMaxScaler {
        let d = job.feature_dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for task in &job.tasks {
            for (_, snap) in task.snapshots.range(..=upto_t) {
                for (j, v) in snap.values().iter().enumerate() {
                    lo[j] = lo[j].min(*v);
                    hi[j] = hi[j].max(*v);
                }
            }
        }
        let scale = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| {
                let span = h - l;
                if span > 1e-12 {
                    span
                } else {
                    1.0
                }
            })
            .collect();
        for l in &mut lo {
            if !l.is_finite() {
                *l = 0.0;
            }
        }
        MinMaxScaler { lo, scale }
    }

    fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.scale))
            .map(|(v, (l, s))| (v - l) / s)
            .collect()
    }
}

/// Runs the online prediction loop on one job.
pub fn run_online(
    job: &JobTrace,
    cfg: &NurdConfig,
    hp: &GbtHyperparams,
) -> Result<PredictionOutcome> {
    run_online_observed(job, cfg, hp, |_| {})
}

/// As [`run_online`], invoking `observer` with the task partition after the
/// warm-up checkpoint and after every subsequent checkpoint.
pub fn run_online_observed<F>(
    job: &JobTrace,
    cfg: &NurdConfig,
    hp: &GbtHyperparams,
    mut observer: F,
) -> Result<PredictionOutcome>
where
    F: FnMut(&CheckpointState),
{
    cfg.validate()?;
    hp.validate()?;
    job.validate()?;

    let n = job.n_tasks();
    let t_count = job.n_checkpoints();
    let tau_stra = cfg
        .absolute_threshold
        .unwrap_or_else(|| latency_threshold(job, cfg.threshold_percentile));

    let warm_needed = 5usize.max((cfg.warmup_fraction * n as f64).ceil() as usize);
    if warm_needed > n {
        return Err(Error::WarmupImpossible {
            job_id: job.job_id.clone(),
            reason: format!("needs {warm_needed} finished tasks but the job has {n}"),
        });
    }

    let finished_by = |tau: f64| -> usize {
        job.tasks.iter().filter(|t| t.latency <= tau).count()
    };
    let warmup_t = (0..t_count).find(|&t| finished_by(job.checkpoints[t]) >= warm_needed);
    let Some(t0) = warmup_t else {
        return Err(Error::WarmupImpossible {
            job_id: job.job_id.clone(),
            reason: format!("{warm_needed} tasks never finish within the schedule"),
        });
    };

    // Partition at warm-up.
    let mut finished: BTreeSet<String> = BTreeSet::new();
    let mut running: BTreeSet<String> = BTreeSet::new();
    for task in &job.tasks {
        if task.latency <= job.checkpoints[t0] {
            finished.insert(task.task_id.clone());
        } else {
            running.insert(task.task_id.clone());
        }
    }
    let mut flagged: BTreeSet<String> = BTreeSet::new();
    observer(&CheckpointState {
        t: t0,
        finished: finished.clone(),
        running: running.clone(),
        predicted_stragglers: flagged.clone(),
    });

    if running.is_empty() {
        // Nothing unlabeled: the job resolved itself during warm-up.
        let mut outcome = PredictionOutcome::empty(tau_stra);
        outcome.warmup_checkpoint = Some(t0);
        return Ok(outcome);
    }
    if t0 + 1 >= t_count {
        return Err(Error::WarmupImpossible {
            job_id: job.job_id.clone(),
            reason: "warm-up completes only at the final checkpoint".into(),
        });
    }

    let by_id: BTreeMap<&str, &crate::trace::TaskRecord> = job
        .tasks
        .iter()
        .map(|t| (t.task_id.as_str(), t))
        .collect();

    // Training matrices: finished tasks contribute their final snapshot and
    // true latency; running tasks contribute their current snapshot.
    let mut x_fin: Vec<Vec<f64>> = Vec::new();
    let mut y_fin: Vec<f64> = Vec::new();
    for id in &finished {
        let task = by_id[id.as_str()];
        x_fin.push(task.final_snapshot().values().to_vec());
        y_fin.push(task.latency);
    }
    let snapshot_at = |id: &str, t: usize| -> Vec<f64> {
        by_id[id]
            .snapshot_at(t)
            .expect("running task has a snapshot at every live checkpoint")
            .values()
            .to_vec()
    };
    let mut x_run: Vec<Vec<f64>> = running.iter().map(|id| snapshot_at(id, t0)).collect();

    // Feature normalization for centroids and the propensity model, frozen at
    // the calibration checkpoint.
    let scaler = MinMaxScaler::fit(job, t0);
    let normalize_all =
        |rows: &[Vec<f64>]| -> Vec<Vec<f64>> { rows.iter().map(|r| scaler.transform(r)).collect() };

    let needs_ps = matches!(cfg.mode, Mode::Nurd | Mode::NurdNc);
    let needs_latency_model = matches!(cfg.mode, Mode::Nurd | Mode::NurdNc | Mode::Gbtr);

    let calibration = if cfg.mode == Mode::Nurd {
        let (c_fin, c_run) = compute_centroids(&normalize_all(&x_fin), &normalize_all(&x_run))?;
        let mut params = CalibrationParams::from_centroids(&c_fin, &c_run, cfg.alpha, cfg.epsilon);
        if let Some(delta) = cfg.delta_override {
            params.delta = delta;
        }
        Some(params)
    } else {
        None
    };

    let mut latency_model: Option<LatencyModel> = if needs_latency_model {
        Some(fit_gbt(&x_fin, &y_fin, hp, cfg.seed)?)
    } else {
        None
    };
    let mut ps_model: Option<PropensityModel> = if needs_ps {
        Some(fit_logistic(
            &normalize_all(&x_fin),
            &normalize_all(&x_run),
            PS_L2,
            PS_MAX_ITER,
        )?)
    } else {
        None
    };

    let mut log = PredictionLog::default();

    for t in (t0 + 1)..t_count {
        let tau_t = job.checkpoints[t];
        // Tasks that finished between the previous checkpoint and this one.
        let newly_finished: Vec<String> = running
            .iter()
            .filter(|id| by_id[id.as_str()].latency <= tau_t)
            .cloned()
            .collect();
        for id in &newly_finished {
            running.remove(id);
            finished.insert(id.clone());
            let task = by_id[id.as_str()];
            x_fin.push(task.final_snapshot().values().to_vec());
            y_fin.push(task.latency);
        }
        if running.is_empty() {
            observer(&CheckpointState {
                t,
                finished: finished.clone(),
                running: running.clone(),
                predicted_stragglers: flagged.clone(),
            });
            break;
        }
        x_run = running.iter().map(|id| snapshot_at(id, t)).collect();

        if !newly_finished.is_empty() && t.is_multiple_of(cfg.retrain_every) {
            if needs_latency_model {
                latency_model = Some(fit_gbt(&x_fin, &y_fin, hp, cfg.seed)?);
            }
            if needs_ps {
                ps_model = Some(fit_logistic(
                    &normalize_all(&x_fin),
                    &normalize_all(&x_run),
                    PS_L2,
                    PS_MAX_ITER,
                )?);
            }
        }

        let mut newly_flagged: Vec<String> = Vec::new();
        for id in &running {
            let task = by_id[id.as_str()];
            let x = snapshot_at(id, t);
            let (y_hat, z, w) = match cfg.mode {
                Mode::Oracle => (task.latency, 1.0, 1.0),
                Mode::Gbtr => {
                    let pred = latency_model.as_ref().unwrap().predict(&x)?.max(0.0);
                    (pred, 1.0, 1.0)
                }
                Mode::NurdNc => {
                    let pred = latency_model.as_ref().unwrap().predict(&x)?.max(0.0);
                    let z = ps_model
                        .as_ref()
                        .unwrap()
                        .estimate_ps(&scaler.transform(&x))?;
                    (pred, z, z)
                }
                Mode::Nurd => {
                    let pred = latency_model.as_ref().unwrap().predict(&x)?.max(0.0);
                    let z = ps_model
                        .as_ref()
                        .unwrap()
                        .estimate_ps(&scaler.transform(&x))?;
                    let cal = calibration.as_ref().unwrap();
                    (pred, z, weight(z, cal.delta, cal.epsilon))
                }
            };
            let y_adj = adjust(y_hat, w);
            let verdict = if y_adj >= tau_stra {
                Verdict::Straggler
            } else {
                Verdict::KeepRunning
            };
            log.entries.push(LogEntry {
                task_id: id.clone(),
                checkpoint: t,
                y_hat,
                z,
                w,
                y_adj,
                verdict,
            });
            if verdict == Verdict::Straggler {
                newly_flagged.push(id.clone());
            }
        }
        for id in newly_flagged {
            running.remove(&id);
            flagged.insert(id);
        }
        observer(&CheckpointState {
            t,
            finished: finished.clone(),
            running: running.clone(),
            predicted_stragglers: flagged.clone(),
        });
    }

    Ok(PredictionOutcome {
        predicted_stragglers: flagged,
        log,
        threshold: tau_stra,
        calibration,
        warmup_checkpoint: Some(t0),
    })
}

/// Anything that can produce flag events by replaying a job's checkpoints.
pub trait Predictor {
    fn predict(&self, job: &JobTrace) -> Result<PredictionOutcome>;
}

/// The prediction loop as a reusable predictor.
#[derive(Debug, Clone)]
pub struct NurdPredictor {
    pub cfg: NurdConfig,
    pub hp: GbtHyperparams,
}

impl Predictor for NurdPredictor {
    fn predict(&self, job: &JobTrace) -> Result<PredictionOutcome> {
        run_online(job, &self.cfg, &self.hp)
    }
}

/// Predictor that never flags anything; useful as a scheduling control.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverFlag;

impl Predictor for NeverFlag {
    fn predict(&self, job: &JobTrace) -> Result<PredictionOutcome> {
        Ok(PredictionOutcome::empty(latency_threshold(job, 90.0)))
    }
}
