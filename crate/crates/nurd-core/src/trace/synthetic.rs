//! Deterministic synthetic job traces.
//!
//! Tasks draw a final latency from a fast mode or a slow mode, and a target
//! feature vector whose coordinates are zero-inflated activity spikes; slow
//! tasks additionally shift every coordinate upward by `feature_drift`
//! standard deviations of the fast coordinate distribution. Snapshots ramp
//! smoothly toward the target over the task's lifetime, so running tasks look
//! progressively more like what they will be when they finish.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};

use std::collections::BTreeMap;

use super::{FeatureVector, JobTrace, TaskRecord};
use crate::error::{Error, Result};

/// Shape of the per-job latency distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatencyShape {
    /// Fast mode plus a tight slow cluster well above it.
    Bimodal,
    /// Log-normal fast mode plus a spread-out heavy tail above it.
    LongTail,
}

impl std::str::FromStr for LatencyShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bimodal" => Ok(LatencyShape::Bimodal),
            "long_tail" | "longtail" | "long-tail" => Ok(LatencyShape::LongTail),
            other => Err(Error::InvalidConfig(format!(
                "unknown latency shape {other:?} (expected bimodal or long_tail)"
            ))),
        }
    }
}

impl std::fmt::Display for LatencyShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LatencyShape::Bimodal => write!(f, "bimodal"),
            LatencyShape::LongTail => write!(f, "long_tail"),
        }
    }
}

/// Configuration for one synthetic job.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_tasks: usize,
    pub feature_dim: usize,
    /// Fraction of tasks drawn from the slow mode, in (0,1).
    pub straggler_fraction: f64,
    /// Mean feature offset of slow tasks, in standardized units (multiples of
    /// the fast coordinate's standard deviation).
    pub feature_drift: f64,
    pub latency_shape: LatencyShape,
    /// Number of evenly spaced checkpoints covering [0, max latency].
    pub n_checkpoints: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_tasks: 300,
            feature_dim: 6,
            straggler_fraction: 0.1,
            feature_drift: 3.0,
            latency_shape: LatencyShape::Bimodal,
            n_checkpoints: 20,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        // Jobs below the canonical 100-task floor are permitted so callers
        // can exercise the filter rule; they warn downstream instead.
        if self.n_tasks < 10 {
            return Err(Error::InvalidConfig(format!(
                "n_tasks must be >= 10, got {}",
                self.n_tasks
            )));
        }
        if !(self.straggler_fraction > 0.0 && self.straggler_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "straggler_fraction must be in (0,1), got {}",
                self.straggler_fraction
            )));
        }
        if (self.straggler_fraction * self.n_tasks as f64).ceil() as usize >= self.n_tasks {
            return Err(Error::InvalidConfig(
                "straggler_fraction leaves no fast tasks".into(),
            ));
        }
        if self.feature_drift < 0.0 || !self.feature_drift.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "feature_drift must be >= 0, got {}",
                self.feature_drift
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be >= 1".into()));
        }
        if self.n_checkpoints < 2 {
            return Err(Error::InvalidConfig("n_checkpoints must be >= 2".into()));
        }
        Ok(())
    }
}

/// Base latency scale in seconds.
const LATENCY_SCALE: f64 = 100.0;

/// Probability that a fast task's feature coordinate is active (non-zero).
const SPIKE_PROB: f64 = 0.06;

/// Population standard deviation of one zero-inflated Exp(1) coordinate;
/// used as the unit for `feature_drift`.
fn fast_coord_std() -> f64 {
    (2.0 * SPIKE_PROB - SPIKE_PROB * SPIKE_PROB).sqrt()
}

/// Smooth ramp from 0.7 toward 1 over the task's lifetime fraction `u`.
fn ramp(u: f64) -> f64 {
    1.0 - 0.3 * (-8.0 * u.min(1.0)).exp()
}

/// Generates one synthetic job, deterministically for a given config.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<JobTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_tasks;
    let d = config.feature_dim;
    let n_slow = (config.straggler_fraction * n as f64).ceil() as usize;
    let n_fast = n - n_slow;

    // Latencies: fast mode first, then slow strictly above the realized fast
    // maximum, so percentile thresholds split the modes cleanly.
    let mut latencies = Vec::with_capacity(n);
    match config.latency_shape {
        LatencyShape::Bimodal => {
            let fast = Normal::new(0.45 * LATENCY_SCALE, 0.12 * LATENCY_SCALE).unwrap();
            for _ in 0..n_fast {
                let y: f64 = fast.sample(&mut rng);
                latencies.push(y.clamp(0.05 * LATENCY_SCALE, 1.5 * LATENCY_SCALE));
            }
            let fast_max = latencies.iter().cloned().fold(f64::MIN, f64::max);
            for _ in 0..n_slow {
                let u: f64 = rng.random();
                latencies.push(fast_max * (1.9 + 0.02 * u));
            }
        }
        LatencyShape::LongTail => {
            let fast = LogNormal::new((0.4 * LATENCY_SCALE).ln(), 0.35).unwrap();
            for _ in 0..n_fast {
                let y: f64 = fast.sample(&mut rng);
                latencies.push(y.clamp(0.02 * LATENCY_SCALE, 2.0 * LATENCY_SCALE));
            }
            let fast_max = latencies.iter().cloned().fold(f64::MIN, f64::max);
            let tail = Exp::new(0.8).unwrap();
            for _ in 0..n_slow {
                let e: f64 = tail.sample(&mut rng);
                latencies.push(fast_max * (1.15 + e));
            }
        }
    }

    // Target feature vectors: zero-inflated spikes; slow tasks shifted up on
    // every coordinate by drift standard deviations.
    let drift_offset = config.feature_drift * fast_coord_std();
    let spike = Exp::new(1.0).unwrap();
    let noise = Normal::new(0.0, 0.03).unwrap();
    let mut targets: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let is_slow = i >= n_fast;
        let mut v = Vec::with_capacity(d);
        for _ in 0..d {
            let base = if rng.random::<f64>() < SPIKE_PROB {
                spike.sample(&mut rng)
            } else {
                0.0
            };
            v.push(if is_slow { base + drift_offset } else { base });
        }
        targets.push(v);
    }

    // Evenly spaced checkpoints covering [0, max latency].
    let max_latency = latencies.iter().cloned().fold(f64::MIN, f64::max);
    let t_count = config.n_checkpoints;
    // The fraction is computed first so the final checkpoint equals the
    // maximum latency exactly.
    let checkpoints: Vec<f64> = (0..t_count)
        .map(|t| max_latency * (t as f64 / (t_count - 1) as f64))
        .collect();

    let width = (n as f64).log10().ceil() as usize + 1;
    let mut tasks = Vec::with_capacity(n);
    for (i, (latency, target)) in latencies.iter().zip(&targets).enumerate() {
        let finish = checkpoints
            .iter()
            .position(|&tau| tau >= *latency)
            .expect("schedule covers max latency");
        let mut snapshots = BTreeMap::new();
        for (t, &tau) in checkpoints.iter().enumerate().take(finish + 1) {
            let r = ramp(tau / latency);
            let values: Vec<f64> = target
                .iter()
                .map(|&v| {
                    let jitter: f64 = noise.sample(&mut rng);
                    (v * r * (1.0 + jitter)).max(0.0)
                })
                .collect();
            snapshots.insert(t, FeatureVector::new(values)?);
        }
        tasks.push(TaskRecord {
            job_id: format!("syn-{:08x}", config.seed),
            task_id: format!("t{i:0width$}"),
            snapshots,
            latency: *latency,
        });
    }
    tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));

    let trace = JobTrace {
        job_id: format!("syn-{:08x}", config.seed),
        tasks,
        checkpoints,
        feature_dim: d,
    };
    trace.validate()?;
    Ok(trace)
}
