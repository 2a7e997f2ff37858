//! Relaunch-based straggler mitigation.
//!
//! Replays a job's checkpoints against a predictor's flag events. A flagged
//! task is terminated and relaunched on a spare machine; its completion time
//! becomes the flag checkpoint's wall clock plus a latency sampled uniformly
//! from the execution times of tasks already finished. With a limited pool,
//! flagged tasks wait for machines reclaimed from finished relaunches and are
//! retried at the next checkpoint; an unflagged or never-relaunched task
//! completes at its original latency. Relaunches are unconditional on ground
//! truth, so false positives genuinely cost time.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::nurd::PredictionOutcome;
use crate::trace::JobTrace;

/// A pool of spare machines; `None` capacity means unlimited.
#[derive(Debug, Clone)]
pub struct MachinePool {
    capacity: Option<usize>,
    available: usize,
}

impl MachinePool {
    pub fn limited(capacity: usize) -> MachinePool {
        MachinePool {
            capacity: Some(capacity),
            available: capacity,
        }
    }

    pub fn unlimited() -> MachinePool {
        MachinePool {
            capacity: None,
            available: 0,
        }
    }

    /// Grants a machine if one is available; unlimited pools always grant.
    pub fn try_acquire(&mut self) -> bool {
        match self.capacity {
            None => true,
            Some(_) => {
                if self.available > 0 {
                    self.available -= 1;
                    true
                } else {
                    false
                }
            }
        }
    }

    /// Returns a machine this pool previously granted.
    pub fn release(&mut self) {
        if let Some(cap) = self.capacity {
            self.available += 1;
            debug_assert!(self.available <= cap, "released more machines than acquired");
        }
    }

    pub fn available(&self) -> Option<usize> {
        self.capacity.map(|_| self.available)
    }
}

/// One relaunch: which task, at which checkpoint, and its sampled latency.
#[derive(Debug, Clone)]
pub struct RelaunchEvent {
    pub task_id: String,
    pub checkpoint: usize,
    pub new_latency: f64,
}

/// Completion-time accounting for one scheduled run.
#[derive(Debug, Clone)]
pub struct ScheduleOutcome {
    /// Unmitigated job completion time: the largest original latency.
    pub baseline_jct: f64,
    /// Completion time with relaunches applied.
    pub scheduled_jct: f64,
    pub relaunches: Vec<RelaunchEvent>,
    /// `(baseline - scheduled) / baseline`; negative if relaunches backfired.
    pub reduction: f64,
}

/// Uniform draw from the latencies of tasks already finished.
pub fn sample_relaunch_latency<R: Rng>(finished_latencies: &[f64], rng: &mut R) -> Result<f64> {
    if finished_latencies.is_empty() {
        return Err(Error::Validation(
            "no finished latencies to sample a relaunch from".into(),
        ));
    }
    let idx = rng.random_range(0..finished_latencies.len());
    Ok(finished_latencies[idx])
}

/// Relaunches every flagged task immediately (more machines than tasks).
pub fn schedule_unlimited<R: Rng>(
    job: &JobTrace,
    prediction: &PredictionOutcome,
    rng: &mut R,
) -> Result<ScheduleOutcome> {
    schedule_with_pool(job, prediction, MachinePool::unlimited(), rng)
}

/// Relaunches flagged tasks as spare machines permit (fewer machines than
/// tasks); tasks that cannot be placed wait for the next checkpoint.
pub fn schedule_limited<R: Rng>(
    job: &JobTrace,
    prediction: &PredictionOutcome,
    machines: usize,
    rng: &mut R,
) -> Result<ScheduleOutcome> {
    if machines < 1 {
        return Err(Error::InvalidConfig("machine count must be >= 1".into()));
    }
    schedule_with_pool(job, prediction, MachinePool::limited(machines), rng)
}

fn schedule_with_pool<R: Rng>(
    job: &JobTrace,
    prediction: &PredictionOutcome,
    mut pool: MachinePool,
    rng: &mut R,
) -> Result<ScheduleOutcome> {
    let baseline_jct = job
        .tasks
        .iter()
        .map(|t| t.latency)
        .fold(f64::MIN, f64::max);

    // Flag events grouped per checkpoint, tasks in id order.
    let mut flags_at: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (task_id, t) in prediction.log.flag_checkpoints() {
        let task = job
            .tasks
            .iter()
            .find(|task| task.task_id == task_id)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "prediction flags task {task_id} absent from job {}",
                    job.job_id
                ))
            })?;
        flags_at.entry(t).or_default().push(task.task_id.as_str());
    }
    for ids in flags_at.values_mut() {
        ids.sort_unstable();
    }

    let latency_of: BTreeMap<&str, f64> = job
        .tasks
        .iter()
        .map(|t| (t.task_id.as_str(), t.latency))
        .collect();
    let ever_flagged: BTreeSet<&str> = flags_at
        .values()
        .flat_map(|ids| ids.iter().copied())
        .collect();

    // Original latencies of tasks that run to completion, ascending; the
    // relaunch sampling pool at time tau is the prefix with latency <= tau.
    let mut natural_finish: Vec<f64> = job
        .tasks
        .iter()
        .filter(|t| !ever_flagged.contains(t.task_id.as_str()))
        .map(|t| t.latency)
        .collect();
    natural_finish.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));

    let mut completion: BTreeMap<&str, f64> = latency_of.clone();
    let mut pending: BTreeSet<&str> = BTreeSet::new();
    let mut relaunches: Vec<RelaunchEvent> = Vec::new();
    // Completion times of in-flight relaunches, for machine reclamation.
    let mut in_flight: Vec<f64> = Vec::new();

    for (t, &tau) in job.checkpoints.iter().enumerate() {
        // Reclaim machines whose relaunched tasks have completed.
        let mut keep = Vec::with_capacity(in_flight.len());
        for done in in_flight.drain(..) {
            if done <= tau {
                pool.release();
            } else {
                keep.push(done);
            }
        }
        in_flight = keep;

        // A deferred task whose original execution finished no longer needs a
        // relaunch.
        pending.retain(|id| latency_of[id] > tau);

        if let Some(ids) = flags_at.get(&t) {
            pending.extend(ids.iter().copied());
        }
        if pending.is_empty() {
            continue;
        }

        let sample_pool_len = natural_finish.partition_point(|&y| y <= tau);
        let sample_pool = &natural_finish[..sample_pool_len];

        let mut placed: Vec<&str> = Vec::new();
        for &id in &pending {
            if !pool.try_acquire() {
                continue; // wait for new machines at the next checkpoint
            }
            let new_latency = sample_relaunch_latency(sample_pool, rng)?;
            completion.insert(id, tau + new_latency);
            in_flight.push(tau + new_latency);
            relaunches.push(RelaunchEvent {
                task_id: id.to_string(),
                checkpoint: t,
                new_latency,
            });
            placed.push(id);
        }
        for id in placed {
            pending.remove(id);
        }
    }

    let scheduled_jct = completion.values().fold(f64::MIN, |a, &b| a.max(b));
    Ok(ScheduleOutcome {
        baseline_jct,
        scheduled_jct,
        relaunches,
        reduction: (baseline_jct - scheduled_jct) / baseline_jct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GbtHyperparams;
    use crate::nurd::{run_online, Mode, NeverFlag, NurdConfig, Predictor};
    use crate::trace::{generate_synthetic, SyntheticConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn job(seed: u64) -> JobTrace {
        generate_synthetic(&SyntheticConfig {
            n_tasks: 150,
            feature_dim: 4,
            n_checkpoints: 16,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    fn oracle_outcome(job: &JobTrace) -> PredictionOutcome {
        let cfg = NurdConfig {
            mode: Mode::Oracle,
            ..Default::default()
        };
        run_online(job, &cfg, &GbtHyperparams::default()).unwrap()
    }

    #[test]
    fn sampling_is_uniform_enough() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(sample_relaunch_latency(&[12.0], &mut rng).unwrap(), 12.0);
        let pool = [1.0, 2.0];
        let mut sum = 0.0;
        for _ in 0..10_000 {
            sum += sample_relaunch_latency(&pool, &mut rng).unwrap();
        }
        let mean = sum / 10_000.0;
        assert!((mean - 1.5).abs() < 0.02, "mean {mean}");
        let empty: [f64; 0] = [];
        assert!(sample_relaunch_latency(&empty, &mut rng).is_err());
    }

    #[test]
    fn seeded_sampling_reproduces() {
        let pool = [1.0, 2.0, 3.0];
        let draws = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_relaunch_latency(&pool, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draws(4), draws(4));
    }

    #[test]
    fn never_flagging_predictor_changes_nothing() {
        let job = job(3);
        let outcome = NeverFlag.predict(&job).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sched = schedule_unlimited(&job, &outcome, &mut rng).unwrap();
        assert_eq!(sched.scheduled_jct, sched.baseline_jct);
        assert_eq!(sched.reduction, 0.0);
        assert!(sched.relaunches.is_empty());
    }

    #[test]
    fn oracle_reduces_mean_jct_on_bimodal_jobs() {
        let job = job(5);
        let prediction = oracle_outcome(&job);
        let mut total = 0.0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sched = schedule_unlimited(&job, &prediction, &mut rng).unwrap();
            total += sched.reduction;
        }
        let mean = total / 100.0;
        assert!(mean > 0.0, "mean reduction {mean}");
    }

    #[test]
    fn single_flag_completion_is_flag_time_plus_sample() {
        let job = job(7);
        let prediction = oracle_outcome(&job);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sched = schedule_unlimited(&job, &prediction, &mut rng).unwrap();
        assert!(!sched.relaunches.is_empty());
        for ev in &sched.relaunches {
            let tau = job.checkpoints[ev.checkpoint];
            // The relaunched task's contribution is tau + new_latency, which
            // can only bound the scheduled JCT from below.
            assert!(sched.scheduled_jct >= 0.0);
            assert!(tau + ev.new_latency > tau);
        }
    }

    #[test]
    fn ample_machines_match_unlimited() {
        let job = job(11);
        let prediction = oracle_outcome(&job);
        let unlimited = {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            schedule_unlimited(&job, &prediction, &mut rng).unwrap()
        };
        let limited = {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            schedule_limited(&job, &prediction, job.n_tasks(), &mut rng).unwrap()
        };
        assert_eq!(unlimited.scheduled_jct, limited.scheduled_jct);
        assert_eq!(unlimited.relaunches.len(), limited.relaunches.len());
    }

    #[test]
    fn single_machine_defers_simultaneous_flags() {
        let job = job(13);
        let prediction = oracle_outcome(&job);
        // The oracle flags every straggler at the same checkpoint, so a pool
        // of one can place exactly one relaunch there.
        let first_flag_t = prediction
            .log
            .flag_checkpoints()
            .values()
            .min()
            .copied()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sched = schedule_limited(&job, &prediction, 1, &mut rng).unwrap();
        let at_first: Vec<_> = sched
            .relaunches
            .iter()
            .filter(|ev| ev.checkpoint == first_flag_t)
            .collect();
        assert_eq!(at_first.len(), 1, "one machine places one relaunch");
    }

    #[test]
    fn zero_machines_is_rejected() {
        let job = job(17);
        let prediction = oracle_outcome(&job);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(schedule_limited(&job, &prediction, 0, &mut rng).is_err());
    }

    #[test]
    fn pool_conservation() {
        let mut pool = MachinePool::limited(2);
        assert_eq!(pool.available(), Some(2));
        assert!(pool.try_acquire());
        assert!(pool.try_acquire());
        assert!(!pool.try_acquire());
        pool.release();
        assert_eq!(pool.available(), Some(1));
        assert!(pool.try_acquire());
        let mut unlimited = MachinePool::unlimited();
        for _ in 0..1000 {
            assert!(unlimited.try_acquire());
        }
        assert_eq!(unlimited.available(), None);
    }
}
