//! Input loading, seed-list parsing, and rng derivation shared by the
//! subcommands.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use nurd_core::trace::{
    adapt_alibaba, adapt_google, generate_synthetic, parse_canonical, JobTrace, LatencyShape,
    SyntheticConfig,
};

use crate::config::{resolve, KvConfig};
use crate::{log_info, log_warn};

/// Synthetic-generator knobs shared by `generate` and the `--synthetic`
/// input mode of `predict`/`schedule`.
#[derive(Args, Debug, Clone)]
pub struct SyntheticFlags {
    /// Synthetic: number of jobs per seed.
    #[arg(long)]
    pub jobs: Option<u64>,

    /// Synthetic: feature dimension.
    #[arg(long)]
    pub dim: Option<usize>,

    /// Synthetic: fraction of slow-mode tasks, in (0,1).
    #[arg(long)]
    pub straggler_fraction: Option<f64>,

    /// Synthetic: slow-task feature offset in standardized units.
    #[arg(long)]
    pub drift: Option<f64>,

    /// Synthetic: latency shape (bimodal or long_tail).
    #[arg(long)]
    pub shape: Option<String>,

    /// Synthetic: checkpoints per job.
    #[arg(long)]
    pub checkpoints: Option<usize>,
}

impl SyntheticFlags {
    /// Merges flags, config file, and defaults; `tasks_flag` carries the
    /// per-job task count, whose flag name differs between subcommands.
    pub fn params(&self, tasks_flag: Option<usize>, file: &KvConfig) -> Result<SyntheticParams> {
        let shape_str = resolve(
            self.shape.clone(),
            file.get("shape").map(str::to_string),
            "bimodal".to_string(),
        );
        Ok(SyntheticParams {
            jobs: resolve(self.jobs, file.parsed("jobs")?, 1),
            tasks: resolve(tasks_flag, file.parsed("tasks")?, 300),
            dim: resolve(self.dim, file.parsed("dim")?, 6),
            straggler_fraction: resolve(
                self.straggler_fraction,
                file.parsed("straggler_fraction")?,
                0.1,
            ),
            drift: resolve(self.drift, file.parsed("drift")?, 3.0),
            shape: shape_str.parse::<LatencyShape>()?,
            checkpoints: resolve(self.checkpoints, file.parsed("checkpoints")?, 20),
        })
    }
}

/// Where experiment jobs come from: canonical files, a raw trace archive
/// subset, or the synthetic generator.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Canonical task manifest CSV (requires --snapshots).
    #[arg(long)]
    pub tasks: Option<PathBuf>,

    /// Canonical snapshot log CSV (requires --tasks).
    #[arg(long)]
    pub snapshots: Option<PathBuf>,

    /// Google-style window rows to adapt (job_id,task_id,start_time,end_time,MCU..FL).
    #[arg(long)]
    pub google: Option<PathBuf>,

    /// Alibaba-style window rows to adapt (task_id,instance_id,start_time,end_time,cpu_avg..mem_max).
    #[arg(long)]
    pub alibaba: Option<PathBuf>,

    /// Generate synthetic jobs instead of reading files.
    #[arg(long)]
    pub synthetic: bool,

    #[command(flatten)]
    pub synth: SyntheticFlags,

    /// Synthetic: tasks per job.
    #[arg(long = "tasks-per-job", alias = "n-tasks")]
    pub tasks_per_job: Option<usize>,

    /// Drop jobs with fewer tasks than this before running.
    #[arg(long)]
    pub min_tasks: Option<usize>,
}

/// Synthetic parameters after merging flags, config file, and defaults.
#[derive(Debug, Clone)]
pub struct SyntheticParams {
    pub jobs: u64,
    pub tasks: usize,
    pub dim: usize,
    pub straggler_fraction: f64,
    pub drift: f64,
    pub shape: LatencyShape,
    pub checkpoints: usize,
}

impl InputArgs {
    pub fn synthetic_params(&self, file: &KvConfig) -> Result<SyntheticParams> {
        self.synth.params(self.tasks_per_job, file)
    }

    /// Loads (job, experiment seed) pairs. Synthetic inputs derive one suite
    /// per seed (job k of seed s uses generator seed `s + k`, tagged with
    /// experiment seed s); file inputs pair every job with every seed.
    pub fn load_jobs(&self, file: &KvConfig, seeds: &[u64]) -> Result<Vec<(JobTrace, u64)>> {
        let min_tasks = resolve(self.min_tasks, file.parsed("min_tasks")?, 100);
        let mut pairs: Vec<(JobTrace, u64)> = Vec::new();

        if self.synthetic {
            let params = self.synthetic_params(file)?;
            for &seed in seeds {
                for k in 0..params.jobs {
                    let cfg = SyntheticConfig {
                        n_tasks: params.tasks,
                        feature_dim: params.dim,
                        straggler_fraction: params.straggler_fraction,
                        feature_drift: params.drift,
                        latency_shape: params.shape,
                        n_checkpoints: params.checkpoints,
                        seed: seed.wrapping_add(k),
                    };
                    pairs.push((generate_synthetic(&cfg)?, seed));
                }
            }
            // Overlapping seed ranges can regenerate a job; keep one copy.
            pairs.sort_by(|a, b| a.0.job_id.cmp(&b.0.job_id).then(a.1.cmp(&b.1)));
            pairs.dedup_by(|a, b| a.0.job_id == b.0.job_id);
        } else {
            let jobs = if let (Some(tasks), Some(snapshots)) = (&self.tasks, &self.snapshots) {
                let t = BufReader::new(
                    File::open(tasks).with_context(|| format!("opening {}", tasks.display()))?,
                );
                let s = BufReader::new(
                    File::open(snapshots)
                        .with_context(|| format!("opening {}", snapshots.display()))?,
                );
                parse_canonical(t, s)?
            } else if let Some(google) = &self.google {
                let r = BufReader::new(
                    File::open(google).with_context(|| format!("opening {}", google.display()))?,
                );
                let (parsed, report) = adapt_google(r)?;
                if report.imputed_values > 0 {
                    log_warn(&format!(
                        "google adapter imputed {} missing feature values",
                        report.imputed_values
                    ));
                }
                parsed
            } else if let Some(alibaba) = &self.alibaba {
                let r = BufReader::new(
                    File::open(alibaba)
                        .with_context(|| format!("opening {}", alibaba.display()))?,
                );
                let (parsed, report) = adapt_alibaba(r)?;
                if report.imputed_values > 0 {
                    log_warn(&format!(
                        "alibaba adapter imputed {} missing feature values",
                        report.imputed_values
                    ));
                }
                parsed
            } else {
                bail!("no input: pass --tasks/--snapshots, --google, --alibaba, or --synthetic");
            };
            for job in jobs {
                for &seed in seeds {
                    pairs.push((job.clone(), seed));
                }
            }
        }

        let before = pairs.len();
        let kept: Vec<(JobTrace, u64)> = pairs
            .into_iter()
            .filter(|(job, _)| job.n_tasks() >= min_tasks)
            .collect();
        if kept.len() < before {
            log_warn(&format!(
                "dropped {} run(s) on jobs with fewer than {min_tasks} tasks",
                before - kept.len()
            ));
        }
        if kept.is_empty() {
            bail!("no jobs left to run after filtering (min_tasks = {min_tasks})");
        }
        log_info(&format!("loaded {} (job, seed) run(s)", kept.len()));
        Ok(kept)
    }
}

/// Parses "7", "1,2,9", or inclusive ranges "1..100".
pub fn parse_seed_list(raw: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.trim().parse().with_context(|| format!("seed range {part:?}"))?;
            let hi: u64 = hi.trim().parse().with_context(|| format!("seed range {part:?}"))?;
            if hi < lo {
                bail!("empty seed range {part:?}");
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(part.parse().with_context(|| format!("seed {part:?}"))?);
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

/// Machine counts: comma list of integers and/or the word "unlimited".
pub fn parse_machine_list(raw: &str) -> Result<Vec<Option<usize>>> {
    let mut counts = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if part.eq_ignore_ascii_case("unlimited") {
            counts.push(None);
        } else {
            counts.push(Some(
                part.parse().with_context(|| format!("machine count {part:?}"))?,
            ));
        }
    }
    if counts.is_empty() {
        bail!("no machine counts given");
    }
    Ok(counts)
}

/// Stable 64-bit FNV-1a, for deriving per-job rng streams.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Independent rng stream for one (job, seed) pair.
pub fn job_rng_seed(job_id: &str, seed: u64) -> u64 {
    fnv1a64(job_id.as_bytes()) ^ seed.wrapping_mul(0x9E3779B97F4A7C15)
}
