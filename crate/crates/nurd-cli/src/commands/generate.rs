use std::path::PathBuf;

use anyhow::Result;

use nurd_core::trace::{generate_synthetic, write_canonical, SyntheticConfig};

use crate::config::{resolve, KvConfig};
use crate::inputs::{parse_seed_list, SyntheticFlags};
use crate::{log_info, log_warn};

use super::{resolve_out_dir, write_file};

#[derive(clap::Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub synth: SyntheticFlags,

    /// Tasks per job.
    #[arg(long)]
    pub tasks: Option<usize>,

    /// Base generator seed; job k uses seed + k.
    #[arg(long)]
    pub seed: Option<String>,

    /// Output directory for tasks.csv and snapshots.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &GenerateArgs, file: &KvConfig) -> Result<()> {
    let params = args.synth.params(args.tasks, file)?;
    let seed_raw = resolve(
        args.seed.clone(),
        file.get("seed").map(str::to_string),
        "1".to_string(),
    );
    let seeds = parse_seed_list(&seed_raw)?;
    let out = resolve_out_dir(&args.out, file)?;

    if params.tasks < 100 {
        log_warn(&format!(
            "jobs with {} tasks fall below the default 100-task filter and would be dropped by predict/schedule",
            params.tasks
        ));
    }

    let mut jobs = Vec::new();
    for &seed in &seeds {
        for k in 0..params.jobs {
            jobs.push(generate_synthetic(&SyntheticConfig {
                n_tasks: params.tasks,
                feature_dim: params.dim,
                straggler_fraction: params.straggler_fraction,
                feature_drift: params.drift,
                latency_shape: params.shape,
                n_checkpoints: params.checkpoints,
                seed: seed.wrapping_add(k),
            })?);
        }
    }
    jobs.sort_by(|a, b| a.job_id.cmp(&b.job_id));
    jobs.dedup_by(|a, b| a.job_id == b.job_id);

    let mut tasks_csv = Vec::new();
    let mut snaps_csv = Vec::new();
    write_canonical(&jobs, &mut tasks_csv, &mut snaps_csv)?;
    write_file(&out.join("tasks.csv"), &String::from_utf8(tasks_csv)?)?;
    write_file(&out.join("snapshots.csv"), &String::from_utf8(snaps_csv)?)?;
    log_info(&format!(
        "wrote {} job(s) to {}",
        jobs.len(),
        out.display()
    ));
    Ok(())
}
