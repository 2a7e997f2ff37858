use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nurd_core::batch::map_items;
use nurd_core::nurd::{run_online, Mode};
use nurd_core::scheduler::{schedule_limited, schedule_unlimited};
use nurd_core::trace::JobTrace;

use crate::config::{resolve, KvConfig};
use crate::inputs::{job_rng_seed, parse_machine_list, parse_seed_list, InputArgs};
use crate::{log_info, log_warn};

use super::{fmt_f64, resolve_out_dir, resolve_workers, write_file, PredictorArgs};

#[derive(clap::Args, Debug)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub predictor: PredictorArgs,

    /// Machine counts to sweep: integers and/or "unlimited".
    #[arg(long)]
    pub machines: Option<String>,

    /// Experiment seeds: "7", "1,2,9", or "1..100".
    #[arg(long)]
    pub seed: Option<String>,

    /// Worker threads for the sweep (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct OutcomeRow {
    job_id: String,
    mode: Mode,
    machines: Option<usize>,
    seed: u64,
    baseline_jct: f64,
    scheduled_jct: f64,
    reduction: f64,
    relaunch_count: usize,
}

fn machines_label(m: Option<usize>) -> String {
    match m {
        None => "unlimited".to_string(),
        Some(k) => k.to_string(),
    }
}

pub fn run(args: &ScheduleArgs, file: &KvConfig) -> Result<()> {
    let seeds = parse_seed_list(&resolve(
        args.seed.clone(),
        file.get("seed").map(str::to_string),
        "1".to_string(),
    ))?;
    let modes = args.predictor.modes(file)?;
    let machine_counts = parse_machine_list(&resolve(
        args.machines.clone(),
        file.get("machines").map(str::to_string),
        "unlimited".to_string(),
    ))?;
    let workers = resolve_workers(args.workers, file)?;
    let out = resolve_out_dir(&args.out, file)?;
    let hp = args.predictor.hyperparams(file)?;
    let jobs = args.input.load_jobs(file, &seeds)?;

    // One item per (job, mode, seed); machine counts sweep inside so the
    // prediction run is shared and the rng stream matches across counts.
    let mut items: Vec<(&JobTrace, Mode, u64)> = Vec::new();
    for (job, seed) in &jobs {
        for &mode in &modes {
            items.push((job, mode, *seed));
        }
    }
    log_info(&format!(
        "running {} schedule item(s) x {} machine count(s) on {} worker(s)",
        items.len(),
        machine_counts.len(),
        workers
    ));

    let results: Vec<std::result::Result<Vec<OutcomeRow>, String>> =
        map_items(&items, workers, |(job, mode, seed)| {
            let cfg = args
                .predictor
                .nurd_config(file, *mode, *seed)
                .map_err(|e| e.to_string())?;
            let prediction = run_online(job, &cfg, &hp)
                .map_err(|e| format!("job {} mode {mode}: {e}", job.job_id))?;
            let mut rows = Vec::with_capacity(machine_counts.len());
            for &machines in &machine_counts {
                // Same stream per (job, seed) across machine counts.
                let mut rng = ChaCha8Rng::seed_from_u64(job_rng_seed(&job.job_id, *seed));
                let outcome = match machines {
                    None => schedule_unlimited(job, &prediction, &mut rng),
                    Some(m) => schedule_limited(job, &prediction, m, &mut rng),
                }
                .map_err(|e| format!("job {} mode {mode}: {e}", job.job_id))?;
                rows.push(OutcomeRow {
                    job_id: job.job_id.clone(),
                    mode: *mode,
                    machines,
                    seed: *seed,
                    baseline_jct: outcome.baseline_jct,
                    scheduled_jct: outcome.scheduled_jct,
                    reduction: outcome.reduction,
                    relaunch_count: outcome.relaunches.len(),
                });
            }
            Ok(rows)
        });

    let mut rows: Vec<OutcomeRow> = Vec::new();
    let mut failures = 0usize;
    for result in results {
        match result {
            Ok(mut r) => rows.append(&mut r),
            Err(msg) => {
                failures += 1;
                log_warn(&format!("skipping run: {msg}"));
            }
        }
    }
    if rows.is_empty() {
        bail!("all {failures} schedule run(s) failed");
    }
    let machine_key = |m: Option<usize>| m.map(|v| v as i64).unwrap_or(i64::MAX);
    rows.sort_by(|a, b| {
        (a.mode.to_string(), &a.job_id, machine_key(a.machines), a.seed).cmp(&(
            b.mode.to_string(),
            &b.job_id,
            machine_key(b.machines),
            b.seed,
        ))
    });

    let mut outcomes = String::from(
        "job_id,mode,machines,baseline_jct,scheduled_jct,reduction,relaunch_count\n",
    );
    for r in &rows {
        outcomes.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.job_id,
            r.mode,
            machines_label(r.machines),
            fmt_f64(r.baseline_jct),
            fmt_f64(r.scheduled_jct),
            fmt_f64(r.reduction),
            r.relaunch_count
        ));
    }
    write_file(&out.join("outcomes.csv"), &outcomes)?;

    // Mean reduction per (mode, machine count), plus an all-counts mean over
    // the limited counts.
    let mut summary = String::from("mode,machines,mean_reduction\n");
    for &mode in &modes {
        let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.mode == mode) {
            groups
                .entry(machine_key(r.machines))
                .or_default()
                .push(r.reduction);
        }
        if groups.is_empty() {
            continue;
        }
        let mut limited_all: Vec<f64> = Vec::new();
        for (key, reductions) in &groups {
            let mean = reductions.iter().sum::<f64>() / reductions.len() as f64;
            let label = if *key == i64::MAX {
                "unlimited".to_string()
            } else {
                key.to_string()
            };
            summary.push_str(&format!("{mode},{label},{}\n", fmt_f64(mean)));
            if *key != i64::MAX {
                limited_all.extend(reductions.iter().copied());
            }
        }
        if !limited_all.is_empty() {
            let mean = limited_all.iter().sum::<f64>() / limited_all.len() as f64;
            summary.push_str(&format!("{mode},all,{}\n", fmt_f64(mean)));
        }
    }
    write_file(&out.join("schedule_summary.csv"), &summary)?;

    log_info(&format!(
        "wrote {} outcome row(s) ({failures} failed run(s)) to {}",
        rows.len(),
        out.display()
    ));
    Ok(())
}
