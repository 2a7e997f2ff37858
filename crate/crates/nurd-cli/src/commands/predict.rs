use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};

use nurd_core::batch::map_items;
use nurd_core::metrics::{aggregate, f1_curve, final_confusion, rates, ConfusionCounts, Rates};
use nurd_core::nurd::{run_online, Mode};
use nurd_core::trace::JobTrace;

use crate::config::{resolve, KvConfig};
use crate::inputs::{parse_seed_list, InputArgs};
use crate::{log_info, log_warn};

use super::{fmt_f64, resolve_out_dir, resolve_workers, write_file, PredictorArgs};

#[derive(clap::Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub predictor: PredictorArgs,

    /// Experiment seeds: "7", "1,2,9", or "1..20".
    #[arg(long)]
    pub seed: Option<String>,

    /// Worker threads for the job sweep (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct RunRow {
    mode: Mode,
    job_id: String,
    seed: u64,
    counts: ConfusionCounts,
    rates: Rates,
    curve: Vec<f64>,
    log_csv: String,
}

pub fn run(args: &PredictArgs, file: &KvConfig) -> Result<()> {
    let seeds = parse_seed_list(&resolve(
        args.seed.clone(),
        file.get("seed").map(str::to_string),
        "1".to_string(),
    ))?;
    let modes = args.predictor.modes(file)?;
    let workers = resolve_workers(args.workers, file)?;
    let out = resolve_out_dir(&args.out, file)?;
    let hp = args.predictor.hyperparams(file)?;
    let jobs = args.input.load_jobs(file, &seeds)?;

    // One work item per (job, mode, seed).
    let mut items: Vec<(&JobTrace, Mode, u64)> = Vec::new();
    for (job, seed) in &jobs {
        for &mode in &modes {
            items.push((job, mode, *seed));
        }
    }
    log_info(&format!(
        "running {} prediction item(s) on {} worker(s)",
        items.len(),
        workers
    ));

    let results: Vec<std::result::Result<RunRow, String>> =
        map_items(&items, workers, |(job, mode, seed)| {
            let cfg = args
                .predictor
                .nurd_config(file, *mode, *seed)
                .map_err(|e| e.to_string())?;
            let outcome = run_online(job, &cfg, &hp)
                .map_err(|e| format!("job {} mode {mode}: {e}", job.job_id))?;
            let truth = nurd_core::nurd::straggler_truth(job, cfg.threshold_percentile);
            let counts = final_confusion(&outcome.log, &truth, job)
                .map_err(|e| format!("job {}: {e}", job.job_id))?;
            let curve = f1_curve(&outcome.log, &truth, job);
            let mut log_csv = Vec::new();
            outcome
                .log
                .write_csv(&job.job_id, &mut log_csv)
                .map_err(|e| e.to_string())?;
            Ok(RunRow {
                mode: *mode,
                job_id: job.job_id.clone(),
                seed: *seed,
                counts,
                rates: rates(&counts),
                curve: curve.points.iter().map(|(_, f1)| *f1).collect(),
                log_csv: String::from_utf8(log_csv).expect("csv is utf-8"),
            })
        });

    let mut rows: Vec<RunRow> = Vec::new();
    let mut failures = 0usize;
    for result in results {
        match result {
            Ok(row) => rows.push(row),
            Err(msg) => {
                failures += 1;
                log_warn(&format!("skipping run: {msg}"));
            }
        }
    }
    if rows.is_empty() {
        bail!("all {failures} prediction run(s) failed");
    }
    rows.sort_by(|a, b| {
        (a.mode.to_string(), &a.job_id, a.seed).cmp(&(b.mode.to_string(), &b.job_id, b.seed))
    });

    // Per-run confusion rows.
    let mut per_job = String::from("mode,job_id,seed,tp,fp,fn,tn,tpr,fpr,fnr,f1\n");
    for r in &rows {
        per_job.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.mode,
            r.job_id,
            r.seed,
            r.counts.true_positives,
            r.counts.false_positives,
            r.counts.false_negatives,
            r.counts.true_negatives,
            fmt_f64(r.rates.tpr),
            fmt_f64(r.rates.fpr),
            fmt_f64(r.rates.fnr),
            fmt_f64(r.rates.f1),
        ));
    }
    write_file(&out.join("per_job.csv"), &per_job)?;

    // Aggregated summary per mode.
    let mut summary = String::from("mode,tpr,fpr,fnr,f1\n");
    for &mode in &modes {
        let mode_rows: Vec<Rates> = rows
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| r.rates)
            .collect();
        if mode_rows.is_empty() {
            continue;
        }
        let m = aggregate(&mode_rows);
        summary.push_str(&format!(
            "{mode},{},{},{},{}\n",
            fmt_f64(m.tpr),
            fmt_f64(m.fpr),
            fmt_f64(m.fnr),
            fmt_f64(m.f1)
        ));
    }
    write_file(&out.join("summary.csv"), &summary)?;

    // Mean F1 curves per mode.
    let mut curves = String::from("mode,normalized_time,f1\n");
    for &mode in &modes {
        let mode_curves: Vec<&Vec<f64>> = rows
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| &r.curve)
            .collect();
        if mode_curves.is_empty() {
            continue;
        }
        for step in 0..10 {
            let mean: f64 = mode_curves.iter().map(|c| c[step]).sum::<f64>()
                / mode_curves.len() as f64;
            curves.push_str(&format!(
                "{mode},{},{}\n",
                fmt_f64((step + 1) as f64 / 10.0),
                fmt_f64(mean)
            ));
        }
    }
    write_file(&out.join("curves.csv"), &curves)?;

    // Full prediction logs, one file per mode, one section per job (the
    // lowest seed wins when a job ran under several seeds).
    for &mode in &modes {
        let mut chosen: BTreeMap<&str, &RunRow> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.mode == mode) {
            chosen.entry(r.job_id.as_str()).or_insert(r);
        }
        if chosen.is_empty() {
            continue;
        }
        let mut body = String::from("job_id,task_id,t,y_hat,z,w,y_adj,verdict\n");
        for row in chosen.values() {
            for line in row.log_csv.lines().skip(1) {
                body.push_str(line);
                body.push('\n');
            }
        }
        write_file(&out.join(format!("predictions_{mode}.csv")), &body)?;
    }

    log_info(&format!(
        "wrote prediction reports for {} run(s) ({failures} failed) to {}",
        rows.len(),
        out.display()
    ));
    Ok(())
}
