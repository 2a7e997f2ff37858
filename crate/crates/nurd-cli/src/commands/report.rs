use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use nurd_core::metrics::{aggregate, Rates};

use crate::config::KvConfig;
use crate::log_info;

use super::{fmt_f64, resolve_out_dir, write_file};

/// Rebuilds the aggregate CSVs from per-run files written by `predict` and
/// `schedule`, without re-running anything.
#[derive(clap::Args, Debug)]
pub struct ReportArgs {
    /// Directory holding per_job.csv and/or outcomes.csv.
    #[arg(long)]
    pub from: PathBuf,

    /// Output directory (defaults to --from).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &ReportArgs, file: &KvConfig) -> Result<()> {
    let out_flag = Some(args.out.clone().unwrap_or_else(|| args.from.clone()));
    let out = resolve_out_dir(&out_flag, file)?;
    let mut wrote_any = false;

    let per_job = args.from.join("per_job.csv");
    if per_job.exists() {
        let text = std::fs::read_to_string(&per_job)
            .with_context(|| format!("reading {}", per_job.display()))?;
        let mut by_mode: BTreeMap<String, Vec<Rates>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 11 {
                bail!("{}:{}: expected 11 fields", per_job.display(), lineno + 1);
            }
            let parse = |idx: usize| -> Result<f64> {
                fields[idx]
                    .parse()
                    .with_context(|| format!("{}:{}: field {idx}", per_job.display(), lineno + 1))
            };
            by_mode.entry(fields[0].to_string()).or_default().push(Rates {
                tpr: parse(7)?,
                fpr: parse(8)?,
                fnr: parse(9)?,
                f1: parse(10)?,
            });
        }
        let mut summary = String::from("mode,tpr,fpr,fnr,f1\n");
        for (mode, rows) in &by_mode {
            let m = aggregate(rows);
            summary.push_str(&format!(
                "{mode},{},{},{},{}\n",
                fmt_f64(m.tpr),
                fmt_f64(m.fpr),
                fmt_f64(m.fnr),
                fmt_f64(m.f1)
            ));
        }
        write_file(&out.join("summary.csv"), &summary)?;
        wrote_any = true;
    }

    let outcomes = args.from.join("outcomes.csv");
    if outcomes.exists() {
        let text = std::fs::read_to_string(&outcomes)
            .with_context(|| format!("reading {}", outcomes.display()))?;
        // (mode, machines) -> reductions; machines sort with unlimited last.
        let mut groups: BTreeMap<(String, i64, String), Vec<f64>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                bail!("{}:{}: expected 7 fields", outcomes.display(), lineno + 1);
            }
            let machines = fields[2];
            let key = if machines == "unlimited" {
                i64::MAX
            } else {
                machines.parse::<i64>().with_context(|| {
                    format!("{}:{}: machines field", outcomes.display(), lineno + 1)
                })?
            };
            let reduction: f64 = fields[5].parse().with_context(|| {
                format!("{}:{}: reduction field", outcomes.display(), lineno + 1)
            })?;
            groups
                .entry((fields[1].to_string(), key, machines.to_string()))
                .or_default()
                .push(reduction);
        }
        let modes: Vec<String> = groups
            .keys()
            .map(|(mode, _, _)| mode.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut summary = String::from("mode,machines,mean_reduction\n");
        for mode in &modes {
            let mut limited: Vec<f64> = Vec::new();
            for ((m, key, label), reductions) in &groups {
                if m != mode {
                    continue;
                }
                let mean = reductions.iter().sum::<f64>() / reductions.len() as f64;
                summary.push_str(&format!("{mode},{label},{}\n", fmt_f64(mean)));
                if *key != i64::MAX {
                    limited.extend(reductions.iter().copied());
                }
            }
            if !limited.is_empty() {
                let mean = limited.iter().sum::<f64>() / limited.len() as f64;
                summary.push_str(&format!("{mode},all,{}\n", fmt_f64(mean)));
            }
        }
        write_file(&out.join("schedule_summary.csv"), &summary)?;
        wrote_any = true;
    }

    if !wrote_any {
        bail!(
            "nothing to report: {} has neither per_job.csv nor outcomes.csv",
            args.from.display()
        );
    }
    log_info(&format!("wrote reports to {}", out.display()));
    Ok(())
}
