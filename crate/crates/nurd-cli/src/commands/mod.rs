pub mod generate;
pub mod predict;
pub mod report;
pub mod schedule;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::{resolve, KvConfig};
use nurd_core::models::GbtHyperparams;
use nurd_core::nurd::{Mode, NurdConfig};

/// Prediction knobs shared by `predict` and `schedule`.
#[derive(clap::Args, Debug, Clone)]
pub struct PredictorArgs {
    /// Comma-separated modes: nurd, nurd_nc, gbtr, oracle.
    #[arg(long)]
    pub mode: Option<String>,

    /// Calibration parameter alpha.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Minimum positive weight epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Straggling threshold percentile of true latencies.
    #[arg(long)]
    pub percentile: Option<f64>,

    /// Absolute straggling threshold in seconds (overrides --percentile).
    #[arg(long)]
    pub threshold_abs: Option<f64>,

    /// Warm-up fraction of tasks that must finish before predicting.
    #[arg(long)]
    pub warmup: Option<f64>,

    /// Refit cadence in checkpoints.
    #[arg(long)]
    pub retrain_every: Option<usize>,

    /// Boosting rounds for the latency model.
    #[arg(long)]
    pub gbt_rounds: Option<usize>,

    /// Tree depth for the latency model.
    #[arg(long)]
    pub gbt_depth: Option<usize>,

    /// Shrinkage per boosting round.
    #[arg(long)]
    pub gbt_learning_rate: Option<f64>,

    /// Minimum samples per leaf.
    #[arg(long)]
    pub gbt_min_leaf: Option<usize>,
}

impl PredictorArgs {
    pub fn modes(&self, file: &KvConfig) -> Result<Vec<Mode>> {
        let raw = resolve(
            self.mode.clone(),
            file.get("mode").map(str::to_string),
            "nurd".to_string(),
        );
        let mut modes = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let mode = part.parse::<Mode>()?;
            if !modes.contains(&mode) {
                modes.push(mode);
            }
        }
        anyhow::ensure!(!modes.is_empty(), "no modes given");
        // Reports iterate modes in name order so that identical experiments
        // produce identical bytes no matter how the flag was spelled.
        modes.sort_by_key(|m| m.to_string());
        Ok(modes)
    }

    pub fn nurd_config(&self, file: &KvConfig, mode: Mode, seed: u64) -> Result<NurdConfig> {
        let defaults = NurdConfig::default();
        Ok(NurdConfig {
            mode,
            alpha: resolve(self.alpha, file.parsed("alpha")?, defaults.alpha),
            epsilon: resolve(self.epsilon, file.parsed("epsilon")?, defaults.epsilon),
            threshold_percentile: resolve(
                self.percentile,
                file.parsed("percentile")?,
                defaults.threshold_percentile,
            ),
            absolute_threshold: self.threshold_abs.or(file.parsed("threshold_abs")?),
            warmup_fraction: resolve(self.warmup, file.parsed("warmup")?, defaults.warmup_fraction),
            retrain_every: resolve(
                self.retrain_every,
                file.parsed("retrain_every")?,
                defaults.retrain_every,
            ),
            seed,
            delta_override: None,
        })
    }

    pub fn hyperparams(&self, file: &KvConfig) -> Result<GbtHyperparams> {
        let defaults = GbtHyperparams::default();
        Ok(GbtHyperparams {
            n_rounds: resolve(self.gbt_rounds, file.parsed("gbt_rounds")?, defaults.n_rounds),
            max_depth: resolve(self.gbt_depth, file.parsed("gbt_depth")?, defaults.max_depth),
            learning_rate: resolve(
                self.gbt_learning_rate,
                file.parsed("gbt_learning_rate")?,
                defaults.learning_rate,
            ),
            min_samples_leaf: resolve(
                self.gbt_min_leaf,
                file.parsed("gbt_min_leaf")?,
                defaults.min_samples_leaf,
            ),
        })
    }
}

pub fn resolve_out_dir(flag: &Option<PathBuf>, file: &KvConfig) -> Result<PathBuf> {
    let out = flag
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nurd-out"));
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    Ok(out)
}

pub fn resolve_workers(flag: Option<usize>, file: &KvConfig) -> Result<usize> {
    Ok(resolve(flag, file.parsed("workers")?, 0))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Formats a float the way every CSV in this tool does: shortest
/// round-trippable form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
