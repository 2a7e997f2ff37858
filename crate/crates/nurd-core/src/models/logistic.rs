//! Logistic-regression propensity scores: the probability that a task
//! belongs to the finished class given its features.
//!
//! Finished tasks are labeled 1 and running tasks 0. Features are
//! standardized internally; classes receive inverse-frequency sample weights
//! so early checkpoints with few finished tasks do not collapse the score
//! toward the majority class. The weighted L2-penalized log-likelihood is
//! maximized by gradient ascent with backtracking, which keeps the loss
//! non-increasing step to step.

use crate::error::{Error, Result};

const PS_CLAMP: f64 = 1e-6;

/// A fitted propensity-score model.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    weights: Vec<f64>,
    bias: f64,
    /// Per-feature (shift, scale) applied before the linear term.
    normalization: Vec<(f64, f64)>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl PropensityModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Estimates the propensity score for one feature vector, clamped to
    /// [1e-6, 1 - 1e-6] so it never reaches 0 or 1 exactly.
    pub fn estimate_ps(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        let mut z = self.bias;
        for ((v, w), (shift, scale)) in x.iter().zip(&self.weights).zip(&self.normalization) {
            z += w * (v - shift) / scale;
        }
        Ok(sigmoid(z).clamp(PS_CLAMP, 1.0 - PS_CLAMP))
    }
}

/// Fits the propensity model on finished-task features (label 1) versus
/// running-task features (label 0).
pub fn fit_logistic<X: AsRef<[f64]>>(
    x_fin: &[X],
    x_run: &[X],
    l2: f64,
    max_iter: usize,
) -> Result<PropensityModel> {
    if x_fin.is_empty() {
        return Err(Error::EmptyClass("finished".into()));
    }
    if x_run.is_empty() {
        return Err(Error::EmptyClass("running".into()));
    }
    if l2 < 0.0 || !l2.is_finite() {
        return Err(Error::InvalidConfig(format!("l2 must be >= 0, got {l2}")));
    }
    let dim = x_fin[0].as_ref().len();
    let rows: Vec<&[f64]> = x_fin
        .iter()
        .map(|r| r.as_ref())
        .chain(x_run.iter().map(|r| r.as_ref()))
        .collect();
    for r in &rows {
        if r.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature in training set".into()));
        }
    }
    let n = rows.len();
    let n_fin = x_fin.len();

    // Internal standardization; constant features scale to 1 and zero out.
    let mut normalization = Vec::with_capacity(dim);
    for j in 0..dim {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n as f64;
        let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        normalization.push((mean, scale));
    }
    let std_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&normalization)
                .map(|(v, (shift, scale))| (v - shift) / scale)
                .collect()
        })
        .collect();

    // Inverse-frequency weights: each class contributes half the total mass.
    let w_fin = n as f64 / (2.0 * n_fin as f64);
    let w_run = n as f64 / (2.0 * (n - n_fin) as f64);
    let sample_weight = |i: usize| if i < n_fin { w_fin } else { w_run };
    let label = |i: usize| if i < n_fin { 1.0 } else { 0.0 };
    let total_weight = n as f64;

    // Mean weighted log-likelihood minus the L2 penalty (bias unpenalized).
    let objective = |w: &[f64], b: f64| -> f64 {
        let mut ll = 0.0;
        for (i, row) in std_rows.iter().enumerate() {
            let z: f64 = b + row.iter().zip(w).map(|(x, wi)| x * wi).sum::<f64>();
            // log p for label 1, log (1-p) for label 0, via stable log(1+e^z).
            let log1pexp = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            let contrib = if label(i) > 0.5 { z - log1pexp } else { -log1pexp };
            ll += sample_weight(i) * contrib;
        }
        ll / total_weight - 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
    };

    let gradient = |w: &[f64], b: f64| -> (Vec<f64>, f64) {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for (i, row) in std_rows.iter().enumerate() {
            let z: f64 = b + row.iter().zip(w).map(|(x, wi)| x * wi).sum::<f64>();
            let err = label(i) - sigmoid(z);
            let sw = sample_weight(i);
            for (g, x) in gw.iter_mut().zip(row) {
                *g += sw * err * x;
            }
            gb += sw * err;
        }
        for (g, wi) in gw.iter_mut().zip(w) {
            *g = *g / total_weight - l2 * wi;
        }
        (gw, gb / total_weight)
    };

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut obj = objective(&weights, bias);
    let mut step = 1.0;
    let tol = 1e-6;

    for _ in 0..max_iter {
        let (gw, gb) = gradient(&weights, bias);
        let gnorm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if gnorm <= tol {
            break;
        }
        // Backtracking line search on the ascent direction.
        let mut eta = step;
        let mut accepted = false;
        for _ in 0..40 {
            let cand_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w + eta * g).collect();
            let cand_b = bias + eta * gb;
            let cand_obj = objective(&cand_w, cand_b);
            if cand_obj >= obj {
                weights = cand_w;
                bias = cand_b;
                obj = cand_obj;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
        // Let the step grow back so progress is not permanently throttled.
        step = (eta * 2.0).min(16.0);
    }

    Ok(PropensityModel {
        weights,
        bias,
        normalization,
    })
}
