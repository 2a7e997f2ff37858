//! Gradient-boosted regression trees with squared-error loss.
//!
//! Boosting round k fits a depth-bounded regression tree to the current
//! residuals by exact greedy variance reduction; the model accumulates
//! `learning_rate * tree`. Splits scan the midpoints of sorted distinct
//! feature values, with ties broken by lowest feature index then lowest
//! threshold, so fitting is deterministic and invariant to row order.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GbtHyperparams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtHyperparams {
    fn default() -> Self {
        GbtHyperparams {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
        }
    }
}

impl GbtHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds < 1 {
            return Err(Error::InvalidConfig("n_rounds must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be in (0,1], got {}",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// One regression tree stored as a node arena.
#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A fitted boosted-tree latency predictor.
#[derive(Debug, Clone)]
pub struct LatencyModel {
    base_prediction: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
    dim: usize,
    /// Training MSE after each boosting round; non-increasing.
    round_mse: Vec<f64>,
}

impl LatencyModel {
    pub fn base_prediction(&self) -> f64 {
        self.base_prediction
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Training MSE after each round, starting from the base prediction.
    pub fn round_mse(&self) -> &[f64] {
        &self.round_mse
    }

    /// Predicts latency for one feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature in input".into()));
        }
        let mut pred = self.base_prediction;
        for tree in &self.trees {
            pred += self.learning_rate * tree.predict(x);
        }
        Ok(pred)
    }

    /// Plain-text dump for debugging; not a stability contract.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{{\"base\": {}, \"learning_rate\": {}, \"trees\": {}}}\n",
            self.base_prediction,
            self.learning_rate,
            self.trees.len()
        ));
        out
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn sse(targets: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| targets[i]).sum::<f64>() / n;
    let sse = idx
        .iter()
        .map(|&i| {
            let d = targets[i] - mean;
            d * d
        })
        .sum::<f64>();
    (mean, sse)
}

#[allow(clippy::needless_range_loop)] // `feature` indexes columns across rows
fn best_split(
    x: &[&[f64]],
    residuals: &[f64],
    idx: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let dim = x[0].len();
    let (_, parent_sse) = sse(residuals, idx);
    let mut best: Option<SplitCandidate> = None;

    for feature in 0..dim {
        // Sort the node's rows by this feature.
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| {
            x[a][feature]
                .partial_cmp(&x[b][feature])
                .expect("finite features")
        });

        // Prefix sums over the sorted order for O(1) split evaluation.
        let n = order.len();
        let mut prefix_sum = vec![0.0; n + 1];
        let mut prefix_sq = vec![0.0; n + 1];
        for (k, &i) in order.iter().enumerate() {
            prefix_sum[k + 1] = prefix_sum[k] + residuals[i];
            prefix_sq[k + 1] = prefix_sq[k] + residuals[i] * residuals[i];
        }

        // Candidate thresholds: midpoints between consecutive distinct values.
        for k in 1..n {
            let lo = x[order[k - 1]][feature];
            let hi = x[order[k]][feature];
            if lo == hi {
                continue;
            }
            if k < min_leaf || n - k < min_leaf {
                continue;
            }
            let threshold = lo + (hi - lo) / 2.0;
            let left_n = k as f64;
            let right_n = (n - k) as f64;
            let left_sse = prefix_sq[k] - prefix_sum[k] * prefix_sum[k] / left_n;
            let total_sum = prefix_sum[n];
            let right_sum = total_sum - prefix_sum[k];
            let right_sse =
                (prefix_sq[n] - prefix_sq[k]) - right_sum * right_sum / right_n;
            let gain = parent_sse - left_sse - right_sse;
            if gain <= 1e-12 {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    gain > b.gain + 1e-12
                        || ((gain - b.gain).abs() <= 1e-12
                            && (feature, threshold) < (b.feature, b.threshold))
                }
            };
            if better {
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

fn grow(
    nodes: &mut Vec<Node>,
    x: &[&[f64]],
    residuals: &[f64],
    idx: Vec<usize>,
    depth: usize,
    hp: &GbtHyperparams,
) -> usize {
    let (mean, node_sse) = sse(residuals, &idx);
    let make_leaf = depth >= hp.max_depth
        || idx.len() < 2 * hp.min_samples_leaf
        || node_sse <= 1e-12;
    if !make_leaf {
        if let Some(split) = best_split(x, residuals, &idx, hp.min_samples_leaf) {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| x[i][split.feature] <= split.threshold);
            let slot = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 }); // placeholder
            let left = grow(nodes, x, residuals, left_idx, depth + 1, hp);
            let right = grow(nodes, x, residuals, right_idx, depth + 1, hp);
            nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            return slot;
        }
    }
    nodes.push(Node::Leaf { value: mean });
    nodes.len() - 1
}

/// Fits a boosted-tree regressor on feature rows `x` and targets `y`.
///
/// The fit is fully deterministic; `_seed` is accepted for interface
/// stability but the exact greedy splitter does not consume randomness.
pub fn fit_gbt<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    hp: &GbtHyperparams,
    _seed: u64,
) -> Result<LatencyModel> {
    hp.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "feature rows ({}) and targets ({}) differ in count",
            x.len(),
            y.len()
        )));
    }
    let rows: Vec<&[f64]> = x.iter().map(|r| r.as_ref()).collect();
    let dim = rows[0].len();
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
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite target in training set".into()));
    }

    let n = rows.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut preds = vec![base; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(hp.n_rounds);
    let mut round_mse = Vec::with_capacity(hp.n_rounds + 1);
    let mse = |preds: &[f64]| {
        preds
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64
    };
    round_mse.push(mse(&preds));

    for _ in 0..hp.n_rounds {
        for i in 0..n {
            residuals[i] = y[i] - preds[i];
        }
        let mut nodes = Vec::new();
        grow(&mut nodes, &rows, &residuals, (0..n).collect(), 0, hp);
        let tree = Tree { nodes };
        for i in 0..n {
            preds[i] += hp.learning_rate * tree.predict(rows[i]);
        }
        trees.push(tree);
        round_mse.push(mse(&preds));
    }

    Ok(LatencyModel {
        base_prediction: base,
        learning_rate: hp.learning_rate,
        trees,
        dim,
        round_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_predicts_its_target() {
        let x = vec![vec![1.0, 2.0]];
        let model = fit_gbt(&x, &[7.0], &GbtHyperparams::default(), 0).unwrap();
        let p = model.predict(&[1.0, 2.0]).unwrap();
        assert!((p - 7.0).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn constant_targets_predict_constant_everywhere() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * 3) as f64]).collect();
        let y = vec![4.25; 30];
        let model = fit_gbt(&x, &y, &GbtHyperparams::default(), 0).unwrap();
        for probe in [[-5.0, 0.0], [12.0, 36.0], [100.0, -2.0]] {
            let p = model.predict(&probe).unwrap();
            assert!((p - 4.25).abs() < 1e-12, "got {p}");
        }
    }

    #[test]
    fn piecewise_dataset_reaches_low_training_mse() {
        // 50-point 1-D piecewise target; 100 rounds of depth-3 trees should
        // push training MSE below 1% of the target variance.
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let u = v[0];
                if u < 0.3 {
                    1.0
                } else if u < 0.7 {
                    5.0
                } else {
                    2.0
                }
            })
            .collect();
        let hp = GbtHyperparams {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
        };
        let model = fit_gbt(&x, &y, &hp, 0).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
        let final_mse = *model.round_mse().last().unwrap();
        assert!(
            final_mse < 0.01 * var,
            "final MSE {final_mse} vs variance {var}"
        );
    }

    #[test]
    fn zero_round_equivalent_is_base_prediction() {
        // With a single round and vanishing residuals the model returns the
        // base prediction everywhere.
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![3.0, 3.0];
        let hp = GbtHyperparams {
            n_rounds: 1,
            ..Default::default()
        };
        let model = fit_gbt(&x, &y, &hp, 0).unwrap();
        assert_eq!(model.predict(&[0.5]).unwrap(), 3.0);
        assert_eq!(model.base_prediction(), 3.0);
    }

    #[test]
    fn interpolates_training_points_on_small_instance() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let hp = GbtHyperparams {
            n_rounds: 400,
            max_depth: 7,
            learning_rate: 0.3,
            min_samples_leaf: 1,
        };
        let model = fit_gbt(&x, &y, &hp, 0).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let p = model.predict(xi).unwrap();
            assert!((p - yi).abs() < 1e-6, "predict({}) = {p}, want {yi}", xi[0]);
        }
    }

    #[test]
    fn nan_input_is_rejected() {
        let x = vec![vec![1.0]];
        let model = fit_gbt(&x, &[1.0], &GbtHyperparams::default(), 0).unwrap();
        assert!(model.predict(&[f64::NAN]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let x = vec![vec![1.0, 2.0]];
        let model = fit_gbt(&x, &[1.0], &GbtHyperparams::default(), 0).unwrap();
        assert!(matches!(
            model.predict(&[1.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(fit_gbt(&x, &[], &GbtHyperparams::default(), 0).is_err());
    }

    #[test]
    fn training_mse_non_increasing() {
        // Deterministic pseudo-random fixture.
        let mut state = 88172645463325252u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let x: Vec<Vec<f64>> = (0..120).map(|_| vec![next(), next(), next()]).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 3.0 * v[0] - 2.0 * v[1] + v[2] * v[2] + next())
            .collect();
        let model = fit_gbt(&x, &y, &GbtHyperparams::default(), 0).unwrap();
        let mse = model.round_mse();
        for w in mse.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "MSE increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn row_order_does_not_change_predictions() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64, (i % 5) as f64])
            .collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * i) % 11) as f64).collect();
        let model_a = fit_gbt(&x, &y, &GbtHyperparams::default(), 0).unwrap();
        let mut shuffled: Vec<(Vec<f64>, f64)> =
            x.iter().cloned().zip(y.iter().cloned()).collect();
        shuffled.reverse();
        shuffled.swap(3, 17);
        let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) = shuffled.into_iter().unzip();
        let model_b = fit_gbt(&xs, &ys, &GbtHyperparams::default(), 0).unwrap();
        for probe in x.iter().take(10) {
            let pa = model_a.predict(probe).unwrap();
            let pb = model_b.predict(probe).unwrap();
            assert!((pa - pb).abs() < 1e-9, "{pa} vs {pb}");
        }
    }
}
