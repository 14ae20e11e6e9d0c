//! Depth-limited regression trees boosted with AdaBoost.R2.

use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::{ln, powf};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree with squared-error splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], max_depth: usize) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        let idx: Vec<usize> = (0..y.len()).collect();
        tree.grow(x, y, idx, max_depth);
        tree
    }

    pub fn constant(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf(value)],
        }
    }

    fn grow(&mut self, x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, depth: usize) -> usize {
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len().max(1) as f64;
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if depth == 0 || idx.len() < 2 {
            return me;
        }
        let Some((feature, threshold)) = best_split(x, y, &idx) else {
            return me;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][feature] <= threshold);
        let left = self.grow(x, y, l, depth - 1);
        let right = self.grow(x, y, r, depth - 1);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Split minimizing the summed squared error of the two children, or `None`
/// when no split reduces it.
fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let n = idx.len() as f64;
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
    let parent = total_sq - total * total / n;
    let n_features = x[idx[0]].len();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for f in 0..n_features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let (mut ls, mut lsq) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let yi = y[order[k]];
            ls += yi;
            lsq += yi * yi;
            let xv = x[order[k]][f];
            let xn = x[order[k + 1]][f];
            if xv == xn {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let rs = total - ls;
            let rsq = total_sq - lsq;
            let sse = (lsq - ls * ls / nl) + (rsq - rs * rs / nr);
            if best.is_none_or(|(b, _, _)| sse < b - 1e-15) {
                best = Some((sse, f, 0.5 * (xv + xn)));
            }
        }
    }
    match best {
        Some((sse, f, t)) if sse < parent - 1e-15 * parent.abs().max(1e-300) => Some((f, t)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            max_depth: 3,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

/// AdaBoost.R2 ensemble with linear loss; predicts the weighted median of
/// its stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub stages: Vec<RegressionTree>,
    pub stage_weights: Vec<f64>,
}

impl BoostedTrees {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &BoostParams) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::NotEnoughWords { needed: 2, got: n });
        }
        if x.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: x.len(),
            });
        }
        if y.iter().all(|&v| v == y[0]) {
            return Ok(Self {
                stages: vec![RegressionTree::constant(y[0])],
                stage_weights: vec![1.0],
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut w = vec![1.0 / n as f64; n];
        let mut stages = Vec::new();
        let mut stage_weights = Vec::new();
        let mut bx = Vec::with_capacity(n);
        let mut by = Vec::with_capacity(n);
        for _ in 0..params.n_estimators {
            // weighted bootstrap
            let mut cdf = Vec::with_capacity(n);
            let mut acc = 0.0;
            for &wi in &w {
                acc += wi;
                cdf.push(acc);
            }
            bx.clear();
            by.clear();
            for _ in 0..n {
                let u = rng.gen::<f64>() * acc;
                let i = cdf.partition_point(|&c| c <= u).min(n - 1);
                bx.push(x[i].clone());
                by.push(y[i]);
            }
            let tree = RegressionTree::fit(&bx, &by, params.max_depth);
            let err: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| (tree.predict(xi) - yi).abs()).collect();
            let max_err = err.iter().copied().fold(0.0, f64::max);
            let loss: Vec<f64> = if max_err > 0.0 {
                err.iter().map(|e| e / max_err).collect()
            } else {
                err
            };
            let avg: f64 = loss.iter().zip(&w).map(|(l, wi)| l * wi).sum();
            if avg <= 0.0 {
                stages.push(tree);
                stage_weights.push(1.0);
                break;
            }
            if avg >= 0.5 {
                if stages.is_empty() {
                    stages.push(tree);
                    stage_weights.push(1.0);
                }
                break;
            }
            let beta = avg / (1.0 - avg);
            stages.push(tree);
            stage_weights.push(params.learning_rate * ln(1.0 / beta));
            for (wi, l) in w.iter_mut().zip(&loss) {
                *wi *= powf(beta, (1.0 - l) * params.learning_rate);
            }
            let s: f64 = w.iter().sum();
            if !(s > 0.0) {
                break;
            }
            w.iter_mut().for_each(|wi| *wi /= s);
        }
        Ok(Self { stages, stage_weights })
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut preds: Vec<(f64, f64)> = self
            .stages
            .iter()
            .zip(&self.stage_weights)
            .map(|(t, &w)| (t.predict(features), w))
            .collect();
        preds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = preds.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        for (p, w) in &preds {
            acc += w;
            if acc >= 0.5 * total {
                return *p;
            }
        }
        preds.last().map_or(0.0, |p| p.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_respects_depth() {
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| (i * i) as f64).collect();
        let t = RegressionTree::fit(&x, &y, 3);
        assert_eq!(t.depth(), 3);
    }

    #[test]
    fn tree_finds_step() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![0.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 4 { 1.0 } else { 5.0 }).collect();
        let t = RegressionTree::fit(&x, &y, 1);
        assert_eq!(t.predict(&[0.0, 2.0]), 1.0);
        assert_eq!(t.predict(&[0.0, 7.0]), 5.0);
    }

    #[test]
    fn constant_targets() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let m = BoostedTrees::fit(&x, &[0.3; 10], &BoostParams::default()).unwrap();
        for xi in &x {
            assert_eq!(m.predict(xi), 0.3);
        }
        assert_eq!(m.predict(&[99.0]), 0.3);
    }

    #[test]
    fn stage_weights_positive_and_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + 0.3 * rng.gen::<f64>()).collect();
        let m = BoostedTrees::fit(&x, &y, &BoostParams::default()).unwrap();
        assert!(!m.stage_weights.is_empty());
        assert!(m.stage_weights.iter().all(|w| w.is_finite() && *w > 0.0));
    }

    #[test]
    fn weighted_median() {
        let m = BoostedTrees {
            stages: vec![RegressionTree::constant(1.0), RegressionTree::constant(2.0), RegressionTree::constant(10.0)],
            stage_weights: vec![0.2, 0.5, 0.3],
        };
        assert_eq!(m.predict(&[]), 2.0);
    }

    #[test]
    fn too_few_samples() {
        assert!(BoostedTrees::fit(&[vec![1.0]], &[1.0], &BoostParams::default()).is_err());
    }
}
