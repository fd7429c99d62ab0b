//! L2-regularized logistic regression, full-batch gradient descent.
//!
//! Objective on n rows: (1/n) Σ log-loss + (λ / 2n) ‖w‖², intercept unpenalized.
//! Parameters start at zero. Full-batch Nesterov-accelerated gradient steps of
//! fixed size 1/L, where L bounds the gradient's Lipschitz constant, with a
//! momentum restart whenever the objective increases.

use super::patterns::{sigmoid, softplus, PatternSet};

pub(crate) struct LogisticModel {
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub fn logit(&self, features: &[u32]) -> f64 {
        features
            .iter()
            .fold(self.bias, |z, &f| z + self.weights[f as usize])
    }

    pub fn predict(&self, features: &[u32]) -> f64 {
        sigmoid(self.logit(features))
    }
}

/// Gershgorin bound on the largest eigenvalue of X̃ᵀ D X̃ / n (X̃ with an intercept
/// column); all entries are nonnegative, so this is the largest row sum.
fn curvature_bound(set: &PatternSet) -> f64 {
    let d = set.n_features;
    let n = set.total();
    // gram[a][b] over augmented index 0 = intercept, 1 + f = feature f
    // row sums only: rowsum[a] = Σ_b gram[a][b] = Σ_j w_j x̃_ja (Σ_b x̃_jb)
    let mut rowsum = vec![0.0; d + 1];
    for j in 0..set.len() {
        let feats = set.features(j);
        let w = set.count(j);
        let k = w * (1 + feats.len()) as f64;
        rowsum[0] += k;
        for &f in feats {
            rowsum[1 + f as usize] += k;
        }
    }
    rowsum.into_iter().fold(0.0, f64::max) / n
}

fn objective(set: &PatternSet, model: &LogisticModel, l2: f64, n: f64) -> f64 {
    let mut loss = 0.0;
    for j in 0..set.len() {
        let z = model.logit(set.features(j));
        // -log σ(z) = softplus(-z); -log(1-σ(z)) = softplus(z)
        loss += set.ones[j] * softplus(-z) + set.zeros[j] * softplus(z);
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    loss / n + 0.5 * l2 * reg / n
}

pub(crate) fn fit(set: &PatternSet, l2: f64, max_iterations: usize, tol: f64) -> LogisticModel {
    let d = set.n_features;
    let n = set.total();
    let lipschitz = 0.25 * curvature_bound(set) + l2 / n;
    let step = 1.0 / lipschitz;
    // x: iterate, y: extrapolated point where the gradient is taken
    let mut x = LogisticModel {
        bias: 0.0,
        weights: vec![0.0; d],
    };
    let mut y = LogisticModel {
        bias: 0.0,
        weights: vec![0.0; d],
    };
    let mut momentum = 1.0f64;
    let mut prev = objective(set, &x, l2, n);
    let mut grad = vec![0.0; d];
    for _ in 0..max_iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        for j in 0..set.len() {
            let feats = set.features(j);
            let r = set.count(j) * y.predict(feats) - set.ones[j];
            grad_bias += r;
            for &f in feats {
                grad[f as usize] += r;
            }
        }
        let next_bias = y.bias - step * grad_bias / n;
        let next_weights: Vec<f64> = y
            .weights
            .iter()
            .zip(&grad)
            .map(|(w, g)| w - step * (g / n + l2 * w / n))
            .collect();
        let next = LogisticModel {
            bias: next_bias,
            weights: next_weights,
        };
        let cur = objective(set, &next, l2, n);
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        // adaptive restart: drop momentum whenever the objective goes up
        let beta = if cur > prev {
            momentum = 1.0;
            0.0
        } else {
            let b = (momentum - 1.0) / next_momentum;
            momentum = next_momentum;
            b
        };
        y.bias = next.bias + beta * (next.bias - x.bias);
        for ((yw, nw), xw) in y.weights.iter_mut().zip(&next.weights).zip(&x.weights) {
            *yw = nw + beta * (nw - xw);
        }
        x = next;
        if (prev - cur).abs() < tol {
            break;
        }
        prev = cur;
    }
    x
}
