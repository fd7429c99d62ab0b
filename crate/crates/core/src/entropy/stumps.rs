//! Gradient-boosted depth-1 trees on the logistic loss (100 rounds, shrinkage 0.1).

use super::patterns::{sigmoid, PatternSet};

pub(crate) const ROUNDS: usize = 100;
pub(crate) const SHRINKAGE: f64 = 0.1;
const LEAF_L2: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
struct Stump {
    feature: u32,
    off: f64,
    on: f64,
}

pub(crate) struct StumpModel {
    base: f64,
    stumps: Vec<Stump>,
}

impl StumpModel {
    pub fn logit(&self, features: &[u32]) -> f64 {
        self.stumps.iter().fold(self.base, |z, s| {
            z + if features.contains(&s.feature) { s.on } else { s.off }
        })
    }

    pub fn predict(&self, features: &[u32]) -> f64 {
        sigmoid(self.logit(features))
    }
}

/// `set` must contain both target classes; the caller handles constant targets.
pub(crate) fn fit(set: &PatternSet) -> StumpModel {
    let n = set.total();
    let p = set.total_ones() / n;
    let base = (p / (1.0 - p)).ln();
    let mut logits = vec![base; set.len()];
    let mut stumps = Vec::new();
    if set.n_features == 0 {
        return StumpModel { base, stumps };
    }
    let d = set.n_features;
    let mut g_on = vec![0.0; d];
    let mut h_on = vec![0.0; d];
    for _ in 0..ROUNDS {
        g_on.iter_mut().for_each(|v| *v = 0.0);
        h_on.iter_mut().for_each(|v| *v = 0.0);
        let (mut g_all, mut h_all) = (0.0, 0.0);
        for (j, &logit) in logits.iter().enumerate() {
            let q = sigmoid(logit);
            let g = set.count(j) * q - set.ones[j];
            let h = set.count(j) * q * (1.0 - q);
            g_all += g;
            h_all += h;
            for &f in set.features(j) {
                g_on[f as usize] += g;
                h_on[f as usize] += h;
            }
        }
        let mut best: Option<(f64, Stump)> = None;
        for f in 0..d {
            let (gl, hl) = (g_all - g_on[f], h_all - h_on[f]);
            let (gr, hr) = (g_on[f], h_on[f]);
            let gain = gl * gl / (hl + LEAF_L2) + gr * gr / (hr + LEAF_L2);
            if best.as_ref().is_none_or(|(b, _)| gain > *b) {
                best = Some((
                    gain,
                    Stump {
                        feature: f as u32,
                        off: -SHRINKAGE * gl / (hl + LEAF_L2),
                        on: -SHRINKAGE * gr / (hr + LEAF_L2),
                    },
                ));
            }
        }
        let (_, stump) = best.unwrap();
        for (j, z) in logits.iter_mut().enumerate() {
            *z += if set.features(j).contains(&stump.feature) {
                stump.on
            } else {
                stump.off
            };
        }
        stumps.push(stump);
    }
    StumpModel { base, stumps }
}
