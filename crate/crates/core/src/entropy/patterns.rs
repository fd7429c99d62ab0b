//! Training/validation data for one chain step, deduplicated by pattern.
//!
//! With binary features the rows collapse onto distinct feature patterns, each
//! carrying how many times the target was 0 and 1. Every loss and gradient is
//! a weighted sum over patterns, so this is exact, not an approximation.

use std::collections::HashMap;

use crate::binarize::BinaryMatrix;

pub(crate) struct PatternSet {
    pub n_features: usize,
    /// CSR offsets into `active`, one entry per pattern plus a terminator.
    pub offsets: Vec<usize>,
    /// Indices of the features equal to 1.
    pub active: Vec<u32>,
    pub ones: Vec<f64>,
    pub zeros: Vec<f64>,
}

impl PatternSet {
    /// Patterns of columns `0..n_features` of `b` over `rows`, target column `n_features`.
    pub fn build(b: &BinaryMatrix, rows: &[usize], n_features: usize) -> Self {
        let words = n_features.div_ceil(64).max(1);
        let mut index: HashMap<Box<[u64]>, usize> = HashMap::new();
        let mut set = PatternSet {
            n_features,
            offsets: vec![0],
            active: Vec::new(),
            ones: Vec::new(),
            zeros: Vec::new(),
        };
        let mut key = vec![0u64; words];
        for &r in rows {
            let row = b.row(r);
            key.iter_mut().for_each(|w| *w = 0);
            for (f, &bit) in row[..n_features].iter().enumerate() {
                if bit == 1 {
                    key[f / 64] |= 1 << (f % 64);
                }
            }
            let slot = match index.get(key.as_slice()) {
                Some(&s) => s,
                None => {
                    let s = set.ones.len();
                    index.insert(key.clone().into_boxed_slice(), s);
                    set.active.extend(
                        row[..n_features]
                            .iter()
                            .enumerate()
                            .filter(|(_, &bit)| bit == 1)
                            .map(|(f, _)| f as u32),
                    );
                    set.offsets.push(set.active.len());
                    set.ones.push(0.0);
                    set.zeros.push(0.0);
                    s
                }
            };
            if row[n_features] == 1 {
                set.ones[slot] += 1.0;
            } else {
                set.zeros[slot] += 1.0;
            }
        }
        set
    }

    pub fn len(&self) -> usize {
        self.ones.len()
    }

    pub fn features(&self, j: usize) -> &[u32] {
        &self.active[self.offsets[j]..self.offsets[j + 1]]
    }

    pub fn count(&self, j: usize) -> f64 {
        self.ones[j] + self.zeros[j]
    }

    pub fn total(&self) -> f64 {
        self.ones.iter().sum::<f64>() + self.zeros.iter().sum::<f64>()
    }

    pub fn total_ones(&self) -> f64 {
        self.ones.iter().sum()
    }
}

/// σ(z) without overflow for large |z|.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z), stable.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
