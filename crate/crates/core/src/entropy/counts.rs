use std::collections::HashMap;

use super::{EntropyEstimate, Method};
use crate::binarize::BinaryMatrix;
use crate::error::{Error, Result};

/// Pattern-space cap for the plug-in estimator. Memory is O(distinct patterns).
pub const COUNTS_MAX_BITS: usize = 24;

fn plug_in(counts: impl Iterator<Item = usize>, rows: usize) -> f64 {
    let n = rows as f64;
    let mut h = 0.0;
    for c in counts {
        let p = c as f64 / n;
        h -= p * p.log2();
    }
    h.max(0.0)
}

/// Plug-in entropy over observed pattern frequencies.
///
/// `per_bit[i]` is the exact conditional entropy H(Z_i | Z_0..Z_{i-1}) from
/// prefix-pattern counts, so the contributions telescope to the total.
pub fn joint_entropy_counts(b: &BinaryMatrix) -> Result<EntropyEstimate> {
    let c = b.cols();
    if c > COUNTS_MAX_BITS {
        return Err(Error::Limit(format!(
            "counts estimator supports at most {COUNTS_MAX_BITS} bits, layer has {c}; use a chain estimator"
        )));
    }
    let keys: Vec<u32> = (0..b.rows())
        .map(|r| {
            b.row(r)
                .iter()
                .enumerate()
                .fold(0u32, |k, (i, &bit)| k | ((bit as u32) << i))
        })
        .collect();

    let mut prefix_h = Vec::with_capacity(c);
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for i in 0..c {
        let mask = if i + 1 == 32 { u32::MAX } else { (1u32 << (i + 1)) - 1 };
        counts.clear();
        for &k in &keys {
            *counts.entry(k & mask).or_insert(0) += 1;
        }
        let mut sorted: Vec<usize> = counts.values().copied().collect();
        sorted.sort_unstable();
        prefix_h.push(plug_in(sorted.into_iter(), b.rows()));
    }
    let bits = *prefix_h.last().unwrap();
    let mut per_bit = Vec::with_capacity(c);
    let mut prev = 0.0;
    for &h in &prefix_h {
        per_bit.push((h - prev).max(0.0));
        prev = h;
    }
    Ok(EntropyEstimate {
        bits,
        method: Method::Counts,
        per_bit,
        rows_used: b.rows(),
        bit_order: (0..c).collect(),
        shuffle_seed: 0,
        subsample_seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate_patterns(c: usize) -> BinaryMatrix {
        let rows: Vec<Vec<u8>> = (0..1usize << c)
            .map(|k| (0..c).map(|i| ((k >> i) & 1) as u8).collect())
            .collect();
        BinaryMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn duplicated_fair_columns_give_one_bit() {
        let b = BinaryMatrix::from_rows(&[[0, 0], [1, 1], [0, 0], [1, 1]]).unwrap();
        let e = joint_entropy_counts(&b).unwrap();
        assert!((e.bits - 1.0).abs() < 1e-12);
        assert!((e.per_bit[0] - 1.0).abs() < 1e-12);
        assert!(e.per_bit[1].abs() < 1e-12);
    }

    #[test]
    fn three_fair_bits() {
        let e = joint_entropy_counts(&enumerate_patterns(3)).unwrap();
        assert!((e.bits - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_fair_bits_each_duplicated() {
        // enumerate (a, b) and emit (a, a, b, b)
        let rows: Vec<[u8; 4]> = (0..4u8).map(|k| [k & 1, k & 1, k >> 1, k >> 1]).collect();
        let e = joint_entropy_counts(&BinaryMatrix::from_rows(&rows).unwrap()).unwrap();
        assert!((e.bits - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        let b = BinaryMatrix::new(1, 25, vec![0; 25]).unwrap();
        assert!(matches!(joint_entropy_counts(&b), Err(Error::Limit(_))));
        let ok = BinaryMatrix::new(1, 24, vec![1; 24]).unwrap();
        assert_eq!(joint_entropy_counts(&ok).unwrap().bits, 0.0);
    }
}
