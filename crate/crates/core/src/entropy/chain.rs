use rayon::prelude::*;

use super::patterns::PatternSet;
use super::{logistic, stumps, BitOrder, EntropyEstimate, EstimatorConfig, Method};
use crate::binarize::BinaryMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Held-out probability model for one chain step.
enum Fitted {
    Constant(f64),
    Logistic(logistic::LogisticModel),
    Stumps(stumps::StumpModel),
}

impl Fitted {
    fn predict(&self, features: &[u32]) -> f64 {
        match self {
            Fitted::Constant(p) => *p,
            Fitted::Logistic(m) => m.predict(features),
            Fitted::Stumps(m) => m.predict(features),
        }
    }
}

fn fit_step(train: &PatternSet, cfg: &EstimatorConfig) -> Fitted {
    let n = train.total();
    let ones = train.total_ones();
    // constant target or no predictors: the bias-only MLE is the empirical rate
    if ones == 0.0 || ones == n || train.n_features == 0 {
        return Fitted::Constant(ones / n);
    }
    match cfg.method {
        Method::ChainStumps => Fitted::Stumps(stumps::fit(train)),
        _ => Fitted::Logistic(logistic::fit(
            train,
            cfg.l2_strength,
            cfg.max_iterations,
            cfg.convergence_tol,
        )),
    }
}

/// Summed held-out cross-entropy (bits) over one validation fold.
fn held_out_bits(model: &Fitted, valid: &PatternSet, eps: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..valid.len() {
        let p = model.predict(valid.features(j)).clamp(eps, 1.0 - eps);
        total -= valid.ones[j] * p.log2() + valid.zeros[j] * (1.0 - p).log2();
    }
    total
}

/// Column order for the chain factorization.
pub(crate) fn bit_order(cols: usize, cfg: &EstimatorConfig) -> Vec<usize> {
    match cfg.bit_order {
        BitOrder::Natural => (0..cols).collect(),
        BitOrder::SeededPermutation => {
            let mut g = rng::stream(cfg.shuffle_seed, Stream::BitOrder, 0);
            rng::permutation(&mut g, cols)
        }
    }
}

/// Contiguous folds over one seeded shuffle of the rows.
pub(crate) fn folds(rows: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut g = rng::stream(seed, Stream::FoldShuffle, 0);
    let perm = rng::permutation(&mut g, rows);
    (0..k)
        .map(|f| perm[f * rows / k..(f + 1) * rows / k].to_vec())
        .collect()
}

/// Chain-rule entropy estimate with k-fold cross-validated classifiers.
///
/// Bit `i` (in the configured order) is predicted from bits `0..i`. Its
/// contribution is the held-out cross-entropy in bits averaged over all rows,
/// with predictions clipped to `[ε, 1−ε]`, and never more than the 1 bit a
/// fair-coin prediction costs. Bits are fit in parallel; the result does not
/// depend on the thread count.
pub fn joint_entropy_chain(b: &BinaryMatrix, cfg: &EstimatorConfig) -> Result<EntropyEstimate> {
    cfg.validate()?;
    if cfg.method == Method::Counts {
        return Err(Error::Validation("chain estimator called with method counts".into()));
    }
    let rows = b.rows();
    if rows < 2 * cfg.folds {
        return Err(Error::Validation(format!(
            "chain estimator needs at least {} rows for {} folds, got {rows}",
            2 * cfg.folds,
            cfg.folds
        )));
    }
    let order = bit_order(b.cols(), cfg);
    let ordered = b.select_columns(&order);
    let folds = folds(rows, cfg.folds, cfg.shuffle_seed);
    let train_rows: Vec<Vec<usize>> = (0..folds.len())
        .map(|f| {
            folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect()
        })
        .collect();

    let per_bit: Vec<f64> = (0..ordered.cols())
        .into_par_iter()
        .map(|i| {
            let mut bits = 0.0;
            for (valid, train) in folds.iter().zip(&train_rows) {
                let model = fit_step(&PatternSet::build(&ordered, train, i), cfg);
                bits += held_out_bits(&model, &PatternSet::build(&ordered, valid, i), cfg.prob_clip);
            }
            (bits / rows as f64).min(1.0)
        })
        .collect();

    let bits = per_bit.iter().sum();
    Ok(EntropyEstimate {
        bits,
        method: cfg.method,
        per_bit,
        rows_used: rows,
        bit_order: order,
        shuffle_seed: cfg.shuffle_seed,
        subsample_seed: None,
    })
}
