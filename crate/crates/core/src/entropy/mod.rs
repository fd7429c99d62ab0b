//! Entropy of binary nonlinearity patterns ("complexity") and derived quantities.
//!
//! Two estimators are provided:
//!
//! * [`joint_entropy_counts`]: plug-in entropy from exact pattern frequencies.
//!   Exact at small channel counts and used as the reference oracle.
//! * [`joint_entropy_chain`]: chain-rule factorization p(x₁)p(x₂|x₁)…, each
//!   conditional fit as a classifier under k-fold cross-validation. The summed
//!   held-out cross-entropies bound the entropy from above as data grows.

mod chain;
mod counts;
mod logistic;
mod patterns;
mod stumps;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binarize::BinaryMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub use chain::joint_entropy_chain;
pub use counts::{joint_entropy_counts, COUNTS_MAX_BITS};

/// Binary entropy in bits, with h(0) = h(1) = 0.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Counts,
    ChainLogistic,
    ChainStumps,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Counts => "counts",
            Method::ChainLogistic => "chain_logistic",
            Method::ChainStumps => "chain_stumps",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "counts" => Ok(Method::Counts),
            "chain_logistic" => Ok(Method::ChainLogistic),
            "chain_stumps" => Ok(Method::ChainStumps),
            _ => Err(Error::Validation(format!(
                "unknown estimator '{s}' (expected counts, chain-logistic or chain-stumps)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitOrder {
    Natural,
    SeededPermutation,
}

/// Estimator settings. Defaults: chain_logistic, 2 folds, L2 1.0, 200 iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub folds: usize,
    pub shuffle_seed: u64,
    pub bit_order: BitOrder,
    pub l2_strength: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub prob_clip: f64,
    pub max_rows: Option<usize>,
    pub subsample_seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: Method::ChainLogistic,
            folds: 2,
            shuffle_seed: 0,
            bit_order: BitOrder::Natural,
            l2_strength: 1.0,
            max_iterations: 200,
            convergence_tol: 1e-8,
            prob_clip: 1e-6,
            max_rows: None,
            subsample_seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Validation(format!("folds must be ≥ 2, got {}", self.folds)));
        }
        if !(self.prob_clip > 0.0 && self.prob_clip < 0.5) {
            return Err(Error::Validation(format!(
                "probability clip must lie in (0, 0.5), got {}",
                self.prob_clip
            )));
        }
        if !(self.l2_strength >= 0.0) {
            return Err(Error::Validation("l2_strength must be ≥ 0".into()));
        }
        if self.max_rows == Some(0) {
            return Err(Error::Validation("max_rows must be positive".into()));
        }
        Ok(())
    }
}

/// An entropy estimate in bits with its per-bit chain contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub bits: f64,
    pub method: Method,
    pub per_bit: Vec<f64>,
    pub rows_used: usize,
    /// Column order used for the chain factorization.
    pub bit_order: Vec<usize>,
    pub shuffle_seed: u64,
    /// Subsample seed when rows were subsampled.
    pub subsample_seed: Option<u64>,
}

/// Per-column binary entropies in bits.
pub fn marginal_entropies(b: &BinaryMatrix) -> Vec<f64> {
    b.column_means().into_iter().map(binary_entropy).collect()
}

/// Apply the `max_rows` subsample, if any: seeded uniform draw without
/// replacement, kept in original row order.
pub fn subsample(b: &BinaryMatrix, cfg: &EstimatorConfig) -> Option<BinaryMatrix> {
    let max = cfg.max_rows?;
    if b.rows() <= max {
        return None;
    }
    let mut g = rng::stream(cfg.subsample_seed, Stream::Subsample, 0);
    let mut idx = rng::sample_without_replacement(&mut g, b.rows(), max);
    idx.sort_unstable();
    Some(b.select_rows(&idx))
}

fn estimate_prepared(b: &BinaryMatrix, cfg: &EstimatorConfig) -> Result<EntropyEstimate> {
    match cfg.method {
        Method::Counts => joint_entropy_counts(b),
        Method::ChainLogistic | Method::ChainStumps => joint_entropy_chain(b, cfg),
    }
}

/// Layer complexity H(Z_L), dispatched on `cfg.method`.
pub fn complexity(b: &BinaryMatrix, cfg: &EstimatorConfig) -> Result<EntropyEstimate> {
    cfg.validate()?;
    match subsample(b, cfg) {
        Some(sub) => {
            let mut est = estimate_prepared(&sub, cfg)?;
            est.subsample_seed = Some(cfg.subsample_seed);
            Ok(est)
        }
        None => estimate_prepared(b, cfg),
    }
}

pub fn complexity_per_neuron(b: &BinaryMatrix, cfg: &EstimatorConfig) -> Result<f64> {
    Ok(complexity(b, cfg)?.bits / b.cols() as f64)
}

/// Normalized total correlation; `degenerate` is set when every neuron is frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalCorrelation {
    pub value: f64,
    pub degenerate: bool,
}

/// (Σ H(Z_i) − H(Z_1..Z_C)) / Σ H(Z_i), marginals and joint taken on the same rows.
pub fn total_correlation_normalized(b: &BinaryMatrix, cfg: &EstimatorConfig) -> Result<TotalCorrelation> {
    let joint = complexity(b, cfg)?;
    let sub = subsample(b, cfg);
    let rows = sub.as_ref().unwrap_or(b);
    Ok(total_correlation_from(&marginal_entropies(rows), joint.bits))
}

/// Normalized total correlation from precomputed marginals and joint entropy.
pub fn total_correlation_from(marginals: &[f64], joint_bits: f64) -> TotalCorrelation {
    let sum: f64 = marginals.iter().sum();
    if sum <= 0.0 {
        return TotalCorrelation {
            value: 0.0,
            degenerate: true,
        };
    }
    TotalCorrelation {
        value: (sum - joint_bits) / sum,
        degenerate: false,
    }
}

/// Σ_L H(Z_L) over layers.
pub fn additive_complexity(layers: &[BinaryMatrix], cfg: &EstimatorConfig) -> Result<f64> {
    let mut total = 0.0;
    for l in layers {
        total += complexity(l, cfg)?.bits;
    }
    Ok(total)
}

/// Joint entropy of all layers' bits concatenated. Layers must be row-aligned.
pub fn network_complexity(layers: &[BinaryMatrix], cfg: &EstimatorConfig) -> Result<EntropyEstimate> {
    let joined = BinaryMatrix::hconcat(layers)?;
    complexity(&joined, cfg)
}

/// Network complexity divided by the total number of bits.
pub fn normalized_network_complexity(layers: &[BinaryMatrix], cfg: &EstimatorConfig) -> Result<f64> {
    let est = network_complexity(layers, cfg)?;
    Ok(est.bits / est.per_bit.len() as f64)
}
