//! Effective dimension: exp of the Shannon entropy (nats) of the PCA
//! explained-variance ratios of a layer output.

use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datamodel::ActivationTensor;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Eigenvalues below this fraction of the total variance are treated as zero.
pub const EIGEN_DUST: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Sample-covariance eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// λ_i / Σλ; empty when degenerate.
    pub ratios: Vec<f64>,
    /// −Σ r ln r, in nats.
    pub spectrum_entropy: f64,
    pub effective_dimension: f64,
    /// Every column constant: no variance, ratios undefined.
    pub degenerate: bool,
}

/// Centered copy with exactly-constant columns set to exactly zero.
fn centered(m: &Array2<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.dim();
    if let Some(((r, c), _)) = m.indexed_iter().find(|(_, v)| v.is_nan()) {
        return Err(Error::Numeric(format!("NaN at row {r}, column {c}")));
    }
    let mut out = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let col = m.column(c);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            continue;
        }
        let mean = col.sum() / rows as f64;
        for r in 0..rows {
            out[(r, c)] = col[r] - mean;
        }
    }
    Ok(out)
}

fn check_rows(m: &Array2<f64>) -> Result<()> {
    if m.nrows() < 2 {
        return Err(Error::Shape(format!("PCA needs at least 2 rows, got {}", m.nrows())));
    }
    if m.ncols() == 0 {
        return Err(Error::Shape("PCA needs at least one column".into()));
    }
    Ok(())
}

/// Covariance eigenvalues from singular values of the centered data,
/// λ_i = σ_i² / (R − 1), padded with zeros to C entries, sorted descending.
pub fn spectrum_svd(m: &Array2<f64>) -> Result<Vec<f64>> {
    check_rows(m)?;
    let x = centered(m)?;
    let denom = (m.nrows() - 1) as f64;
    let mut ev: Vec<f64> = x.singular_values().iter().map(|s| s * s / denom).collect();
    ev.resize(m.ncols(), 0.0);
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Same spectrum via the explicit C×C covariance matrix.
pub fn spectrum_covariance(m: &Array2<f64>) -> Result<Vec<f64>> {
    check_rows(m)?;
    let x = centered(m)?;
    let cov = (x.transpose() * &x) / (m.nrows() - 1) as f64;
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().map(|&v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Exponentiated entropy (nats) of a ratio vector, with 0·ln 0 = 0.
pub fn effective_dimension_from_ratios(ratios: &[f64]) -> f64 {
    spectrum_entropy(ratios).exp()
}

fn spectrum_entropy(ratios: &[f64]) -> f64 {
    -ratios
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| r * r.ln())
        .sum::<f64>()
}

/// Build a summary from eigenvalues, clamping numerical dust.
pub fn summarize(mut eigenvalues: Vec<f64>) -> SpectrumSummary {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return SpectrumSummary {
            eigenvalues,
            ratios: Vec::new(),
            spectrum_entropy: 0.0,
            effective_dimension: 0.0,
            degenerate: true,
        };
    }
    for v in eigenvalues.iter_mut() {
        if *v < EIGEN_DUST * total {
            *v = 0.0;
        }
    }
    let total: f64 = eigenvalues.iter().sum();
    let ratios: Vec<f64> = eigenvalues.iter().map(|v| v / total).collect();
    let s = spectrum_entropy(&ratios);
    SpectrumSummary {
        eigenvalues,
        ratios,
        spectrum_entropy: s,
        effective_dimension: s.exp(),
        degenerate: false,
    }
}

/// PCA of an R×C matrix: centered columns, sample covariance (divisor R − 1).
pub fn explained_variance_ratios(m: &Array2<f64>) -> Result<SpectrumSummary> {
    Ok(summarize(spectrum_svd(m)?))
}

/// exp(−Σ r ln r); 0 for a degenerate spectrum.
pub fn effective_dimension(s: &SpectrumSummary) -> f64 {
    if s.degenerate {
        0.0
    } else {
        effective_dimension_from_ratios(&s.ratios)
    }
}

/// Flatten (4-D), optionally subsample rows, then summarize the spectrum.
pub fn layer_effective_dimension(
    t: &ActivationTensor,
    max_rows: Option<usize>,
    seed: u64,
) -> Result<SpectrumSummary> {
    let m = match t.ndim() {
        2 | 4 => t.to_matrix()?,
        n => {
            return Err(Error::Shape(format!(
                "effective dimension needs a 2-D or 4-D tensor, got {n} axes"
            )))
        }
    };
    explained_variance_ratios(&subsample_rows(&m, max_rows, seed))
}

/// Seeded uniform row subsample without replacement, original order kept.
pub fn subsample_rows(m: &Array2<f64>, max_rows: Option<usize>, seed: u64) -> Array2<f64> {
    match max_rows {
        Some(k) if k < m.nrows() => {
            let mut g = rng::stream(seed, Stream::Subsample, 0);
            let mut idx = rng::sample_without_replacement(&mut g, m.nrows(), k);
            idx.sort_unstable();
            m.select(ndarray::Axis(0), &idx)
        }
        _ => m.clone(),
    }
}
