//! Effective-batch views of layer outputs and the binary nonlinearity variables.
//!
//! A conv output N×C×H×W is treated as (N·H·W) samples of a C-dimensional
//! variable. A bit is 1 when its unit is in the linear (passing) regime.
//!
//! Threshold convention: [`binarize`] uses `value > 0`. On post-ReLU outputs
//! this differs from θ(pre-activation) only where the pre-activation is exactly
//! zero (θ(0) = 1 but ReLU(0) = 0), a measure-zero set. When true
//! pre-activations are available, [`binarize_pre_activation`] applies θ exactly.

use ndarray::{s, Array2};

use crate::datamodel::ActivationTensor;
use crate::error::{Error, Result};

/// Rows×cols matrix of bits, row-major. Each row is one sample of the layer's
/// nonlinearity pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl BinaryMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("binary matrix must be non-empty, got {rows}×{cols}")));
        }
        if bits.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}×{cols} binary matrix needs {} bits, got {}",
                rows * cols,
                bits.len()
            )));
        }
        if let Some(p) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Validation(format!(
                "entry ({}, {}) = {} is not a bit",
                p / cols,
                p % cols,
                bits[p]
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    /// Build from row vectors of bools; handy for small hand-written cases.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let bits = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, bits)
    }

    /// A binary8 tensor (event matrix) taken as bits directly; 4-D tensors are flattened.
    pub fn from_tensor(t: &ActivationTensor) -> Result<Self> {
        match t.as_binary() {
            Some(_) => {
                let m = t.to_matrix()?;
                let bits = m.iter().map(|&v| v as u8).collect();
                Self::new(m.nrows(), m.ncols(), bits)
            }
            None => binarize(&t.to_matrix()?),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.cols + c]
    }

    /// Column `c` as a fresh vector.
    pub fn column(&self, c: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Empirical mean of each column.
    pub fn column_means(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.cols];
        for row in self.bits.chunks_exact(self.cols) {
            for (acc, &b) in counts.iter_mut().zip(row) {
                *acc += b as usize;
            }
        }
        counts.iter().map(|&k| k as f64 / self.rows as f64).collect()
    }

    /// Keep the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            bits.extend_from_slice(self.row(r));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            bits,
        }
    }

    /// Keep the given columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(self.rows * idx.len());
        for r in 0..self.rows {
            let row = self.row(r);
            bits.extend(idx.iter().map(|&c| row[c]));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            bits,
        }
    }

    /// Side-by-side concatenation of row-aligned matrices.
    pub fn hconcat(parts: &[BinaryMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("no matrices to concatenate".into()))?;
        if let Some(bad) = parts.iter().find(|p| p.rows != first.rows) {
            return Err(Error::Shape(format!(
                "row-count mismatch: {} vs {}",
                first.rows, bad.rows
            )));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut bits = Vec::with_capacity(first.rows * cols);
        for r in 0..first.rows {
            for p in parts {
                bits.extend_from_slice(p.row(r));
            }
        }
        Ok(Self {
            rows: first.rows,
            cols,
            bits,
        })
    }
}

/// N×C×H×W → (N·H·W)×C with entry (n,c,h,w) at row n·H·W + h·W + w, column c.
pub fn flatten_conv(t: &ActivationTensor) -> Result<Array2<f64>> {
    if t.ndim() != 4 {
        return Err(Error::Shape(format!(
            "flatten_conv needs a 4-D tensor, got {} axes",
            t.ndim()
        )));
    }
    let d = t.dims();
    let (n, c, h, w) = (d[0], d[1], d[2], d[3]);
    let values = t.values_f64();
    let mut out = Array2::zeros((n * h * w, c));
    for ni in 0..n {
        for ci in 0..c {
            for hi in 0..h {
                let src = ((ni * c + ci) * h + hi) * w;
                for wi in 0..w {
                    out[[ni * h * w + hi * w + wi, ci]] = values[src + wi];
                }
            }
        }
    }
    Ok(out)
}

/// The N×C matrix of channel values at a single spatial position.
pub fn pixel_slice(t: &ActivationTensor, h: usize, w: usize) -> Result<Array2<f64>> {
    let v = t.view4()?;
    let (_, _, hh, ww) = v.dim();
    if h >= hh || w >= ww {
        return Err(Error::Shape(format!(
            "pixel ({h}, {w}) outside {hh}×{ww} feature map"
        )));
    }
    Ok(v.slice(s![.., .., h, w]).mapv(|x| x as f64))
}

fn threshold(m: &Array2<f64>, on: impl Fn(f64) -> bool) -> Result<BinaryMatrix> {
    let (rows, cols) = m.dim();
    let mut bits = Vec::with_capacity(rows * cols);
    for ((r, c), &v) in m.indexed_iter() {
        if v.is_nan() {
            return Err(Error::Numeric(format!("NaN at row {r}, column {c}")));
        }
        bits.push(on(v) as u8);
    }
    BinaryMatrix::new(rows, cols, bits)
}

/// Sign rule for post-activation values: bit = 1 iff value > 0.
pub fn binarize(m: &Array2<f64>) -> Result<BinaryMatrix> {
    threshold(m, |v| v > 0.0)
}

/// θ applied to pre-activations: bit = 1 iff value ≥ 0.
pub fn binarize_pre_activation(m: &Array2<f64>) -> Result<BinaryMatrix> {
    threshold(m, |v| v >= 0.0)
}

/// Fraction of (sample, neuron) pairs in the linear regime: the grand mean of all bits.
pub fn linearity(b: &BinaryMatrix) -> f64 {
    let ones: usize = b.bits.iter().map(|&x| x as usize).sum();
    ones as f64 / (b.rows * b.cols) as f64
}
