use ndarray::{Array2, ArrayView4};

use crate::error::{Error, Result};

/// Element encoding of an [`ActivationTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    /// IEEE-754 single precision.
    Real32,
    /// One byte per element, each exactly 0 or 1.
    Binary8,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::Real32 => 1,
            DType::Binary8 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::Real32),
            2 => Some(DType::Binary8),
            _ => None,
        }
    }

    pub fn element_size(self) -> usize {
        match self {
            DType::Real32 => 4,
            DType::Binary8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Real32(Vec<f32>),
    Binary8(Vec<u8>),
}

/// Dense row-major tensor with 1 to 4 axes: a raw layer output.
///
/// Values are immutable once constructed. Constructors check that the
/// element count matches the dims and that binary payloads hold only 0/1.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor {
    dims: Vec<usize>,
    storage: Storage,
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.is_empty() || dims.len() > 4 {
        return Err(Error::Shape(format!(
            "tensor must have 1 to 4 axes, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Shape(format!("all dims must be positive, got {dims:?}")));
    }
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Shape(format!("dims {dims:?} overflow")))?;
    if expected != len {
        return Err(Error::Shape(format!(
            "dims {dims:?} need {expected} values, got {len}"
        )));
    }
    Ok(())
}

impl ActivationTensor {
    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_dims(&dims, data.len())?;
        Ok(Self {
            dims,
            storage: Storage::Real32(data),
        })
    }

    pub fn from_binary(dims: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        check_dims(&dims, data.len())?;
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::Validation(format!(
                "binary8 value {} at flat index {pos} is not 0 or 1",
                data[pos]
            )));
        }
        Ok(Self {
            dims,
            storage: Storage::Binary8(data),
        })
    }

    /// Real32 tensor from a real64 matrix (rounds to nearest f32).
    pub fn from_matrix(m: &Array2<f64>) -> Self {
        let dims = vec![m.nrows(), m.ncols()];
        let data = m.iter().map(|&v| v as f32).collect();
        Self {
            dims,
            storage: Storage::Real32(data),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dtype(&self) -> DType {
        match self.storage {
            Storage::Real32(_) => DType::Real32,
            Storage::Binary8(_) => DType::Binary8,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.storage {
            Storage::Real32(v) => Some(v),
            Storage::Binary8(_) => None,
        }
    }

    pub fn as_binary(&self) -> Option<&[u8]> {
        match &self.storage {
            Storage::Binary8(v) => Some(v),
            Storage::Real32(_) => None,
        }
    }

    /// Last axis length: the neuron/channel count for N×C tensors.
    /// For 4-D tensors the channel axis is axis 1 (N×C×H×W).
    pub fn channels(&self) -> usize {
        if self.dims.len() == 4 {
            self.dims[1]
        } else {
            *self.dims.last().unwrap()
        }
    }

    /// All values widened to f64, flat row-major.
    pub fn values_f64(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Real32(v) => v.iter().map(|&x| x as f64).collect(),
            Storage::Binary8(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    /// Rows×channels real matrix view: 2-D as is, 4-D via the effective-batch
    /// flattening, 1-D as a single column.
    pub fn to_matrix(&self) -> Result<Array2<f64>> {
        match self.dims.len() {
            1 => Ok(Array2::from_shape_vec((self.dims[0], 1), self.values_f64()).unwrap()),
            2 => Ok(Array2::from_shape_vec((self.dims[0], self.dims[1]), self.values_f64()).unwrap()),
            4 => crate::binarize::flatten_conv(self),
            n => Err(Error::Shape(format!("cannot view a {n}-D tensor as a matrix"))),
        }
    }

    pub(crate) fn view4(&self) -> Result<ArrayView4<'_, f32>> {
        let data = self
            .as_f32()
            .ok_or_else(|| Error::Shape("expected a real32 tensor".into()))?;
        if self.dims.len() != 4 {
            return Err(Error::Shape(format!(
                "expected a 4-D N×C×H×W tensor, got {} axes",
                self.dims.len()
            )));
        }
        let d = &self.dims;
        Ok(ArrayView4::from_shape((d[0], d[1], d[2], d[3]), data).unwrap())
    }
}
