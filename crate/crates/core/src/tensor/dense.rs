use crate::error::{Error, Result};

/// Entry cap for densifying a tensor train.
pub const DEFAULT_DENSE_CAP: usize = 10_000_000;

/// Dimension tuple `(n_1, ..., n_d)` of a tensor, all entries positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimTuple(Vec<usize>);

impl DimTuple {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::DimensionMismatch("dimension tuple must have order >= 1".into()));
        }
        if dims.contains(&0) {
            return Err(Error::DimensionMismatch(format!("zero entry in dimension tuple {dims:?}")));
        }
        Ok(Self(dims))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Number of entries of a tensor with these dimensions.
    pub fn size(&self) -> usize {
        self.0.iter().product()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Row-major linear position of a multi-index.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.0.len());
        index.iter().zip(&self.0).fold(0, |acc, (&i, &n)| acc * n + i)
    }
}

/// Full tensor with row-major entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: DimTuple,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: DimTuple, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for dimensions {:?}",
                data.len(),
                dims.as_slice()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: DimTuple, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let size = dims.size();
        let mut data = Vec::with_capacity(size);
        let mut index = vec![0; dims.order()];
        for _ in 0..size {
            data.push(f(&index));
            for k in (0..index.len()).rev() {
                index[k] += 1;
                if index[k] < dims.as_slice()[k] {
                    break;
                }
                index[k] = 0;
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> &DimTuple {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.dims.linear_index(index)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius distance to another tensor of the same shape.
    pub fn distance(&self, other: &DenseTensor) -> f64 {
        assert_eq!(self.dims, other.dims, "distance between tensors of different shape");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &DenseTensor) -> f64 {
        assert_eq!(self.dims, other.dims, "inner product of tensors of different shape");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}
