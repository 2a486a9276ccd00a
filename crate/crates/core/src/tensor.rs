//! Dense tensor storage in natural linearization and the layout algebra of its
//! matricizations.
//!
//! Entry `(i_0, ..., i_{N-1})` lives at offset `sum_n i_n * L_n`, where `L_n` is
//! the product of the extents of all lower-numbered modes (generalized
//! column-major order). Every matricization used by the MTTKRP kernels is
//! described as a set of strided blocks over that buffer; nothing here ever
//! moves an entry.

use crate::error::{Error, Result};
use crate::linalg::{Layout, MatRef};

/// Extents of an N-way tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    total: usize,
}

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Argument("a tensor needs at least one mode".into()));
        }
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Argument(format!("mode {k} has extent 0")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Resource(format!("entry count of {dims:?} overflows")))?;
        Ok(Shape {
            dims: dims.to_vec(),
            total,
        })
    }

    #[inline]
    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn dim(&self, n: usize) -> usize {
        self.dims[n]
    }

    /// Total number of entries `I`.
    #[inline]
    pub fn total(&self) -> usize {
        self.total
    }

    /// Product of extents of modes `< n`.
    #[inline]
    pub fn left(&self, n: usize) -> usize {
        self.dims[..n].iter().product()
    }

    /// Product of extents of modes `> n`.
    #[inline]
    pub fn right(&self, n: usize) -> usize {
        self.dims[n + 1..].iter().product()
    }

    /// Number of columns of the mode-`n` matricization, `I / I_n`.
    #[inline]
    pub fn unfold(&self, n: usize) -> usize {
        self.total / self.dims[n]
    }

    /// External modes are 0 and N-1.
    #[inline]
    pub fn is_external(&self, n: usize) -> bool {
        n == 0 || n + 1 == self.ndims()
    }

    pub fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.ndims() {
            return Err(Error::Bounds(format!(
                "mode {n} for a {}-way tensor",
                self.ndims()
            )));
        }
        Ok(())
    }

    pub fn linearize(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.ndims() {
            return Err(Error::Bounds(format!(
                "index has {} coordinates, tensor has {} modes",
                index.len(),
                self.ndims()
            )));
        }
        let mut offset = 0;
        let mut stride = 1;
        for (k, (&i, &d)) in index.iter().zip(&self.dims).enumerate() {
            if i >= d {
                return Err(Error::Bounds(format!(
                    "coordinate {i} in mode {k} with extent {d}"
                )));
            }
            offset += i * stride;
            stride *= d;
        }
        Ok(offset)
    }

    pub fn delinearize(&self, offset: usize) -> Result<Vec<usize>> {
        if offset >= self.total {
            return Err(Error::Bounds(format!(
                "offset {offset} in a tensor of {} entries",
                self.total
            )));
        }
        let mut rest = offset;
        Ok(self
            .dims
            .iter()
            .map(|&d| {
                let i = rest % d;
                rest /= d;
                i
            })
            .collect())
    }

    /// Block description of the mode-`n` matricization `X_(n)`.
    pub fn matricize_view(&self, n: usize) -> Result<MatricizationView> {
        self.check_mode(n)?;
        let (rows, left, right) = (self.dims[n], self.left(n), self.right(n));
        let view = if n == 0 {
            MatricizationView {
                first_mode: 0,
                last_mode: 0,
                block_count: 1,
                block_rows: rows,
                block_cols: right,
                block_layout: Layout::ColMajor,
                block_stride: self.total,
            }
        } else {
            // covers mode N-1 too: R_{N-1} = 1 gives a single row-major block
            MatricizationView {
                first_mode: n,
                last_mode: n,
                block_count: right,
                block_rows: rows,
                block_cols: left,
                block_layout: Layout::RowMajor,
                block_stride: rows * left,
            }
        };
        Ok(view)
    }

    /// Block description of `X_(0:n)`: always a single column-major matrix.
    pub fn matricize_range_view(&self, n: usize) -> Result<MatricizationView> {
        self.check_mode(n)?;
        let rows = self.left(n) * self.dims[n];
        Ok(MatricizationView {
            first_mode: 0,
            last_mode: n,
            block_count: 1,
            block_rows: rows,
            block_cols: self.right(n),
            block_layout: Layout::ColMajor,
            block_stride: self.total,
        })
    }
}

/// Zero-copy description of a matricization as equally shaped strided blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatricizationView {
    /// Row modes are `first_mode..=last_mode`.
    pub first_mode: usize,
    pub last_mode: usize,
    pub block_count: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    pub block_layout: Layout,
    pub block_stride: usize,
}

impl MatricizationView {
    /// Buffer offset of entry `(row, col)` of block `block`.
    #[inline]
    pub fn offset(&self, block: usize, row: usize, col: usize) -> usize {
        debug_assert!(block < self.block_count && row < self.block_rows && col < self.block_cols);
        let within = match self.block_layout {
            Layout::RowMajor => row * self.block_cols + col,
            Layout::ColMajor => row + col * self.block_rows,
        };
        block * self.block_stride + within
    }

    /// Borrow block `j` as a strided matrix over `values`.
    pub fn block<'a>(&self, values: &'a [f64], j: usize) -> MatRef<'a> {
        let start = j * self.block_stride;
        let len = self.block_rows * self.block_cols;
        MatRef::new(
            &values[start..start + len],
            self.block_rows,
            self.block_cols,
            self.block_layout,
        )
    }
}

/// Owned dense tensor; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.total() {
            return Err(Error::Dimension(format!(
                "shape {:?} needs {} values, got {}",
                shape.dims(),
                shape.total(),
                values.len()
            )));
        }
        Ok(DenseTensor { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        let values = vec![0.0; shape.total()];
        DenseTensor { shape, values }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in linear order.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut mi = MultiIndex::new(shape.dims().iter().rev().copied().collect());
        let mut index = vec![0; shape.ndims()];
        let mut values = Vec::with_capacity(shape.total());
        for _ in 0..shape.total() {
            // multi-index digits are stored slowest-first
            for (dst, &d) in index.iter_mut().zip(mi.digits().iter().rev()) {
                *dst = d;
            }
            values.push(f(&index));
            mi.increment();
        }
        DenseTensor { shape, values }
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[self.shape.linearize(index)?])
    }

    #[inline]
    pub fn view(&self) -> TensorRef<'_> {
        TensorRef {
            shape: &self.shape,
            values: &self.values,
        }
    }

    pub fn norm(&self) -> f64 {
        self.view().norm()
    }
}

/// Borrowed, read-only tensor. Kernels take this so that any buffer, including
/// memory the caller has write-protected, can be processed in place.
#[derive(Debug, Clone, Copy)]
pub struct TensorRef<'a> {
    shape: &'a Shape,
    values: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub fn new(shape: &'a Shape, values: &'a [f64]) -> Result<Self> {
        if values.len() != shape.total() {
            return Err(Error::Dimension(format!(
                "shape {:?} needs {} values, got {}",
                shape.dims(),
                shape.total(),
                values.len()
            )));
        }
        Ok(TensorRef { shape, values })
    }

    #[inline]
    pub fn shape(&self) -> &'a Shape {
        self.shape
    }

    #[inline]
    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matricize_view(&self, n: usize) -> Result<MatricizationView> {
        self.shape.matricize_view(n)
    }

    pub fn matricize_range_view(&self, n: usize) -> Result<MatricizationView> {
        self.shape.matricize_range_view(n)
    }
}

/// Mixed-radix counter whose last digit varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex {
    radices: Vec<usize>,
    digits: Vec<usize>,
}

impl MultiIndex {
    /// Counter at flat position 0. Radices must be positive.
    pub fn new(radices: Vec<usize>) -> Self {
        debug_assert!(radices.iter().all(|&r| r > 0));
        let digits = vec![0; radices.len()];
        MultiIndex { radices, digits }
    }

    /// Counter positioned at `flat`.
    pub fn init_from_row(radices: Vec<usize>, flat: usize) -> Result<Self> {
        let total: usize = radices.iter().product();
        if flat >= total {
            return Err(Error::Bounds(format!(
                "row {flat} of a {total}-row mixed-radix range"
            )));
        }
        let mut mi = MultiIndex::new(radices);
        mi.seek(flat);
        Ok(mi)
    }

    fn seek(&mut self, flat: usize) {
        let mut rest = flat;
        for (d, &r) in self.digits.iter_mut().zip(&self.radices).rev() {
            *d = rest % r;
            rest /= r;
        }
    }

    #[inline]
    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    #[inline]
    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn flat(&self) -> usize {
        self.digits
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&d, &r)| acc * r + d)
    }

    /// Advances to the next flat index and returns the number of trailing
    /// digits that changed. Wrapping past the end resets to all zeros and
    /// reports every digit as changed.
    #[inline]
    pub fn increment(&mut self) -> usize {
        let z = self.digits.len();
        for pos in (0..z).rev() {
            self.digits[pos] += 1;
            if self.digits[pos] < self.radices[pos] {
                return z - pos;
            }
            self.digits[pos] = 0;
        }
        z
    }
}
