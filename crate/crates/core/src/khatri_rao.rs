//! Row-wise Khatri-Rao products.
//!
//! Row `j` of `U_0 ⊙ U_1 ⊙ ... ⊙ U_{Z-1}` is the Hadamard product of the rows
//! selected by the mixed-radix digits of `j` (the last input varies fastest).
//! The reuse variant keeps the `Z - 2` leading partial products
//! `U_0 ∘ U_1`, `(U_0 ∘ U_1) ∘ U_2`, ... and refreshes them only when the
//! corresponding digits carry, so a row costs one Hadamard product most of
//! the time. Both variants associate left to right, so their outputs are
//! bitwise identical.

use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::parallel::{balanced_ranges, map_row_blocks};
use crate::tensor::MultiIndex;

/// Row generator for three or more inputs, holding the multi-index and the
/// table of partial Hadamard products.
#[derive(Debug, Clone)]
pub struct KrpState<'a> {
    inputs: Vec<&'a FactorMatrix>,
    mi: MultiIndex,
    cols: usize,
    /// `(Z - 2) x C`, row-major.
    partials: Vec<f64>,
    /// First partial row that is stale, if any.
    stale_from: Option<usize>,
    hadamards: u64,
}

impl<'a> KrpState<'a> {
    /// State positioned at output row `start_row`.
    pub fn new(inputs: &[&'a FactorMatrix], start_row: usize) -> Result<Self> {
        let cols = check_inputs(inputs)?;
        if inputs.len() < 3 {
            return Err(Error::Argument(format!(
                "reuse KRP needs at least 3 inputs, got {}; use krp_small",
                inputs.len()
            )));
        }
        let radices = inputs.iter().map(|u| u.rows()).collect();
        let mi = MultiIndex::init_from_row(radices, start_row)?;
        let z = inputs.len();
        Ok(KrpState {
            inputs: inputs.to_vec(),
            mi,
            cols,
            partials: vec![0.0; (z - 2) * cols],
            stale_from: Some(0),
            hadamards: 0,
        })
    }

    /// Number of `C`-length Hadamard products performed so far.
    #[inline]
    pub fn hadamard_count(&self) -> u64 {
        self.hadamards
    }

    /// Output row that the next call to [`KrpState::krp_row`] produces.
    pub fn position(&self) -> usize {
        self.mi.flat()
    }

    fn refresh(&mut self, from: usize) {
        let c = self.cols;
        let digits = self.mi.digits();
        for z in from..self.inputs.len() - 2 {
            let next = self.inputs[z + 1].row(digits[z + 1]);
            if z == 0 {
                let first = self.inputs[0].row(digits[0]);
                for ((p, a), b) in self.partials[..c].iter_mut().zip(first).zip(next) {
                    *p = a * b;
                }
            } else {
                let (done, rest) = self.partials.split_at_mut(z * c);
                let prev = &done[(z - 1) * c..];
                for ((p, a), b) in rest[..c].iter_mut().zip(prev).zip(next) {
                    *p = a * b;
                }
            }
            self.hadamards += 1;
        }
    }

    /// Writes the current row into `out` (length `C`) and advances.
    pub fn krp_row(&mut self, out: &mut [f64]) {
        let z = self.inputs.len();
        if let Some(from) = self.stale_from.take() {
            self.refresh(from);
        }
        let last = self.inputs[z - 1].row(self.mi.digits()[z - 1]);
        let p = &self.partials[(z - 3) * self.cols..];
        for ((o, a), b) in out.iter_mut().zip(p).zip(last) {
            *o = a * b;
        }
        self.hadamards += 1;

        let changed = self.mi.increment();
        // digit d feeds partial rows d-1 and up; the last digit feeds none
        let lowest = z - changed;
        if lowest < z - 1 {
            self.stale_from = Some(lowest.saturating_sub(1));
        }
    }
}

fn check_inputs(inputs: &[&FactorMatrix]) -> Result<usize> {
    let cols = inputs
        .first()
        .map(|u| u.cols())
        .ok_or_else(|| Error::Argument("Khatri-Rao product of no matrices".into()))?;
    if let Some(k) = inputs.iter().position(|u| u.cols() != cols) {
        return Err(Error::Dimension(format!(
            "input {k} has {} columns, input 0 has {cols}",
            inputs[k].cols()
        )));
    }
    Ok(cols)
}

/// Sequential row generator for any number of inputs, starting at an
/// arbitrary output row. Zero inputs produce rows of ones (the empty Hadamard
/// product), one input copies rows, two inputs take one product per row, and
/// three or more go through [`KrpState`].
#[derive(Debug, Clone)]
pub(crate) enum RowStream<'a> {
    Ones,
    Single { u: &'a FactorMatrix, row: usize },
    Pair { a: &'a FactorMatrix, b: &'a FactorMatrix, row: usize, hadamards: u64 },
    Reuse(KrpState<'a>),
}

impl<'a> RowStream<'a> {
    /// Inputs must share a column count and `start` must be a valid row
    /// (or 0 for an empty input list).
    pub(crate) fn new(inputs: &[&'a FactorMatrix], start: usize) -> Result<Self> {
        Ok(match inputs.len() {
            0 => RowStream::Ones,
            1 => RowStream::Single { u: inputs[0], row: start },
            2 => RowStream::Pair { a: inputs[0], b: inputs[1], row: start, hadamards: 0 },
            _ => RowStream::Reuse(KrpState::new(inputs, start)?),
        })
    }

    #[inline]
    pub(crate) fn next_row(&mut self, out: &mut [f64]) {
        match self {
            RowStream::Ones => out.fill(1.0),
            RowStream::Single { u, row } => {
                out.copy_from_slice(u.row(*row));
                *row += 1;
            }
            RowStream::Pair { a, b, row, hadamards } => {
                let jb = b.rows();
                for ((o, x), y) in out.iter_mut().zip(a.row(*row / jb)).zip(b.row(*row % jb)) {
                    *o = x * y;
                }
                *row += 1;
                *hadamards += 1;
            }
            RowStream::Reuse(state) => state.krp_row(out),
        }
    }

    pub(crate) fn hadamard_count(&self) -> u64 {
        match self {
            RowStream::Ones | RowStream::Single { .. } => 0,
            RowStream::Pair { hadamards, .. } => *hadamards,
            RowStream::Reuse(state) => state.hadamard_count(),
        }
    }
}

/// Fills consecutive output rows `start..` into `out` with the reuse scheme
/// and returns the number of Hadamard products performed.
pub(crate) fn fill_rows(inputs: &[&FactorMatrix], cols: usize, start: usize, out: &mut [f64]) -> u64 {
    if cols == 0 || out.is_empty() {
        return 0;
    }
    let mut stream = RowStream::new(inputs, start).expect("validated inputs");
    for row in out.chunks_exact_mut(cols) {
        stream.next_row(row);
    }
    stream.hadamard_count()
}

/// Naive row generator: `Z - 1` Hadamard products per row.
pub(crate) fn fill_rows_naive(inputs: &[&FactorMatrix], cols: usize, start: usize, out: &mut [f64]) -> u64 {
    if cols == 0 || out.is_empty() {
        return 0;
    }
    if inputs.is_empty() {
        out.fill(1.0);
        return 0;
    }
    let radices = inputs.iter().map(|u| u.rows()).collect();
    let mut mi = MultiIndex::init_from_row(radices, start).expect("row in range");
    let mut count = 0;
    for row in out.chunks_exact_mut(cols) {
        let digits = mi.digits();
        row.copy_from_slice(inputs[0].row(digits[0]));
        for (u, &d) in inputs.iter().zip(digits).skip(1) {
            for (o, v) in row.iter_mut().zip(u.row(d)) {
                *o *= v;
            }
            count += 1;
        }
        mi.increment();
    }
    count
}

type RowFiller = fn(&[&FactorMatrix], usize, usize, &mut [f64]) -> u64;

fn krp_with(inputs: &[&FactorMatrix], threads: usize, fill: RowFiller) -> Result<(FactorMatrix, u64)> {
    let cols = check_inputs(inputs)?;
    let rows = inputs
        .iter()
        .try_fold(1usize, |acc, u| acc.checked_mul(u.rows()))
        .filter(|r| r.checked_mul(cols).is_some())
        .ok_or_else(|| Error::Resource("Khatri-Rao output size overflows".into()))?;
    let mut out = vec![0.0; rows * cols];
    let workers = threads.max(1).min(rows.max(1));
    let counts = map_row_blocks(&mut out, cols, &balanced_ranges(rows, workers), |_, r, block| {
        fill(inputs, cols, r.start, block)
    });
    Ok((FactorMatrix::new(rows, cols, out)?, counts.into_iter().sum()))
}

/// Khatri-Rao product with partial-product reuse, split into `threads`
/// contiguous row blocks. The result does not depend on `threads`.
pub fn krp(inputs: &[&FactorMatrix], threads: usize) -> Result<FactorMatrix> {
    krp_with(inputs, threads, fill_rows).map(|(k, _)| k)
}

/// [`krp`] together with the number of Hadamard products it performed.
pub fn krp_counted(inputs: &[&FactorMatrix], threads: usize) -> Result<(FactorMatrix, u64)> {
    krp_with(inputs, threads, fill_rows)
}

/// Row-wise Khatri-Rao product without reuse.
pub fn krp_naive(inputs: &[&FactorMatrix], threads: usize) -> Result<FactorMatrix> {
    krp_with(inputs, threads, fill_rows_naive).map(|(k, _)| k)
}

pub fn krp_naive_counted(inputs: &[&FactorMatrix], threads: usize) -> Result<(FactorMatrix, u64)> {
    krp_with(inputs, threads, fill_rows_naive)
}

/// Khatri-Rao product of one or two matrices, straight from the row-wise
/// definition `K(r_B + r_A * J_B, :) = A(r_A, :) ∘ B(r_B, :)`.
pub fn krp_small(inputs: &[&FactorMatrix]) -> Result<FactorMatrix> {
    if !(1..=2).contains(&inputs.len()) {
        return Err(Error::Argument(format!(
            "krp_small takes 1 or 2 inputs, got {}",
            inputs.len()
        )));
    }
    krp_with(inputs, 1, fill_rows).map(|(k, _)| k)
}
