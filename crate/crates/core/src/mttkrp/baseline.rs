use std::time::Instant;

use super::{MttkrpRequest, MttkrpResult};
use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::khatri_rao::krp;
use crate::linalg::{gemm_acc, Layout, MatRef};
use crate::tensor::{Shape, TensorRef};
use crate::timing::{timed, Breakdown};

/// Copies `X_(n)` into an explicit column-major `I_n x I/I_n` matrix.
///
/// Column `j` of the matricization linearizes the remaining modes with mode 0
/// fastest, so `j` is delinearized once against the reduced shape and the
/// column's `I_n` entries are gathered at stride `L_n`.
pub fn explicit_matricization(tensor: TensorRef<'_>, n: usize) -> Result<Vec<f64>> {
    let shape = tensor.shape();
    shape.check_mode(n)?;
    let rows = shape.dim(n);
    let cols = shape.unfold(n);
    let mut out = Vec::new();
    out.try_reserve_exact(shape.total())
        .map_err(|e| Error::Resource(format!("explicit matricization: {e}")))?;
    let reduced: Vec<usize> = shape
        .dims()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != n)
        .map(|(_, &d)| d)
        .collect();
    // N = 1: a single column holding the whole tensor
    let reduced = if reduced.is_empty() { vec![1] } else { reduced };
    let reduced = Shape::new(&reduced)?;
    let strides: Vec<usize> = (0..shape.ndims())
        .filter(|&k| k != n)
        .map(|k| shape.left(k))
        .collect();
    let step = shape.left(n);
    let values = tensor.values();
    for j in 0..cols {
        let idx = reduced.delinearize(j)?;
        let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        out.extend((0..rows).map(|i| values[base + i * step]));
    }
    Ok(out)
}

/// Reorder-then-multiply MTTKRP: explicit matricization (skipped for mode 0,
/// which is already column-major), explicit full KRP, one matrix multiply.
pub fn mttkrp_baseline(request: &MttkrpRequest<'_>) -> Result<MttkrpResult> {
    let start = Instant::now();
    let rank = request.validate()?;
    let shape = request.tensor.shape();
    let n = request.mode;
    let (rows, cols) = (shape.dim(n), shape.unfold(n));
    let mut bd = Breakdown::default();

    let reordered = if n == 0 {
        None
    } else {
        Some(timed(&mut bd.reorder, || explicit_matricization(request.tensor, n))?)
    };
    let xmat = MatRef::new(
        reordered.as_deref().unwrap_or(request.tensor.values()),
        rows,
        cols,
        Layout::ColMajor,
    );

    let inputs = request.full_krp_inputs();
    let k = if inputs.is_empty() {
        FactorMatrix::filled(1, rank, 1.0)
    } else {
        timed(&mut bd.krp_full, || krp(&inputs, request.threads))?
    };

    let mut m = FactorMatrix::zeros(rows, rank);
    timed(&mut bd.matmul, || {
        gemm_acc(xmat, k.as_mat(), &mut m.as_mat_mut(), false, request.threads)
    })?;

    Ok(MttkrpResult {
        m,
        breakdown: bd.finish(start),
    })
}
