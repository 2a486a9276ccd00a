//! Brute-force reference implementations. Single-threaded, no layout tricks:
//! every result is evaluated straight from its defining sum so it can serve
//! as an independent check of the fast kernels.

use crate::cp_als::KruskalModel;
use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::tensor::{DenseTensor, Shape, TensorRef};

/// Largest tensor the loop oracles accept by default.
pub const ORACLE_ENTRY_LIMIT: usize = 1_000_000;

fn guard(entries: usize, limit: usize) -> Result<()> {
    if entries > limit {
        return Err(Error::Resource(format!(
            "oracle refuses {entries} entries (limit {limit})"
        )));
    }
    Ok(())
}

/// Column-wise Kronecker construction of the Khatri-Rao product:
/// `K(:, c) = U_0(:, c) ⊗ U_1(:, c) ⊗ ...`, associated left to right.
pub fn krp_kron_oracle(inputs: &[&FactorMatrix]) -> Result<FactorMatrix> {
    let cols = inputs
        .first()
        .ok_or_else(|| Error::Argument("Khatri-Rao product of no matrices".into()))?
        .cols();
    if inputs.iter().any(|u| u.cols() != cols) {
        return Err(Error::Dimension("inputs differ in column count".into()));
    }
    let rows: usize = inputs.iter().map(|u| u.rows()).product();
    let mut out = FactorMatrix::zeros(rows, cols);
    for c in 0..cols {
        let mut col: Vec<f64> = (0..inputs[0].rows()).map(|r| inputs[0].get(r, c)).collect();
        for u in &inputs[1..] {
            let mut next = Vec::with_capacity(col.len() * u.rows());
            for &a in &col {
                for r in 0..u.rows() {
                    next.push(a * u.get(r, c));
                }
            }
            col = next;
        }
        for (r, v) in col.into_iter().enumerate() {
            out.set(r, c, v);
        }
    }
    Ok(out)
}

/// `M(i_n, c) = sum over all other indices of X(i) * prod_{k != n} U_k(i_k, c)`.
pub fn mttkrp_loops_oracle(tensor: TensorRef<'_>, factors: &[FactorMatrix], n: usize) -> Result<FactorMatrix> {
    mttkrp_loops_oracle_with_limit(tensor, factors, n, ORACLE_ENTRY_LIMIT)
}

/// [`mttkrp_loops_oracle`] with an explicit size guard.
pub fn mttkrp_loops_oracle_with_limit(
    tensor: TensorRef<'_>,
    factors: &[FactorMatrix],
    n: usize,
    limit: usize,
) -> Result<FactorMatrix> {
    let shape = tensor.shape();
    guard(shape.total(), limit)?;
    shape.check_mode(n)?;
    if factors.len() != shape.ndims() {
        return Err(Error::Dimension("one factor per mode required".into()));
    }
    let rank = factors[0].cols();
    let mut m = FactorMatrix::zeros(shape.dim(n), rank);
    for (offset, &x) in tensor.values().iter().enumerate() {
        let idx = shape.delinearize(offset)?;
        for c in 0..rank {
            let mut prod = 1.0;
            for (k, f) in factors.iter().enumerate() {
                if k != n {
                    prod *= f.get(idx[k], c);
                }
            }
            let cur = m.get(idx[n], c);
            m.set(idx[n], c, cur + x * prod);
        }
    }
    Ok(m)
}

/// Materializes `Y(i) = sum_c lambda_c prod_k U_k(i_k, c)` entry by entry.
pub fn reconstruct_oracle(model: &KruskalModel) -> Result<DenseTensor> {
    let dims: Vec<usize> = model.factors().iter().map(|f| f.rows()).collect();
    let shape = Shape::new(&dims)?;
    guard(shape.total(), ORACLE_ENTRY_LIMIT)?;
    let lambda = model.lambda();
    Ok(DenseTensor::from_fn(shape, |idx| {
        (0..model.rank())
            .map(|c| {
                let mut v = lambda[c];
                for (f, &i) in model.factors().iter().zip(idx) {
                    v *= f.get(i, c);
                }
                v
            })
            .sum()
    }))
}

/// `1 - ||X - Y||_F / ||X||_F` with `Y` materialized.
pub fn fit_oracle(tensor: TensorRef<'_>, model: &KruskalModel) -> Result<f64> {
    let y = reconstruct_oracle(model)?;
    if y.shape() != tensor.shape() {
        return Err(Error::Dimension("model and tensor shapes differ".into()));
    }
    let diff: f64 = tensor
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(1.0 - diff / tensor.norm())
}
