use std::time::Instant;

use super::{MttkrpRequest, MttkrpResult, Side, TwoStepOrder};
use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::khatri_rao::krp;
use crate::linalg::{gemm_acc, gemv, Layout, MatMut, MatRef};
use crate::tensor::Shape;
use crate::timing::{timed, Breakdown};

/// Left-first iff `L_n > R_n`: the multi-TTV then runs over `I_n x R_n`
/// blocks. Ties go right-first, whose partial product needs no transposed
/// operand.
pub fn choose_order(shape: &Shape, n: usize) -> Side {
    if shape.left(n) > shape.right(n) {
        Side::LeftFirst
    } else {
        Side::RightFirst
    }
}

/// Two-step MTTKRP for internal modes: one partial MTTKRP against the left or
/// right KRP, then one matrix-vector product per output column.
///
/// Right-first computes `R = X_(0:n) K_R`, an `L_n I_n x C` column-major
/// matrix whose column `j` is a row-major `I_n x L_n` block, and finishes with
/// `M(:, j) = R_j K_L(:, j)`. Left-first computes `L = X_(0:n-1)^T K_L`,
/// whose column `j` is a column-major `I_n x R_n` block, and finishes with
/// `M(:, j) = L_j K_R(:, j)`. All parallelism lives inside the kernels.
pub fn mttkrp_two_step(request: &MttkrpRequest<'_>) -> Result<MttkrpResult> {
    let start = Instant::now();
    let rank = request.validate()?;
    let shape = request.tensor.shape();
    let n = request.mode;
    if shape.is_external(n) {
        return Err(Error::Argument(format!(
            "two-step MTTKRP is undefined for external mode {n} of a {}-way tensor \
             (it degenerates to the one-step algorithm); use onestep",
            shape.ndims()
        )));
    }
    let side = match request.order {
        TwoStepOrder::Auto => choose_order(shape, n),
        TwoStepOrder::ForceLeft => Side::LeftFirst,
        TwoStepOrder::ForceRight => Side::RightFirst,
    };
    let threads = request.threads;
    let (rows, left, right) = (shape.dim(n), shape.left(n), shape.right(n));
    let values = request.tensor.values();
    let mut bd = Breakdown::default();

    let k_left = timed(&mut bd.krp_partial, || krp(&request.left_krp_inputs(), threads))?;
    let k_right = timed(&mut bd.krp_partial, || krp(&request.right_krp_inputs(), threads))?;

    // partial MTTKRP: (other x contracted) * (contracted x C), column-major out
    let (xmat, k_first, k_second, other, block_layout) = match side {
        Side::RightFirst => (
            MatRef::new(values, left * rows, right, Layout::ColMajor),
            &k_right,
            &k_left,
            left,
            Layout::RowMajor,
        ),
        Side::LeftFirst => (
            MatRef::new(values, left, rows * right, Layout::ColMajor).t(),
            &k_left,
            &k_right,
            right,
            Layout::ColMajor,
        ),
    };
    let partial_rows = rows * other;
    let mut partial = vec![0.0; partial_rows * rank];
    timed(&mut bd.matmul, || {
        let mut out = MatMut::new(&mut partial, partial_rows, rank, Layout::ColMajor);
        gemm_acc(xmat, k_first.as_mat(), &mut out, false, threads)
    })?;

    let mut m = FactorMatrix::zeros(rows, rank);
    timed(&mut bd.matvec, || -> Result<()> {
        let mut mview = m.as_mat_mut();
        let second = k_second.as_mat();
        for (j, column) in partial.chunks_exact(partial_rows).enumerate() {
            let block = MatRef::new(column, rows, other, block_layout);
            gemv(block, second.col(j), &mut mview.col_mut(j), false, threads)?;
        }
        Ok(())
    })?;

    Ok(MttkrpResult {
        m,
        breakdown: bd.finish(start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mttkrp::Algorithm;
    use crate::oracle::mttkrp_loops_oracle;
    use crate::tensor::DenseTensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn order_choice() {
        let s = |d: &[usize]| Shape::new(d).unwrap();
        assert_eq!(choose_order(&s(&[2, 3, 4]), 1), Side::RightFirst);
        assert_eq!(choose_order(&s(&[4, 3, 2]), 1), Side::LeftFirst);
        assert_eq!(choose_order(&s(&[3, 5, 3]), 1), Side::RightFirst);
    }

    #[test]
    fn external_mode_is_rejected() {
        let t = DenseTensor::zeros(Shape::new(&[2, 2, 2]).unwrap());
        let f = vec![FactorMatrix::filled(2, 1, 1.0); 3];
        for mode in [0, 2] {
            let req = MttkrpRequest::new(t.view(), &f, mode).algorithm(Algorithm::TwoStep);
            match mttkrp_two_step(&req) {
                Err(Error::Argument(msg)) => assert!(msg.contains("onestep")),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn all_ones_mode1() {
        let t = DenseTensor::new(Shape::new(&[2, 2, 2]).unwrap(), vec![1.0; 8]).unwrap();
        let f = vec![FactorMatrix::filled(2, 1, 1.0); 3];
        let r = mttkrp_two_step(&MttkrpRequest::new(t.view(), &f, 1)).unwrap();
        assert_eq!(r.m.as_slice(), &[4.0, 4.0]);
        assert_eq!(r.breakdown.krp_full, 0.0);
        assert_eq!(r.breakdown.reduce, 0.0);
    }

    #[test]
    fn forced_orders_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dims = [3, 4, 5, 2];
        let t = DenseTensor::from_fn(Shape::new(&dims).unwrap(), |_| rng.random::<f64>());
        let f: Vec<_> = dims.iter().map(|&d| FactorMatrix::random(d, 3, &mut rng)).collect();
        for mode in [1, 2] {
            let req = MttkrpRequest::new(t.view(), &f, mode);
            let l = mttkrp_two_step(&req.order(TwoStepOrder::ForceLeft)).unwrap().m;
            let r = mttkrp_two_step(&req.order(TwoStepOrder::ForceRight)).unwrap().m;
            assert!(l.relative_error(&r) <= 1e-12);
            let oracle = mttkrp_loops_oracle(t.view(), &f, mode).unwrap();
            assert!(l.relative_error(&oracle) <= 1e-12);
        }
    }
}
