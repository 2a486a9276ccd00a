use std::time::Instant;

use super::{MttkrpRequest, MttkrpResult};
use crate::error::Result;
use crate::factor::FactorMatrix;
use crate::khatri_rao::{fill_rows, krp, RowStream};
use crate::linalg::{gemm_acc, parallel_reduce, Layout, MatRef};
use crate::parallel::{ceil_ranges, map_ranges};
use crate::timing::{timed, Breakdown};

/// One-step MTTKRP: the matricization is multiplied in place, block by block.
///
/// External modes split the columns of `X_(n)` into `T` ranges of width
/// `ceil(I^(n) / T)`; each worker builds the matching rows of the full KRP and
/// multiplies into a private accumulator. Internal modes precompute the left
/// KRP `K_L`, split the `R_n` row-major `I_n x L_n` blocks into contiguous
/// chunks, and build each conformal KRP block as `K_R(j, :) ∘ K_L` on the fly.
/// Private accumulators are then summed by [`parallel_reduce`].
pub fn mttkrp_one_step(request: &MttkrpRequest<'_>) -> Result<MttkrpResult> {
    let start = Instant::now();
    let rank = request.validate()?;
    let shape = request.tensor.shape();
    let (m, bd) = if shape.is_external(request.mode) {
        external(request, rank)?
    } else {
        internal(request, rank)?
    };
    Ok(MttkrpResult {
        m,
        breakdown: bd.finish(start),
    })
}

fn external(request: &MttkrpRequest<'_>, rank: usize) -> Result<(FactorMatrix, Breakdown)> {
    let shape = request.tensor.shape();
    let n = request.mode;
    let (rows, cols) = (shape.dim(n), shape.unfold(n));
    // X_(0) is column-major, X_(N-1) row-major; for N = 1 both describe the
    // same I_0 x 1 column
    let layout = if n == 0 { Layout::ColMajor } else { Layout::RowMajor };
    let xmat = MatRef::new(request.tensor.values(), rows, cols, layout);
    let inputs = request.full_krp_inputs();

    let ranges = ceil_ranges(cols, request.threads);
    let parts = map_ranges(&ranges, |_, range| -> Result<(FactorMatrix, Breakdown)> {
        let mut bd = Breakdown::default();
        let mut acc = FactorMatrix::zeros(rows, rank);
        if range.is_empty() {
            return Ok((acc, bd));
        }
        let mut kblock = vec![0.0; range.len() * rank];
        timed(&mut bd.krp_full, || fill_rows(&inputs, rank, range.start, &mut kblock));
        let kview = MatRef::new(&kblock, range.len(), rank, Layout::RowMajor);
        let xblock = xmat.submatrix(0, rows, range.start, range.len());
        timed(&mut bd.matmul, || gemm_acc(xblock, kview, &mut acc.as_mat_mut(), false, 1))?;
        Ok((acc, bd))
    });
    finish_reduce(parts, request.threads)
}

fn internal(request: &MttkrpRequest<'_>, rank: usize) -> Result<(FactorMatrix, Breakdown)> {
    let shape = request.tensor.shape();
    let n = request.mode;
    let view = shape.matricize_view(n)?;
    let (rows, left, blocks) = (view.block_rows, view.block_cols, view.block_count);
    let values = request.tensor.values();
    let right_inputs = request.right_krp_inputs();

    let mut krp_left_time = 0.0;
    let k_left = timed(&mut krp_left_time, || krp(&request.left_krp_inputs(), request.threads))?;

    // Too few blocks to share out: run the block loop on one worker and give
    // the threads to the matrix multiply instead.
    let (workers, gemm_threads) = if request.threads >= blocks {
        (1, request.threads)
    } else {
        (request.threads, 1)
    };
    let ranges = ceil_ranges(blocks, workers);
    let parts = map_ranges(&ranges, |_, range| -> Result<(FactorMatrix, Breakdown)> {
        let mut bd = Breakdown::default();
        let mut acc = FactorMatrix::zeros(rows, rank);
        if range.is_empty() {
            return Ok((acc, bd));
        }
        let mut right_row = vec![0.0; rank];
        let mut kbar = vec![0.0; left * rank];
        let mut stream = RowStream::new(&right_inputs, range.start)?;
        for j in range {
            timed(&mut bd.krp_partial, || stream.next_row(&mut right_row));
            timed(&mut bd.krp_full, || {
                for (dst, src) in kbar.chunks_exact_mut(rank).zip(k_left.as_slice().chunks_exact(rank)) {
                    for ((d, &r), &l) in dst.iter_mut().zip(&right_row).zip(src) {
                        *d = r * l;
                    }
                }
            });
            let xblock = view.block(values, j);
            let kview = MatRef::new(&kbar, left, rank, Layout::RowMajor);
            timed(&mut bd.matmul, || {
                gemm_acc(xblock, kview, &mut acc.as_mat_mut(), true, gemm_threads)
            })?;
        }
        Ok((acc, bd))
    });
    let (m, mut bd) = finish_reduce(parts, request.threads)?;
    bd.krp_partial += krp_left_time;
    Ok((m, bd))
}

fn finish_reduce(
    parts: Vec<Result<(FactorMatrix, Breakdown)>>,
    threads: usize,
) -> Result<(FactorMatrix, Breakdown)> {
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let (accs, times): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let mut bd = Breakdown::mean(&times);
    let m = timed(&mut bd.reduce, || parallel_reduce(accs, threads))?;
    Ok((m, bd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mttkrp_loops_oracle;
    use crate::tensor::{DenseTensor, Shape};

    #[test]
    fn all_ones_2x2x2() {
        let t = DenseTensor::new(Shape::new(&[2, 2, 2]).unwrap(), vec![1.0; 8]).unwrap();
        let f = vec![FactorMatrix::filled(2, 1, 1.0); 3];
        for mode in 0..3 {
            let r = mttkrp_one_step(&MttkrpRequest::new(t.view(), &f, mode)).unwrap();
            assert_eq!(r.m.as_slice(), &[4.0, 4.0]);
        }
    }

    #[test]
    fn thread_counts_agree() {
        let shape = Shape::new(&[3, 4, 5, 2]).unwrap();
        let t = DenseTensor::from_fn(shape, |i| ((i[0] * 7 + i[1] * 3 + i[2] * 5 + i[3]) % 11) as f64 * 0.37);
        let f: Vec<_> = [3, 4, 5, 2]
            .iter()
            .map(|&d| FactorMatrix::from_fn(d, 3, |r, c| 1.0 / (1.0 + r as f64 + 2.0 * c as f64)))
            .collect();
        for mode in 0..4 {
            let oracle = mttkrp_loops_oracle(t.view(), &f, mode).unwrap();
            let one = mttkrp_one_step(&MttkrpRequest::new(t.view(), &f, mode)).unwrap().m;
            for threads in [2, 4, 64] {
                let many = mttkrp_one_step(&MttkrpRequest::new(t.view(), &f, mode).threads(threads)).unwrap().m;
                assert!(many.relative_error(&one) <= 1e-12);
            }
            assert!(one.relative_error(&oracle) <= 1e-12);
        }
    }

    #[test]
    fn breakdown_categories() {
        let t = DenseTensor::new(Shape::new(&[3, 3, 3]).unwrap(), vec![1.0; 27]).unwrap();
        let f = vec![FactorMatrix::filled(3, 2, 1.0); 3];
        let r = mttkrp_one_step(&MttkrpRequest::new(t.view(), &f, 1).threads(2)).unwrap();
        assert_eq!(r.breakdown.matvec, 0.0);
        assert_eq!(r.breakdown.reorder, 0.0);
        assert!(r.breakdown.total + 1e-9 >= r.breakdown.category_sum());
    }
}
