//! Dense kernel boundary: strided matrix views, matrix-matrix and
//! matrix-vector products, Gram/Hadamard combination, the symmetric solve
//! used by ALS, and the deterministic reduction of per-thread accumulators.
//!
//! Every kernel consumes strided views so that matricization blocks are read
//! in place. Matrix products are delegated to `matrixmultiply` (packing, cache
//! blocking and SIMD micro-kernels), parallelized here over disjoint output
//! panels.

use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::parallel::{balanced_ranges, map_ranges, workers_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    RowMajor,
    ColMajor,
}

impl Layout {
    /// `(row stride, column stride)` of a tightly packed `rows x cols` matrix.
    #[inline]
    pub fn strides(self, rows: usize, cols: usize) -> (usize, usize) {
        match self {
            Layout::RowMajor => (cols, 1),
            Layout::ColMajor => (1, rows),
        }
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs + (cols - 1) * cs;
        assert!(
            last < len,
            "view {rows}x{cols} (strides {rs},{cs}) exceeds buffer of {len}"
        );
    }
}

/// Read-only strided matrix view; `(r, c)` lives at `r * rs + c * cs`.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize, layout: Layout) -> Self {
        let (rs, cs) = layout.strides(rows, cols);
        Self::with_strides(data, rows, cols, rs, cs)
    }

    /// Panics if the view reaches past the end of `data`.
    pub fn with_strides(data: &'a [f64], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        check_extent(data.len(), rows, cols, rs, cs);
        MatRef {
            data,
            rows,
            cols,
            rs,
            cs,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn strides(&self) -> (usize, usize) {
        (self.rs, self.cs)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.rs + c * self.cs]
    }

    /// Transposed view of the same storage.
    #[inline]
    pub fn t(self) -> Self {
        MatRef {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    pub fn submatrix(self, r0: usize, rows: usize, c0: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        if rows == 0 || cols == 0 {
            return MatRef {
                data: &[],
                rows,
                cols,
                rs: self.rs,
                cs: self.cs,
            };
        }
        let start = r0 * self.rs + c0 * self.cs;
        MatRef::with_strides(&self.data[start..], rows, cols, self.rs, self.cs)
    }

    /// Column `c` as an `rows x 1` view.
    pub fn col(self, c: usize) -> Self {
        self.submatrix(0, self.rows, c, 1)
    }

    fn ptr(&self) -> *const f64 {
        self.data.as_ptr()
    }
}

/// Mutable strided matrix view.
#[derive(Debug)]
pub struct MatMut<'a> {
    data: &'a mut [f64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], rows: usize, cols: usize, layout: Layout) -> Self {
        let (rs, cs) = layout.strides(rows, cols);
        Self::with_strides(data, rows, cols, rs, cs)
    }

    pub fn with_strides(
        data: &'a mut [f64],
        rows: usize,
        cols: usize,
        rs: usize,
        cs: usize,
    ) -> Self {
        check_extent(data.len(), rows, cols, rs, cs);
        MatMut {
            data,
            rows,
            cols,
            rs,
            cs,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.rs + c * self.cs]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.rs + c * self.cs] = v;
    }

    /// Column `c` as an `rows x 1` mutable view.
    pub fn col_mut(&mut self, c: usize) -> MatMut<'_> {
        assert!(c < self.cols);
        let start = c * self.cs;
        MatMut::with_strides(&mut self.data[start..], self.rows, 1, self.rs, self.cs)
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef {
            data: self.data,
            rows: self.rows,
            cols: self.cols,
            rs: self.rs,
            cs: self.cs,
        }
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut f64);
// SAFETY: workers write through disjoint row or column panels of one view.
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl SendPtr {
    // a method call captures the whole wrapper, not the bare pointer field
    fn get(&self) -> *mut f64 {
        self.0
    }
}

// Below this many multiply-adds a product runs on the calling thread.
const GEMM_MIN_WORK_PER_THREAD: usize = 1 << 16;
const GEMV_MIN_WORK_PER_THREAD: usize = 1 << 15;

/// `C = A * B` (or `C += A * B` when `accumulate`), using up to `threads`
/// workers over disjoint panels of `C`.
pub fn gemm_acc(
    a: MatRef<'_>,
    b: MatRef<'_>,
    c: &mut MatMut<'_>,
    accumulate: bool,
    threads: usize,
) -> Result<()> {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if b.rows != k || c.rows != m || c.cols != n {
        return Err(Error::Dimension(format!(
            "gemm {}x{} * {}x{} into {}x{}",
            a.rows, a.cols, b.rows, b.cols, c.rows, c.cols
        )));
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        if !accumulate {
            for r in 0..m {
                for col in 0..n {
                    c.set(r, col, 0.0);
                }
            }
        }
        return Ok(());
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    let workers = workers_for(m * n * k, threads, GEMM_MIN_WORK_PER_THREAD);
    let split_rows = m >= n;
    let extent = if split_rows { m } else { n };
    let workers = workers.min(extent);
    let cptr = SendPtr(c.data.as_mut_ptr());
    let (ap, bp) = (a.ptr() as usize, b.ptr() as usize);
    let panel = |_: usize, range: std::ops::Range<usize>| {
        if range.is_empty() {
            return;
        }
        let (ap, bp) = (ap as *const f64, bp as *const f64);
        // SAFETY: every view was bounds-checked at construction, panels are
        // in range, and distinct workers touch disjoint panels of C.
        unsafe {
            if split_rows {
                matrixmultiply::dgemm(
                    range.len(),
                    k,
                    n,
                    1.0,
                    ap.add(range.start * a.rs),
                    a.rs as isize,
                    a.cs as isize,
                    bp,
                    b.rs as isize,
                    b.cs as isize,
                    beta,
                    cptr.get().add(range.start * c.rs),
                    c.rs as isize,
                    c.cs as isize,
                );
            } else {
                matrixmultiply::dgemm(
                    m,
                    k,
                    range.len(),
                    1.0,
                    ap,
                    a.rs as isize,
                    a.cs as isize,
                    bp.add(range.start * b.cs),
                    b.rs as isize,
                    b.cs as isize,
                    beta,
                    cptr.get().add(range.start * c.cs),
                    c.rs as isize,
                    c.cs as isize,
                );
            }
        }
    };
    map_ranges(&balanced_ranges(extent, workers), panel);
    Ok(())
}

/// `y = A * x` (or `y += A * x`) where `x` and `y` are single-column views.
pub fn gemv(
    a: MatRef<'_>,
    x: MatRef<'_>,
    y: &mut MatMut<'_>,
    accumulate: bool,
    threads: usize,
) -> Result<()> {
    if x.cols != 1 || y.cols != 1 || x.rows != a.cols || y.rows != a.rows {
        return Err(Error::Dimension(format!(
            "gemv {}x{} * {}x{} into {}x{}",
            a.rows, a.cols, x.rows, x.cols, y.rows, y.cols
        )));
    }
    let workers = workers_for(a.rows * a.cols, threads, GEMV_MIN_WORK_PER_THREAD).min(a.rows.max(1));
    let parts = map_ranges(&balanced_ranges(a.rows, workers), |_, rows| {
        let mut out = vec![0.0; rows.len()];
        if a.rs == 1 && a.cs != 1 {
            // column-major: stream down columns
            for j in 0..a.cols {
                let xj = x.get(j, 0);
                for (o, r) in out.iter_mut().zip(rows.clone()) {
                    *o += a.get(r, j) * xj;
                }
            }
        } else {
            for (o, r) in out.iter_mut().zip(rows.clone()) {
                *o = (0..a.cols).map(|j| a.get(r, j) * x.get(j, 0)).sum();
            }
        }
        out
    });
    for (r, v) in parts.into_iter().flatten().enumerate() {
        let v = if accumulate { y.get(r, 0) + v } else { v };
        y.set(r, 0, v);
    }
    Ok(())
}

/// Symmetric `C x C` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    size: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::Dimension(format!(
                "{size}x{size} Gram matrix from {} values",
                data.len()
            )));
        }
        Ok(GramMatrix { size, data })
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        GramMatrix { size, data }
    }

    pub fn ones(size: usize) -> Self {
        GramMatrix {
            size,
            data: vec![1.0; size * size],
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise product in place.
    pub fn hadamard_assign(&mut self, other: &GramMatrix) {
        assert_eq!(self.size, other.size);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
    }

    /// `w^T H w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        (0..self.size)
            .map(|i| w[i] * (0..self.size).map(|j| self.get(i, j) * w[j]).sum::<f64>())
            .sum()
    }
}

/// `U^T U`, upper triangle computed and mirrored so the result is exactly
/// symmetric.
pub fn gram(u: &FactorMatrix) -> GramMatrix {
    let c = u.cols();
    let mut data = vec![0.0; c * c];
    for r in 0..u.rows() {
        let row = u.row(r);
        for i in 0..c {
            let ri = row[i];
            for j in i..c {
                data[i * c + j] += ri * row[j];
            }
        }
    }
    for i in 0..c {
        for j in 0..i {
            data[i * c + j] = data[j * c + i];
        }
    }
    GramMatrix { size: c, data }
}

/// Hadamard product of the Gram matrices of every factor except `skip`.
pub fn gram_hadamard(factors: &[FactorMatrix], skip: Option<usize>) -> Result<GramMatrix> {
    let c = factors
        .first()
        .map(FactorMatrix::cols)
        .ok_or_else(|| Error::Argument("no factor matrices".into()))?;
    if factors.iter().any(|f| f.cols() != c) {
        return Err(Error::Dimension("factor matrices differ in column count".into()));
    }
    let mut h = GramMatrix::ones(c);
    for (k, f) in factors.iter().enumerate() {
        if Some(k) != skip {
            h.hadamard_assign(&gram(f));
        }
    }
    Ok(h)
}

const PSD_PIVOT_TOL: f64 = 1e-12;
const PSEUDOINVERSE_CUTOFF: f64 = 1e-12;

/// Solves `U * H = M` for symmetric positive semidefinite `H`.
///
/// Tries a Cholesky factorization first; if a pivot falls below
/// `1e-12 * trace(H)` the pseudoinverse is applied instead, built from an
/// eigendecomposition with eigenvalues under `1e-12 * lambda_max` dropped.
pub fn solve_psd(h: &GramMatrix, m: &FactorMatrix) -> Result<FactorMatrix> {
    let c = h.size;
    if m.cols() != c {
        return Err(Error::Dimension(format!(
            "right-hand side has {} columns, Gram matrix is {c}x{c}",
            m.cols()
        )));
    }
    match cholesky(h) {
        Some(l) => Ok(cholesky_solve_rows(&l, c, m)),
        None => Ok(pinv_solve_rows(h, m)),
    }
}

fn cholesky(h: &GramMatrix) -> Option<Vec<f64>> {
    let c = h.size;
    let trace: f64 = (0..c).map(|i| h.get(i, i)).sum();
    let tol = PSD_PIVOT_TOL * trace;
    if !(trace > 0.0) {
        return None;
    }
    let mut l = vec![0.0; c * c];
    for j in 0..c {
        let mut d = h.get(j, j);
        for k in 0..j {
            d -= l[j * c + k] * l[j * c + k];
        }
        if !(d > tol) {
            return None;
        }
        let djj = d.sqrt();
        l[j * c + j] = djj;
        for i in j + 1..c {
            let mut s = h.get(i, j);
            for k in 0..j {
                s -= l[i * c + k] * l[j * c + k];
            }
            l[i * c + j] = s / djj;
        }
    }
    Some(l)
}

fn cholesky_solve_rows(l: &[f64], c: usize, m: &FactorMatrix) -> FactorMatrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let x = out.row_mut(r);
        // L z = b
        for i in 0..c {
            let mut s = x[i];
            for k in 0..i {
                s -= l[i * c + k] * x[k];
            }
            x[i] = s / l[i * c + i];
        }
        // L^T u = z
        for i in (0..c).rev() {
            let mut s = x[i];
            for k in i + 1..c {
                s -= l[k * c + i] * x[k];
            }
            x[i] = s / l[i * c + i];
        }
    }
    out
}

fn pinv_solve_rows(h: &GramMatrix, m: &FactorMatrix) -> FactorMatrix {
    let c = h.size;
    let (evals, evecs) = symmetric_eigen(h);
    let lmax = evals.iter().fold(0.0f64, |a, &v| a.max(v));
    let inv: Vec<f64> = evals
        .iter()
        .map(|&v| {
            if lmax > 0.0 && v > PSEUDOINVERSE_CUTOFF * lmax {
                1.0 / v
            } else {
                0.0
            }
        })
        .collect();
    // H^+ = Q diag(inv) Q^T
    let mut pinv = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            pinv[i * c + j] = (0..c).map(|k| evecs[i * c + k] * inv[k] * evecs[j * c + k]).sum();
        }
    }
    let mut out = FactorMatrix::zeros(m.rows(), c);
    for r in 0..m.rows() {
        let src = m.row(r);
        let dst = out.row_mut(r);
        for j in 0..c {
            dst[j] = (0..c).map(|k| src[k] * pinv[k * c + j]).sum();
        }
    }
    out
}

/// Cyclic Jacobi eigendecomposition. Returns eigenvalues and the row-major
/// matrix whose columns are the eigenvectors.
fn symmetric_eigen(h: &GramMatrix) -> (Vec<f64>, Vec<f64>) {
    let c = h.size;
    let mut a = h.data.clone();
    let mut v = GramMatrix::identity(c).data;
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..c)
            .flat_map(|i| (0..c).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * c + j] * a[i * c + j])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * frob || off == 0.0 {
            break;
        }
        for p in 0..c {
            for q in p + 1..c {
                let apq = a[p * c + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * c + q] - a[p * c + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..c {
                    let akp = a[k * c + p];
                    let akq = a[k * c + q];
                    a[k * c + p] = cs * akp - sn * akq;
                    a[k * c + q] = sn * akp + cs * akq;
                }
                for k in 0..c {
                    let apk = a[p * c + k];
                    let aqk = a[q * c + k];
                    a[p * c + k] = cs * apk - sn * aqk;
                    a[q * c + k] = sn * apk + cs * aqk;
                }
                for k in 0..c {
                    let vkp = v[k * c + p];
                    let vkq = v[k * c + q];
                    v[k * c + p] = cs * vkp - sn * vkq;
                    v[k * c + q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    ((0..c).map(|i| a[i * c + i]).collect(), v)
}

/// Sums equally shaped accumulators with a pairwise tree in fixed index
/// order; the result depends only on the inputs and their count.
pub fn parallel_reduce(mut accumulators: Vec<FactorMatrix>, threads: usize) -> Result<FactorMatrix> {
    let first = accumulators
        .first()
        .ok_or_else(|| Error::Argument("no accumulators to reduce".into()))?;
    let (rows, cols) = (first.rows(), first.cols());
    if accumulators.iter().any(|a| a.rows() != rows || a.cols() != cols) {
        return Err(Error::Dimension("accumulators differ in shape".into()));
    }
    let mut step = 1;
    while step < accumulators.len() {
        let pairs: Vec<(usize, usize)> = (0..accumulators.len())
            .step_by(2 * step)
            .filter(|i| i + step < accumulators.len())
            .map(|i| (i, i + step))
            .collect();
        let workers = threads.max(1).min(pairs.len());
        // each pair owns a disjoint chunk of the accumulator list
        let mut chunks: Vec<&mut [FactorMatrix]> =
            accumulators.chunks_mut(2 * step).take(pairs.len()).collect();
        let ranges = balanced_ranges(chunks.len(), workers);
        let mut groups: Vec<Vec<&mut [FactorMatrix]>> = Vec::with_capacity(ranges.len());
        for r in ranges.iter().rev() {
            groups.push(chunks.split_off(r.start));
        }
        groups.reverse();
        std::thread::scope(|s| {
            for group in groups {
                let job = move || {
                    for chunk in group {
                        let (head, tail) = chunk.split_at_mut(step);
                        for (x, y) in head[0].as_mut_slice().iter_mut().zip(tail[0].as_slice()) {
                            *x += y;
                        }
                    }
                };
                if workers > 1 {
                    s.spawn(job);
                } else {
                    job();
                }
            }
        });
        step *= 2;
    }
    Ok(accumulators.swap_remove(0))
}
