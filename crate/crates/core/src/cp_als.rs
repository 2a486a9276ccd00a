//! CP decomposition by alternating least squares.
//!
//! Each iteration updates the factors in mode order. The update of mode `n`
//! is `M = MTTKRP(X, n)`, `H = ⊛_{k != n} U_k^T U_k`, `U_n = M H^+`, after
//! which the columns of `U_n` are normalized into `lambda`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::khatri_rao::RowStream;
use crate::linalg::{gram, gram_hadamard, solve_psd, GramMatrix};
use crate::mttkrp::{mttkrp, Algorithm, MttkrpRequest, TwoStepOrder};
use crate::parallel::{available_threads, ceil_ranges, map_ranges};
use crate::tensor::{Shape, TensorRef};
use crate::timing::Breakdown;

/// Rank-`C` Kruskal tensor `[[lambda; U_0, ..., U_{N-1}]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalModel {
    factors: Vec<FactorMatrix>,
    lambda: Vec<f64>,
}

impl KruskalModel {
    pub fn new(factors: Vec<FactorMatrix>, lambda: Vec<f64>) -> Result<Self> {
        let rank = lambda.len();
        if factors.is_empty() {
            return Err(Error::Argument("a Kruskal model needs at least one factor".into()));
        }
        if let Some(k) = factors.iter().position(|f| f.cols() != rank) {
            return Err(Error::Dimension(format!(
                "factor {k} has {} columns, lambda has {rank} weights",
                factors[k].cols()
            )));
        }
        Ok(KruskalModel { factors, lambda })
    }

    /// Factors drawn uniformly from `[0, 1)`, unit weights.
    pub fn random(shape: &Shape, rank: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors = shape
            .dims()
            .iter()
            .map(|&d| FactorMatrix::random(d, rank, &mut rng))
            .collect();
        KruskalModel {
            factors,
            lambda: vec![1.0; rank],
        }
    }

    pub fn zeros(shape: &Shape, rank: usize) -> Self {
        KruskalModel {
            factors: shape.dims().iter().map(|&d| FactorMatrix::zeros(d, rank)).collect(),
            lambda: vec![0.0; rank],
        }
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    #[inline]
    pub fn factors(&self) -> &[FactorMatrix] {
        &self.factors
    }

    #[inline]
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    /// Scales every column of every factor to unit norm, folding the norms
    /// into `lambda`. Zero columns stay zero.
    pub fn normalize(&mut self) {
        for k in 0..self.factors.len() {
            let norms = normalize_columns(&mut self.factors[k]);
            for (l, s) in self.lambda.iter_mut().zip(norms) {
                *l *= s;
            }
        }
    }

    fn check_shape(&self, shape: &Shape) -> Result<()> {
        if self.dims() != shape.dims() {
            return Err(Error::Argument(format!(
                "model of shape {:?} for tensor of shape {:?}",
                self.dims(),
                shape.dims()
            )));
        }
        Ok(())
    }
}

/// Divides each column by its 2-norm and returns the norms.
fn normalize_columns(u: &mut FactorMatrix) -> Vec<f64> {
    let norms = u.column_norms();
    let inv: Vec<f64> = norms.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
    for r in 0..u.rows() {
        for (v, s) in u.row_mut(r).iter_mut().zip(&inv) {
            *v *= s;
        }
    }
    norms
}

/// How each mode's MTTKRP is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MttkrpPolicy {
    /// One-step for external modes, two-step for internal modes.
    #[default]
    Auto,
    /// The given algorithm wherever it is defined; a two-step request on an
    /// external mode runs one-step, which is what two-step reduces to there.
    Fixed(Algorithm),
}

impl MttkrpPolicy {
    pub fn algorithm_for(self, shape: &Shape, mode: usize) -> Algorithm {
        match self {
            MttkrpPolicy::Auto | MttkrpPolicy::Fixed(Algorithm::TwoStep) => {
                if shape.is_external(mode) {
                    Algorithm::OneStep
                } else {
                    Algorithm::TwoStep
                }
            }
            MttkrpPolicy::Fixed(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsConfig {
    pub max_iters: usize,
    /// Stop once the fit changes by less than this between iterations.
    pub tol: f64,
    pub seed: u64,
    pub threads: usize,
    pub policy: MttkrpPolicy,
    pub order: TwoStepOrder,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            max_iters: 50,
            tol: 1e-6,
            seed: 0,
            threads: available_threads(),
            policy: MttkrpPolicy::Auto,
            order: TwoStepOrder::Auto,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Argument(format!("tolerance {} is not >= 0", self.tol)));
        }
        if self.threads == 0 {
            return Err(Error::Argument("thread count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Timing of one factor update.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeStep {
    pub mode: usize,
    pub algorithm: Algorithm,
    /// MTTKRP categories; Gram, solve and normalization land in `other`.
    pub breakdown: Breakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsTraceEntry {
    pub iteration: usize,
    /// `None` when the tensor is zero and the fit is undefined.
    pub fit: Option<f64>,
    /// `||X - Y|| / ||X||`, or `||X - Y||` for a zero tensor.
    pub residual: f64,
    pub modes: Vec<ModeStep>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlsTrace {
    pub entries: Vec<AlsTraceEntry>,
    pub converged: bool,
    /// Set when the input was all zeros and the solver returned the zero
    /// model without iterating.
    pub zero_tensor: bool,
}

impl AlsTrace {
    pub fn final_fit(&self) -> Option<f64> {
        self.entries.last().and_then(|e| e.fit)
    }
}

/// Fit of a model against a tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub fit: Option<f64>,
    pub residual: f64,
}

// Below this squared relative residual the expanded formula loses most of its
// digits to cancellation, so the residual is evaluated directly instead.
const EXPANDED_FORMULA_FLOOR: f64 = 1e-6;

/// One ALS sweep over all modes, updating `model` in place.
pub fn als_iterate(tensor: TensorRef<'_>, model: &mut KruskalModel, config: &AlsConfig) -> Result<AlsTraceEntry> {
    config.validate()?;
    model.check_shape(tensor.shape())?;
    let norm_x = tensor.norm();
    sweep(tensor, model, config, norm_x, 0)
}

fn sweep(
    tensor: TensorRef<'_>,
    model: &mut KruskalModel,
    config: &AlsConfig,
    norm_x: f64,
    iteration: usize,
) -> Result<AlsTraceEntry> {
    let start = Instant::now();
    let shape = tensor.shape();
    let nmodes = shape.ndims();
    let mut grams: Vec<GramMatrix> = model.factors.iter().map(gram).collect();
    let mut modes = Vec::with_capacity(nmodes);
    let mut last = None;

    for n in 0..nmodes {
        let mode_start = Instant::now();
        let algorithm = config.policy.algorithm_for(shape, n);
        let req = MttkrpRequest::new(tensor, &model.factors, n)
            .threads(config.threads)
            .algorithm(algorithm)
            .order(config.order);
        let result = mttkrp(&req)?;
        let mut bd = result.breakdown;

        let mut h = GramMatrix::ones(model.rank());
        for (k, g) in grams.iter().enumerate() {
            if k != n {
                h.hadamard_assign(g);
            }
        }
        let mut u = solve_psd(&h, &result.m)?;
        model.lambda = normalize_columns(&mut u);
        grams[n] = gram(&u);
        model.factors[n] = u;

        bd.total = mode_start.elapsed().as_secs_f64();
        bd.other = (bd.total - (bd.category_sum() - bd.other)).max(0.0);
        modes.push(ModeStep {
            mode: n,
            algorithm,
            breakdown: bd,
        });
        if n + 1 == nmodes {
            last = Some((result.m, h));
        }
    }

    let (m_last, h_last) = last.expect("at least one mode");
    let report = fit_from_parts(tensor, model, norm_x, &m_last, &h_last, &grams[nmodes - 1], config.threads);
    Ok(AlsTraceEntry {
        iteration,
        fit: report.fit,
        residual: report.residual,
        modes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fit from the last mode's MTTKRP `M`, the Gram product `H` of the other
/// modes and the last factor's Gram matrix:
/// `<X, Y> = sum(M ∘ U_last diag(lambda))`, `||Y||^2 = lambda^T (H ∘ U^T U) lambda`.
fn fit_from_parts(
    tensor: TensorRef<'_>,
    model: &KruskalModel,
    norm_x: f64,
    m_last: &FactorMatrix,
    h_others: &GramMatrix,
    gram_last: &GramMatrix,
    threads: usize,
) -> FitReport {
    let u_last = model.factors.last().expect("non-empty model");
    let lambda = &model.lambda;
    let inner: f64 = (0..u_last.rows())
        .map(|r| {
            m_last
                .row(r)
                .iter()
                .zip(u_last.row(r))
                .zip(lambda)
                .map(|((m, u), l)| m * u * l)
                .sum::<f64>()
        })
        .sum();
    let mut h = h_others.clone();
    h.hadamard_assign(gram_last);
    let norm_y_sq = h.quadratic_form(lambda);
    let norm_x_sq = norm_x * norm_x;
    let mut resid_sq = (norm_x_sq - 2.0 * inner + norm_y_sq).max(0.0);
    if norm_x == 0.0 || resid_sq <= EXPANDED_FORMULA_FLOOR * norm_x_sq {
        resid_sq = direct_residual_sq(tensor, model, threads);
    }
    report(norm_x, resid_sq.sqrt())
}

fn report(norm_x: f64, resid: f64) -> FitReport {
    if norm_x > 0.0 {
        FitReport {
            fit: Some(1.0 - resid / norm_x),
            residual: resid / norm_x,
        }
    } else {
        FitReport {
            fit: None,
            residual: resid,
        }
    }
}

/// `||X - Y||^2` by streaming the columns of `X_(0)` against
/// `Y_(0) = U_0 diag(lambda) K^T`, one KRP row at a time; `Y` is never stored.
fn direct_residual_sq(tensor: TensorRef<'_>, model: &KruskalModel, threads: usize) -> f64 {
    let shape = tensor.shape();
    let rows = shape.dim(0);
    let cols = shape.unfold(0);
    let rank = model.rank();
    let u0 = &model.factors[0];
    let inputs: Vec<&FactorMatrix> = model.factors[1..].iter().rev().collect();
    let values = tensor.values();
    let parts = map_ranges(&ceil_ranges(cols, threads), |_, range| {
        if range.is_empty() {
            return 0.0;
        }
        let mut stream = RowStream::new(&inputs, range.start).expect("model shapes checked");
        let mut krow = vec![0.0; rank];
        let mut sum = 0.0;
        for j in range {
            stream.next_row(&mut krow);
            for (k, l) in krow.iter_mut().zip(&model.lambda) {
                *k *= l;
            }
            let column = &values[j * rows..(j + 1) * rows];
            for (i, &x) in column.iter().enumerate() {
                let y: f64 = u0.row(i).iter().zip(&krow).map(|(a, b)| a * b).sum();
                sum += (x - y) * (x - y);
            }
        }
        sum
    });
    parts.into_iter().sum()
}

/// Fit of `model` against `tensor`, computed with one MTTKRP in the last
/// mode and the expanded residual formula.
pub fn fit(tensor: TensorRef<'_>, model: &KruskalModel, threads: usize) -> Result<FitReport> {
    model.check_shape(tensor.shape())?;
    let last = tensor.shape().ndims() - 1;
    let m = mttkrp(&MttkrpRequest::new(tensor, &model.factors, last).threads(threads.max(1)))?.m;
    let h = gram_hadamard(&model.factors, Some(last))?;
    let g = gram(&model.factors[last]);
    Ok(fit_from_parts(tensor, model, tensor.norm(), &m, &h, &g, threads.max(1)))
}

/// Rank-`rank` CP decomposition from a seeded uniform initialization.
pub fn cp_als(tensor: TensorRef<'_>, rank: usize, config: &AlsConfig) -> Result<(KruskalModel, AlsTrace)> {
    let model = KruskalModel::random(tensor.shape(), rank, config.seed);
    cp_als_from(tensor, model, config)
}

/// Runs ALS from the given starting model.
pub fn cp_als_from(
    tensor: TensorRef<'_>,
    mut model: KruskalModel,
    config: &AlsConfig,
) -> Result<(KruskalModel, AlsTrace)> {
    config.validate()?;
    if model.rank() == 0 {
        return Err(Error::Argument("rank must be at least 1".into()));
    }
    model.check_shape(tensor.shape())?;
    let norm_x = tensor.norm();
    let mut trace = AlsTrace::default();
    if norm_x == 0.0 {
        trace.zero_tensor = true;
        return Ok((KruskalModel::zeros(tensor.shape(), model.rank()), trace));
    }
    let mut prev_fit: Option<f64> = None;
    for it in 0..config.max_iters {
        let entry = sweep(tensor, &mut model, config, norm_x, it)?;
        let fit = entry.fit;
        trace.entries.push(entry);
        if let (Some(prev), Some(cur)) = (prev_fit, fit) {
            if (cur - prev).abs() < config.tol {
                trace.converged = true;
                break;
            }
        }
        prev_fit = fit;
    }
    Ok((model, trace))
}
