//! Matricized tensor times Khatri-Rao product,
//! `M = X_(n) (U_{N-1} ⊙ ... ⊙ U_{n+1} ⊙ U_{n-1} ⊙ ... ⊙ U_0)`.
//!
//! Three implementations share one request type:
//!
//! * [`Algorithm::Baseline`] copies the tensor into an explicit column-major
//!   matricization, forms the full KRP and performs one matrix multiply.
//! * [`Algorithm::OneStep`] multiplies the matricization in place, block by
//!   block, against conformal row blocks of the KRP.
//! * [`Algorithm::TwoStep`] (internal modes only) performs a partial MTTKRP
//!   against the left or right KRP followed by one matrix-vector product per
//!   output column.
//!
//! The one- and two-step kernels only ever read the tensor buffer.

mod baseline;
mod one_step;
mod two_step;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::tensor::{Shape, TensorRef};
use crate::timing::Breakdown;

pub use baseline::mttkrp_baseline;
pub use one_step::mttkrp_one_step;
pub use two_step::{choose_order, mttkrp_two_step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Baseline,
    OneStep,
    TwoStep,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Baseline, Algorithm::OneStep, Algorithm::TwoStep];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Baseline => "baseline",
            Algorithm::OneStep => "onestep",
            Algorithm::TwoStep => "twostep",
        }
    }

    /// Whether the algorithm is defined for `mode` of `shape`.
    pub fn supports(self, shape: &Shape, mode: usize) -> bool {
        self != Algorithm::TwoStep || !shape.is_external(mode)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Algorithm::Baseline),
            "onestep" | "one_step" => Ok(Algorithm::OneStep),
            "twostep" | "two_step" => Ok(Algorithm::TwoStep),
            other => Err(Error::Argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Which partial MTTKRP the two-step algorithm performs first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TwoStepOrder {
    #[default]
    Auto,
    ForceLeft,
    ForceRight,
}

impl FromStr for TwoStepOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(TwoStepOrder::Auto),
            "left" => Ok(TwoStepOrder::ForceLeft),
            "right" => Ok(TwoStepOrder::ForceRight),
            other => Err(Error::Argument(format!("unknown two-step order {other:?}"))),
        }
    }
}

impl fmt::Display for TwoStepOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TwoStepOrder::Auto => "auto",
            TwoStepOrder::ForceLeft => "left",
            TwoStepOrder::ForceRight => "right",
        })
    }
}

/// Resolved two-step ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    LeftFirst,
    RightFirst,
}

#[derive(Debug, Clone, Copy)]
pub struct MttkrpRequest<'a> {
    pub tensor: TensorRef<'a>,
    /// One factor per mode; factor `mode` is not read.
    pub factors: &'a [FactorMatrix],
    pub mode: usize,
    pub threads: usize,
    pub algorithm: Algorithm,
    pub order: TwoStepOrder,
}

impl<'a> MttkrpRequest<'a> {
    pub fn new(tensor: TensorRef<'a>, factors: &'a [FactorMatrix], mode: usize) -> Self {
        MttkrpRequest {
            tensor,
            factors,
            mode,
            threads: 1,
            algorithm: Algorithm::OneStep,
            order: TwoStepOrder::Auto,
        }
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn order(mut self, order: TwoStepOrder) -> Self {
        self.order = order;
        self
    }

    /// Checks the request invariants and returns the rank `C`.
    pub fn validate(&self) -> Result<usize> {
        let shape = self.tensor.shape();
        shape.check_mode(self.mode)?;
        if self.factors.len() != shape.ndims() {
            return Err(Error::Dimension(format!(
                "{} factor matrices for a {}-way tensor",
                self.factors.len(),
                shape.ndims()
            )));
        }
        let rank = self.factors[0].cols();
        for (k, f) in self.factors.iter().enumerate() {
            if f.rows() != shape.dim(k) {
                return Err(Error::Dimension(format!(
                    "factor {k} has {} rows, mode {k} has extent {}",
                    f.rows(),
                    shape.dim(k)
                )));
            }
            if f.cols() != rank {
                return Err(Error::Dimension(format!(
                    "factor {k} has {} columns, factor 0 has {rank}",
                    f.cols()
                )));
            }
        }
        if self.threads == 0 {
            return Err(Error::Argument("thread count must be at least 1".into()));
        }
        Ok(rank)
    }

    /// Inputs of the full KRP, slowest-varying first:
    /// `U_{N-1}, ..., U_{n+1}, U_{n-1}, ..., U_0`.
    pub(crate) fn full_krp_inputs(&self) -> Vec<&'a FactorMatrix> {
        let factors: &'a [FactorMatrix] = self.factors;
        factors
            .iter()
            .enumerate()
            .rev()
            .filter(|&(k, _)| k != self.mode)
            .map(|(_, f)| f)
            .collect()
    }

    /// `U_{n-1}, ..., U_0`.
    pub(crate) fn left_krp_inputs(&self) -> Vec<&'a FactorMatrix> {
        let factors: &'a [FactorMatrix] = self.factors;
        factors[..self.mode].iter().rev().collect()
    }

    /// `U_{N-1}, ..., U_{n+1}`.
    pub(crate) fn right_krp_inputs(&self) -> Vec<&'a FactorMatrix> {
        let factors: &'a [FactorMatrix] = self.factors;
        factors[self.mode + 1..].iter().rev().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MttkrpResult {
    /// `I_n x C`.
    pub m: FactorMatrix,
    pub breakdown: Breakdown,
}

/// Runs the algorithm named in the request.
pub fn mttkrp(request: &MttkrpRequest<'_>) -> Result<MttkrpResult> {
    match request.algorithm {
        Algorithm::Baseline => mttkrp_baseline(request),
        Algorithm::OneStep => mttkrp_one_step(request),
        Algorithm::TwoStep => mttkrp_two_step(request),
    }
}
