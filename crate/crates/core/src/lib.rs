//! Dense tensor kernels: reorder-free MTTKRP, row-wise Khatri-Rao products
//! with partial-product reuse, and CP decomposition by alternating least
//! squares.
//!
//! Tensors are stored in natural order (mode 0 fastest). Every matricization
//! used by the kernels is a strided view of that buffer; only the baseline
//! MTTKRP copies data.

pub mod cp_als;
pub mod error;
pub mod factor;
pub mod khatri_rao;
pub mod linalg;
pub mod mttkrp;
pub mod oracle;
pub mod parallel;
pub mod tensor;
pub mod timing;

pub use cp_als::{
    als_iterate, cp_als, cp_als_from, fit, AlsConfig, AlsTrace, AlsTraceEntry, FitReport, KruskalModel, ModeStep,
    MttkrpPolicy,
};
pub use error::{Error, Result};
pub use factor::FactorMatrix;
pub use khatri_rao::{krp, krp_counted, krp_naive, krp_naive_counted, KrpState};
pub use linalg::{gemm_acc, gemv, gram, solve_psd, GramMatrix, Layout, MatMut, MatRef};
pub use mttkrp::{mttkrp, Algorithm, MttkrpRequest, MttkrpResult, Side, TwoStepOrder};
pub use parallel::available_threads;
pub use tensor::{DenseTensor, MatricizationView, MultiIndex, Shape, TensorRef};
pub use timing::Breakdown;
