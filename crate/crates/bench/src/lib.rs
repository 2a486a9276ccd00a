//! Benchmark harness for the `densekrp` kernels: synthetic tensors, binary
//! tensor files, timed MTTKRP / CP-ALS / KRP runs and CSV output.

pub mod error;
pub mod generate;
pub mod record;
pub mod run;
pub mod tensor_io;

pub use error::{BenchError, Result};
pub use generate::{gen_factors, gen_tensor, Distribution, Preset};
pub use record::{BenchRecord, CsvSink, HEADER};
pub use run::{bench_cp, bench_krp, bench_mttkrp, CpBench, KrpBench, MttkrpBench, Stat};
