use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use densekrp::khatri_rao::krp_naive;
use densekrp::oracle::{mttkrp_loops_oracle, ORACLE_ENTRY_LIMIT};
use densekrp::timing::median;
use densekrp::{
    cp_als_from, krp, mttkrp, Algorithm, AlsConfig, Breakdown, DenseTensor, FactorMatrix, KruskalModel,
    MttkrpPolicy, MttkrpRequest, TwoStepOrder,
};

use crate::error::{BenchError, Result};
use crate::generate::gen_factors;
use crate::record::BenchRecord;

/// Relative Frobenius tolerance of `--check`.
pub const CHECK_TOLERANCE: f64 = 1e-10;

/// How repeated timings are summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Median,
    Mean,
}

impl Stat {
    pub fn name(self) -> &'static str {
        match self {
            Stat::Median => "median",
            Stat::Mean => "mean",
        }
    }

    pub fn apply(self, samples: &[Breakdown]) -> Breakdown {
        match self {
            Stat::Median => median(samples),
            Stat::Mean => Breakdown::mean(samples),
        }
    }
}

impl FromStr for Stat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Stat::Median),
            "mean" => Ok(Stat::Mean),
            other => Err(BenchError::Usage(format!("unknown statistic {other:?}"))),
        }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct MttkrpBench {
    pub rank: usize,
    pub modes: Vec<usize>,
    pub algos: Vec<Algorithm>,
    pub order: TwoStepOrder,
    pub threads: Vec<usize>,
    pub trials: usize,
    pub stat: Stat,
    pub seed: u64,
    /// Compare every result against the loop oracle.
    pub check: bool,
    /// Corrupts each kernel result before the check; exists to prove the
    /// check fires.
    pub inject_fault: bool,
}

impl MttkrpBench {
    pub fn validate(&self, tensor: &DenseTensor) -> Result<()> {
        let shape = tensor.shape();
        if self.rank == 0 || self.trials == 0 || self.threads.contains(&0) {
            return Err(BenchError::Usage("rank, trials and threads must be at least 1".into()));
        }
        for &mode in &self.modes {
            shape.check_mode(mode).map_err(|e| BenchError::Usage(e.to_string()))?;
            for algo in &self.algos {
                if !algo.supports(shape, mode) {
                    return Err(BenchError::Usage(format!(
                        "--algo {algo} is undefined for external mode {mode} of a {}-way tensor \
                         (two-step degenerates to the one-step algorithm); use --algo onestep",
                        shape.ndims()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_against(m: &FactorMatrix, oracle: Option<&FactorMatrix>, what: impl FnOnce() -> String) -> Result<()> {
    if let Some(oracle) = oracle {
        let err = m.relative_error(oracle);
        if !(err <= CHECK_TOLERANCE) {
            return Err(BenchError::Check(format!(
                "{}: relative error {err:e} exceeds {CHECK_TOLERANCE:e}",
                what()
            )));
        }
    }
    Ok(())
}

/// Times every (mode, algorithm, thread count) combination: one untimed
/// warm-up, then `trials` timed runs summarized by `stat`.
pub fn bench_mttkrp(tensor: &DenseTensor, config: &MttkrpBench) -> Result<Vec<BenchRecord>> {
    config.validate(tensor)?;
    let shape = tensor.shape();
    let factors = gen_factors(shape.dims(), config.rank, config.seed);
    let checkable = config.check && shape.total() <= ORACLE_ENTRY_LIMIT;
    if config.check && !checkable {
        eprintln!(
            "warning: --check skipped, tensor has {} entries (oracle limit {ORACLE_ENTRY_LIMIT})",
            shape.total()
        );
    }
    let mut records = Vec::new();
    for &mode in &config.modes {
        let oracle = if checkable {
            Some(mttkrp_loops_oracle(tensor.view(), &factors, mode)?)
        } else {
            None
        };
        for &algo in &config.algos {
            for &threads in &config.threads {
                let req = MttkrpRequest::new(tensor.view(), &factors, mode)
                    .threads(threads)
                    .algorithm(algo)
                    .order(config.order);
                let label = || format!("{algo} mode {mode} threads {threads}");
                let mut samples = Vec::with_capacity(config.trials);
                for trial in 0..=config.trials {
                    let mut result = mttkrp(&req)?;
                    if config.inject_fault {
                        let v = result.m.get(0, 0);
                        result.m.set(0, 0, v + 1.0 + v.abs());
                    }
                    check_against(&result.m, oracle.as_ref(), label)?;
                    if trial > 0 {
                        samples.push(result.breakdown);
                    }
                }
                records.push(BenchRecord {
                    kind: "mttkrp",
                    dims: shape.dims().to_vec(),
                    rank: config.rank,
                    mode: mode.to_string(),
                    algo: algo.name().into(),
                    order: if algo == Algorithm::TwoStep {
                        config.order.to_string()
                    } else {
                        String::new()
                    },
                    threads,
                    trials: config.trials,
                    stat: config.stat.name().into(),
                    iteration: None,
                    fit: None,
                    times: config.stat.apply(&samples),
                });
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct CpBench {
    pub ranks: Vec<usize>,
    pub iters: usize,
    pub threads: usize,
    pub seed: u64,
    pub policy: MttkrpPolicy,
    pub order: TwoStepOrder,
}

pub fn policy_name(policy: MttkrpPolicy) -> &'static str {
    match policy {
        MttkrpPolicy::Auto => "auto",
        MttkrpPolicy::Fixed(a) => a.name(),
    }
}

/// Fixed-length CP-ALS runs (no convergence test). Each iteration yields one
/// row per mode and one `all` row covering the whole sweep, fit included.
pub fn bench_cp(tensor: &DenseTensor, config: &CpBench) -> Result<Vec<BenchRecord>> {
    if config.iters == 0 || config.threads == 0 || config.ranks.is_empty() || config.ranks.contains(&0) {
        return Err(BenchError::Usage("ranks, iterations and threads must be at least 1".into()));
    }
    let dims = tensor.shape().dims().to_vec();
    let mut records = Vec::new();
    for &rank in &config.ranks {
        let als = AlsConfig {
            max_iters: config.iters,
            tol: 0.0,
            seed: config.seed,
            threads: config.threads,
            policy: config.policy,
            order: config.order,
        };
        let model = KruskalModel::random(tensor.shape(), rank, config.seed);
        let (_, trace) = cp_als_from(tensor.view(), model, &als)?;
        let row = |mode: String, algo: String, iteration, fit, times| BenchRecord {
            kind: "cp",
            dims: dims.clone(),
            rank,
            mode,
            algo,
            order: config.order.to_string(),
            threads: config.threads,
            trials: 1,
            stat: String::new(),
            iteration: Some(iteration),
            fit,
            times,
        };
        for entry in &trace.entries {
            let mut sum = Breakdown::default();
            for step in &entry.modes {
                sum = sum.add(&step.breakdown);
                records.push(row(
                    step.mode.to_string(),
                    step.algorithm.name().into(),
                    entry.iteration,
                    None,
                    step.breakdown,
                ));
            }
            // fit evaluation and bookkeeping outside the mode updates
            sum.other += (entry.seconds - sum.total).max(0.0);
            sum.total = entry.seconds;
            records.push(row(
                "all".into(),
                policy_name(config.policy).into(),
                entry.iteration,
                entry.fit,
                sum,
            ));
        }
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct KrpBench {
    /// Row counts of the inputs, first input varying slowest.
    pub rows: Vec<usize>,
    pub rank: usize,
    pub threads: usize,
    pub trials: usize,
    pub stat: Stat,
    pub seed: u64,
}

/// Reuse versus naive row-wise KRP; the time lands in `krp_full`.
pub fn bench_krp(config: &KrpBench) -> Result<Vec<BenchRecord>> {
    if config.rows.is_empty() || config.rank == 0 || config.trials == 0 || config.threads == 0 {
        return Err(BenchError::Usage("need at least one input, and rank, trials, threads >= 1".into()));
    }
    let inputs = gen_factors(&config.rows, config.rank, config.seed);
    let refs: Vec<&FactorMatrix> = inputs.iter().collect();
    type KrpFn = fn(&[&FactorMatrix], usize) -> densekrp::Result<FactorMatrix>;
    let variants: [(&str, KrpFn); 2] = [("reuse", krp), ("naive", krp_naive)];
    let mut records = Vec::new();
    for (name, f) in variants {
        f(&refs, config.threads)?;
        let mut samples = Vec::with_capacity(config.trials);
        for _ in 0..config.trials {
            let start = Instant::now();
            let k = f(&refs, config.threads)?;
            let secs = start.elapsed().as_secs_f64();
            std::hint::black_box(k);
            samples.push(Breakdown {
                krp_full: secs,
                total: secs,
                ..Breakdown::default()
            });
        }
        records.push(BenchRecord {
            kind: "krp",
            dims: config.rows.clone(),
            rank: config.rank,
            mode: String::new(),
            algo: name.into(),
            order: String::new(),
            threads: config.threads,
            trials: config.trials,
            stat: config.stat.name().into(),
            iteration: None,
            fit: None,
            times: config.stat.apply(&samples),
        });
    }
    Ok(records)
}
