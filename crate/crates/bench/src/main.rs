use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densekrp::{available_threads, Algorithm, DenseTensor, MttkrpPolicy, TwoStepOrder};
use densekrp_bench::{
    bench_cp, bench_krp, bench_mttkrp, gen_tensor, tensor_io, BenchError, BenchRecord, CpBench, CsvSink,
    Distribution, KrpBench, MttkrpBench, Preset, Result, Stat,
};

#[derive(Parser)]
#[command(name = "densekrp", version, about = "Dense MTTKRP, Khatri-Rao and CP-ALS benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time MTTKRP per algorithm, mode and thread count.
    Mttkrp(MttkrpArgs),
    /// Time fixed-length CP-ALS runs, one row per iteration and mode.
    Cp(CpArgs),
    /// Compare the reuse and naive Khatri-Rao product kernels.
    Krp(KrpArgs),
    /// Write a synthetic tensor file.
    Gen(GenArgs),
}

#[derive(Args)]
struct TensorSource {
    /// Tensor extents, e.g. 200,200,200.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["preset", "input"])]
    dims: Option<Vec<usize>>,
    /// Named shape: fmri3d, fmri4d, cube3, cube4, cube5 or cube6.
    #[arg(long, conflicts_with = "input")]
    preset: Option<String>,
    /// Use the preset scaled down to about a million entries.
    #[arg(long, requires = "preset")]
    desk: bool,
    /// Read the tensor from a file written by `gen`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Entry distribution for generated tensors: uniform or ones.
    #[arg(long, default_value = "uniform")]
    dist: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TensorSource {
    fn dims(&self) -> Result<Vec<usize>> {
        match (&self.dims, &self.preset) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(p)) => {
                let p: Preset = p.parse()?;
                Ok(if self.desk { p.desk_dims() } else { p.dims() })
            }
            (None, None) => Err(BenchError::Usage("one of --dims, --preset or --input is required".into())),
        }
    }

    fn load(&self) -> Result<DenseTensor> {
        match &self.input {
            Some(path) => tensor_io::load(path),
            None => gen_tensor(&self.dims()?, self.seed, self.dist.parse()?),
        }
    }
}

#[derive(Args)]
struct Output {
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn write(&self, records: &[BenchRecord]) -> Result<()> {
        let w: Box<dyn Write> = match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        };
        let mut sink = CsvSink::new(w)?;
        sink.write_all(records)?;
        sink.finish()?.flush()?;
        Ok(())
    }
}

fn default_threads() -> Vec<usize> {
    vec![available_threads()]
}

#[derive(Args)]
struct MttkrpArgs {
    #[command(flatten)]
    source: TensorSource,
    #[arg(long, default_value_t = 25)]
    rank: usize,
    /// Modes to run, comma separated, or `all`.
    #[arg(long, default_value = "all")]
    mode: String,
    /// baseline, onestep, twostep (comma separated) or `all`.
    #[arg(long, default_value = "all")]
    algo: String,
    /// Two-step ordering: auto, left or right.
    #[arg(long, default_value = "auto")]
    order: String,
    /// Thread counts, comma separated.
    #[arg(long, env = "DENSEKRP_THREADS", value_delimiter = ',', default_values_t = default_threads())]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// median or mean.
    #[arg(long, default_value = "median")]
    stat: String,
    /// Verify every result against the loop oracle; exits nonzero on mismatch.
    #[arg(long)]
    check: bool,
    #[arg(long, hide = true)]
    inject_fault: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CpArgs {
    #[command(flatten)]
    source: TensorSource,
    #[arg(long, conflicts_with = "ranks")]
    rank: Option<usize>,
    /// Rank sweep, e.g. 10,15,20,25,30.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// MTTKRP choice: auto, baseline, onestep or twostep.
    #[arg(long, default_value = "auto")]
    algo: String,
    #[arg(long, default_value = "auto")]
    order: String,
    #[arg(long, env = "DENSEKRP_THREADS", default_value_t = available_threads())]
    threads: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct KrpArgs {
    /// Row counts of the inputs, first input varying slowest.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    rank: usize,
    #[arg(long, env = "DENSEKRP_THREADS", default_value_t = available_threads())]
    threads: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value = "mean")]
    stat: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    source: TensorSource,
    /// Destination tensor file.
    #[arg(long, required = true)]
    out: PathBuf,
}

fn parse_list<T, F>(text: &str, all: impl FnOnce() -> Vec<T>, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    if text == "all" {
        Ok(all())
    } else {
        text.split(',').map(|s| parse(s.trim())).collect()
    }
}

fn usage(e: densekrp::Error) -> BenchError {
    BenchError::Usage(e.to_string())
}

fn run_mttkrp(args: MttkrpArgs) -> Result<()> {
    let tensor = args.source.load()?;
    let shape = tensor.shape();
    let modes = parse_list(&args.mode, || (0..shape.ndims()).collect(), |s| {
        s.parse::<usize>()
            .map_err(|_| BenchError::Usage(format!("bad mode {s:?}")))
    })?;
    let algos = parse_list(&args.algo, || Algorithm::ALL.to_vec(), |s| s.parse().map_err(usage))?;
    let config = MttkrpBench {
        rank: args.rank,
        modes,
        algos,
        order: args.order.parse().map_err(usage)?,
        threads: args.threads,
        trials: args.trials,
        stat: args.stat.parse()?,
        seed: args.source.seed,
        check: args.check,
        inject_fault: args.inject_fault,
    };
    if args.algo != "all" && args.mode != "all" {
        // an explicitly requested undefined pair is an error
        config.validate(&tensor)?;
    }
    let mut records = Vec::new();
    for &mode in &config.modes {
        let algos: Vec<Algorithm> = config.algos.iter().copied().filter(|a| a.supports(shape, mode)).collect();
        if algos.is_empty() {
            continue;
        }
        let one = MttkrpBench {
            modes: vec![mode],
            algos,
            ..config.clone()
        };
        records.extend(bench_mttkrp(&tensor, &one)?);
    }
    args.output.write(&records)
}

fn run_cp(args: CpArgs) -> Result<()> {
    let tensor = args.source.load()?;
    let ranks = match (args.rank, args.ranks) {
        (Some(r), _) => vec![r],
        (None, Some(rs)) => rs,
        (None, None) => vec![25],
    };
    let policy = match args.algo.as_str() {
        "auto" => MttkrpPolicy::Auto,
        other => MttkrpPolicy::Fixed(other.parse().map_err(usage)?),
    };
    let order: TwoStepOrder = args.order.parse().map_err(usage)?;
    let config = CpBench {
        ranks,
        iters: args.iters,
        threads: args.threads,
        seed: args.source.seed,
        policy,
        order,
    };
    args.output.write(&bench_cp(&tensor, &config)?)
}

fn run_krp(args: KrpArgs) -> Result<()> {
    let stat: Stat = args.stat.parse()?;
    let config = KrpBench {
        rows: args.dims,
        rank: args.rank,
        threads: args.threads,
        trials: args.trials,
        stat,
        seed: args.seed,
    };
    args.output.write(&bench_krp(&config)?)
}

fn run_gen(args: GenArgs) -> Result<()> {
    let dist: Distribution = args.source.dist.parse()?;
    let tensor = match &args.source.input {
        Some(p) => tensor_io::load(p)?,
        None => gen_tensor(&args.source.dims()?, args.source.seed, dist)?,
    };
    tensor_io::save(&args.out, &tensor)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mttkrp(a) => run_mttkrp(a),
        Command::Cp(a) => run_cp(a),
        Command::Krp(a) => run_krp(a),
        Command::Gen(a) => run_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BenchError::Usage(_) => ExitCode::from(2),
                BenchError::Check(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
