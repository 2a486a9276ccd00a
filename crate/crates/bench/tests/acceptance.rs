//! Acceptance suite. Runs without the libtest harness so that each criterion
//! prints exactly one status line; the process exits nonzero if any criterion
//! fails. WARN lines mark soft performance gates that could not be judged on
//! this machine.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use densekrp::khatri_rao::krp_naive_counted;
use densekrp::oracle::{fit_oracle, krp_kron_oracle, mttkrp_loops_oracle};
use densekrp::{
    available_threads, cp_als, fit, krp, krp_counted, krp_naive, mttkrp, Algorithm, AlsConfig, DenseTensor,
    FactorMatrix, KruskalModel, MttkrpRequest, Shape, TensorRef, TwoStepOrder,
};
use densekrp_bench::{gen_tensor, tensor_io, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Warn,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn judge(ok: bool, detail: String) -> Self {
        Outcome {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(Shape::new(dims).unwrap(), |_| rng.random_range(-1.0..1.0))
}

fn random_factors(dims: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> Vec<FactorMatrix> {
    dims.iter()
        .map(|&d| FactorMatrix::from_fn(d, rank, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Random extents for an `n`-way tensor with at most `max_total` entries.
fn random_dims(n: usize, max_total: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let cap = ((max_total as f64).powf(1.0 / n as f64) * 1.6) as usize;
    loop {
        let dims: Vec<usize> = (0..n).map(|_| rng.random_range(1..=cap.max(2))).collect();
        if dims.iter().product::<usize>() <= max_total {
            return dims;
        }
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut runs, mut worst, mut bad) = (0usize, 0.0f64, Vec::new());
    for n in 3..=6 {
        for rank in [1, 2, 5] {
            for _ in 0..4 {
                let dims = random_dims(n, 4096, &mut rng);
                let t = random_tensor(&dims, &mut rng);
                let f = random_factors(&dims, rank, &mut rng);
                let shape = t.shape();
                for mode in 0..n {
                    let oracle = mttkrp_loops_oracle(t.view(), &f, mode).unwrap();
                    let mut variants = vec![
                        (Algorithm::Baseline, 1, TwoStepOrder::Auto),
                        (Algorithm::OneStep, 1, TwoStepOrder::Auto),
                        (Algorithm::OneStep, 4, TwoStepOrder::Auto),
                    ];
                    if !shape.is_external(mode) {
                        variants.push((Algorithm::TwoStep, 1, TwoStepOrder::ForceLeft));
                        variants.push((Algorithm::TwoStep, 1, TwoStepOrder::ForceRight));
                    }
                    for (algo, threads, order) in variants {
                        let req = MttkrpRequest::new(t.view(), &f, mode)
                            .algorithm(algo)
                            .threads(threads)
                            .order(order);
                        let err = mttkrp(&req).unwrap().m.relative_error(&oracle);
                        runs += 1;
                        worst = worst.max(err);
                        if !(err <= 1e-12) {
                            bad.push(format!("{algo}/{order}/T{threads} {dims:?} mode {mode}: {err:e}"));
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::judge(
        bad.is_empty() && secs < 60.0,
        format!(
            "{runs} kernel runs, worst relative error {worst:.2e} (limit 1e-12), {secs:.2} s (limit 60 s){}",
            if bad.is_empty() { String::new() } else { format!("; mismatches: {}", bad.join("; ")) }
        ),
    )
}

/// All tuples of length `z` with entries in `1..=max` and product at most
/// `limit`, first entry varying fastest.
fn row_tuples(z: usize, max: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![1usize; z];
    loop {
        if cur.iter().product::<usize>() <= limit {
            out.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == z {
                return out;
            }
            cur[k] += 1;
            if cur[k] <= max {
                break;
            }
            cur[k] = 1;
            k += 1;
        }
    }
}

fn krp_shapes() -> Vec<Vec<usize>> {
    let mut shapes = Vec::new();
    for (z, max) in [(1, 64), (2, 24), (3, 12), (4, 8), (5, 6)] {
        let all = row_tuples(z, max, 4096);
        let step = (all.len() / 60).max(1);
        shapes.extend(all.into_iter().step_by(step));
    }
    shapes.push(vec![4096]);
    shapes.push(vec![16, 16, 16]);
    shapes.push(vec![8, 8, 8, 8]);
    shapes.push(vec![4, 4, 4, 8, 8]);
    shapes
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut cases, mut bad) = (0usize, Vec::new());
    for rows in krp_shapes() {
        for rank in [1, 25] {
            let inputs: Vec<FactorMatrix> = rows
                .iter()
                .map(|&r| FactorMatrix::from_fn(r, rank, |_, _| rng.random_range(-2.0..2.0)))
                .collect();
            let refs: Vec<&FactorMatrix> = inputs.iter().collect();
            let oracle = krp_kron_oracle(&refs).unwrap();
            let naive = krp_naive(&refs, 1).unwrap();
            let mut ok = bitwise_eq(naive.as_slice(), oracle.as_slice());
            for threads in [1, 2, 3, 7] {
                ok &= bitwise_eq(krp(&refs, threads).unwrap().as_slice(), oracle.as_slice());
            }
            cases += 1;
            if !ok {
                bad.push(format!("{rows:?} C={rank}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::judge(
        bad.is_empty() && secs < 10.0,
        format!(
            "{cases} input sets (Z = 1..5, C in {{1, 25}}, T in {{1, 2, 3, 7}}) bitwise identical to the Kronecker oracle, {secs:.2} s (limit 10 s){}",
            if bad.is_empty() { String::new() } else { format!("; mismatches: {}", bad.join("; ")) }
        ),
    )
}

fn criterion_3() -> Outcome {
    let (mut checked, mut bad, mut ratio_min, mut ratio_max) = (0usize, Vec::new(), f64::INFINITY, 0.0f64);
    for z in 2..=5 {
        for rows in row_tuples(z, 7, 4096) {
            let inputs: Vec<FactorMatrix> = rows.iter().map(|&r| FactorMatrix::filled(r, 3, 1.5)).collect();
            let refs: Vec<&FactorMatrix> = inputs.iter().collect();
            let (_, count) = krp_counted(&refs, 1).unwrap();
            let (_, naive) = krp_naive_counted(&refs, 1).unwrap();
            let total: usize = rows.iter().product();
            let last = rows[z - 1];
            let bound = total + total.div_ceil(last) * (z - 2) + (z - 2);
            let mut ok = count as usize <= bound;
            if z >= 3 && last >= 2 {
                ok &= count < naive;
                let r = naive as f64 / count as f64;
                ratio_min = ratio_min.min(r);
                ratio_max = ratio_max.max(r);
            }
            checked += 1;
            if !ok {
                bad.push(format!("{rows:?}: count {count}, bound {bound}, naive {naive}"));
            }
        }
    }
    Outcome::judge(
        bad.is_empty(),
        format!(
            "{checked} input shapes within the Hadamard bound; naive/reuse count ratio {ratio_min:.2}..{ratio_max:.2} for Z >= 3{}",
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.iter().take(5).cloned().collect::<Vec<_>>().join("; ")) }
        ),
    )
}

fn digits(mut flat: usize, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&d| {
            let v = flat % d;
            flat /= d;
            v
        })
        .collect()
}

/// Number of view entries whose buffer offset differs from the linearized
/// multi-index, over every mode and range view of `shape`.
fn view_mismatches(shape: &Shape) -> usize {
    let dims = shape.dims();
    let mut bad = 0;
    for n in 0..dims.len() {
        let view = shape.matricize_view(n).unwrap();
        for b in 0..view.block_count {
            for r in 0..view.block_rows {
                for c in 0..view.block_cols {
                    let (left, right) = if n == 0 { (0, c) } else { (c, b) };
                    let mut idx = digits(left, &dims[..n]);
                    idx.push(r);
                    idx.extend(digits(right, &dims[n + 1..]));
                    bad += usize::from(view.offset(b, r, c) != shape.linearize(&idx).unwrap());
                }
            }
        }
        let range = shape.matricize_range_view(n).unwrap();
        for r in 0..range.block_rows {
            for c in 0..range.block_cols {
                let mut idx = digits(r, &dims[..=n]);
                idx.extend(digits(c, &dims[n + 1..]));
                bad += usize::from(range.offset(0, r, c) != shape.linearize(&idx).unwrap());
            }
        }
    }
    bad
}

/// Copies `values` into an anonymous mapping and revokes write access.
struct ReadOnlyBuffer {
    ptr: *mut libc::c_void,
    len: usize,
    count: usize,
}

impl ReadOnlyBuffer {
    fn new(values: &[f64]) -> Self {
        let len = std::mem::size_of_val(values).max(1);
        // SAFETY: fresh private anonymous mapping, written once before the
        // protection change and only read afterwards.
        unsafe {
            let ptr = libc::mmap(
                std::ptr::null_mut(),
                len,
                libc::PROT_READ | libc::PROT_WRITE,
                libc::MAP_PRIVATE | libc::MAP_ANONYMOUS,
                -1,
                0,
            );
            assert_ne!(ptr, libc::MAP_FAILED, "mmap failed");
            std::ptr::copy_nonoverlapping(values.as_ptr(), ptr.cast::<f64>(), values.len());
            assert_eq!(libc::mprotect(ptr, len, libc::PROT_READ), 0, "mprotect failed");
            ReadOnlyBuffer {
                ptr,
                len,
                count: values.len(),
            }
        }
    }

    fn values(&self) -> &[f64] {
        // SAFETY: the mapping holds `count` initialized f64 values and lives
        // as long as `self`.
        unsafe { std::slice::from_raw_parts(self.ptr.cast::<f64>(), self.count) }
    }
}

impl Drop for ReadOnlyBuffer {
    fn drop(&mut self) {
        // SAFETY: unmapping the region created in `new`.
        unsafe {
            libc::munmap(self.ptr, self.len);
        }
    }
}

fn criterion_4() -> Outcome {
    // every shape with N <= 6 and extents 1..=4, plus random larger shapes
    // up to 10^4 entries
    let mut shapes = Vec::new();
    for n in 1..=6 {
        shapes.extend(row_tuples(n, 4, 10_000));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=6 {
        for _ in 0..40 {
            shapes.push(random_dims(n, 10_000, &mut rng));
        }
    }
    let (mut entries, mut mismatches) = (0usize, 0usize);
    for dims in &shapes {
        let shape = Shape::new(dims).unwrap();
        entries += shape.total() * 2 * dims.len();
        mismatches += view_mismatches(&shape);
    }

    let mut runs = 0;
    let mut worst = 0.0f64;
    for dims in [vec![6, 5, 4], vec![3, 4, 5, 6], vec![2, 3, 4, 3, 2], vec![7, 1, 5, 3]] {
        let t = random_tensor(&dims, &mut rng);
        let f = random_factors(&dims, 3, &mut rng);
        let guarded = ReadOnlyBuffer::new(t.values());
        let view = TensorRef::new(t.shape(), guarded.values()).unwrap();
        for mode in 0..dims.len() {
            let oracle = mttkrp_loops_oracle(t.view(), &f, mode).unwrap();
            for threads in [1, 3] {
                let mut algos = vec![(Algorithm::OneStep, TwoStepOrder::Auto)];
                if !t.shape().is_external(mode) {
                    algos.push((Algorithm::TwoStep, TwoStepOrder::ForceLeft));
                    algos.push((Algorithm::TwoStep, TwoStepOrder::ForceRight));
                }
                for (algo, order) in algos {
                    let req = MttkrpRequest::new(view, &f, mode).algorithm(algo).order(order).threads(threads);
                    worst = worst.max(mttkrp(&req).unwrap().m.relative_error(&oracle));
                    runs += 1;
                }
            }
        }
    }
    Outcome::judge(
        mismatches == 0 && worst <= 1e-12,
        format!(
            "{} shapes, {entries} view entries checked, {mismatches} mismatches; {runs} one/two-step runs on write-protected buffers completed (worst error {worst:.1e})",
            shapes.len()
        ),
    )
}

// Signed entries: all-positive factors give nearly collinear components, on
// which ALS stalls far longer than 50 iterations.
fn kruskal_tensor(dims: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> DenseTensor {
    let factors: Vec<FactorMatrix> = dims
        .iter()
        .map(|&d| FactorMatrix::from_fn(d, rank, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let model = KruskalModel::new(factors, vec![1.0; rank]).unwrap();
    densekrp::oracle::reconstruct_oracle(&model).unwrap()
}

fn criterion_5() -> Outcome {
    let threads = available_threads();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // (a) monotone residual
    let t = gen_tensor(&[20, 20, 20], 5, Distribution::Uniform).unwrap();
    let config = AlsConfig {
        max_iters: 50,
        tol: 0.0,
        seed: 5,
        threads,
        ..AlsConfig::default()
    };
    let (_, trace) = cp_als(t.view(), 5, &config).unwrap();
    let residuals: Vec<f64> = trace.entries.iter().map(|e| e.residual).collect();
    let worst_rise = residuals.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let a_ok = residuals.len() == 50 && worst_rise <= 1e-10;

    // (b) exact low-rank recovery from three seeded restarts
    let best_of_three = |t: &DenseTensor, rank: usize| -> f64 {
        (0..3)
            .map(|seed| {
                let config = AlsConfig {
                    max_iters: 50,
                    tol: 1e-12,
                    seed,
                    threads,
                    ..AlsConfig::default()
                };
                cp_als(t.view(), rank, &config).unwrap().1.final_fit().unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut b_ok = true;
    let mut b_detail = Vec::new();
    for rank in [1, 2] {
        let best = best_of_three(&kruskal_tensor(&[6, 7, 8], rank, &mut rng), rank);
        b_ok &= best >= 1.0 - 1e-6;
        // informational: how often recovery succeeds on further draws
        let mut survey_rng = ChaCha8Rng::seed_from_u64(50 + rank as u64);
        let recovered = (0..10)
            .filter(|_| best_of_three(&kruskal_tensor(&[6, 7, 8], rank, &mut survey_rng), rank) >= 1.0 - 1e-6)
            .count();
        b_detail.push(format!("rank {rank} best fit {best:.12} (further draws recovered: {recovered}/10)"));
    }

    // (c) fast fit versus materialized reconstruction
    let mut c_worst = 0.0f64;
    for seed in 0..5 {
        let dims = random_dims(3 + (seed as usize % 2), 3000, &mut rng);
        let t = random_tensor(&dims, &mut rng);
        let model = KruskalModel::random(t.shape(), 2, seed);
        let fast = fit(t.view(), &model, threads).unwrap().fit.unwrap();
        let slow = fit_oracle(t.view(), &model).unwrap();
        c_worst = c_worst.max((fast - slow).abs());
    }
    let (model, _) = cp_als(t.view(), 5, &AlsConfig { max_iters: 5, ..config }).unwrap();
    let fast = fit(t.view(), &model, threads).unwrap().fit.unwrap();
    c_worst = c_worst.max((fast - fit_oracle(t.view(), &model).unwrap()).abs());
    let c_ok = c_worst <= 1e-10;

    Outcome::judge(
        a_ok && b_ok && c_ok,
        format!(
            "(a) {} iterations, largest residual increase {worst_rise:.1e} (slack 1e-10) {}; (b) {} {}; (c) fast vs materialized fit differ by at most {c_worst:.1e} (limit 1e-10) {}",
            residuals.len(),
            if a_ok { "ok" } else { "FAILED" },
            b_detail.join(", "),
            if b_ok { "ok" } else { "FAILED" },
            if c_ok { "ok" } else { "FAILED" },
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dims = [9, 8, 7, 6];
    let t = random_tensor(&dims, &mut rng);
    let f = random_factors(&dims, 5, &mut rng);

    let mut repeat_ok = true;
    let mut worst = 0.0f64;
    for mode in 0..dims.len() {
        for algo in Algorithm::ALL {
            if !algo.supports(t.shape(), mode) {
                continue;
            }
            let run = |threads| {
                mttkrp(&MttkrpRequest::new(t.view(), &f, mode).algorithm(algo).threads(threads))
                    .unwrap()
                    .m
            };
            let reference = run(1);
            for threads in [1, 2, 4, 8] {
                let a = run(threads);
                repeat_ok &= bitwise_eq(a.as_slice(), run(threads).as_slice());
                worst = worst.max(a.relative_error(&reference));
            }
        }
    }

    let cp = |threads| {
        let config = AlsConfig {
            max_iters: 10,
            tol: 0.0,
            seed: 6,
            threads,
            ..AlsConfig::default()
        };
        cp_als(t.view(), 4, &config).unwrap()
    };
    let trace_key = |trace: &densekrp::AlsTrace| -> Vec<f64> {
        trace.entries.iter().flat_map(|e| [e.fit.unwrap(), e.residual]).collect()
    };
    let (ref_model, ref_trace) = cp(1);
    for threads in [1, 2, 4, 8] {
        let (m1, t1) = cp(threads);
        let (m2, t2) = cp(threads);
        repeat_ok &= bitwise_eq(&trace_key(&t1), &trace_key(&t2)) && m1 == m2;
        for (a, b) in trace_key(&t1).iter().zip(trace_key(&ref_trace)) {
            worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
        }
        for (a, b) in m1.factors().iter().zip(ref_model.factors()) {
            worst = worst.max(a.relative_error(b));
        }
    }
    Outcome::judge(
        repeat_ok && worst <= 1e-12,
        format!(
            "repeated runs bitwise identical: {repeat_ok}; largest relative difference across T in {{1, 2, 4, 8}}: {worst:.1e} (limit 1e-12)"
        ),
    )
}

fn timed_total(t: &DenseTensor, f: &[FactorMatrix], mode: usize, algo: Algorithm, threads: usize) -> f64 {
    let req = MttkrpRequest::new(t.view(), f, mode).algorithm(algo).threads(threads);
    mttkrp(&req).unwrap();
    let mut samples: Vec<f64> = (0..3).map(|_| mttkrp(&req).unwrap().breakdown.total).collect();
    samples.sort_by(f64::total_cmp);
    samples[1]
}

fn criterion_7() -> Outcome {
    let hw = available_threads();
    let t = gen_tensor(&[200, 200, 200], 7, Distribution::Uniform).unwrap();
    let f = densekrp_bench::gen_factors(&[200, 200, 200], 25, 7);
    let two = timed_total(&t, &f, 1, Algorithm::TwoStep, hw);
    let base = timed_total(&t, &f, 1, Algorithm::Baseline, hw);
    let a_ok = two <= base;
    let mut detail = format!(
        "(a) T={hw}: two-step mode 1 {two:.4} s vs baseline incl. reorder {base:.4} s {}",
        if a_ok { "ok" } else { "not met" }
    );
    if hw < 4 {
        detail.push_str(&format!(
            "; (b) not measurable: {hw} hardware thread(s), the criterion needs at least 4"
        ));
        return Outcome {
            status: Status::Warn,
            detail,
        };
    }
    let mut b_ok = true;
    for (algo, mode) in [(Algorithm::OneStep, 0), (Algorithm::OneStep, 1), (Algorithm::TwoStep, 1)] {
        let one = timed_total(&t, &f, mode, algo, 1);
        let many = timed_total(&t, &f, mode, algo, hw);
        let speedup = one / many;
        b_ok &= speedup >= 2.0;
        detail.push_str(&format!("; (b) {algo} mode {mode} speedup {speedup:.2}x"));
    }
    Outcome {
        status: if a_ok && b_ok { Status::Pass } else { Status::Warn },
        detail,
    }
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densekrp"))
        .args(args)
        .env_remove("DENSEKRP_THREADS")
        .output()
        .expect("run densekrp binary")
}

/// Compares CSV text against a golden file in which `<t>` stands for a
/// nonnegative timing and `<f>` for any finite number.
fn matches_golden(actual: &str, golden: &str) -> std::result::Result<(), String> {
    let (a, g): (Vec<&str>, Vec<&str>) = (actual.lines().collect(), golden.lines().collect());
    if a.len() != g.len() {
        return Err(format!("{} lines, golden has {}", a.len(), g.len()));
    }
    for (i, (la, lg)) in a.iter().zip(&g).enumerate() {
        let (fa, fg): (Vec<&str>, Vec<&str>) = (la.split(',').collect(), lg.split(',').collect());
        if fa.len() != fg.len() {
            return Err(format!("line {}: {} fields, golden has {}", i + 1, fa.len(), fg.len()));
        }
        for (x, y) in fa.iter().zip(&fg) {
            let ok = match *y {
                "<t>" => x.parse::<f64>().is_ok_and(|v| v >= 0.0 && v.is_finite()),
                "<f>" => x.parse::<f64>().is_ok_and(f64::is_finite),
                _ => x == y,
            };
            if !ok {
                return Err(format!("line {}: {x:?} does not match {y:?}", i + 1));
            }
        }
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut problems = Vec::new();

    // tensor file round trip through the CLI
    let path = dir.path().join("t.dnt");
    let out = cli(&["gen", "--dims", "3,4,5", "--seed", "11", "--out", path.to_str().unwrap()]);
    let expected = gen_tensor(&[3, 4, 5], 11, Distribution::Uniform).unwrap();
    if !out.status.success() {
        problems.push(format!("gen failed: {}", String::from_utf8_lossy(&out.stderr)));
    } else {
        let back = tensor_io::load(&path).unwrap();
        let mut bytes = Vec::new();
        tensor_io::write_tensor(&mut bytes, &back).unwrap();
        if back.shape() != expected.shape()
            || !bitwise_eq(back.values(), expected.values())
            || bytes != std::fs::read(&path).unwrap()
        {
            problems.push("tensor file round trip not bit-exact".into());
        }
    }

    // CSV schema
    let goldens: [(&str, Vec<&str>); 2] = [
        (
            "mttkrp_2x2x2.csv",
            vec![
                "mttkrp", "--dims", "2,2,2", "--dist", "ones", "--rank", "1", "--mode", "1", "--algo",
                "baseline,onestep,twostep", "--threads", "1", "--trials", "1",
            ],
        ),
        (
            "cp_2x2x2.csv",
            vec!["cp", "--dims", "2,2,2", "--rank", "2", "--iters", "1", "--threads", "1"],
        ),
    ];
    for (name, args) in goldens {
        let out = cli(&args);
        let golden = std::fs::read_to_string(golden_dir.join(name)).unwrap();
        if let Err(e) = matches_golden(&String::from_utf8_lossy(&out.stdout), &golden) {
            problems.push(format!("{name}: {e}"));
        }
    }

    // undefined two-step request
    let out = cli(&["mttkrp", "--dims", "2,2,2", "--algo", "twostep", "--mode", "0"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    if out.status.success() || !stderr.contains("degenerates to the one-step algorithm") {
        problems.push(format!("twostep on mode 0: status {}, stderr {stderr:?}", out.status));
    }

    // --check against an injected fault
    let base = ["mttkrp", "--dims", "4,3,5", "--rank", "3", "--threads", "1", "--trials", "1", "--check"];
    let clean = cli(&base);
    let mut faulty_args = base.to_vec();
    faulty_args.push("--inject-fault");
    let faulty = cli(&faulty_args);
    if !clean.status.success() {
        problems.push("--check failed on a correct kernel".into());
    }
    if faulty.status.success() || !String::from_utf8_lossy(&faulty.stderr).contains("check failed") {
        problems.push("--check missed an injected fault".into());
    }

    Outcome::judge(
        problems.is_empty(),
        if problems.is_empty() {
            "tensor file round trip bit-exact; CSV matches golden files; twostep --mode 0 rejected; --check caught the injected fault".into()
        } else {
            problems.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", criterion_1),
        ("KRP correctness", criterion_2),
        ("KRP work bound", criterion_3),
        ("layout soundness", criterion_4),
        ("CP-ALS behavior", criterion_5),
        ("determinism", criterion_6),
        ("qualitative performance", criterion_7),
        ("CLI contract", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| Outcome {
            status: Status::Fail,
            detail: format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            ),
        });
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warn => "WARN",
        };
        failed += usize::from(outcome.status == Status::Fail);
        println!("criterion {} [{tag}] {name}: {}", i + 1, outcome.detail);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
