//! `oocpca`: generate test matrices, run randomized PCA on files or builtin
//! generators, check the error of saved factors, and rerun the benchmarks.
//!
//! Exit codes: 0 success, 2 bad flags or parameters, 3 I/O failure,
//! 4 non-finite values (rerun with `--prescale`), 5 malformed file or
//! dimension mismatch.

mod bench;
mod input;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use oocpca::source::{read_dense, read_header, write_disk_source, DTYPE_F32};
use oocpca::specnorm::ResidualOperator;
use oocpca::{estimate_norm, randomized_pca, Error, NormEstParams, PcaParams, StreamConfig};

use bench::BenchArgs;
use input::{builtin_source, Builtin, Input, InputArgs};
use report::{EpsilonReport, PcaReport};

#[derive(Parser, Debug)]
#[command(
    name = "oocpca",
    version,
    about = "Randomized PCA of matrices larger than RAM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a builtin test matrix to an OOCPCA01 file.
    Gen(GenArgs),
    /// Rank-k PCA of a file or builtin matrix.
    Pca(PcaArgs),
    /// Estimate the spectral error of saved factors.
    EstimateError(EstimateArgs),
    /// Rerun a benchmark scenario and write CSV.
    Bench(BenchArgs),
    /// Print the header of an OOCPCA01 file.
    Info { path: PathBuf },
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(value_enum)]
    source: Builtin,
    #[arg(long)]
    m: usize,
    /// Columns (default: m, or 1000 for sim).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PcaArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Target rank.
    #[arg(long)]
    k: usize,
    /// Sample block width (default k + 2).
    #[arg(long)]
    l: Option<usize>,
    /// Power steps.
    #[arg(long, default_value_t = 1)]
    i: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Failure constant of the error bound.
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    /// RAM budget for blocks and workspace, in MiB.
    #[arg(long, default_value_t = 1024)]
    ram_budget_mb: u64,
    /// Divide by an estimate of ‖A‖₂ first (12 extra passes).
    #[arg(long)]
    prescale: bool,
    /// Also estimate ‖A - U Σ Vᵀ‖₂ (2 j extra passes).
    #[arg(long)]
    estimate_error: bool,
    /// Power steps of the error estimate.
    #[arg(long, default_value_t = 6)]
    j_iters: usize,
    /// Directory for U.bin, sigma.bin, V.bin and diagnostics.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    u: PathBuf,
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    v: PathBuf,
    #[arg(long, default_value_t = 6)]
    j_iters: usize,
    /// Independent probes (default: number of singular values).
    #[arg(long)]
    k_probes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1024)]
    ram_budget_mb: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::BudgetTooSmall { .. } => 2,
        Error::Io(_) | Error::BlockRead { .. } => 3,
        Error::NonFinite { .. } => 4,
        Error::DimensionMismatch(_) | Error::Format { .. } => 5,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Pca(a) => cmd_pca(a),
        Command::EstimateError(a) => cmd_estimate_error(a),
        Command::Bench(a) => bench::run(a),
        Command::Info { path } => cmd_info(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// `OOCPCA_THREADS` caps the worker pool.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("OOCPCA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("OOCPCA_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn budget(mb: u64) -> oocpca::Result<StreamConfig> {
    StreamConfig::from_megabytes(mb)
}

fn cmd_gen(a: &GenArgs) -> oocpca::Result<()> {
    let (src, swapped) = builtin_source(a.source, a.m, a.n, a.seed)?;
    if swapped {
        return Err(Error::InvalidParameter(format!(
            "{} is generated with m >= n; write the {}x{} matrix and read it with --transpose",
            a.source.name(),
            a.n.unwrap_or(a.m),
            a.m
        )));
    }
    let t = Instant::now();
    write_disk_source(&*src, &a.out, &StreamConfig::default())?;
    let (m, n) = src.dims();
    println!("wrote {m}x{n} {} to {}", a.source.name(), a.out.display());
    println!("t_gen {:.3}", t.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_pca(a: &PcaArgs) -> oocpca::Result<()> {
    let mut params = PcaParams::new(a.k)
        .power_steps(a.i)
        .seed(a.seed)
        .failure_constant(a.c)
        .prescale(a.prescale)
        .ram_budget_words(budget(a.ram_budget_mb)?.ram_budget_words);
    if let Some(l) = a.l {
        params = params.oversample(l);
    }
    if a.estimate_error && a.j_iters == 0 {
        return Err(Error::InvalidParameter(
            "--j-iters must be at least 1".into(),
        ));
    }
    let input = Input::open(&a.input)?;
    let dims = input.dims();
    params.validate(dims.0, dims.1)?;

    input.with_operator(|op| {
        let t = Instant::now();
        let res = randomized_pca(op, &params)?;
        let t_pca = t.elapsed().as_secs_f64();
        println!("t_PCA {t_pca:.3}");
        let mut report = PcaReport::new(input.label.clone(), dims, &res, t_pca);
        if a.estimate_error {
            let cfg = budget(a.ram_budget_mb)?;
            let est_params = NormEstParams {
                j_iters: a.j_iters,
                k_probes: res.rank(),
                seed: a.seed ^ 0xe57,
            };
            let before = op.counters();
            let t = Instant::now();
            let est = estimate_norm(&ResidualOperator::new(op, &res)?, &est_params, &cfg)?;
            let passes = op.counters().since(&before).passes_over_a;
            println!(
                "epsilon {:.6e} (failure bound {:.3e})",
                est.value, est.failure_bound
            );
            report.epsilon = Some(EpsilonReport::new(&est, passes, t.elapsed().as_secs_f64()));
        }
        res.write_factors(&a.out_dir)?;
        let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
        std::fs::write(a.out_dir.join("diagnostics.json"), json + "\n")?;
        Ok(())
    })
}

fn cmd_estimate_error(a: &EstimateArgs) -> oocpca::Result<()> {
    let input = Input::open(&a.input)?;
    let u = read_dense(&a.u)?;
    let v = read_dense(&a.v)?;
    let s = read_dense(&a.sigma)?;
    if s.rows() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "sigma file must be 1 x k, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let sigma = s.into_vec();
    let params = NormEstParams {
        j_iters: a.j_iters,
        k_probes: a.k_probes.unwrap_or(sigma.len().max(1)),
        seed: a.seed,
    };
    let cfg = budget(a.ram_budget_mb)?;
    let est = input.with_operator(|op| {
        let d = ResidualOperator::from_factors(op, &u, &sigma, &v)?;
        estimate_norm(&d, &params, &cfg)
    })?;
    println!("epsilon {:.6e}", est.value);
    println!("failure_bound {:.3e}", est.failure_bound);
    Ok(())
}

fn cmd_info(path: &Path) -> oocpca::Result<()> {
    let h = read_header(path)?;
    let dtype = if h.dtype == DTYPE_F32 {
        "f32"
    } else {
        "unknown"
    };
    println!(
        "m={} n={} dtype={dtype} version={} payload_bytes={}",
        h.m,
        h.n,
        h.version,
        h.payload_len()
    );
    Ok(())
}
