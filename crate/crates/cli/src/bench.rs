//! Scaled reruns of the synthetic-data tables and the simulation sweep.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use oocpca::source::{open_disk_source, write_disk_source};
use oocpca::testgen::{
    known_sigma, make_simulation_source, make_spectrum_source, SimulationSpec, SpectrumKind,
    SpectrumSpec,
};
use oocpca::{
    estimate_pca_error, randomized_pca, LinearOperator, MatrixSource, NormEstParams, PcaParams,
    Result, StreamConfig,
};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Table1,
    Table2,
    Fig1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Storage {
    Disk,
    Fly,
    Both,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub scenario: Scenario,

    /// Fraction of the full scenario sizes (tables, default 0.01) or of the
    /// largest m = 65536 (fig1, default 1).
    #[arg(long)]
    pub scale: Option<f64>,

    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Where table rows read their matrix from.
    #[arg(long, value_enum, default_value_t = Storage::Both)]
    pub storage: Storage,

    /// Runs per fig1 point; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    /// Directory for the temporary on-disk matrices.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TableRow {
    table: String,
    storage: &'static str,
    m: usize,
    n: usize,
    k: usize,
    t_gen: Option<f64>,
    #[serde(rename = "t_PCA")]
    t_pca: f64,
    eps0: f64,
    eps: f64,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    m: usize,
    n: usize,
    k: usize,
    #[serde(rename = "t_PCA")]
    t_pca: f64,
    corr1: f64,
    corr2: f64,
    corr3: f64,
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let out: Box<dyn std::io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut csv = csv::Writer::from_writer(out);
    match args.scenario {
        Scenario::Table1 | Scenario::Table2 => {
            let scale = args.scale.unwrap_or(0.01);
            let work = WorkDir::new(args.work_dir.as_deref())?;
            for row in tables(args, scale, &work)? {
                csv.serialize(row).map_err(csv_err)?;
            }
        }
        Scenario::Fig1 => {
            for row in sweep(args, args.scale.unwrap_or(1.0))? {
                csv.serialize(row).map_err(csv_err)?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> oocpca::Error {
    oocpca::Error::Io(std::io::Error::other(e))
}

fn scaled(x: f64, scale: f64) -> usize {
    ((x * scale).round() as usize).max(1)
}

fn tables(args: &BenchArgs, scale: f64, work: &WorkDir) -> Result<Vec<TableRow>> {
    let (table, kind, cases): (&str, SpectrumKind, Vec<(f64, f64, usize)>) = match args.scenario {
        Scenario::Table1 => (
            "1",
            SpectrumKind::Example1,
            vec![(2e5, 2e5, 16), (2e5, 2e5, 20), (2e5, 2e5, 24)],
        ),
        _ => (
            "2",
            SpectrumKind::Example2,
            vec![(2e5, 2e5, 12), (2e5, 2e4, 12), (5e5, 8e4, 12)],
        ),
    };
    let mut rows = Vec::new();
    for (m, n, k) in cases {
        let (m, n) = (scaled(m, scale), scaled(n, scale));
        let spec = SpectrumSpec::new(kind, m, n);
        let eps0 = known_sigma(&spec, k + 1)?;
        let fly = make_spectrum_source(spec)?;
        let params = PcaParams::new(k).power_steps(3).seed(args.seed);
        params.validate(m, n)?;
        if args.storage != Storage::Fly {
            let path = work.path().join(format!("table{table}_{m}x{n}.bin"));
            let t = Instant::now();
            write_disk_source(&fly, &path, &StreamConfig::default())?;
            let t_gen = t.elapsed().as_secs_f64();
            let disk = open_disk_source(&path)?;
            let (t_pca, eps) = timed_run(&disk, &params)?;
            rows.push(TableRow {
                table: format!("{table}a"),
                storage: "disk",
                m,
                n,
                k,
                t_gen: Some(t_gen),
                t_pca,
                eps0,
                eps,
            });
            drop(disk);
            std::fs::remove_file(&path)?;
        }
        if args.storage != Storage::Disk {
            let (t_pca, eps) = timed_run(&fly, &params)?;
            rows.push(TableRow {
                table: format!("{table}b"),
                storage: "fly",
                m,
                n,
                k,
                t_gen: None,
                t_pca,
                eps0,
                eps,
            });
        }
        let last = rows.last().unwrap();
        eprintln!(
            "m={m} n={n} k={k} t_gen={:?} t_PCA={:.3} eps0={eps0:.3e} eps={:.3e}",
            last.t_gen, last.t_pca, last.eps
        );
    }
    Ok(rows)
}

fn timed_run<S: MatrixSource + ?Sized>(src: &S, params: &PcaParams) -> Result<(f64, f64)> {
    let t = Instant::now();
    let res = randomized_pca(src, params)?;
    let t_pca = t.elapsed().as_secs_f64();
    let est = estimate_pca_error(
        src,
        &res,
        &NormEstParams::for_result(&res, params.seed ^ 0xe57),
        &StreamConfig::default(),
    )?;
    Ok((t_pca, est.value))
}

fn sweep(args: &BenchArgs, scale: f64) -> Result<Vec<SweepRow>> {
    let top = scaled(65536.0, scale).max(1024);
    let mut rows = Vec::new();
    let mut m = 1024;
    while m <= top {
        let src = make_simulation_source(SimulationSpec::standard(m, args.seed))?;
        let w = src.generator().directions().clone();
        let params = PcaParams::new(3).power_steps(1).seed(args.seed);
        let mut best = f64::INFINITY;
        let mut corr = [0.0; 3];
        for rep in 0..args.repeats.max(1) {
            let t = Instant::now();
            let res = randomized_pca(&src, &params)?;
            best = best.min(t.elapsed().as_secs_f64());
            if rep == 0 {
                for (j, c) in corr.iter_mut().enumerate() {
                    *c = res
                        .v
                        .column(j)
                        .iter()
                        .zip(&w[j])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        .abs();
                }
            }
        }
        eprintln!(
            "m={m} t_PCA={best:.3} corr=[{:.4} {:.4} {:.4}]",
            corr[0], corr[1], corr[2]
        );
        rows.push(SweepRow {
            m,
            n: src.ncols(),
            k: 3,
            t_pca: best,
            corr1: corr[0],
            corr2: corr[1],
            corr3: corr[2],
        });
        m *= 2;
    }
    Ok(rows)
}

/// Scratch directory removed on drop.
struct WorkDir(PathBuf);

impl WorkDir {
    fn new(base: Option<&Path>) -> Result<Self> {
        let base = base
            .map(Path::to_path_buf)
            .unwrap_or_else(std::env::temp_dir);
        let dir = base.join(format!("oocpca-bench-{}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        Ok(Self(dir))
    }

    fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for WorkDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}
