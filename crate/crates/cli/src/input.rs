//! Where the matrix comes from: an `OOCPCA01` file or a builtin generator.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use oocpca::source::{open_disk_source, Transposed};
use oocpca::testgen::{
    make_simulation_source, make_spectrum_source, SimulationSpec, SpectrumKind, SpectrumSpec,
};
use oocpca::{Error, LinearOperator, MatrixSource, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Example1,
    Example2,
    Sim,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Example1 => "example1",
            Builtin::Example2 => "example2",
            Builtin::Sim => "sim",
        }
    }
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Matrix file in OOCPCA01 format.
    #[arg(conflicts_with = "builtin", required_unless_present = "builtin")]
    pub input: Option<PathBuf>,

    /// Generate the matrix on the fly instead of reading a file.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,

    /// Rows of the builtin matrix.
    #[arg(long, requires = "builtin")]
    pub m: Option<usize>,

    /// Columns of the builtin matrix (default: m, or 1000 for sim).
    #[arg(long, requires = "builtin")]
    pub n: Option<usize>,

    /// Seed of the builtin simulation.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,

    /// Treat the stored matrix as Aᵀ (column-major A); U and V trade places.
    #[arg(long)]
    pub transpose: bool,
}

/// An opened input. `transposed` means the operator is the transpose of
/// `source`.
pub struct Input {
    pub label: String,
    source: Box<dyn MatrixSource>,
    transposed: bool,
}

impl Input {
    pub fn open(args: &InputArgs) -> Result<Self> {
        let (label, source, swapped) = match (&args.input, args.builtin) {
            (Some(path), _) => (
                path.display().to_string(),
                Box::new(open_disk_source(path)?) as Box<dyn MatrixSource>,
                false,
            ),
            (None, Some(b)) => {
                let m = args
                    .m
                    .ok_or_else(|| Error::InvalidParameter("--builtin needs --m".into()))?;
                let (src, swapped) = builtin_source(b, m, args.n, args.data_seed)?;
                (b.name().to_string(), src, swapped)
            }
            (None, None) => return Err(Error::InvalidParameter("no input given".into())),
        };
        Ok(Self {
            label,
            source,
            transposed: swapped ^ args.transpose,
        })
    }

    pub fn with_operator<R>(&self, f: impl FnOnce(&dyn LinearOperator) -> R) -> R {
        if self.transposed {
            f(&Transposed(&*self.source))
        } else {
            f(&*self.source)
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.with_operator(|op| op.dims())
    }
}

/// Builds a builtin source. Spectrum examples are generated with at least as
/// many rows as columns; a wide request is served by the transpose, flagged
/// by the returned `bool`.
pub fn builtin_source(
    b: Builtin,
    m: usize,
    n: Option<usize>,
    seed: u64,
) -> Result<(Box<dyn MatrixSource>, bool)> {
    Ok(match b {
        Builtin::Sim => {
            let mut spec = SimulationSpec::standard(m, seed);
            if let Some(n) = n {
                spec.n = n;
            }
            (Box::new(make_simulation_source(spec)?), false)
        }
        Builtin::Example1 | Builtin::Example2 => {
            let kind = if b == Builtin::Example1 {
                SpectrumKind::Example1
            } else {
                SpectrumKind::Example2
            };
            let n = n.unwrap_or(m);
            if m == 0 || n == 0 {
                return Err(Error::InvalidParameter(
                    "matrix dimensions must be positive".into(),
                ));
            }
            let (rows, cols) = (m.max(n), m.min(n));
            (
                Box::new(make_spectrum_source(SpectrumSpec::new(kind, rows, cols))?),
                n > m,
            )
        }
    })
}
