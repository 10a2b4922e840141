//! The `OOCPCA01` matrix file format.
//!
//! ```text
//! offset  size  field
//!      0     8  magic    b"OOCPCA01"
//!      8     4  version  u32 LE, currently 1
//!     12     4  dtype    u32 LE, 0 = IEEE-754 binary32 little-endian
//!     16     8  m        u64 LE, rows
//!     24     8  n        u64 LE, columns
//!     32  4*m*n payload  row-major binary32 LE
//! ```
//!
//! Nothing follows the payload; files whose length differs from
//! `32 + 4 m n` are rejected.

use std::fs::File;
use std::io::{BufWriter, ErrorKind, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use super::{
    check_row_range, for_each_block, streamed_multiply, streamed_multiply_transpose, Backend,
    CounterSnapshot, LinearOperator, MatrixSource, PassCounters, RowBlocks, StreamConfig,
};
use crate::error::{Error, Result};
use crate::DenseMatrix;

pub const MAGIC: &[u8; 8] = b"OOCPCA01";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;
pub const HEADER_LEN: u64 = 32;

// bytes converted per read call when filling a block
const READ_CHUNK: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiskMatrixHeader {
    pub version: u32,
    pub dtype: u32,
    pub m: u64,
    pub n: u64,
}

impl DiskMatrixHeader {
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            version: VERSION,
            dtype: DTYPE_F32,
            m: m as u64,
            n: n as u64,
        }
    }

    pub fn payload_len(&self) -> u64 {
        self.m * self.n * 4
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..8].copy_from_slice(MAGIC);
        b[8..12].copy_from_slice(&self.version.to_le_bytes());
        b[12..16].copy_from_slice(&self.dtype.to_le_bytes());
        b[16..24].copy_from_slice(&self.m.to_le_bytes());
        b[24..32].copy_from_slice(&self.n.to_le_bytes());
        b
    }

    pub fn parse(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN as usize {
            return Err(Error::Format {
                offset: b.len() as u64,
                reason: format!("header truncated: {} of {HEADER_LEN} bytes", b.len()),
            });
        }
        if &b[0..8] != MAGIC {
            return Err(Error::Format {
                offset: 0,
                reason: format!("bad magic {:?}", String::from_utf8_lossy(&b[0..8])),
            });
        }
        let version = u32::from_le_bytes(b[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format {
                offset: 8,
                reason: format!("unsupported version {version}"),
            });
        }
        let dtype = u32::from_le_bytes(b[12..16].try_into().unwrap());
        if dtype != DTYPE_F32 {
            return Err(Error::Format {
                offset: 12,
                reason: format!("unsupported dtype code {dtype}"),
            });
        }
        let m = u64::from_le_bytes(b[16..24].try_into().unwrap());
        let n = u64::from_le_bytes(b[24..32].try_into().unwrap());
        if m == 0 || n == 0 {
            return Err(Error::Format {
                offset: if m == 0 { 16 } else { 24 },
                reason: format!("empty matrix {m}x{n}"),
            });
        }
        if m.checked_mul(n).and_then(|e| e.checked_mul(4)).is_none() {
            return Err(Error::Format {
                offset: 16,
                reason: format!("dimensions {m}x{n} overflow"),
            });
        }
        Ok(Self {
            version,
            dtype,
            m,
            n,
        })
    }
}

/// Reads and validates the header of `path`, including the payload length.
pub fn read_header(path: impl AsRef<Path>) -> Result<DiskMatrixHeader> {
    let mut f = File::open(path)?;
    header_of(&mut f)
}

fn header_of(f: &mut File) -> Result<DiskMatrixHeader> {
    let len = f.metadata()?.len();
    let mut buf = Vec::with_capacity(HEADER_LEN as usize);
    Read::by_ref(f).take(HEADER_LEN).read_to_end(&mut buf)?;
    let header = DiskMatrixHeader::parse(&buf)?;
    let expected = HEADER_LEN + header.payload_len();
    if len < expected {
        return Err(Error::Format {
            offset: len,
            reason: format!(
                "payload truncated: expected {} bytes for {}x{}, file ends after {} payload bytes",
                header.payload_len(),
                header.m,
                header.n,
                len - HEADER_LEN
            ),
        });
    }
    if len > expected {
        return Err(Error::Format {
            offset: expected,
            reason: format!("{} trailing bytes after payload", len - expected),
        });
    }
    Ok(header)
}

/// Source reading row blocks from an `OOCPCA01` file without loading it.
#[derive(Debug)]
pub struct OnDisk {
    path: PathBuf,
    file: File,
    m: usize,
    n: usize,
    counters: PassCounters,
}

pub fn open_disk_source(path: impl AsRef<Path>) -> Result<OnDisk> {
    let path = path.as_ref().to_path_buf();
    let mut file = File::open(&path)?;
    let h = header_of(&mut file)?;
    Ok(OnDisk {
        path,
        file,
        m: h.m as usize,
        n: h.n as usize,
        counters: PassCounters::default(),
    })
}

impl OnDisk {
    pub fn path(&self) -> &Path {
        &self.path
    }

    fn fill(&self, start: usize, out: &mut [f64]) -> Result<()> {
        let mut bytes = vec![0u8; READ_CHUNK.min(out.len() * 4)];
        let mut offset = HEADER_LEN + (start as u64) * (self.n as u64) * 4;
        for dst in out.chunks_mut(bytes.len() / 4) {
            let b = &mut bytes[..dst.len() * 4];
            self.file.read_exact_at(b, offset).map_err(|e| {
                if e.kind() == ErrorKind::UnexpectedEof {
                    Error::Format {
                        offset,
                        reason: "file ended inside a row block".into(),
                    }
                } else {
                    Error::BlockRead { offset, source: e }
                }
            })?;
            for (d, w) in dst.iter_mut().zip(b.chunks_exact(4)) {
                *d = f32::from_le_bytes([w[0], w[1], w[2], w[3]]) as f64;
            }
            offset += b.len() as u64;
        }
        Ok(())
    }
}

impl RowBlocks for OnDisk {
    fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn counters_ref(&self) -> &PassCounters {
        &self.counters
    }

    fn block<'a>(&'a self, start: usize, _rows: usize, buf: &'a mut [f64]) -> Result<&'a [f64]> {
        self.fill(start, buf)?;
        Ok(buf)
    }
}

impl LinearOperator for OnDisk {
    fn nrows(&self) -> usize {
        self.m
    }

    fn ncols(&self) -> usize {
        self.n
    }

    fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        streamed_multiply(self, g, cfg)
    }

    fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        streamed_multiply_transpose(self, q, cfg)
    }

    fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }
}

impl MatrixSource for OnDisk {
    fn backend(&self) -> Backend {
        Backend::OnDisk
    }

    fn read_rows(&self, start: usize, out: &mut [f64]) -> Result<()> {
        check_row_range(self.m, self.n, start, out.len())?;
        self.fill(start, out)
    }
}

/// Streams any source to `path` in `OOCPCA01` format, rounding each value
/// to the nearest binary32 (ties to even).
pub fn write_disk_source<S: MatrixSource + ?Sized>(
    source: &S,
    path: impl AsRef<Path>,
    cfg: &StreamConfig,
) -> Result<()> {
    let (m, n) = source.dims();
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    w.write_all(&DiskMatrixHeader::new(m, n).to_bytes())?;
    for_each_block(source, cfg, |_, _, block| {
        for &x in block {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    })?;
    w.flush()?;
    Ok(())
}

/// Writes a small in-RAM matrix in `OOCPCA01` format.
pub fn write_dense(path: impl AsRef<Path>, matrix: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&DiskMatrixHeader::new(matrix.rows(), matrix.cols()).to_bytes())?;
    for &x in matrix.as_slice() {
        w.write_all(&(x as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a whole `OOCPCA01` file into RAM.
pub fn read_dense(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let src = open_disk_source(path)?;
    let mut data = vec![0.0; src.m * src.n];
    src.fill(0, &mut data)?;
    DenseMatrix::from_vec(src.m, src.n, data)
}
