//! Binary cache of a decomposition, keyed by input digest, k and seed.
//!
//! Little-endian layout:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `FBDSVD\0\x01` |
//! | 8 | 4 | version (u32) |
//! | 12 | 4 | reserved, zero |
//! | 16 | 8 | rows (u64) |
//! | 24 | 8 | columns (u64) |
//! | 32 | 8 | k actually stored (u64) |
//! | 40 | 8 | requested k (u64) |
//! | 48 | 8 | seed (u64) |
//! | 56 | 8 | alpha of the run that wrote it (f64, informational) |
//! | 64 | 32 | digest of the input |
//! | 96 | 8 | residual (f64) |
//! | 104 | 8·k | singular values (f64) |
//! | | 8·rows·k | U, column-major (f64) |
//! | | 8·columns·k | V, column-major (f64) |

use std::io::{Read, Write};

use super::SpectralDecomposition;
use crate::linalg::DenseMatrix;
use crate::{Error, Result, Scalar};

pub const CACHE_MAGIC: [u8; 8] = *b"FBDSVD\0\x01";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheHeader {
    pub rows: u64,
    pub columns: u64,
    pub requested_k: u64,
    pub seed: u64,
    pub alpha: f64,
    pub digest: [u8; 32],
}

pub fn write_cache<T: Scalar, W: Write>(mut out: W, header: &CacheHeader, d: &SpectralDecomposition<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(104 + 8 * d.k() * (1 + d.u.nrows() + d.v.nrows()));
    buf.extend_from_slice(&CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for x in [
        header.rows,
        header.columns,
        d.k() as u64,
        header.requested_k,
        header.seed,
    ] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend_from_slice(&header.alpha.to_le_bytes());
    buf.extend_from_slice(&header.digest);
    buf.extend_from_slice(&d.residual.as_f64().to_le_bytes());
    let floats = d.sigma.iter().chain(d.u.as_slice()).chain(d.v.as_slice());
    for x in floats {
        buf.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    out.write_all(&buf).map_err(|e| Error::io("<cache>", e))
}

/// Reads a cache entry. Returns `Ok(None)` when the entry was written for a
/// different input, shape, k or seed; a malformed entry is an error.
pub fn read_cache<T: Scalar, R: Read>(
    mut input: R,
    expected: &CacheHeader,
) -> Result<Option<SpectralDecomposition<T>>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|e| Error::io("<cache>", e))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(8)? != CACHE_MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    cur.take(4)?;
    let rows = cur.u64()?;
    let columns = cur.u64()?;
    let k = cur.u64()?;
    let requested_k = cur.u64()?;
    let seed = cur.u64()?;
    let _alpha = cur.f64()?;
    let digest: [u8; 32] = cur.take(32)?.try_into().unwrap();
    let residual = cur.f64()?;
    if (rows, columns, requested_k, seed, digest)
        != (
            expected.rows,
            expected.columns,
            expected.requested_k,
            expected.seed,
            expected.digest,
        )
    {
        return Ok(None);
    }
    if k == 0 || k > requested_k {
        return Err(Error::Cache(format!("stored rank {k} with requested {requested_k}")));
    }
    let (rows, columns, k) = (rows as usize, columns as usize, k as usize);
    let expected_len = 104 + 8 * k * (1 + rows + columns);
    if buf.len() != expected_len {
        return Err(Error::Cache(format!(
            "length {} does not match header ({expected_len})",
            buf.len()
        )));
    }
    let mut floats = |n: usize| -> Result<Vec<T>> { (0..n).map(|_| cur.f64().map(T::of)).collect() };
    let sigma = floats(k)?;
    let u = DenseMatrix::from_column_major(rows, k, floats(rows * k)?);
    let v = DenseMatrix::from_column_major(columns, k, floats(columns * k)?);
    Ok(Some(SpectralDecomposition {
        u,
        sigma,
        v,
        requested_k: requested_k as usize,
        residual: T::of(residual),
    }))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Cache("truncated".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
