//! `LSCM` binary matrix records.
//!
//! Layout (all little-endian): magic `LSCM`, version `u16`, dtype `u16`,
//! rows `u64`, cols `u64`, row-major payload, CRC32 of the payload.
//! Complex entries are stored as (re, im) pairs of `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::C64;

pub const MAGIC: &[u8; 4] = b"LSCM";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Dtype {
    Complex = 1,
    Real = 2,
}

impl Dtype {
    fn from_tag(tag: u16) -> Result<Self> {
        match tag {
            1 => Ok(Dtype::Complex),
            2 => Ok(Dtype::Real),
            t => Err(Error::Format(format!("unknown dtype tag {t}"))),
        }
    }

    fn entry_bytes(self) -> usize {
        match self {
            Dtype::Complex => 16,
            Dtype::Real => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Complex(DMatrix<C64>),
    Real(DMatrix<f64>),
}

impl MatrixData {
    pub fn dtype(&self) -> Dtype {
        match self {
            MatrixData::Complex(_) => Dtype::Complex,
            MatrixData::Real(_) => Dtype::Real,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixData::Complex(m) => m.shape(),
            MatrixData::Real(m) => m.shape(),
        }
    }

    pub fn into_complex(self) -> Result<DMatrix<C64>> {
        match self {
            MatrixData::Complex(m) => Ok(m),
            MatrixData::Real(_) => Err(Error::Format("expected a complex matrix, found real".into())),
        }
    }

    pub fn into_real(self) -> Result<DMatrix<f64>> {
        match self {
            MatrixData::Real(m) => Ok(m),
            MatrixData::Complex(_) => Err(Error::Format("expected a real matrix, found complex".into())),
        }
    }
}

impl From<DMatrix<C64>> for MatrixData {
    fn from(m: DMatrix<C64>) -> Self {
        MatrixData::Complex(m)
    }
}

impl From<DMatrix<f64>> for MatrixData {
    fn from(m: DMatrix<f64>) -> Self {
        MatrixData::Real(m)
    }
}

pub fn encode_matrix<W: Write>(w: &mut W, m: &MatrixData) -> Result<()> {
    let (rows, cols) = m.shape();
    let mut payload = Vec::with_capacity(rows * cols * m.dtype().entry_bytes());
    for i in 0..rows {
        for j in 0..cols {
            match m {
                MatrixData::Complex(c) => {
                    payload.extend_from_slice(&c[(i, j)].re.to_le_bytes());
                    payload.extend_from_slice(&c[(i, j)].im.to_le_bytes());
                }
                MatrixData::Real(r) => payload.extend_from_slice(&r[(i, j)].to_le_bytes()),
            }
        }
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.dtype() as u16).to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    w.write_all(&payload)?;
    w.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    Ok(())
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Corruption(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

/// Reads one record. `Ok(None)` at a clean end of stream.
pub fn decode_matrix<R: Read>(r: &mut R) -> Result<Option<MatrixData>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    if got == 0 {
        return Ok(None);
    }
    if got < 4 || &header[..4] != MAGIC {
        return Err(Error::Format("missing LSCM magic".into()));
    }
    if got < HEADER_LEN {
        return Err(Error::Corruption("truncated header".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dtype = Dtype::from_tag(u16::from_le_bytes([header[6], header[7]]))?;
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(dtype.entry_bytes() as u64))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Corruption(format!("declared size {rows}x{cols} overflows")))?;
    let (rows, cols) = (rows as usize, cols as usize);
    // Read in bounded chunks so a corrupt header cannot force a huge allocation.
    let mut payload = Vec::new();
    let mut remaining = len;
    let mut chunk = vec![0u8; 1 << 16];
    while remaining > 0 {
        let take = remaining.min(chunk.len());
        read_exact_or_corrupt(r, &mut chunk[..take], "payload")?;
        payload.extend_from_slice(&chunk[..take]);
        remaining -= take;
    }
    let mut crc = [0u8; 4];
    read_exact_or_corrupt(r, &mut crc, "checksum")?;
    if crc32fast::hash(&payload) != u32::from_le_bytes(crc) {
        return Err(Error::Corruption("checksum mismatch".into()));
    }
    let f = |k: usize| f64::from_le_bytes(payload[8 * k..8 * k + 8].try_into().unwrap());
    Ok(Some(match dtype {
        Dtype::Complex => MatrixData::Complex(DMatrix::from_fn(rows, cols, |i, j| {
            let k = 2 * (i * cols + j);
            C64::new(f(k), f(k + 1))
        })),
        Dtype::Real => MatrixData::Real(DMatrix::from_fn(rows, cols, |i, j| f(i * cols + j))),
    }))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &MatrixData) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<MatrixData> {
    let mut r = BufReader::new(File::open(path)?);
    let m = decode_matrix(&mut r)?.ok_or_else(|| Error::Corruption("empty file".into()))?;
    if decode_matrix(&mut r)?.is_some() {
        return Err(Error::Format("file holds more than one matrix".into()));
    }
    Ok(m)
}
