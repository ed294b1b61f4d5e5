//! `NFRM` container: magic `NFRM`, u32 version (1), u32 rows, u32 cols, then
//! rows·cols little-endian f32 values in row-major order. A basis file is a
//! matrix block for the eigenvectors followed by a 1×k block of eigenvalues.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::FeatureMatrix;
use crate::spectral::{Embedding, SpectralBasis};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"NFRM";
const VERSION: u32 = 1;
const HEADER: usize = 16;

fn encode(m: &DMatrix<f64>, out: &mut Vec<u8>) -> Result<()> {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for dim in [m.nrows(), m.ncols()] {
        let d = u32::try_from(dim)
            .map_err(|_| Error::SizeMismatch(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)] as f32;
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: r, col: c });
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(())
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Decodes one block; returns the matrix and the number of bytes consumed.
fn decode(bytes: &[u8]) -> Result<(DMatrix<f64>, usize)> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(Error::Parse("missing NFRM header".into()));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported NFRM version {version}")));
    }
    let (n, d) = (read_u32(bytes, 8) as usize, read_u32(bytes, 12) as usize);
    let len = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Parse("NFRM dimensions overflow".into()))?;
    if bytes.len() < HEADER + len {
        return Err(Error::Parse(format!(
            "NFRM payload truncated: need {len} bytes for {n}x{d}, have {}",
            bytes.len() - HEADER
        )));
    }
    let payload = &bytes[HEADER..HEADER + len];
    let mut m = DMatrix::zeros(n, d);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        let (r, c) = (i / d, i % d);
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry { row: r, col: c });
        }
        m[(r, c)] = v as f64;
    }
    Ok((m, HEADER + len))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn save_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER + 4 * m.len());
    encode(m, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn save_features(f: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    save_matrix(f.values(), path)
}

/// Reads the first matrix block of an `NFRM` file. Anything after it (such as
/// the eigenvalue block of a basis file) is ignored.
pub fn load_features(path: impl AsRef<Path>, expected_n: usize) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let (m, _) = decode(&read(path)?)?;
    if m.nrows() != expected_n {
        return Err(Error::CountMismatch {
            expected: expected_n,
            found: m.nrows(),
        });
    }
    if m.ncols() == 0 {
        return Err(Error::Parse("feature dimension is zero".into()));
    }
    FeatureMatrix::new(m, format!("file:{}", path.display()), 0)
}

pub fn save_basis(b: &SpectralBasis, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    encode(b.phi(), &mut buf)?;
    encode(&DMatrix::from_row_slice(1, b.k(), b.eigenvalues()), &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Eigenvectors and eigenvalues from a basis file (f32 precision).
pub fn load_basis(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let bytes = read(path.as_ref())?;
    let (phi, used) = decode(&bytes)?;
    let (mu, _) = decode(&bytes[used..])?;
    if mu.nrows() != 1 || mu.ncols() != phi.ncols() {
        return Err(Error::Parse(format!(
            "eigenvalue block is {}x{}, expected 1x{}",
            mu.nrows(),
            mu.ncols(),
            phi.ncols()
        )));
    }
    Ok((phi, mu.iter().copied().collect()))
}
