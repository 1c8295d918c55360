//! Dense embedding matrices and the `EMBT` file format.
//!
//! Layout (little-endian):
//! - magic: `b"EMBT"`
//! - version: u32 (= 1)
//! - rows: u32
//! - dim: u32
//! - data: rows * dim f32, row-major

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const EMBEDDING_MAGIC: [u8; 4] = *b"EMBT";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an embedding file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported embedding file version {0}")]
    BadVersion(u32),
    #[error("expected {expected} values for {rows}x{dim}, got {actual}")]
    Shape {
        rows: usize,
        dim: usize,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension {0} does not fit the file header")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self, EmbeddingError> {
        if data.len() != rows * dim {
            return Err(EmbeddingError::Shape {
                rows,
                dim,
                expected: rows * dim,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(EmbeddingError::Shape {
                    rows: rows.len(),
                    dim,
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, EmbeddingError> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), EmbeddingError> {
        let rows = u32::try_from(self.rows).map_err(|_| EmbeddingError::TooLarge(self.rows))?;
        let dim = u32::try_from(self.dim).map_err(|_| EmbeddingError::TooLarge(self.dim))?;
        w.write_all(&EMBEDDING_MAGIC)?;
        w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.dim * 4);
        for row in self.data.chunks(self.dim.max(1)) {
            buf.clear();
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, EmbeddingError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != EMBEDDING_MAGIC {
            return Err(EmbeddingError::BadMagic(magic));
        }
        let version = read_u32(&mut r)?;
        if version != EMBEDDING_VERSION {
            return Err(EmbeddingError::BadVersion(version));
        }
        let rows = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut bytes = vec![0u8; rows * dim * 4];
        r.read_exact(&mut bytes)?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(EmbeddingError::Shape {
                rows,
                dim,
                expected: rows * dim,
                actual: rows * dim + 1,
            });
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(rows, dim, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
