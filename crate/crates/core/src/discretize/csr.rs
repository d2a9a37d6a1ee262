//! Compressed sparse rows and the `MWOP` binary dump.

use std::io::{self, Read, Write};

use thiserror::Error;

const MAGIC: &[u8; 4] = b"MWOP";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MwopError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic bytes")]
    Magic,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("inconsistent CSR structure: {0}")]
    Structure(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        Self { n, row_ptr, col, val }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col[a..b], &self.val[a..b])
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n).map(|i| self.row_ptr[i + 1] - self.row_ptr[i]).max().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(j, a)| a * u[*j]).sum()
            })
            .collect()
    }

    /// Bitwise equality of every `(i, j)` and `(j, i)` pair.
    pub fn is_symmetric_exact(&self) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter()
                .zip(v)
                .all(|(&j, a)| self.get(j, i).to_bits() == a.to_bits())
        })
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (j, x) in c.iter().zip(v) {
                a[i * self.n + j] = *x;
            }
        }
        a
    }
}

/// Writes `m` in the little-endian `MWOP` layout:
/// magic, version u32, n u64, nnz u64, row_ptr u64[n+1], col u64[nnz], val f64[nnz].
pub fn write_mwop(m: &CsrMatrix, mut w: impl Write) -> io::Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * (m.n + 1 + 2 * m.nnz()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.n as u64).to_le_bytes());
    buf.extend_from_slice(&(m.nnz() as u64).to_le_bytes());
    for p in &m.row_ptr {
        buf.extend_from_slice(&(*p as u64).to_le_bytes());
    }
    for c in &m.col {
        buf.extend_from_slice(&(*c as u64).to_le_bytes());
    }
    for v in &m.val {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_mwop(mut r: impl Read) -> Result<CsrMatrix, MwopError> {
    let mut head = [0u8; 24];
    r.read_exact(&mut head)?;
    if &head[0..4] != MAGIC {
        return Err(MwopError::Magic);
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(MwopError::Version(version));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let nnz = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    let mut read_u64s = |k: usize| -> Result<Vec<u64>, MwopError> {
        let mut b = vec![0u8; 8 * k];
        r.read_exact(&mut b)?;
        Ok(b.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let row_ptr: Vec<usize> = read_u64s(n + 1)?.into_iter().map(|x| x as usize).collect();
    let col: Vec<usize> = read_u64s(nnz)?.into_iter().map(|x| x as usize).collect();
    let val: Vec<f64> = read_u64s(nnz)?.into_iter().map(f64::from_bits).collect();
    if row_ptr.first() != Some(&0) || row_ptr.last() != Some(&nnz) || row_ptr.windows(2).any(|w| w[0] > w[1]) {
        return Err(MwopError::Structure("row_ptr"));
    }
    if col.iter().any(|&c| c >= n) {
        return Err(MwopError::Structure("column index out of range"));
    }
    Ok(CsrMatrix { n, row_ptr, col, val })
}
