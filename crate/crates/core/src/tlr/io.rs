//! TLRM matrix files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{LowRankTile, TlrMatrix};
use crate::dense::DenseTile;
use crate::error::{Result, TlrError};

const MAGIC: &[u8; 4] = b"TLRM";
const VERSION: u32 = 1;

pub fn write_tlr(a: &TlrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_body(a, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_tlr(path: impl AsRef<Path>) -> Result<TlrMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let a = read_body(&mut r)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(TlrError::Format("trailing bytes after TLRM payload".into()));
    }
    Ok(a)
}

pub(crate) fn write_body(a: &TlrMatrix, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(a.n() as u64).to_le_bytes())?;
    w.write_all(&(a.tile_size() as u32).to_le_bytes())?;
    w.write_all(&a.eps().to_le_bytes())?;
    for i in 0..a.nb() {
        let d = a.diag(i);
        w.write_all(&(d.rows() as u32).to_le_bytes())?;
        w.write_all(&(d.cols() as u32).to_le_bytes())?;
        write_f64s(w, d.data())?;
    }
    let count = a.nb() * a.nb().saturating_sub(1) / 2;
    w.write_all(&(count as u64).to_le_bytes())?;
    for i in 0..a.nb() {
        for j in 0..i {
            let t = a.lower(i, j);
            w.write_all(&(i as u32).to_le_bytes())?;
            w.write_all(&(j as u32).to_le_bytes())?;
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            write_f64s(w, t.u.data())?;
            write_f64s(w, t.v.data())?;
        }
    }
    Ok(())
}

pub(crate) fn write_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) struct Reader<'a, R: Read>(pub &'a mut R);

impl<R: Read> Reader<'_, R> {
    pub fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(truncated)?;
        Ok(b)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        self.0.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn truncated(_: std::io::Error) -> TlrError {
    TlrError::Format("truncated file".into())
}

pub(crate) fn read_body(r: &mut impl Read) -> Result<TlrMatrix> {
    let mut rd = Reader(r);
    if &rd.bytes::<4>()? != MAGIC {
        return Err(TlrError::Format("bad TLRM magic".into()));
    }
    let version = rd.u32()?;
    if version != VERSION {
        return Err(TlrError::Format(format!("unsupported TLRM version {version}")));
    }
    let n = rd.u64()? as usize;
    let b = rd.u32()? as usize;
    let eps = rd.f64()?;
    if b == 0 || b > n.max(1) {
        return Err(TlrError::Format(format!("tile size {b} for order {n}")));
    }
    let nb = n.div_ceil(b);
    let mut diag = Vec::with_capacity(nb);
    let mut seen = 0;
    for _ in 0..nb {
        let rows = rd.u32()? as usize;
        let cols = rd.u32()? as usize;
        if rows != cols || rows == 0 || seen + rows > n {
            return Err(TlrError::Format(format!("diagonal tile of {rows}x{cols}")));
        }
        seen += rows;
        diag.push(DenseTile::from_col_major(rows, cols, rd.f64s(rows * cols)?)?);
    }
    if seen != n {
        return Err(TlrError::Format("diagonal tiles do not cover the matrix".into()));
    }
    let count = rd.u64()? as usize;
    if count != nb * nb.saturating_sub(1) / 2 {
        return Err(TlrError::Format(format!("{count} tile records for {nb} tile rows")));
    }
    let mut lower = Vec::with_capacity(count);
    for i in 0..nb {
        for j in 0..i {
            let (ti, tj, k) = (rd.u32()? as usize, rd.u32()? as usize, rd.u32()? as usize);
            if (ti, tj) != (i, j) {
                return Err(TlrError::Format(format!("tile record ({ti},{tj}) out of order")));
            }
            let (ri, rj) = (diag[i].rows(), diag[j].rows());
            if k > ri.min(rj) {
                return Err(TlrError::Format(format!("rank {k} exceeds tile size")));
            }
            let u = DenseTile::from_col_major(ri, k, rd.f64s(ri * k)?)?;
            let v = DenseTile::from_col_major(rj, k, rd.f64s(rj * k)?)?;
            lower.push(LowRankTile { u, v });
        }
    }
    TlrMatrix::from_parts(b, eps, diag, lower)
}
