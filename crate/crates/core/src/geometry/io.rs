//! TLRP point files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::PointSet;
use crate::error::{Result, TlrError};

const MAGIC: &[u8; 4] = b"TLRP";
const VERSION: u32 = 1;

/// Writes the points in matrix order.
pub fn write_points(ps: &PointSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ps.dim() as u32).to_le_bytes())?;
    w.write_all(&(ps.len() as u64).to_le_bytes())?;
    for i in 0..ps.len() {
        for &x in ps.ordered_point(i) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a point file; the result has the identity ordering.
pub fn read_points(path: impl AsRef<Path>) -> Result<PointSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut head = [0u8; 20];
    r.read_exact(&mut head).map_err(|_| TlrError::Format("truncated TLRP header".into()))?;
    if &head[..4] != MAGIC {
        return Err(TlrError::Format("bad TLRP magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(TlrError::Format(format!("unsupported TLRP version {version}")));
    }
    let dim = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(head[12..20].try_into().unwrap()) as usize;
    if !(1..=3).contains(&dim) {
        return Err(TlrError::Format(format!("TLRP dimension {dim}")));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * dim * 8 {
        return Err(TlrError::Format(format!(
            "TLRP payload has {} bytes, expected {}",
            bytes.len(),
            n * dim * 8
        )));
    }
    let coords = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PointSet::new(dim, coords)
}
