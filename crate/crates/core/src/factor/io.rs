//! Factor files: a TLRM body followed by the mode, the `D` blocks of an
//! `LDLᵀ` factor and the tile permutation of a pivoted one.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FactorMode, LdlBlock, TlrFactor};
use crate::dense::BlockDiagonal;
use crate::error::{Result, TlrError};
use crate::tlr::io::{read_body, write_body, write_f64s, Reader};

pub fn write_factor(f: &TlrFactor, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_body(f.l(), &mut w)?;
    w.write_all(&[f.mode().code()])?;
    if let Some(d) = f.d_blocks() {
        for blk in d {
            w.write_all(&(blk.d.n() as u32).to_le_bytes())?;
            write_f64s(&mut w, &blk.d.diag)?;
            write_f64s(&mut w, &blk.d.sub)?;
            write_u32s(&mut w, &blk.perm)?;
        }
    }
    if let Some(p) = f.perm() {
        w.write_all(&(p.len() as u32).to_le_bytes())?;
        write_u32s(&mut w, p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_factor(path: impl AsRef<Path>) -> Result<TlrFactor> {
    let mut r = BufReader::new(File::open(path)?);
    let l = read_body(&mut r)?;
    let mut rd = Reader(&mut r);
    let code = rd.u8()?;
    let mode = FactorMode::from_code(code).ok_or_else(|| TlrError::Format(format!("unknown factor mode {code}")))?;
    let nb = l.nb();
    let d = if mode == FactorMode::Ldl {
        let mut blocks = Vec::with_capacity(nb);
        for k in 0..nb {
            let len = rd.u32()? as usize;
            if len != l.tile_rows(k) {
                return Err(TlrError::Format(format!("D block {k} has length {len}")));
            }
            let diag = rd.f64s(len)?;
            let sub = rd.f64s(len.saturating_sub(1))?;
            let perm = read_u32s(&mut rd, len)?;
            blocks.push(LdlBlock { d: BlockDiagonal { diag, sub }, perm });
        }
        Some(blocks)
    } else {
        None
    };
    let perm = if mode == FactorMode::PivotedCholesky {
        let len = rd.u32()? as usize;
        if len != nb {
            return Err(TlrError::Format(format!("permutation of length {len} for {nb} tiles")));
        }
        Some(read_u32s(&mut rd, len)?)
    } else {
        None
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(TlrError::Format("trailing bytes after factor payload".into()));
    }
    TlrFactor::from_parts(l, mode, d, perm)
}

fn write_u32s(w: &mut impl Write, xs: &[usize]) -> Result<()> {
    let buf: Vec<u8> = xs.iter().flat_map(|&x| (x as u32).to_le_bytes()).collect();
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32s<R: Read>(rd: &mut Reader<'_, R>, n: usize) -> Result<Vec<usize>> {
    (0..n).map(|_| rd.u32().map(|x| x as usize)).collect()
}
