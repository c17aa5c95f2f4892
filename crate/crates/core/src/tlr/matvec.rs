//! Symmetric TLR matrix-vector product.

use rayon::prelude::*;

use super::TlrMatrix;
use crate::dense::Transpose;
use crate::error::{dim_err, Result};

/// Output buffers used by [`tlr_matvec`]. Fixed so results do not depend on
/// the thread count.
pub const DEFAULT_MATVEC_BUFFERS: usize = 8;

pub fn tlr_matvec(a: &TlrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    tlr_matvec_with_buffers(a, x, DEFAULT_MATVEC_BUFFERS)
}

/// `y = A x` with the tile columns split into `buffers` contiguous groups,
/// each accumulated into its own output vector and reduced pairwise.
pub fn tlr_matvec_with_buffers(a: &TlrMatrix, x: &[f64], buffers: usize) -> Result<Vec<f64>> {
    if x.len() != a.n() {
        return Err(dim_err(format!("vector of length {} for order {}", x.len(), a.n())));
    }
    let nb = a.nb();
    let p = buffers.clamp(1, nb.max(1));
    let xs = a.blocks(x);
    let parts: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|g| {
            let mut y = vec![0.0; a.n()];
            for j in g * nb / p..(g + 1) * nb / p {
                let oj = a.offset(j);
                let rj = a.tile_rows(j);
                a.diag(j).gemv_add(Transpose::No, 1.0, xs[j], &mut y[oj..oj + rj]);
                for i in j + 1..nb {
                    let t = a.lower(i, j);
                    if t.rank() == 0 {
                        continue;
                    }
                    let oi = a.offset(i);
                    let ri = a.tile_rows(i);
                    let mut w = vec![0.0; t.rank()];
                    t.v.gemv_add(Transpose::Yes, 1.0, xs[j], &mut w);
                    t.u.gemv_add(Transpose::No, 1.0, &w, &mut y[oi..oi + ri]);
                    w.iter_mut().for_each(|v| *v = 0.0);
                    t.u.gemv_add(Transpose::Yes, 1.0, xs[i], &mut w);
                    t.v.gemv_add(Transpose::No, 1.0, &w, &mut y[oj..oj + rj]);
                }
            }
            y
        })
        .collect();
    Ok(reduce_pairwise(parts))
}

/// Fixed-order pairwise tree sum of equally sized vectors.
pub(crate) fn reduce_pairwise(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}
