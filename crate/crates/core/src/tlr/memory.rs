//! Byte accounting and rank statistics.

use std::collections::BTreeMap;

use super::TlrMatrix;

/// Storage breakdown of a TLR matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryReport {
    pub total_bytes: usize,
    pub dense_bytes: usize,
    pub low_rank_bytes: usize,
    /// Rank → number of stored off-diagonal tiles with that rank.
    pub rank_histogram: BTreeMap<usize, usize>,
    /// Tile ranks with the tile size on the diagonal.
    pub rank_heatmap: Vec<Vec<usize>>,
}

pub fn memory_report(a: &TlrMatrix) -> MemoryReport {
    let dense_bytes = (0..a.nb()).map(|i| a.tile_rows(i).pow(2) * 8).sum();
    let mut low_rank_bytes = 0;
    let mut rank_histogram = BTreeMap::new();
    for i in 0..a.nb() {
        for j in 0..i {
            let t = a.lower(i, j);
            low_rank_bytes += t.bytes();
            *rank_histogram.entry(t.rank()).or_insert(0) += 1;
        }
    }
    MemoryReport {
        total_bytes: dense_bytes + low_rank_bytes,
        dense_bytes,
        low_rank_bytes,
        rank_histogram,
        rank_heatmap: a.rank_heatmap(),
    }
}
