//! Two-phase sparse matrix-matrix product.
//!
//! The symbolic phase counts the distinct columns of every output row with a
//! per-row hash set, then the numeric phase accumulates values with a hash
//! map of the same capacity. Rows whose upper bound exceeds
//! [`HASH_CAPACITY`] fall back to sort-merge. In both paths contributions to
//! a column are summed in traversal order (row of `A`, then row of `B`), so
//! results do not depend on which path a row takes.

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Largest per-row product upper bound handled by the hash accumulator.
pub const HASH_CAPACITY: usize = 4096;

/// Anything that can hand out rows by global row index.
pub trait RowSource {
    /// Number of global rows addressable (the inner dimension of a product).
    fn global_nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn global_row(&self, g: usize) -> Option<(&[usize], &[f64])>;
}

impl RowSource for CsrMatrix {
    fn global_nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        CsrMatrix::ncols(self)
    }

    #[inline]
    fn global_row(&self, g: usize) -> Option<(&[usize], &[f64])> {
        (g < self.nrows()).then(|| self.row(g))
    }
}

const EMPTY: usize = usize::MAX;

/// Open-addressing accumulator reused across rows.
struct HashAccumulator {
    keys: Vec<usize>,
    vals: Vec<f64>,
    used: Vec<usize>,
    mask: usize,
}

impl HashAccumulator {
    fn new() -> Self {
        Self {
            keys: Vec::new(),
            vals: Vec::new(),
            used: Vec::new(),
            mask: 0,
        }
    }

    /// Prepares for a row with at most `bound` distinct keys.
    fn reset(&mut self, bound: usize) {
        let cap = (2 * bound.max(1)).next_power_of_two();
        if cap > self.keys.len() {
            self.keys = vec![EMPTY; cap];
            self.vals = vec![0.0; cap];
        } else {
            for &slot in &self.used {
                self.keys[slot] = EMPTY;
            }
        }
        self.used.clear();
        self.mask = cap - 1;
    }

    #[inline]
    fn slot(&mut self, key: usize) -> (usize, bool) {
        let mut h = (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 17) & self.mask;
        loop {
            let k = self.keys[h];
            if k == key {
                return (h, false);
            }
            if k == EMPTY {
                self.keys[h] = key;
                self.used.push(h);
                return (h, true);
            }
            h = (h + 1) & self.mask;
        }
    }

    #[inline]
    fn insert(&mut self, key: usize) {
        self.slot(key);
    }

    #[inline]
    fn add(&mut self, key: usize, v: f64) {
        let (h, fresh) = self.slot(key);
        if fresh {
            self.vals[h] = v;
        } else {
            self.vals[h] += v;
        }
    }

    fn len(&self) -> usize {
        self.used.len()
    }

    /// Drains the row into `(col, val)` pairs sorted by column.
    fn drain_sorted(&self, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend(self.used.iter().map(|&h| (self.keys[h], self.vals[h])));
        out.sort_unstable_by_key(|&(c, _)| c);
    }
}

fn row_bound<B: RowSource>(a_cols: &[usize], b: &B) -> Result<usize> {
    let mut bound = 0;
    for &k in a_cols {
        let (cols, _) = b.global_row(k).ok_or(Error::MissingRow { row: k })?;
        bound += cols.len();
    }
    Ok(bound)
}

/// `C = A * B` where `B` is addressed by global row index.
///
/// Entries whose accumulated value cancels to zero are kept in the pattern.
pub fn spgemm_local<B: RowSource>(a: &CsrMatrix, b: &B) -> Result<CsrMatrix> {
    if a.ncols() != b.global_nrows() {
        return Err(Error::DimensionMismatch {
            op: "spgemm (inner dimension)",
            expected: a.ncols(),
            got: b.global_nrows(),
        });
    }
    let nrows = a.nrows();
    let mut acc = HashAccumulator::new();
    let mut scratch: Vec<usize> = Vec::new();

    // symbolic
    let mut bounds = Vec::with_capacity(nrows);
    let mut row_ptr = Vec::with_capacity(nrows + 1);
    row_ptr.push(0usize);
    for i in 0..nrows {
        let (a_cols, _) = a.row(i);
        let bound = row_bound(a_cols, b)?;
        let count = if bound <= HASH_CAPACITY {
            acc.reset(bound);
            for &k in a_cols {
                let (cols, _) = b.global_row(k).expect("checked by row_bound");
                for &j in cols {
                    acc.insert(j);
                }
            }
            acc.len()
        } else {
            scratch.clear();
            for &k in a_cols {
                scratch.extend_from_slice(b.global_row(k).expect("checked by row_bound").0);
            }
            scratch.sort_unstable();
            scratch.dedup();
            scratch.len()
        };
        bounds.push(bound);
        row_ptr.push(row_ptr[i] + count);
    }

    // numeric
    let nnz = row_ptr[nrows];
    let mut col_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for i in 0..nrows {
        let (a_cols, a_vals) = a.row(i);
        if bounds[i] <= HASH_CAPACITY {
            acc.reset(bounds[i]);
            for (&k, &av) in a_cols.iter().zip(a_vals) {
                let (cols, vals) = b.global_row(k).expect("checked by row_bound");
                for (&j, &bv) in cols.iter().zip(vals) {
                    acc.add(j, av * bv);
                }
            }
            acc.drain_sorted(&mut pairs);
        } else {
            pairs.clear();
            for (&k, &av) in a_cols.iter().zip(a_vals) {
                let (cols, vals) = b.global_row(k).expect("checked by row_bound");
                pairs.extend(cols.iter().zip(vals).map(|(&j, &bv)| (j, av * bv)));
            }
            // stable, so equal columns keep traversal order
            pairs.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
            for &(c, v) in &pairs {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            pairs = merged;
        }
        debug_assert_eq!(pairs.len(), row_ptr[i + 1] - row_ptr[i]);
        for &(c, v) in &pairs {
            col_idx.push(c);
            values.push(v);
        }
    }
    Ok(CsrMatrix::from_parts_unchecked(nrows, b.ncols(), row_ptr, col_idx, values))
}
