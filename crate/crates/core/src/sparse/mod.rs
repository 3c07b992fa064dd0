//! Serial sparse-matrix primitives.
//!
//! Every matrix here is stored in CSR form with sorted, duplicate-free
//! column indices. Distributed operands keep *global* column indices in
//! their local row blocks; [`SegmentedCsr`] resolves global row indices
//! against an owned block plus an auxiliary block of harvested rows.

mod mm;
mod segmented;
mod spgemm;

pub use mm::{parse_matrix_market, read_matrix_market, write_matrix_market};
pub use segmented::SegmentedCsr;
pub use spgemm::{spgemm_local, RowSource, HASH_CAPACITY};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::InvalidCsr(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(Error::InvalidCsr("row_ptr[0] must be 0".into()));
        }
        if col_idx.len() != values.len() || row_ptr[nrows] != col_idx.len() {
            return Err(Error::InvalidCsr(format!(
                "row_ptr[nrows]={} but {} column indices and {} values",
                row_ptr[nrows],
                col_idx.len(),
                values.len()
            )));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidCsr(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if let Some(&last) = cols.last() {
                if last >= ncols {
                    return Err(Error::InvalidCsr(format!(
                        "column {last} out of range in row {i} (ncols={ncols})"
                    )));
                }
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidCsr(format!(
                    "columns of row {i} are not strictly increasing"
                )));
            }
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, row_ptr, col_idx, values))
    }

    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), nrows + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// An `nrows x ncols` matrix with no stored entries.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Assembles a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in input order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidCsr(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[cursor[r]] = (c, v);
            cursor[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..nrows {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, row_ptr, col_idx, values))
    }

    /// Builds a matrix from a dense row-major array, storing only nonzeros.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), nrows * ncols);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = dense[i * ncols + j];
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts_unchecked(nrows, ncols, row_ptr, col_idx, values)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                dense[i * self.ncols + j] = v;
            }
        }
        dense
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_ptr[self.nrows]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_parts(self) -> (usize, usize, Vec<usize>, Vec<usize>, Vec<f64>) {
        (self.nrows, self.ncols, self.row_ptr, self.col_idx, self.values)
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Stored value at `(i, j)`, if any.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// `y = A x`, or `y += A x` when `accumulate` is set.
    ///
    /// Each row is summed in column order starting from zero; the distributed
    /// kernel reproduces the same order so results agree bitwise.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64], accumulate: bool) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                op: "spmv (x)",
                expected: self.ncols,
                got: x.len(),
            });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                op: "spmv (y)",
                expected: self.nrows,
                got: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            if accumulate {
                *yi += s;
            } else {
                *yi = s;
            }
        }
        Ok(())
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y, false)?;
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut row_ptr = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            row_ptr[j + 1] += 1;
        }
        for j in 0..self.ncols {
            row_ptr[j + 1] += row_ptr[j];
        }
        let nnz = self.nnz();
        let mut cursor = row_ptr.clone();
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        // rows are visited in increasing order, so each output row comes out sorted
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let slot = cursor[j];
                col_idx[slot] = i;
                values[slot] = v;
                cursor[j] += 1;
            }
        }
        CsrMatrix::from_parts_unchecked(self.ncols, self.nrows, row_ptr, col_idx, values)
    }

    /// l1-Jacobi diagonal `d_i = a_ii + sum_{j != i} |a_ij|` of a square matrix.
    pub fn l1_diagonal(&self) -> Result<Vec<f64>> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch {
                op: "l1_diagonal (square)",
                expected: self.nrows,
                got: self.ncols,
            });
        }
        self.l1_diagonal_block(0)
    }

    /// l1-Jacobi diagonal of a row block whose first row is global row `first_row`.
    pub fn l1_diagonal_block(&self, first_row: usize) -> Result<Vec<f64>> {
        (0..self.nrows)
            .map(|i| {
                let gi = first_row + i;
                let (cols, vals) = self.row(i);
                let mut diag = 0.0;
                let mut off = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    if j == gi {
                        diag = v;
                    } else {
                        off += v.abs();
                    }
                }
                let d = diag + off;
                if d == 0.0 || !d.is_finite() {
                    Err(Error::SingularSmoother { row: gi })
                } else {
                    Ok(d)
                }
            })
            .collect()
    }

    /// Returns a copy with every column index shifted by `offset` and the column
    /// count set to `ncols`.
    pub fn with_column_offset(&self, offset: usize, ncols: usize) -> Result<CsrMatrix> {
        let col_idx: Vec<usize> = self.col_idx.iter().map(|&j| j + offset).collect();
        if col_idx.iter().any(|&j| j >= ncols) {
            return Err(Error::InvalidCsr(format!(
                "shifted column exceeds ncols={ncols}"
            )));
        }
        Ok(CsrMatrix::from_parts_unchecked(
            self.nrows,
            ncols,
            self.row_ptr.clone(),
            col_idx,
            self.values.clone(),
        ))
    }

    /// Rows `[start, end)` as a new matrix with the same columns.
    pub fn row_block(&self, start: usize, end: usize) -> CsrMatrix {
        let base = self.row_ptr[start];
        let row_ptr = self.row_ptr[start..=end].iter().map(|&p| p - base).collect();
        let span = base..self.row_ptr[end];
        CsrMatrix::from_parts_unchecked(
            end - start,
            self.ncols,
            row_ptr,
            self.col_idx[span.clone()].to_vec(),
            self.values[span].to_vec(),
        )
    }

    /// Restriction of the rows to columns in `[start, end)`, reindexed to `0..end-start`.
    pub fn column_window(&self, start: usize, end: usize) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let lo = cols.partition_point(|&j| j < start);
            let hi = cols.partition_point(|&j| j < end);
            col_idx.extend(cols[lo..hi].iter().map(|&j| j - start));
            values.extend_from_slice(&vals[lo..hi]);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::from_parts_unchecked(self.nrows, end - start, row_ptr, col_idx, values)
    }

    /// Stacks row blocks that share a column count.
    pub fn vstack(blocks: &[CsrMatrix]) -> Result<CsrMatrix> {
        let ncols = blocks.first().map_or(0, |b| b.ncols);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut nrows = 0;
        for b in blocks {
            if b.ncols != ncols {
                return Err(Error::DimensionMismatch {
                    op: "vstack",
                    expected: ncols,
                    got: b.ncols,
                });
            }
            let base = col_idx.len();
            row_ptr.extend(b.row_ptr[1..].iter().map(|&p| p + base));
            col_idx.extend_from_slice(&b.col_idx);
            values.extend_from_slice(&b.values);
            nrows += b.nrows;
        }
        Ok(CsrMatrix::from_parts_unchecked(nrows, ncols, row_ptr, col_idx, values))
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
