//! Benchmark systems: the 7-point Poisson problem on the unit cube and
//! matrices read from files.

use std::path::Path;
use std::sync::Arc;

use crate::dist::{DistMatrix, DistVector};
use crate::error::{Error, Result};
use crate::runtime::{Partition, RankCtx};
use crate::sparse::{read_matrix_market, CsrMatrix};

/// `nd^3` interior grid points, numbered with `i` fastest, then `j`, then `k`.
///
/// The assembled operator is the `h^2`-scaled stencil: 6 on the diagonal, -1
/// for each interior neighbour, right-hand side 1. Dirichlet boundary values
/// are eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoissonSpec {
    pub nd: usize,
}

impl PoissonSpec {
    pub fn new(nd: usize) -> Result<Self> {
        if nd == 0 {
            return Err(Error::InvalidCsr("poisson grid needs nd >= 1".into()));
        }
        Ok(Self { nd })
    }

    pub fn global_n(&self) -> usize {
        self.nd * self.nd * self.nd
    }

    /// Mesh width of the grid with `nd` interior points per direction.
    pub fn h(&self) -> f64 {
        1.0 / (self.nd as f64 + 1.0)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nd * (j + self.nd * k)
    }

    pub fn coords(&self, row: usize) -> (usize, usize, usize) {
        let nd = self.nd;
        (row % nd, (row / nd) % nd, row / (nd * nd))
    }

    /// Row `row` of the matrix, columns increasing.
    pub fn row(&self, row: usize) -> (Vec<usize>, Vec<f64>) {
        let nd = self.nd;
        let nd2 = nd * nd;
        let (i, j, k) = self.coords(row);
        let mut cols = Vec::with_capacity(7);
        let mut vals = Vec::with_capacity(7);
        let mut push = |c: usize, v: f64| {
            cols.push(c);
            vals.push(v);
        };
        if k > 0 {
            push(row - nd2, -1.0);
        }
        if j > 0 {
            push(row - nd, -1.0);
        }
        if i > 0 {
            push(row - 1, -1.0);
        }
        push(row, 6.0);
        if i + 1 < nd {
            push(row + 1, -1.0);
        }
        if j + 1 < nd {
            push(row + nd, -1.0);
        }
        if k + 1 < nd {
            push(row + nd2, -1.0);
        }
        (cols, vals)
    }

    /// Rows `range` as a CSR block with global column indices.
    pub fn rows(&self, start: usize, end: usize) -> Result<CsrMatrix> {
        let mut row_ptr = Vec::with_capacity(end - start + 1);
        let mut col_idx = Vec::with_capacity(7 * (end - start));
        let mut values = Vec::with_capacity(7 * (end - start));
        row_ptr.push(0);
        for g in start..end {
            let (c, v) = self.row(g);
            col_idx.extend(c);
            values.extend(v);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::new(end - start, self.global_n(), row_ptr, col_idx, values)
    }

    pub fn assemble(&self) -> Result<CsrMatrix> {
        self.rows(0, self.global_n())
    }
}

/// This rank's rows of the Poisson matrix and right-hand side. No
/// communication is needed.
pub fn gen_poisson7(ctx: &RankCtx, nd: usize, part: Arc<Partition>) -> Result<(DistMatrix, DistVector)> {
    let spec = PoissonSpec::new(nd)?;
    if part.global_n() != spec.global_n() {
        return Err(Error::DimensionMismatch {
            op: "poisson partition",
            expected: spec.global_n(),
            got: part.global_n(),
        });
    }
    let range = part.range(ctx.rank());
    let local = spec.rows(range.start, range.end)?;
    let a = DistMatrix::square(Arc::clone(&part), ctx.rank(), local)?;
    let b = DistVector::filled(part, ctx.rank(), 1.0);
    Ok((a, b))
}

/// This rank's rows of a replicated global matrix.
pub fn distribute(ctx: &RankCtx, a: &CsrMatrix, part: Arc<Partition>) -> Result<DistMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "distribute (square)",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    DistMatrix::distribute(a, Arc::clone(&part), part, ctx.rank())
}

/// Reads a MatrixMarket file, requiring a square matrix.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let a = read_matrix_market(path)?;
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "system matrix (square)",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    Ok(a)
}
