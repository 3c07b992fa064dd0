use std::sync::Arc;

use crate::dist::DistMatrix;
use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::sparse::{spgemm_local, CsrMatrix, SegmentedCsr};

/// Local pairwise prolongator block for a matching on the owned vertices.
///
/// Aggregates are numbered in order of their smallest member. A matched pair
/// `(i, j)` gets the column `(w_i, w_j) / |(w_i, w_j)|`, an unmatched vertex
/// gets `sign(w_i)`. Zero smooth-vector values fall back to equal weights.
/// The result is `n x n_aggregates` with local column indices.
pub fn build_pairwise_prolongator(m: &Matching, w: &[f64]) -> Result<CsrMatrix> {
    let n = m.len();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            op: "pairwise prolongator",
            expected: n,
            got: w.len(),
        });
    }
    if !m.is_valid() {
        return Err(Error::InvalidCsr("prolongator needs a valid matching".into()));
    }
    let mut agg = vec![usize::MAX; n];
    let mut values = vec![0.0; n];
    let mut nc = 0;
    for i in 0..n {
        match m.mate(i) {
            Some(j) if j < i => continue,
            Some(j) => {
                let norm = w[i].hypot(w[j]);
                if norm == 0.0 {
                    values[i] = std::f64::consts::FRAC_1_SQRT_2;
                    values[j] = std::f64::consts::FRAC_1_SQRT_2;
                } else {
                    values[i] = w[i] / norm;
                    values[j] = w[j] / norm;
                }
                agg[i] = nc;
                agg[j] = nc;
            }
            None => {
                values[i] = if w[i] == 0.0 { 1.0 } else { w[i].signum() };
                agg[i] = nc;
            }
        }
        nc += 1;
    }
    CsrMatrix::new(n, nc, (0..=n).collect(), agg, values)
}

/// Product of block-diagonal prolongators `P_1 P_2 ... P_s`.
///
/// Each factor's rows live on the same rank as the previous factor's
/// columns, so the product needs no communication.
pub fn compose_prolongators(factors: &[DistMatrix]) -> Result<DistMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidCsr("nothing to compose".into()))?;
    let mut acc = first.clone();
    for p in rest {
        acc = compose_pair(&acc, p)?;
    }
    Ok(acc)
}

pub(crate) fn compose_pair(p1: &DistMatrix, p2: &DistMatrix) -> Result<DistMatrix> {
    if p1.col_partition() != p2.row_partition() {
        return Err(Error::PartitionMismatch("prolongator composition"));
    }
    if !p2.is_block_diagonal() {
        return Err(Error::PartitionMismatch("prolongator factor is not block diagonal"));
    }
    let seg = SegmentedCsr::local_only(p2.local(), p2.owned_rows(), p2.global_nrows())?;
    let local = spgemm_local(p1.local(), &seg)?;
    DistMatrix::new(
        Arc::clone(p1.row_partition()),
        Arc::clone(p2.col_partition()),
        p1.rank(),
        local,
    )
}
