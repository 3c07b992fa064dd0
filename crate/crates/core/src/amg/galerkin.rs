use std::sync::Arc;

use crate::dist::{DistMatrix, RowExchangePlan};
use crate::error::{Error, Result};
use crate::runtime::RankCtx;
use crate::sparse::{spgemm_local, SegmentedCsr};

/// `P^T A P` for a block-diagonal prolongator `P`. Collective.
///
/// Only `C = A P` moves data, since it needs the rows of `P` matching `A`'s
/// off-block columns. The second product `P^T C` reads owned rows of `C`
/// only; see [`rc_product`].
pub fn galerkin_product(ctx: &RankCtx, a: &DistMatrix, p: &DistMatrix) -> Result<DistMatrix> {
    let plan = RowExchangePlan::build(ctx, a)?;
    galerkin_with_plan(ctx, a, p, &plan)
}

/// [`galerkin_product`] with a row exchange plan built in advance for `a`.
pub fn galerkin_with_plan(
    ctx: &RankCtx,
    a: &DistMatrix,
    p: &DistMatrix,
    plan: &RowExchangePlan,
) -> Result<DistMatrix> {
    let c = ap_product(ctx, a, p, plan)?;
    rc_product(p, &c)
}

pub(crate) fn ap_product(
    ctx: &RankCtx,
    a: &DistMatrix,
    p: &DistMatrix,
    plan: &RowExchangePlan,
) -> Result<DistMatrix> {
    if a.col_partition() != p.row_partition() {
        return Err(Error::PartitionMismatch("galerkin: A columns vs P rows"));
    }
    let seg = plan.fetch_rows(ctx, p)?;
    let local = spgemm_local(a.local(), &seg)?;
    DistMatrix::new(
        Arc::clone(a.row_partition()),
        Arc::clone(p.col_partition()),
        ctx.rank(),
        local,
    )
}

/// `P^T C` where `P` is block diagonal and `C` shares its row partition.
///
/// Row `i` of `P^T` only references owned rows of `C`, so this is a purely
/// local product and takes no rank context.
pub fn rc_product(p: &DistMatrix, c: &DistMatrix) -> Result<DistMatrix> {
    if p.row_partition() != c.row_partition() || p.rank() != c.rank() {
        return Err(Error::PartitionMismatch("galerkin: P rows vs C rows"));
    }
    let r = p.transpose_block()?;
    let seg = SegmentedCsr::local_only(c.local(), c.owned_rows(), c.global_nrows())?;
    let local = spgemm_local(r.local(), &seg)?;
    DistMatrix::new(
        Arc::clone(r.row_partition()),
        Arc::clone(c.col_partition()),
        p.rank(),
        local,
    )
}
