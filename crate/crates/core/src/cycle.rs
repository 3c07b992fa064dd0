//! l1-Jacobi relaxation and the symmetric V-cycle.

use serde::{Deserialize, Serialize};

use crate::amg::Hierarchy;
use crate::dist::{DistMatrix, DistVector};
use crate::error::{Error, Result};
use crate::krylov::Preconditioner;
use crate::runtime::RankCtx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub coarsest_sweeps: usize,
    /// Relaxation weight applied to every correction.
    pub omega: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            pre_sweeps: 4,
            post_sweeps: 4,
            coarsest_sweeps: 20,
            omega: 1.0,
        }
    }
}

impl CycleConfig {
    /// Warns when the cycle would not be a symmetric operator.
    pub fn check(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidCsr(format!("relaxation weight {} must be positive", self.omega)));
        }
        if self.pre_sweeps != self.post_sweeps {
            log::warn!(
                "pre_sweeps ({}) != post_sweeps ({}): the V-cycle is not symmetric",
                self.pre_sweeps,
                self.post_sweeps
            );
        }
        Ok(())
    }
}

/// `nu` sweeps of `x <- x + omega D^-1 (r - A x)` from `x0`, or from zero.
///
/// Starting from zero the first sweep is just `omega D^-1 r` and skips the
/// product. Every other sweep does one distributed SpMV.
pub fn l1_jacobi_sweeps(
    ctx: &RankCtx,
    a: &DistMatrix,
    d: &DistVector,
    r: &DistVector,
    x0: Option<DistVector>,
    nu: usize,
    omega: f64,
) -> Result<DistVector> {
    if !d.conforms(r) {
        return Err(Error::PartitionMismatch("jacobi diagonal vs rhs"));
    }
    if let Some(k) = d.local().iter().position(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::SingularSmoother {
            row: d.partition().range(d.rank()).start + k,
        });
    }
    let (mut x, first) = match x0 {
        Some(x) => {
            if !x.conforms(r) {
                return Err(Error::PartitionMismatch("jacobi initial guess"));
            }
            (x, 0)
        }
        None if nu == 0 => return Ok(DistVector::zeros(r.partition().clone(), r.rank())),
        None => {
            let mut x = r.clone();
            for (xi, di) in x.local_mut().iter_mut().zip(d.local()) {
                *xi = omega * *xi / di;
            }
            (x, 1)
        }
    };
    for _ in first..nu {
        let ax = a.spmv(ctx, &x)?;
        for (((xi, ri), axi), di) in x.local_mut().iter_mut().zip(r.local()).zip(ax.local()).zip(d.local()) {
            *xi += omega * (ri - axi) / di;
        }
    }
    Ok(x)
}

/// `B^k r` for level `k` of the hierarchy.
pub fn vcycle_apply(
    ctx: &RankCtx,
    h: &Hierarchy,
    cfg: &CycleConfig,
    r: &DistVector,
    level: usize,
) -> Result<DistVector> {
    let lv = h.level(level)?;
    let (Some(p), Some(rt)) = (&lv.p, &lv.r) else {
        return l1_jacobi_sweeps(ctx, &lv.a, &lv.l1_diag, r, None, cfg.coarsest_sweeps, cfg.omega);
    };
    let mut x = l1_jacobi_sweeps(ctx, &lv.a, &lv.l1_diag, r, None, cfg.pre_sweeps, cfg.omega)?;
    let mut res = lv.a.spmv(ctx, &x)?;
    for (ri, bi) in res.local_mut().iter_mut().zip(r.local()) {
        *ri = bi - *ri;
    }
    let rc = rt.apply_block(&res)?;
    let e = vcycle_apply(ctx, h, cfg, &rc, level + 1)?;
    x.axpy(1.0, &p.apply_block(&e)?)?;
    l1_jacobi_sweeps(ctx, &lv.a, &lv.l1_diag, r, Some(x), cfg.post_sweeps, cfg.omega)
}

/// One V-cycle from the finest level as a preconditioner.
pub struct AmgPreconditioner<'h> {
    hierarchy: &'h Hierarchy,
    cfg: CycleConfig,
}

impl<'h> AmgPreconditioner<'h> {
    pub fn new(hierarchy: &'h Hierarchy, cfg: CycleConfig) -> Result<Self> {
        cfg.check()?;
        Ok(Self { hierarchy, cfg })
    }
}

impl Preconditioner for AmgPreconditioner<'_> {
    fn apply(&self, ctx: &RankCtx, r: &DistVector) -> Result<DistVector> {
        vcycle_apply(ctx, self.hierarchy, &self.cfg, r, 0)
    }
}
