//! Flexible preconditioned conjugate gradient.
//!
//! The recurrence keeps `d` (search directions) and `q = A d` explicitly, so
//! each iteration needs one preconditioner application, one SpMV and the
//! three inner products `w^T r`, `w^T v`, `w^T q`. These are reduced together
//! with `||r||^2` in a single allreduce; the vector updates are local.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{DistMatrix, DistVector};
use crate::error::{Error, Result};
use crate::runtime::{CommStats, RankCtx};

/// `r -> B r`, applied collectively by all ranks.
pub trait Preconditioner {
    fn apply(&self, ctx: &RankCtx, r: &DistVector) -> Result<DistVector>;
}

/// `B = I`.
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, _ctx: &RankCtx, r: &DistVector) -> Result<DistVector> {
        Ok(r.clone())
    }
}

/// `B = diag(d)^-1`.
pub struct DiagonalPreconditioner {
    inv: DistVector,
}

impl DiagonalPreconditioner {
    pub fn new(d: &DistVector) -> Result<Self> {
        let mut inv = d.clone();
        for (k, v) in inv.local_mut().iter_mut().enumerate() {
            if *v == 0.0 || !v.is_finite() {
                return Err(Error::SingularSmoother {
                    row: d.partition().range(d.rank()).start + k,
                });
            }
            *v = 1.0 / *v;
        }
        Ok(Self { inv })
    }

    /// Plain Jacobi from the matrix diagonal.
    pub fn jacobi(a: &DistMatrix) -> Result<Self> {
        let first = a.owned_rows().start;
        let d = (0..a.local().nrows())
            .map(|i| a.local().get(i, first + i).unwrap_or(0.0))
            .collect();
        Self::new(&DistVector::from_local(Arc::clone(a.row_partition()), a.rank(), d)?)
    }
}

impl Preconditioner for DiagonalPreconditioner {
    fn apply(&self, _ctx: &RankCtx, r: &DistVector) -> Result<DistVector> {
        if !r.conforms(&self.inv) {
            return Err(Error::PartitionMismatch("diagonal preconditioner"));
        }
        let mut out = r.clone();
        for (o, s) in out.local_mut().iter_mut().zip(self.inv.local()) {
            *o *= s;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub rtol: f64,
    pub max_iters: usize,
    pub precflag: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            max_iters: 1000,
            precflag: true,
        }
    }
}

impl SolveConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol.is_finite()) || self.max_iters == 0 {
            return Err(Error::InvalidCsr(format!(
                "need rtol > 0 and max_iters >= 1, got {} and {}",
                self.rtol, self.max_iters
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_relative_residual: f64,
    /// `||r_i|| / ||r_0||` for `i = 0..=iterations`.
    pub history: Vec<f64>,
    /// Traffic generated by this rank during the solve.
    pub comm: CommStats,
}

/// `b - A u`.
pub fn residual(ctx: &RankCtx, a: &DistMatrix, b: &DistVector, u: &DistVector) -> Result<DistVector> {
    let mut r = a.spmv(ctx, u)?;
    if !r.conforms(b) {
        return Err(Error::PartitionMismatch("residual"));
    }
    for (ri, bi) in r.local_mut().iter_mut().zip(b.local()) {
        *ri = bi - *ri;
    }
    Ok(r)
}

fn local_dots(pairs: &[(&DistVector, &DistVector)]) -> Result<Vec<f64>> {
    pairs.iter().map(|(x, y)| x.local_dot(y)).collect()
}

fn breakdown(iteration: usize, rho: f64) -> Error {
    Error::Breakdown {
        iteration,
        reason: format!("rho = {rho}"),
    }
}

/// Solves `A u = b` from `u0` (zero when absent). Collective.
///
/// Stops once `||r_i|| / ||r_0|| < rtol` or after `max_iters` iterations;
/// hitting the cap is not an error and is reported through
/// [`SolveStats::converged`].
pub fn pcg_solve(
    ctx: &RankCtx,
    a: &DistMatrix,
    b: &DistVector,
    u0: Option<&DistVector>,
    precond: &dyn Preconditioner,
    cfg: &SolveConfig,
) -> Result<(DistVector, SolveStats)> {
    cfg.check()?;
    let stats0 = ctx.stats();
    let mut u = match u0 {
        Some(u) => u.clone(),
        None => DistVector::zeros(Arc::clone(a.col_partition()), ctx.rank()),
    };
    if !u.conforms(b) {
        return Err(Error::PartitionMismatch("pcg operands"));
    }
    let mut r = residual(ctx, a, b, &u)?;
    let w = precond.apply(ctx, &r)?;
    let v = a.spmv(ctx, &w)?;
    let s = ctx.allreduce_sum_slice(&local_dots(&[(&r, &r), (&w, &r), (&w, &v)])?)?;
    let r0 = s[0].sqrt();
    let mut history = vec![1.0];
    let finish = |u: DistVector, iterations: usize, converged: bool, history: Vec<f64>| {
        let stats = SolveStats {
            iterations,
            converged,
            initial_residual: r0,
            final_relative_residual: *history.last().unwrap(),
            history,
            comm: ctx.stats().since(&stats0),
        };
        (u, stats)
    };
    if r0 == 0.0 {
        return Ok(finish(u, 0, true, history));
    }
    let (alpha, mut rho) = (s[1], s[2]);
    if rho == 0.0 || !rho.is_finite() || !alpha.is_finite() {
        return Err(breakdown(0, rho));
    }
    let mut d = w;
    let mut q = v;
    u.axpy(alpha / rho, &d)?;
    r.axpy(-alpha / rho, &q)?;
    let mut iterations = 1;

    loop {
        let w = precond.apply(ctx, &r)?;
        let v = a.spmv(ctx, &w)?;
        let s = ctx.allreduce_sum_slice(&local_dots(&[(&r, &r), (&w, &r), (&w, &v), (&w, &q)])?)?;
        let rel = s[0].sqrt() / r0;
        history.push(rel);
        if rel < cfg.rtol {
            return Ok(finish(u, iterations, true, history));
        }
        if iterations >= cfg.max_iters {
            return Ok(finish(u, iterations, false, history));
        }
        let (alpha, beta, gamma) = (s[1], s[2], s[3]);
        let rho_next = beta - gamma * gamma / rho;
        if rho_next == 0.0 || !rho_next.is_finite() {
            return Err(breakdown(iterations, rho_next));
        }
        let g = gamma / rho;
        let step = alpha / rho_next;
        for (((di, qi), (wi, vi)), (ui, ri)) in d
            .local_mut()
            .iter_mut()
            .zip(q.local_mut().iter_mut())
            .zip(w.local().iter().zip(v.local()))
            .zip(u.local_mut().iter_mut().zip(r.local_mut().iter_mut()))
        {
            *di = wi - g * *di;
            *ui += step * *di;
            *qi = vi - g * *qi;
            *ri -= step * *qi;
        }
        rho = rho_next;
        iterations += 1;
    }
}
