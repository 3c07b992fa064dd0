//! Hierarchy setup by decoupled pairwise aggregation.
//!
//! Each pairwise step matches the owned unknowns of every rank on its
//! diagonal block, builds a block-diagonal pairwise prolongator and forms
//! the pairwise coarse operator needed by the next matching. Groups of
//! `aggregation_exponent` steps are composed into one prolongator with
//! aggregates of up to `2^s` unknowns, and the level operators are the
//! Galerkin products with these composed prolongators.

mod galerkin;
mod prolongator;

pub use galerkin::{galerkin_product, galerkin_with_plan, rc_product};
pub use prolongator::{build_pairwise_prolongator, compose_prolongators};

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dist::{DistMatrix, DistVector, RowExchangePlan};
use crate::error::{Error, Result};
use crate::matching::{build_weights, suitor_match, Matching};
use crate::runtime::{CommStats, Partition, RankCtx};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupConfig {
    /// Pairwise steps composed into one level (`s`).
    pub aggregation_exponent: usize,
    /// Coarsening stops once the global size is at most this.
    pub coarse_size_target: usize,
    pub max_levels: usize,
}

impl Default for SetupConfig {
    fn default() -> Self {
        Self {
            aggregation_exponent: 3,
            coarse_size_target: 100,
            max_levels: 40,
        }
    }
}

/// What a matcher sees for one pairwise step on one rank.
pub struct MatchInput<'a> {
    /// Index of the hierarchy level being built.
    pub level: usize,
    /// Pairwise step counted from the start of the setup.
    pub step: usize,
    /// Global index of the first owned row.
    pub first_row: usize,
    /// Owned rows restricted to owned columns, local indices.
    pub block: &'a CsrMatrix,
    pub w: &'a [f64],
}

/// The default matcher: weights from the smooth vector, then Suitor.
pub fn suitor_matcher(input: &MatchInput<'_>) -> Result<Matching> {
    let g = build_weights(input.block, input.w)?;
    Ok(suitor_match(&g))
}

/// Time and traffic attributed to one setup phase on this rank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseCost {
    pub seconds: f64,
    pub messages: u64,
    pub bytes: u64,
}

impl PhaseCost {
    fn add(&mut self, since: Instant, before: &CommStats, after: &CommStats) {
        self.seconds += since.elapsed().as_secs_f64();
        let d = after.since(before);
        self.messages += d.messages;
        self.bytes += d.bytes;
    }
}

/// Setup time split into matching, local SpMM work, SpMM communication and
/// everything else.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SetupBreakdown {
    pub matching: PhaseCost,
    pub spmm: PhaseCost,
    pub spmm_comm: PhaseCost,
    pub other: PhaseCost,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub global_rows: usize,
    pub global_nnz: usize,
    /// Pairwise steps composed into the prolongator leaving this level.
    pub pairwise_steps: usize,
}

/// One level of the hierarchy as seen by one rank.
///
/// The transfer operators are stored on the fine side: `p` maps the next
/// coarser level to this one, and `r = p^T`. Both are absent on the coarsest
/// level.
#[derive(Debug)]
pub struct Level {
    pub a: DistMatrix,
    pub l1_diag: DistVector,
    pub w: DistVector,
    pub p: Option<DistMatrix>,
    pub r: Option<DistMatrix>,
}

#[derive(Debug)]
pub struct Hierarchy {
    levels: Vec<Level>,
    info: Vec<LevelInfo>,
    opc: f64,
    breakdown: SetupBreakdown,
}

impl Hierarchy {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> Result<&Level> {
        self.levels.get(k).ok_or(Error::LevelOutOfRange {
            level: k,
            levels: self.levels.len(),
        })
    }

    pub fn info(&self) -> &[LevelInfo] {
        &self.info
    }

    /// Operator complexity: summed nonzeros of all levels over the finest.
    pub fn opc(&self) -> f64 {
        self.opc
    }

    pub fn breakdown(&self) -> &SetupBreakdown {
        &self.breakdown
    }

    pub fn summary(&self) -> HierarchySummary<'_> {
        HierarchySummary(self)
    }
}

/// Per-level table with the final operator complexity.
pub struct HierarchySummary<'a>(&'a Hierarchy);

impl fmt::Display for HierarchySummary<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5} {:>12} {:>14} {:>8}", "level", "rows", "nnz", "nnz/row")?;
        for (k, l) in self.0.info.iter().enumerate() {
            let per_row = if l.global_rows == 0 {
                0.0
            } else {
                l.global_nnz as f64 / l.global_rows as f64
            };
            writeln!(f, "{:>5} {:>12} {:>14} {:>8.2}", k, l.global_rows, l.global_nnz, per_row)?;
        }
        write!(f, "levels = {}, opc = {:.4}", self.0.info.len(), self.0.opc)
    }
}

/// Builds the hierarchy with the default Suitor matcher. Collective.
pub fn setup_hierarchy(ctx: &RankCtx, a: DistMatrix, w0: DistVector, cfg: &SetupConfig) -> Result<Hierarchy> {
    setup_hierarchy_with(ctx, a, w0, cfg, suitor_matcher)
}

/// Builds the hierarchy with a caller-supplied matcher, for instance one that
/// replays matchings recorded in another run. Collective.
pub fn setup_hierarchy_with<M>(
    ctx: &RankCtx,
    a: DistMatrix,
    w0: DistVector,
    cfg: &SetupConfig,
    mut matcher: M,
) -> Result<Hierarchy>
where
    M: FnMut(&MatchInput<'_>) -> Result<Matching>,
{
    if cfg.aggregation_exponent == 0 || cfg.max_levels == 0 {
        return Err(Error::InvalidCsr(
            "aggregation exponent and level cap must be positive".into(),
        ));
    }
    if !w0.conforms(&DistVector::zeros(Arc::clone(a.row_partition()), a.rank())) {
        return Err(Error::PartitionMismatch("smooth vector"));
    }
    let t_setup = Instant::now();
    let stats_setup = ctx.stats();
    let mut bd = SetupBreakdown::default();
    let mut levels = Vec::new();
    let mut info = Vec::new();
    let mut a_k = a;
    let mut w_k = w0;
    let mut step = 0usize;

    loop {
        let level = levels.len();
        let last = a_k.global_nrows() <= cfg.coarse_size_target || level + 1 >= cfg.max_levels;
        if last {
            info.push(LevelInfo {
                global_rows: a_k.global_nrows(),
                global_nnz: a_k.global_nnz(ctx)?,
                pairwise_steps: 0,
            });
            a_k.halo_plan(ctx)?;
            levels.push(Level {
                l1_diag: a_k.l1_diagonal()?,
                a: a_k,
                w: w_k,
                p: None,
                r: None,
            });
            break;
        }

        let mut p_bar: Option<DistMatrix> = None;
        let mut pairwise: Option<DistMatrix> = None;
        let mut w_step = w_k.clone();
        let mut steps = 0;
        for j in 0..cfg.aggregation_exponent {
            let a_ref = pairwise.as_ref().unwrap_or(&a_k);
            let fine_n = a_ref.global_nrows();
            let needs_pairwise = j + 1 < cfg.aggregation_exponent;

            // post the row requests for A_j P_j before matching
            let (t, s0) = (Instant::now(), ctx.stats());
            let pending = match needs_pairwise {
                true => Some(RowExchangePlan::start(ctx, a_ref)?),
                false => None,
            };
            bd.spmm_comm.add(t, &s0, &ctx.stats());

            let (t, s0) = (Instant::now(), ctx.stats());
            let block = a_ref.diagonal_block();
            let m = matcher(&MatchInput {
                level,
                step,
                first_row: a_ref.owned_rows().start,
                block: &block,
                w: w_step.local(),
            })?;
            let p_local = build_pairwise_prolongator(&m, w_step.local())?;
            bd.matching.add(t, &s0, &ctx.stats());

            let (t, s0) = (Instant::now(), ctx.stats());
            let counts = ctx.allgather_usize(&[p_local.ncols()])?;
            let coarse_part = Arc::new(Partition::from_counts(&counts));
            let coarse_n = coarse_part.global_n();
            let first_col = coarse_part.range(ctx.rank()).start;
            let p = DistMatrix::new(
                Arc::clone(a_ref.row_partition()),
                Arc::clone(&coarse_part),
                ctx.rank(),
                p_local.with_column_offset(first_col, coarse_n)?,
            )?;
            bd.other.add(t, &s0, &ctx.stats());
            if coarse_n == fine_n {
                return Err(Error::Stagnation {
                    level,
                    size: fine_n,
                });
            }
            if (coarse_n as f64) > 0.9 * fine_n as f64 {
                log::warn!(
                    "level {level}: pairwise step {step} only shrank {fine_n} to {coarse_n}"
                );
            }
            step += 1;
            steps += 1;
            let reached = coarse_n <= cfg.coarse_size_target;

            let (t, s0) = (Instant::now(), ctx.stats());
            let plan = pending.map(|pe| pe.complete(ctx)).transpose()?;
            bd.spmm_comm.add(t, &s0, &ctx.stats());

            let (t, s0) = (Instant::now(), ctx.stats());
            let composed = match p_bar.take() {
                None => p.clone(),
                Some(prev) => prolongator::compose_pair(&prev, &p)?,
            };
            p_bar = Some(composed);
            bd.spmm.add(t, &s0, &ctx.stats());

            if reached || !needs_pairwise {
                break;
            }
            let plan = plan.expect("posted above");
            let next = timed_galerkin(ctx, a_ref, &p, &plan, &mut bd)?;
            let (t, s0) = (Instant::now(), ctx.stats());
            w_step = p.transpose_block()?.apply_block(&w_step)?;
            bd.other.add(t, &s0, &ctx.stats());
            pairwise = Some(next);
        }
        drop(pairwise);

        let p_bar = p_bar.expect("at least one pairwise step");
        let (t, s0) = (Instant::now(), ctx.stats());
        let plan = RowExchangePlan::build(ctx, &a_k)?;
        bd.spmm_comm.add(t, &s0, &ctx.stats());
        let a_next = timed_galerkin(ctx, &a_k, &p_bar, &plan, &mut bd)?;

        let (t, s0) = (Instant::now(), ctx.stats());
        let r_bar = p_bar.transpose_block()?;
        let w_next = r_bar.apply_block(&w_k)?;
        info.push(LevelInfo {
            global_rows: a_k.global_nrows(),
            global_nnz: a_k.global_nnz(ctx)?,
            pairwise_steps: steps,
        });
        a_k.halo_plan(ctx)?;
        levels.push(Level {
            l1_diag: a_k.l1_diagonal()?,
            a: a_k,
            w: w_k,
            p: Some(p_bar),
            r: Some(r_bar),
        });
        bd.other.add(t, &s0, &ctx.stats());
        a_k = a_next;
        w_k = w_next;
    }

    let fine_nnz = info[0].global_nnz.max(1) as f64;
    let opc = info.iter().map(|l| l.global_nnz as f64).sum::<f64>() / fine_nnz;
    bd.total_seconds = t_setup.elapsed().as_secs_f64();
    // whatever was not attributed explicitly (allreduces for sizes, plans)
    let total = ctx.stats().since(&stats_setup);
    let counted = bd.matching.messages + bd.spmm.messages + bd.spmm_comm.messages + bd.other.messages;
    let counted_bytes = bd.matching.bytes + bd.spmm.bytes + bd.spmm_comm.bytes + bd.other.bytes;
    bd.other.messages += total.messages - counted;
    bd.other.bytes += total.bytes - counted_bytes;
    bd.other.seconds = (bd.total_seconds - bd.matching.seconds - bd.spmm.seconds - bd.spmm_comm.seconds).max(0.0);
    Ok(Hierarchy {
        levels,
        info,
        opc,
        breakdown: bd,
    })
}

fn timed_galerkin(
    ctx: &RankCtx,
    a: &DistMatrix,
    p: &DistMatrix,
    plan: &RowExchangePlan,
    bd: &mut SetupBreakdown,
) -> Result<DistMatrix> {
    let (t, s0) = (Instant::now(), ctx.stats());
    let seg = plan.fetch_rows(ctx, p)?;
    bd.spmm_comm.add(t, &s0, &ctx.stats());

    let (t, s0) = (Instant::now(), ctx.stats());
    let local = crate::sparse::spgemm_local(a.local(), &seg)?;
    drop(seg);
    let c = DistMatrix::new(
        Arc::clone(a.row_partition()),
        Arc::clone(p.col_partition()),
        ctx.rank(),
        local,
    )?;
    let coarse = rc_product(p, &c)?;
    bd.spmm.add(t, &s0, &ctx.stats());
    Ok(coarse)
}
