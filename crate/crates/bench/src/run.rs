use std::sync::Arc;
use std::time::Instant;

use matchmg::amg::SetupBreakdown;
use matchmg::krylov::IdentityPreconditioner;
use matchmg::problem::{distribute, gen_poisson7, load_matrix};
use matchmg::runtime::CommStats;
use matchmg::{
    pcg_solve, setup_hierarchy, spawn_ranks, AmgPreconditioner, CsrMatrix, DistVector, Partition, Preconditioner,
    RuntimeConfig, SolveStats,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, Problem, RunConfig};
use crate::report::{CommTotals, PhaseSeconds, PhaseTraffic, RunReport, Timings, Traffic};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] matchmg::Error),
}

enum System {
    Poisson(usize),
    Loaded { a: CsrMatrix, b: Vec<f64> },
}

impl System {
    fn load(cfg: &RunConfig) -> Result<Self, BenchError> {
        Ok(match &cfg.problem {
            Problem::Poisson { nd } => System::Poisson(*nd),
            Problem::File { path } => {
                let a = load_matrix(path)?;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let b = (0..a.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                System::Loaded { a, b }
            }
        })
    }

    fn n(&self) -> usize {
        match self {
            System::Poisson(nd) => nd * nd * nd,
            System::Loaded { a, .. } => a.nrows(),
        }
    }
}

struct RankResult {
    stats: SolveStats,
    levels: Vec<matchmg::amg::LevelInfo>,
    opc: Option<f64>,
    breakdown: SetupBreakdown,
    setup_comm: CommStats,
    nnz: usize,
    t_setup: f64,
    t_solve: f64,
}

/// Builds the system, sets up the hierarchy when `precflag` is on and solves.
pub fn run_benchmark(cfg: &RunConfig, rt: &RuntimeConfig) -> Result<RunReport, BenchError> {
    cfg.validate()?;
    let system = System::load(cfg)?;
    let n = system.n();
    let part = Arc::new(Partition::uniform(n, cfg.ranks));
    let setup_cfg = cfg.setup_config(n);
    let cycle_cfg = cfg.cycle_config();
    let solve_cfg = cfg.solve_config();
    let precflag = cfg.settings.precflag;

    let results = spawn_ranks(cfg.ranks, rt, |ctx| {
        let (a, b) = match &system {
            System::Poisson(nd) => gen_poisson7(ctx, *nd, Arc::clone(&part))?,
            System::Loaded { a, b } => (
                distribute(ctx, a, Arc::clone(&part))?,
                DistVector::from_global(Arc::clone(&part), ctx.rank(), b)?,
            ),
        };
        let nnz = a.global_nnz(ctx)?;

        ctx.barrier()?;
        let (t, s0) = (Instant::now(), ctx.stats());
        let hierarchy = if precflag {
            let w0 = DistVector::filled(Arc::clone(&part), ctx.rank(), 1.0);
            Some(setup_hierarchy(ctx, a.clone(), w0, &setup_cfg)?)
        } else {
            None
        };
        let setup_comm = ctx.stats().since(&s0);
        ctx.barrier()?;
        let t_setup = t.elapsed().as_secs_f64();

        let pc: Box<dyn Preconditioner + '_> = match &hierarchy {
            Some(h) => Box::new(AmgPreconditioner::new(h, cycle_cfg.clone())?),
            None => Box::new(IdentityPreconditioner),
        };
        ctx.barrier()?;
        let t = Instant::now();
        let (_, stats) = pcg_solve(ctx, &a, &b, None, pc.as_ref(), &solve_cfg)?;
        ctx.barrier()?;
        let t_solve = t.elapsed().as_secs_f64();

        Ok(RankResult {
            stats,
            levels: hierarchy.as_ref().map(|h| h.info().to_vec()).unwrap_or_default(),
            opc: hierarchy.as_ref().map(|h| h.opc()),
            breakdown: hierarchy.as_ref().map(|h| *h.breakdown()).unwrap_or_default(),
            setup_comm,
            nnz,
            t_setup,
            t_solve,
        })
    })?;

    let first = &results[0];
    let mut phases = PhaseTraffic::default();
    let mut seconds = PhaseSeconds::default();
    let mut comm = CommTotals::default();
    for r in &results {
        let bd = &r.breakdown;
        for (tr, secs, cost) in [
            (&mut phases.matching, &mut seconds.matching, &bd.matching),
            (&mut phases.spmm, &mut seconds.spmm, &bd.spmm),
            (&mut phases.spmm_comm, &mut seconds.spmm_comm, &bd.spmm_comm),
            (&mut phases.other, &mut seconds.other, &bd.other),
        ] {
            *tr = Traffic {
                messages: tr.messages + cost.messages,
                bytes: tr.bytes + cost.bytes,
            };
            *secs = secs.max(cost.seconds);
        }
        comm.setup = comm.setup.merged(&r.setup_comm);
        comm.solve = comm.solve.merged(&r.stats.comm);
    }
    let st = &first.stats;
    let per_iteration = if st.iterations > 0 {
        first.t_solve / st.iterations as f64
    } else {
        0.0
    };
    Ok(RunReport {
        problem: cfg.problem.clone(),
        ranks: cfg.ranks,
        precflag,
        unknowns: n,
        nnz: first.nnz,
        coarse_size_target: precflag.then_some(setup_cfg.coarse_size_target),
        nl: first.levels.len(),
        levels: first.levels.clone(),
        opc: first.opc,
        iterations: st.iterations,
        converged: st.converged,
        initial_residual: st.initial_residual,
        final_relative_residual: st.final_relative_residual,
        history: st.history.clone(),
        setup_phases: phases,
        comm,
        timings: Timings {
            setup: first.t_setup,
            solve: first.t_solve,
            per_iteration,
            setup_breakdown: seconds,
        },
    })
}
