mod common;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use common::*;
use matchmg::amg::{
    build_pairwise_prolongator, compose_prolongators, galerkin_product, rc_product, setup_hierarchy,
    setup_hierarchy_with, MatchInput,
};
use matchmg::dist::{spmm_dist, RowExchangePlan};
use matchmg::matching::{build_weights, Matching};
use matchmg::problem::gen_poisson7;
use matchmg::sparse::spgemm_local;
use matchmg::{spawn_ranks, CsrMatrix, DistMatrix, DistVector, Partition, RuntimeConfig, SetupConfig};
use rand::Rng;

fn cfg() -> RuntimeConfig {
    RuntimeConfig::default()
}

#[test]
fn galerkin_matches_dense_oracle() {
    let mut r = rng(31);
    for case in 0..50 {
        let n = r.gen_range(2..=64);
        let p = 1 + case % 3;
        let a = random_spd(&mut r, n, 0.15);
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.2..2.0) * if r.gen::<f64>() < 0.2 { -1.0 } else { 1.0 }).collect();
        let part = Arc::new(Partition::uniform(n, p));
        let mates: Vec<Matching> = (0..p).map(|q| random_local_matching(&mut r, part.extent(q))).collect();
        let out = spawn_ranks(p, &cfg(), |ctx| {
            let rank = ctx.rank();
            let da = DistMatrix::distribute(&a, part.clone(), part.clone(), rank)?;
            let p_loc = build_pairwise_prolongator(&mates[rank], &w[part.range(rank)])?;
            let counts = ctx.allgather_usize(&[p_loc.ncols()])?;
            let coarse = Arc::new(Partition::from_counts(&counts));
            let first = coarse.range(rank).start;
            let dp = DistMatrix::new(part.clone(), coarse.clone(), rank, p_loc.with_column_offset(first, coarse.global_n())?)?;
            galerkin_product(ctx, &da, &dp)?.assemble(ctx)
        })
        .unwrap();
        let (pd, nc) = dense_prolongator(&mates, &w, &part);
        let ap = dense_matmul(&a.to_dense(), &pd, n, n, nc);
        let want = dense_matmul(&dense_transpose(&pd, n, nc), &ap, nc, n, nc);
        assert_eq!((out[0].nrows(), out[0].ncols()), (nc, nc));
        assert!(rel_err(&out[0].to_dense(), &want) <= 1e-12, "case {case}");
    }
}

#[test]
fn second_galerkin_product_sends_nothing() {
    let nd = 8;
    let part = Arc::new(Partition::uniform(nd * nd * nd, 4));
    let out = spawn_ranks(4, &cfg(), |ctx| {
        let (a, _) = gen_poisson7(ctx, nd, part.clone())?;
        let w = vec![1.0; a.local().nrows()];
        let m = matchmg::amg::suitor_matcher(&MatchInput {
            level: 0,
            step: 0,
            first_row: a.owned_rows().start,
            block: &a.diagonal_block(),
            w: &w,
        })?;
        let p_loc = build_pairwise_prolongator(&m, &w)?;
        let counts = ctx.allgather_usize(&[p_loc.ncols()])?;
        let coarse = Arc::new(Partition::from_counts(&counts));
        let first = coarse.range(ctx.rank()).start;
        let p = DistMatrix::new(part.clone(), coarse.clone(), ctx.rank(), p_loc.with_column_offset(first, coarse.global_n())?)?;
        let s0 = ctx.stats();
        let c = spmm_dist(ctx, &a, &p)?;
        let s1 = ctx.stats();
        let _ac = rc_product(&p, &c)?;
        let s2 = ctx.stats();
        Ok((s1.since(&s0).messages, s2.since(&s1).messages))
    })
    .unwrap();
    assert!(out.iter().any(|&(ap, _)| ap > 0));
    assert!(out.iter().all(|&(_, rc)| rc == 0));
}

#[test]
fn composed_galerkin_equals_iterated_pairwise() {
    let mut r = rng(32);
    for case in 0..10 {
        let n = r.gen_range(16..=64);
        let a = random_spd(&mut r, n, 0.2);
        let m1 = random_local_matching(&mut r, n);
        let m1c = m1.clone();
        let out = spawn_ranks(1, &cfg(), |ctx| {
            let part = Arc::new(Partition::uniform(n, 1));
            let da = DistMatrix::square(part.clone(), 0, a.clone())?;
            let w1 = vec![1.0; n];
            let p1 = build_pairwise_prolongator(&m1c, &w1)?;
            let part2 = Arc::new(Partition::uniform(p1.ncols(), 1));
            let dp1 = DistMatrix::new(part.clone(), part2.clone(), 0, p1)?;
            let a2 = galerkin_product(ctx, &da, &dp1)?;
            let w2 = dp1.transpose_block()?.apply_block(&DistVector::filled(part.clone(), 0, 1.0))?;
            let n2 = part2.global_n();
            let mut mate = vec![None; n2];
            for i in (0..n2.saturating_sub(1)).step_by(2) {
                mate[i] = Some(i + 1);
                mate[i + 1] = Some(i);
            }
            let p2 = build_pairwise_prolongator(&Matching::from_mates(mate)?, w2.local())?;
            let part3 = Arc::new(Partition::uniform(p2.ncols(), 1));
            let dp2 = DistMatrix::new(part2, part3, 0, p2)?;
            let iterated = galerkin_product(ctx, &a2, &dp2)?;
            let composed = compose_prolongators(&[dp1, dp2])?;
            let direct = galerkin_product(ctx, &da, &composed)?;
            Ok((iterated.local().to_dense(), direct.local().to_dense()))
        })
        .unwrap();
        let (it, dir) = &out[0];
        assert!(rel_err(dir, it) <= 1e-12, "case {case}");
    }
}

fn poisson_hierarchy_checks(nd: usize, p: usize, target: usize) -> Vec<(usize, usize)> {
    let part = Arc::new(Partition::uniform(nd * nd * nd, p));
    let cfg_setup = SetupConfig {
        coarse_size_target: target,
        ..SetupConfig::default()
    };
    spawn_ranks(p, &cfg(), |ctx| {
        let (a, _) = gen_poisson7(ctx, nd, part.clone())?;
        let h = setup_hierarchy(ctx, a, DistVector::filled(part.clone(), ctx.rank(), 1.0), &cfg_setup)?;
        for lv in h.levels() {
            let Some(pm) = &lv.p else { continue };
            assert!(pm.is_block_diagonal());
            let loc = pm.local();
            // one entry per row
            assert!(loc.row_ptr().windows(2).all(|w| w[1] - w[0] == 1));
            // at most 2^s per column and unit column norms
            let mut col_norm: HashMap<usize, (usize, f64)> = HashMap::new();
            for (&c, &v) in loc.col_idx().iter().zip(loc.values()) {
                let e = col_norm.entry(c).or_default();
                e.0 += 1;
                e.1 += v * v;
            }
            for (_, (cnt, sq)) in col_norm {
                assert!(cnt <= 8);
                assert!((sq - 1.0).abs() <= 1e-14);
            }
            // transpose has the column counts as row counts
            let rt = lv.r.as_ref().unwrap().local();
            assert_eq!(rt.nnz(), loc.nnz());
        }
        // coarse operators are symmetric
        for lv in h.levels() {
            let full = lv.a.assemble(ctx)?;
            let t = full.transpose();
            let scale = full.max_abs();
            for (x, y) in full.to_dense().iter().zip(t.to_dense()) {
                assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
        Ok(h.info().iter().map(|l| (l.global_rows, l.global_nnz)).collect::<Vec<_>>())
    })
    .unwrap()
    .remove(0)
}

#[test]
fn poisson_16_levels_shrink_by_at_least_four() {
    let sizes = poisson_hierarchy_checks(16, 1, 640);
    assert!(sizes.len() >= 2);
    for w in sizes.windows(2) {
        assert!(w[0].0 >= 4 * w[1].0, "{sizes:?}");
    }
    assert!(sizes.last().unwrap().0 <= 640);
}

#[test]
fn poisson_hierarchy_invariants_on_several_ranks() {
    let sizes = poisson_hierarchy_checks(12, 3, 60);
    assert!(sizes.len() >= 2);
}

#[test]
fn diagonal_system_below_target_is_one_level() {
    let out = spawn_ranks(2, &cfg(), |ctx| {
        let part = Arc::new(Partition::uniform(10, 2));
        let a = DistMatrix::distribute(&CsrMatrix::from_diagonal(&[2.0; 10]), part.clone(), part.clone(), ctx.rank())?;
        let h = setup_hierarchy(ctx, a, DistVector::filled(part, ctx.rank(), 1.0), &SetupConfig::default())?;
        Ok((h.num_levels(), h.opc()))
    })
    .unwrap();
    assert!(out.iter().all(|&x| x == (1, 1.0)));
}

#[test]
fn level_cap_is_respected() {
    let nd = 10;
    let part = Arc::new(Partition::uniform(nd * nd * nd, 1));
    let cfg_setup = SetupConfig {
        coarse_size_target: 1,
        max_levels: 2,
        aggregation_exponent: 1,
    };
    let levels = spawn_ranks(1, &cfg(), |ctx| {
        let (a, _) = gen_poisson7(ctx, nd, part.clone())?;
        Ok(setup_hierarchy(ctx, a, DistVector::filled(part.clone(), 0, 1.0), &cfg_setup)?.num_levels())
    })
    .unwrap();
    assert_eq!(levels, vec![2]);
}

#[test]
fn coarse_operator_and_smooth_vector_are_consistent() {
    // A_c w_c equals P^T A (P w_c) computed densely
    let nd = 4;
    let n = 64;
    let part = Arc::new(Partition::uniform(n, 1));
    let cfg_setup = SetupConfig {
        coarse_size_target: 8,
        aggregation_exponent: 1,
        ..SetupConfig::default()
    };
    let out = spawn_ranks(1, &cfg(), |ctx| {
        let (a, _) = gen_poisson7(ctx, nd, part.clone())?;
        let h = setup_hierarchy(ctx, a, DistVector::filled(part.clone(), 0, 1.0), &cfg_setup)?;
        let l0 = &h.levels()[0];
        let l1 = &h.levels()[1];
        Ok((
            l0.a.local().to_dense(),
            l0.p.as_ref().unwrap().local().to_dense(),
            l1.a.local().to_dense(),
            l1.w.local().to_vec(),
        ))
    })
    .unwrap();
    let (a, p, ac, wc) = &out[0];
    let nc = wc.len();
    let pw = dense_matvec(p, wc, n);
    let apw = dense_matvec(a, &pw, n);
    let want = dense_matvec(&dense_transpose(p, n, nc), &apw, nc);
    let got = dense_matvec(ac, wc, nc);
    assert!(rel_err(&got, &want) <= 1e-12);
}

/// Serial reference: greedy matching on library weights, plain CSR products.
fn serial_reference(a: &CsrMatrix, s: usize, target: usize) -> Vec<CsrMatrix> {
    let mut levels = vec![a.clone()];
    let mut a_k = a.clone();
    let mut w_k = vec![1.0; a.nrows()];
    while a_k.nrows() > target {
        let mut p_bar: Option<CsrMatrix> = None;
        let mut a_step = a_k.clone();
        let mut w_step = w_k.clone();
        for j in 0..s {
            let g = build_weights(&a_step, &w_step).unwrap();
            let mut edges = Vec::new();
            for u in 0..g.n() {
                let (adj, wt) = g.neighbors(u);
                for (&v, &x) in adj.iter().zip(wt) {
                    if u < v {
                        edges.push((u, v, x));
                    }
                }
            }
            edges.sort_by(|x, y| y.2.partial_cmp(&x.2).unwrap().then((x.0, x.1).cmp(&(y.0, y.1))));
            let mut mate = vec![None; g.n()];
            for (u, v, _) in edges {
                if mate[u].is_none() && mate[v].is_none() {
                    mate[u] = Some(v);
                    mate[v] = Some(u);
                }
            }
            let p = build_pairwise_prolongator(&Matching::from_mates(mate).unwrap(), &w_step).unwrap();
            let pt = p.transpose();
            p_bar = Some(match p_bar {
                None => p.clone(),
                Some(prev) => spgemm_local(&prev, &p).unwrap(),
            });
            if p.ncols() <= target || j + 1 == s {
                break;
            }
            a_step = spgemm_local(&pt, &spgemm_local(&a_step, &p).unwrap()).unwrap();
            w_step = pt.spmv(&w_step).unwrap();
        }
        let p_bar = p_bar.unwrap();
        let r = p_bar.transpose();
        let a_next = spgemm_local(&r, &spgemm_local(&a_k, &p_bar).unwrap()).unwrap();
        w_k = r.spmv(&w_k).unwrap();
        a_k = a_next;
        levels.push(a_k.clone());
    }
    levels
}

#[test]
fn single_rank_hierarchy_equals_serial_reference() {
    let nd = 14;
    let spec = matchmg::problem::PoissonSpec::new(nd).unwrap();
    let a = spec.assemble().unwrap();
    let want = serial_reference(&a, 3, 100);
    let part = Arc::new(Partition::uniform(a.nrows(), 1));
    let cfg_setup = SetupConfig {
        coarse_size_target: 100,
        ..SetupConfig::default()
    };
    let got = spawn_ranks(1, &cfg(), |ctx| {
        let (da, _) = gen_poisson7(ctx, nd, part.clone())?;
        let h = setup_hierarchy(ctx, da, DistVector::filled(part.clone(), 0, 1.0), &cfg_setup)?;
        Ok(h.levels().iter().map(|l| l.a.local().clone()).collect::<Vec<_>>())
    })
    .unwrap()
    .remove(0);
    assert_eq!(got.len(), want.len());
    for (k, (g, w)) in got.iter().zip(&want).enumerate() {
        assert_eq!(g, w, "level {k}");
    }
}

type Recorded = HashMap<usize, Vec<(usize, usize)>>;

fn hierarchy_with_replay(nd: usize, p: usize, record: Option<&Mutex<Recorded>>, replay: Option<&Recorded>) -> Vec<CsrMatrix> {
    let part = Arc::new(Partition::uniform(nd * nd * nd, p));
    let cfg_setup = SetupConfig {
        coarse_size_target: 40 * nd,
        ..SetupConfig::default()
    };
    spawn_ranks(p, &cfg(), |ctx| {
        let (a, _) = gen_poisson7(ctx, nd, part.clone())?;
        let matcher = |input: &MatchInput<'_>| {
            let n = input.block.nrows();
            let base = input.first_row;
            if let Some(rep) = replay {
                let mut mate = vec![None; n];
                for &(gi, gj) in &rep[&input.step] {
                    if gi >= base && gj < base + n {
                        mate[gi - base] = Some(gj - base);
                        mate[gj - base] = Some(gi - base);
                    }
                }
                return Matching::from_mates(mate);
            }
            let m = matchmg::amg::suitor_matcher(input)?;
            if let Some(rec) = record {
                rec.lock()
                    .unwrap()
                    .entry(input.step)
                    .or_default()
                    .extend(m.pairs().map(|(i, j)| (base + i, base + j)));
            }
            Ok(m)
        };
        let h = setup_hierarchy_with(ctx, a, DistVector::filled(part.clone(), ctx.rank(), 1.0), &cfg_setup, matcher)?;
        h.levels().iter().map(|l| l.a.assemble(ctx)).collect::<matchmg::Result<Vec<_>>>()
    })
    .unwrap()
    .remove(0)
}

#[test]
fn replayed_matching_gives_identical_coarse_operators_across_ranks() {
    let nd = 24;
    let rec = Mutex::new(Recorded::new());
    let four = hierarchy_with_replay(nd, 4, Some(&rec), None);
    let rec = rec.into_inner().unwrap();
    for p in [1, 2] {
        let other = hierarchy_with_replay(nd, p, None, Some(&rec));
        assert_eq!(other.len(), four.len());
        for (k, (x, y)) in other.iter().zip(&four).enumerate() {
            assert_eq!(x, y, "p={p} level {k}");
        }
    }
}

#[test]
fn matching_phase_sends_no_messages() {
    let nd = 12;
    let part = Arc::new(Partition::uniform(nd * nd * nd, 4));
    let out = spawn_ranks(4, &cfg(), |ctx| {
        let (a, _) = gen_poisson7(ctx, nd, part.clone())?;
        let h = setup_hierarchy(
            ctx,
            a,
            DistVector::filled(part.clone(), ctx.rank(), 1.0),
            &SetupConfig {
                coarse_size_target: 50,
                ..SetupConfig::default()
            },
        )?;
        Ok(*h.breakdown())
    })
    .unwrap();
    for bd in out {
        assert_eq!(bd.matching.messages, 0);
        assert!(bd.spmm_comm.messages > 0);
        assert_eq!(bd.spmm.messages, 0);
    }
}

#[test]
fn row_requests_can_be_posted_before_matching() {
    let nd = 6;
    let part = Arc::new(Partition::uniform(nd * nd * nd, 2));
    let out = spawn_ranks(2, &cfg(), |ctx| {
        let (a, _) = gen_poisson7(ctx, nd, part.clone())?;
        let pending = RowExchangePlan::start(ctx, &a)?;
        let w = vec![1.0; a.local().nrows()];
        let m = matchmg::amg::suitor_matcher(&MatchInput {
            level: 0,
            step: 0,
            first_row: a.owned_rows().start,
            block: &a.diagonal_block(),
            w: &w,
        })?;
        let plan = pending.complete(ctx)?;
        let p_loc = build_pairwise_prolongator(&m, &w)?;
        let counts = ctx.allgather_usize(&[p_loc.ncols()])?;
        let coarse = Arc::new(Partition::from_counts(&counts));
        let first = coarse.range(ctx.rank()).start;
        let p = DistMatrix::new(part.clone(), coarse.clone(), ctx.rank(), p_loc.with_column_offset(first, coarse.global_n())?)?;
        let overlapped = matchmg::amg::galerkin_with_plan(ctx, &a, &p, &plan)?;
        let plain = galerkin_product(ctx, &a, &p)?;
        Ok(overlapped.local() == plain.local())
    })
    .unwrap();
    assert!(out.iter().all(|&x| x));
}
