#![allow(dead_code)]

use matchmg::matching::Matching;
use matchmg::{CsrMatrix, Partition};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-major dense matrix with random entries at the given density.
pub fn random_dense(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize, density: f64) -> Vec<f64> {
    (0..nrows * ncols)
        .map(|_| {
            if rng.gen::<f64>() < density {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect()
}

pub fn random_sparse(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize, density: f64) -> CsrMatrix {
    CsrMatrix::from_dense(nrows, ncols, &random_dense(rng, nrows, ncols, density))
}

/// Random symmetric matrix with a dominant positive diagonal.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, density: f64) -> CsrMatrix {
    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen::<f64>() < density {
                let v = -rng.gen_range(0.1..1.0);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| d[i * n + j].abs()).sum();
        d[i * n + i] = off + rng.gen_range(0.5..2.0);
    }
    CsrMatrix::from_dense(n, n, &d)
}

pub fn dense_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for l in 0..k {
            let x = a[i * k + l];
            if x != 0.0 {
                for j in 0..m {
                    c[i * m + j] += x * b[l * m + j];
                }
            }
        }
    }
    c
}

pub fn dense_transpose(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            t[j * n + i] = a[i * m + j];
        }
    }
    t
}

pub fn dense_matvec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    let m = x.len();
    (0..n).map(|i| (0..m).map(|j| a[i * m + j] * x[j]).sum()).collect()
}

/// Largest entrywise difference relative to the largest reference entry.
pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter()
        .zip(want)
        .fold(0.0f64, |m, (g, w)| m.max((g - w).abs()))
        / scale
}

/// Dense Cholesky factor; `None` when the matrix is not positive definite.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= l[j * n + k] * l[j * n + k];
        }
        if s <= 0.0 {
            return None;
        }
        l[j * n + j] = s.sqrt();
        for i in j + 1..n {
            let mut t = a[i * n + j];
            for k in 0..j {
                t -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = t / l[j * n + j];
        }
    }
    Some(l)
}

pub fn cholesky_solve(l: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Brute-force 7-point Poisson assembly from grid coordinates.
pub fn poisson_dense(nd: usize) -> Vec<f64> {
    let n = nd * nd * nd;
    let mut a = vec![0.0; n * n];
    let id = |i: usize, j: usize, k: usize| i + nd * (j + nd * k);
    for k in 0..nd {
        for j in 0..nd {
            for i in 0..nd {
                let r = id(i, j, k);
                a[r * n + r] = 6.0;
                let nbrs = [
                    (i as i64 - 1, j as i64, k as i64),
                    (i as i64 + 1, j as i64, k as i64),
                    (i as i64, j as i64 - 1, k as i64),
                    (i as i64, j as i64 + 1, k as i64),
                    (i as i64, j as i64, k as i64 - 1),
                    (i as i64, j as i64, k as i64 + 1),
                ];
                for (x, y, z) in nbrs {
                    let inside = |v: i64| v >= 0 && v < nd as i64;
                    if inside(x) && inside(y) && inside(z) {
                        a[r * n + id(x as usize, y as usize, z as usize)] = -1.0;
                    }
                }
            }
        }
    }
    a
}

/// Exhaustive maximum-weight matching by bitmask dynamic programming.
/// `w[i][j]` is `None` for absent edges. Only positive edges can help.
pub fn brute_force_mwm(n: usize, w: &[Vec<Option<f64>>]) -> f64 {
    let full = 1usize << n;
    let mut best = vec![0.0f64; full];
    for mask in 1..full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut b = best[rest];
        for j in i + 1..n {
            if rest & (1 << j) != 0 {
                if let Some(x) = w[i][j] {
                    b = b.max(x + best[rest & !(1 << j)]);
                }
            }
        }
        best[mask] = b;
    }
    best[full - 1]
}

/// Random matching on `n` local vertices.
pub fn random_local_matching(r: &mut ChaCha8Rng, n: usize) -> Matching {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(r);
    let mut mate = vec![None; n];
    for pair in order.chunks(2) {
        if pair.len() == 2 && r.gen::<f64>() < 0.8 {
            mate[pair[0]] = Some(pair[1]);
            mate[pair[1]] = Some(pair[0]);
        }
    }
    Matching::from_mates(mate).unwrap()
}

/// Dense prolongator written straight from the aggregate rules.
pub fn dense_prolongator(mates: &[Matching], w: &[f64], part: &Partition) -> (Vec<f64>, usize) {
    let n = w.len();
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
    for (rank, m) in mates.iter().enumerate() {
        let base = part.range(rank).start;
        for i in 0..m.len() {
            let gi = base + i;
            match m.mate(i) {
                Some(j) if j < i => {}
                Some(j) => {
                    let gj = base + j;
                    let norm = (w[gi] * w[gi] + w[gj] * w[gj]).sqrt();
                    cols.push(vec![(gi, w[gi] / norm), (gj, w[gj] / norm)]);
                }
                None => cols.push(vec![(gi, if w[gi] >= 0.0 { 1.0 } else { -1.0 })]),
            }
        }
    }
    let nc = cols.len();
    let mut p = vec![0.0; n * nc];
    for (c, entries) in cols.iter().enumerate() {
        for &(i, v) in entries {
            p[i * nc + c] = v;
        }
    }
    (p, nc)
}
