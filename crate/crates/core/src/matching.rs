//! Edge weights from a smooth vector and the Suitor half-approximate
//! maximum-weight matching, run on one rank's diagonal block only.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Weight given to edges whose formula evaluates to a non-finite value.
/// Such edges are never proposed to.
pub const CLAMPED_WEIGHT: f64 = -1.0e300;

/// Symmetric weighted adjacency over local vertices, without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    row_ptr: Vec<usize>,
    adj: Vec<usize>,
    weights: Vec<f64>,
    clamped: usize,
}

impl WeightedGraph {
    /// Builds a graph from an undirected edge list. Later duplicates of an
    /// edge overwrite earlier ones; self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidCsr(format!("edge ({u}, {v}) outside {n} vertices")));
            }
            if u == v {
                return Err(Error::InvalidCsr(format!("self-loop at {u}")));
            }
            lists[u].push((v, w));
            lists[v].push((u, w));
        }
        let mut row_ptr = vec![0];
        let (mut adj, mut weights) = (Vec::new(), Vec::new());
        for mut l in lists {
            l.sort_by_key(|&(v, _)| v);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(l.len());
            for (v, w) in l {
                match row.last_mut() {
                    Some(last) if last.0 == v => last.1 = w,
                    _ => row.push((v, w)),
                }
            }
            for (v, w) in row {
                adj.push(v);
                weights.push(w);
            }
            row_ptr.push(adj.len());
        }
        Ok(Self {
            row_ptr,
            adj,
            weights,
            clamped: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.adj.len() / 2
    }

    /// Neighbours of `u` with their edge weights, by increasing index.
    pub fn neighbors(&self, u: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[u]..self.row_ptr[u + 1];
        (&self.adj[span.clone()], &self.weights[span])
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let (adj, w) = self.neighbors(u);
        adj.binary_search(&v).ok().map(|k| w[k])
    }

    /// How many edges were clamped to [`CLAMPED_WEIGHT`].
    pub fn clamped(&self) -> usize {
        self.clamped
    }
}

/// Matching weights on the square local block `a` for smooth vector `w`:
///
/// `w_ij = 1 - 2 a_ij w_i w_j / (a_ii w_i^2 + a_jj w_j^2)`
///
/// `a_ij` is taken from the symmetric part of the block, so the graph is
/// symmetric even when the block is only structurally so. Explicitly stored
/// zeros are not edges. A vanishing numerator over a vanishing denominator
/// gives weight 1; any other non-finite value is clamped.
pub fn build_weights(a: &CsrMatrix, w: &[f64]) -> Result<WeightedGraph> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            op: "build_weights (square block)",
            expected: n,
            got: a.ncols(),
        });
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            op: "build_weights (smooth vector)",
            expected: n,
            got: w.len(),
        });
    }
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).unwrap_or(0.0)).collect();
    let at = a.transpose();
    let mut row_ptr = vec![0];
    let (mut adj, mut weights) = (Vec::new(), Vec::new());
    let mut clamped = 0;
    for i in 0..n {
        // merge row i of A and of A^T into the symmetric part
        let (ca, va) = a.row(i);
        let (ct, vt) = at.row(i);
        let (mut p, mut q) = (0, 0);
        while p < ca.len() || q < ct.len() {
            let (j, s) = match (ca.get(p), ct.get(q)) {
                (Some(&x), Some(&y)) if x == y => {
                    p += 1;
                    q += 1;
                    (x, 0.5 * (va[p - 1] + vt[q - 1]))
                }
                (Some(&x), Some(&y)) if x < y => {
                    p += 1;
                    (x, 0.5 * va[p - 1])
                }
                (Some(&x), None) => {
                    p += 1;
                    (x, 0.5 * va[p - 1])
                }
                (_, Some(&y)) => {
                    q += 1;
                    (y, 0.5 * vt[q - 1])
                }
                (None, None) => unreachable!(),
            };
            if j == i || s == 0.0 {
                continue;
            }
            // evaluate in (smaller, larger) order so both ends agree bitwise
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let num = 2.0 * s * w[lo] * w[hi];
            let den = diag[lo] * w[lo] * w[lo] + diag[hi] * w[hi] * w[hi];
            let mut wt = if num == 0.0 && den == 0.0 {
                1.0
            } else {
                1.0 - num / den
            };
            if !wt.is_finite() {
                wt = CLAMPED_WEIGHT;
                clamped += 1;
            }
            adj.push(j);
            weights.push(wt);
        }
        row_ptr.push(adj.len());
    }
    if clamped > 0 {
        // each undirected edge was seen from both ends
        log::warn!("{} matching weights were non-finite and clamped", clamped / 2);
    }
    Ok(WeightedGraph {
        row_ptr,
        adj,
        weights,
        clamped: clamped / 2,
    })
}

/// A matching as a mate array: `mate[i] = Some(j)` iff `{i, j}` is matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    mate: Vec<Option<usize>>,
}

impl Matching {
    /// Checks the mate array is an involution without fixed points.
    pub fn from_mates(mate: Vec<Option<usize>>) -> Result<Self> {
        let m = Self { mate };
        if let Some(i) = m.first_violation() {
            return Err(Error::InvalidCsr(format!("mate array inconsistent at vertex {i}")));
        }
        Ok(m)
    }

    /// The empty matching on `n` vertices.
    pub fn unmatched(n: usize) -> Self {
        Self {
            mate: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.mate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mate.is_empty()
    }

    pub fn mate(&self, i: usize) -> Option<usize> {
        self.mate[i]
    }

    pub fn mates(&self) -> &[Option<usize>] {
        &self.mate
    }

    fn first_violation(&self) -> Option<usize> {
        let n = self.mate.len();
        (0..n).find(|&i| match self.mate[i] {
            Some(j) => j == i || j >= n || self.mate[j] != Some(i),
            None => false,
        })
    }

    pub fn is_valid(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Matched pairs `(i, j)` with `i < j`, by increasing `i`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mate
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.filter(|&j| i < j).map(|j| (i, j)))
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs().count()
    }

    /// Total weight of the matched edges in `g`.
    pub fn weight(&self, g: &WeightedGraph) -> f64 {
        self.pairs()
            .map(|(i, j)| g.weight(i, j).expect("matched edge must exist"))
            .sum()
    }
}

/// Sequential Suitor matching.
///
/// Every vertex proposes to its heaviest neighbour whose current suitor it
/// beats; a displaced suitor proposes again. Ties go to the smaller index,
/// both when a vertex picks among neighbours and when two suitors compete,
/// which makes the result identical to greedy matching over edges sorted by
/// decreasing weight and then increasing endpoint pair. Clamped edges are
/// ignored.
pub fn suitor_match(g: &WeightedGraph) -> Matching {
    let n = g.n();
    let mut suitor: Vec<Option<usize>> = vec![None; n];
    let mut ws = vec![f64::NEG_INFINITY; n];
    for u in 0..n {
        let mut current = Some(u);
        while let Some(x) = current.take() {
            let mut partner: Option<usize> = None;
            let mut heaviest = f64::NEG_INFINITY;
            let (adj, wts) = g.neighbors(x);
            for (&v, &w) in adj.iter().zip(wts) {
                if w <= CLAMPED_WEIGHT {
                    continue;
                }
                // adj is sorted, so a tie on weight keeps the smaller v
                let beats_suitor = w > ws[v] || (w == ws[v] && suitor[v].is_none_or(|s| x < s));
                if w > heaviest && beats_suitor {
                    heaviest = w;
                    partner = Some(v);
                }
            }
            if let Some(v) = partner {
                let displaced = suitor[v];
                suitor[v] = Some(x);
                ws[v] = heaviest;
                current = displaced;
            }
        }
    }
    let mate = (0..n)
        .map(|v| suitor[v].filter(|&s| suitor[s] == Some(v)))
        .collect();
    Matching { mate }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_weight() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let g = build_weights(&a, &[1.0, 1.0]).unwrap();
        assert_eq!(g.weight(0, 1), Some(1.5));
        assert_eq!(g.weight(1, 0), Some(1.5));
    }

    #[test]
    fn weights_are_scale_invariant_in_w() {
        let a = CsrMatrix::from_dense(3, 3, &[4.0, -1.0, -2.0, -1.0, 3.0, 0.5, -2.0, 0.5, 5.0]);
        let w = [0.3, -1.2, 2.0];
        let g1 = build_weights(&a, &w).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| -4.0 * x).collect();
        let g2 = build_weights(&a, &scaled).unwrap();
        for (x, y) in g1.weights.iter().zip(&g2.weights) {
            assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn stored_zero_is_not_an_edge() {
        let a = CsrMatrix::new(2, 2, vec![0, 2, 4], vec![0, 1, 0, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let g = build_weights(&a, &[1.0, 1.0]).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn non_finite_weights_are_clamped_and_skipped() {
        // zero diagonals with w = 1 give a zero denominator
        let a = CsrMatrix::from_dense(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let g = build_weights(&a, &[1.0, 1.0]).unwrap();
        assert_eq!(g.clamped(), 1);
        assert_eq!(g.weight(0, 1), Some(CLAMPED_WEIGHT));
        assert_eq!(suitor_match(&g).num_pairs(), 0);
    }

    #[test]
    fn zero_over_zero_is_weight_one() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let g = build_weights(&a, &[0.0, 0.0]).unwrap();
        assert_eq!(g.weight(0, 1), Some(1.0));
        assert_eq!(g.clamped(), 0);
    }

    #[test]
    fn single_edge() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 5.0)]).unwrap();
        assert_eq!(suitor_match(&g).mates(), &[Some(1), Some(0)]);
    }

    #[test]
    fn path_picks_heavier_edge() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let m = suitor_match(&g);
        assert_eq!(m.mates(), &[None, Some(2), Some(1)]);
        assert_eq!(m.weight(&g), 2.0);
    }

    #[test]
    fn ties_prefer_smaller_indices() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(suitor_match(&g).mates(), &[Some(1), Some(0), Some(3), Some(2)]);
    }

    #[test]
    fn empty_graph() {
        let g = WeightedGraph::from_edges(0, &[]).unwrap();
        assert!(suitor_match(&g).is_empty());
    }

    #[test]
    fn rejects_bad_mates() {
        assert!(Matching::from_mates(vec![Some(1), None]).is_err());
        assert!(Matching::from_mates(vec![Some(0)]).is_err());
        assert!(Matching::from_mates(vec![Some(1), Some(0)]).is_ok());
    }
}
