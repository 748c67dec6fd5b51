//! QUBO encodings of MaxCut, MIS and TSP, and their relaxed losses.
//!
//! Coefficients are kept as canonical upper-triangular triplets `(i, j, q)`
//! with `i <= j`; the full symmetric matrix is implied, and on binary `x` the
//! loss is `x^T Q x + offset`. A diagonal entry usually stands for a linear
//! term folded in through `x_i^2 = x_i`. On relaxed `x` the loss unfolds it
//! again: each variable carries the part of `Q_ii` that is a genuine square
//! (`square[i]`), and the remainder is applied linearly:
//!
//! ```text
//! sum_{i != j} Q_ij x_i x_j + sum_i (square_i x_i^2 + (Q_ii - square_i) x_i) + offset
//! ```
//!
//! so the relaxation is the problem's own objective evaluated at `x`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::decode::is_permutation;
use crate::error::{Error, Result};
use crate::graph::{GraphSnapshot, ProblemKind};

/// Default MIS penalty.
pub const DEFAULT_MIS_PENALTY: f64 = 2.0;

/// Problem data needed to turn a discrete solution back into natural units.
#[derive(Clone, Debug)]
pub enum QuboMeta {
    Graph { node_count: usize, edges: Vec<(usize, usize, f64)> },
    Tour { n: usize, dist: Vec<Vec<f64>> },
}

#[derive(Clone, Debug)]
pub struct QuboInstance {
    dim: usize,
    problem: ProblemKind,
    penalty: f64,
    offset: f64,
    entries: Vec<(usize, usize, f64)>,
    /// Off-diagonal part of the symmetric matrix.
    csr: Csr,
    diag: Vec<f64>,
    square: Vec<f64>,
    meta: QuboMeta,
}

#[derive(Clone, Debug)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_upper(dim: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; dim];
        for &(i, j, _) in entries.iter().filter(|e| e.0 != e.1) {
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut row_ptr = vec![0usize; dim + 1];
        for r in 0..dim {
            row_ptr[r + 1] = row_ptr[r] + counts[r];
        }
        let nnz = row_ptr[dim];
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut fill = row_ptr.clone();
        let mut put = |r: usize, c: usize, v: f64| {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        };
        for &(i, j, q) in entries.iter().filter(|e| e.0 != e.1) {
            put(i, j, q);
            put(j, i, q);
        }
        Csr { row_ptr, cols, vals }
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}

/// Accumulates symmetric contributions keyed by the canonical pair.
#[derive(Default)]
struct Builder {
    map: BTreeMap<(usize, usize), f64>,
}

impl Builder {
    /// Adds `c * x_a * x_b` to the quadratic form.
    fn add_term(&mut self, a: usize, b: usize, c: f64) {
        if a == b {
            *self.map.entry((a, a)).or_insert(0.0) += c;
        } else {
            // Split evenly over Q_ab and Q_ba.
            *self.map.entry((a.min(b), a.max(b))).or_insert(0.0) += c / 2.0;
        }
    }

    fn finish(self) -> Vec<(usize, usize, f64)> {
        self.map.into_iter().filter(|&(_, q)| q != 0.0).map(|((i, j), q)| (i, j, q)).collect()
    }
}

impl QuboInstance {
    fn assemble(
        dim: usize,
        problem: ProblemKind,
        penalty: f64,
        offset: f64,
        entries: Vec<(usize, usize, f64)>,
        square: Vec<f64>,
        meta: QuboMeta,
    ) -> Self {
        debug_assert_eq!(square.len(), dim);
        let csr = Csr::from_upper(dim, &entries);
        let mut diag = vec![0.0; dim];
        for &(i, _, q) in entries.iter().filter(|e| e.0 == e.1) {
            diag[i] = q;
        }
        QuboInstance { dim, problem, penalty, offset, entries, csr, diag, square, meta }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn problem(&self) -> ProblemKind {
        self.problem
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Constant added to `x^T Q x` so losses match the unexpanded objective.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Upper-triangular coefficients `(i, j, Q_ij)` with `i <= j`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn meta(&self) -> &QuboMeta {
        &self.meta
    }

    /// `Q_ij`, reading the symmetric matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (i.min(j), i.max(j));
        self.entries.binary_search_by(|&(p, q, _)| (p, q).cmp(&(a, b))).map(|k| self.entries[k].2).unwrap_or(0.0)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: len });
        }
        Ok(())
    }

    /// Genuine square coefficient of each variable's diagonal entry.
    pub fn square(&self) -> &[f64] {
        &self.square
    }

    /// Relaxed loss, in O(nnz). Equals `x^T Q x + offset` on binary `x`.
    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut acc = 0.0;
        for &(i, j, q) in &self.entries {
            if i != j {
                acc += 2.0 * q * x[i] * x[j];
            }
        }
        for ((&xi, &d), &s) in x.iter().zip(&self.diag).zip(&self.square) {
            acc += s * xi * xi + (d - s) * xi;
        }
        Ok(acc + self.offset)
    }

    /// Gradient of [`loss`](Self::loss): `2 Q' x + 2 s x + (diag - s)` with
    /// `Q'` the off-diagonal part.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut g = vec![0.0; self.dim];
        self.csr.mul(x, &mut g);
        for (k, v) in g.iter_mut().enumerate() {
            let s = self.square[k];
            *v = 2.0 * *v + 2.0 * s * x[k] + self.diag[k] - s;
        }
        Ok(g)
    }

    /// Loss and gradient in one pass over the CSR structure.
    pub fn loss_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x.len())?;
        let mut qx = vec![0.0; self.dim];
        self.csr.mul(x, &mut qx);
        let mut loss = self.offset;
        let mut grad = Vec::with_capacity(self.dim);
        for (k, (&xk, &off)) in x.iter().zip(&qx).enumerate() {
            let (d, s) = (self.diag[k], self.square[k]);
            loss += xk * off + s * xk * xk + (d - s) * xk;
            grad.push(2.0 * off + 2.0 * s * xk + d - s);
        }
        Ok((loss, grad))
    }

    /// Coordinate-format text: an `N nnz` header, then `i j value` per
    /// stored upper-triangular entry.
    pub fn to_coo_text(&self) -> String {
        let mut out = format!("{} {}\n", self.dim, self.entries.len());
        for &(i, j, q) in &self.entries {
            let _ = writeln!(out, "{i} {j} {q}");
        }
        out
    }

    /// Natural objective of a discrete solution: cut weight for MaxCut,
    /// set size for MIS (which must be violation-free), tour length for TSP
    /// (`solution` is then the visiting order).
    pub fn natural_objective(&self, solution: &[usize]) -> Result<f64> {
        match (&self.meta, self.problem) {
            (QuboMeta::Graph { node_count, edges }, ProblemKind::MaxCut) => {
                self.check_dim(solution.len())?;
                debug_assert_eq!(*node_count, solution.len());
                Ok(cut_weight(edges, solution))
            }
            (QuboMeta::Graph { edges, .. }, ProblemKind::Mis) => {
                self.check_dim(solution.len())?;
                if let Some(&(i, j, _)) = edges.iter().find(|&&(i, j, _)| solution[i] == 1 && solution[j] == 1) {
                    return Err(Error::invalid(format!("independent set violates edge ({i}, {j}); repair it first")));
                }
                Ok(solution.iter().filter(|&&b| b == 1).count() as f64)
            }
            (QuboMeta::Tour { n, dist }, ProblemKind::Tsp) => {
                if !is_permutation(solution, *n) {
                    return Err(Error::invalid("tour is not a permutation of the nodes"));
                }
                Ok(tour_length(dist, solution))
            }
            _ => unreachable!("meta always matches the problem kind"),
        }
    }
}

pub fn cut_weight(edges: &[(usize, usize, f64)], side: &[usize]) -> f64 {
    edges.iter().filter(|&&(i, j, _)| side[i] != side[j]).map(|&(_, _, w)| w).sum()
}

/// Closed tour length visiting `order` and returning to its first node.
pub fn tour_length(dist: &[Vec<f64>], order: &[usize]) -> f64 {
    let n = order.len();
    (0..n).map(|k| dist[order[k]][order[(k + 1) % n]]).sum()
}

/// MaxCut: `sum over edges of w (2 x_i x_j - x_i - x_j)`, with the linear
/// terms folded onto the diagonal via `x_i^2 = x_i`.
pub fn build_maxcut_qubo(g: &GraphSnapshot) -> QuboInstance {
    let mut b = Builder::default();
    for (i, j, w) in g.weighted_edges() {
        b.add_term(i, j, 2.0 * w);
        b.add_term(i, i, -w);
        b.add_term(j, j, -w);
    }
    let n = g.node_count();
    let meta = QuboMeta::Graph { node_count: n, edges: g.weighted_edges().collect() };
    QuboInstance::assemble(n, ProblemKind::MaxCut, 0.0, 0.0, b.finish(), vec![0.0; n], meta)
}

/// MIS: `-sum x_i + m * sum over edges x_i x_j`.
pub fn build_mis_qubo(g: &GraphSnapshot, penalty: f64) -> Result<QuboInstance> {
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::invalid(format!("MIS penalty must be positive, got {penalty}")));
    }
    let mut b = Builder::default();
    for i in 0..g.node_count() {
        b.add_term(i, i, -1.0);
    }
    for &(i, j) in g.edges() {
        b.add_term(i, j, penalty);
    }
    let n = g.node_count();
    let meta = QuboMeta::Graph { node_count: n, edges: g.weighted_edges().collect() };
    Ok(QuboInstance::assemble(n, ProblemKind::Mis, penalty, 0.0, b.finish(), vec![0.0; n], meta))
}

/// Twice the largest distance, the default TSP penalty.
pub fn default_tsp_penalty(dist: &[Vec<f64>]) -> f64 {
    2.0 * dist.iter().flatten().cloned().fold(0.0, f64::max)
}

/// TSP over a flattened `n x n` assignment, `x[i * n + v] = 1` meaning node
/// `i` is visited at step `v`:
///
/// ```text
/// sum_{i != j} w_ij sum_v X_iv X_j(v+1)  +  M sum_i (1 - sum_v X_iv)^2
///                                        +  M sum_v (1 - sum_i X_iv)^2
/// ```
///
/// with the step index taken modulo `n`. Expanding the squares leaves the
/// constant `2 M n`, carried as the instance offset. Every variable sits in
/// one row square and one column square, so `2 M` of its diagonal is a true
/// square.
pub fn build_tsp_qubo(dist: &[Vec<f64>], penalty: f64) -> Result<QuboInstance> {
    let n = dist.len();
    if n < 2 {
        return Err(Error::invalid("TSP needs at least two nodes"));
    }
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::invalid(format!("TSP penalty must be positive, got {penalty}")));
    }
    for (i, row) in dist.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        if row[i] != 0.0 {
            return Err(Error::invalid("distance matrix must have a zero diagonal"));
        }
        for (j, &w) in row.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("distance ({i}, {j}) is {w}")));
            }
            if w != dist[j][i] {
                return Err(Error::invalid(format!("distance matrix asymmetric at ({i}, {j})")));
            }
        }
    }

    let idx = |i: usize, v: usize| i * n + v;
    let mut b = Builder::default();
    for i in 0..n {
        for j in 0..n {
            if i == j || dist[i][j] == 0.0 {
                continue;
            }
            for v in 0..n {
                b.add_term(idx(i, v), idx(j, (v + 1) % n), dist[i][j]);
            }
        }
    }
    // (1 - s)^2 = 1 - 2 s + s^2; on binaries the -2 x + x^2 pair gives -x,
    // once from the row penalty and once from the column penalty.
    for line in 0..n {
        for a in 0..n {
            b.add_term(idx(line, a), idx(line, a), -2.0 * penalty);
            for c in a + 1..n {
                b.add_term(idx(line, a), idx(line, c), 2.0 * penalty);
                b.add_term(idx(a, line), idx(c, line), 2.0 * penalty);
            }
        }
    }
    let offset = 2.0 * penalty * n as f64;
    let meta = QuboMeta::Tour { n, dist: dist.to_vec() };
    let square = vec![2.0 * penalty; n * n];
    Ok(QuboInstance::assemble(n * n, ProblemKind::Tsp, penalty, offset, b.finish(), square, meta))
}

/// Builds the QUBO for one snapshot of a dynamic problem. `penalty = None`
/// selects the default (2 for MIS, twice the largest distance for TSP).
pub fn build_for(problem: ProblemKind, g: &GraphSnapshot, penalty: Option<f64>) -> Result<QuboInstance> {
    match problem {
        ProblemKind::MaxCut => Ok(build_maxcut_qubo(g)),
        ProblemKind::Mis => build_mis_qubo(g, penalty.unwrap_or(DEFAULT_MIS_PENALTY)),
        ProblemKind::Tsp => {
            let dist = g.distance_matrix();
            let m = penalty.unwrap_or_else(|| default_tsp_penalty(&dist));
            build_tsp_qubo(&dist, m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn edge() -> GraphSnapshot {
        GraphSnapshot::unweighted(2, vec![(0, 1)]).unwrap()
    }

    fn triangle() -> GraphSnapshot {
        GraphSnapshot::unweighted(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn dense(q: &QuboInstance) -> Vec<Vec<f64>> {
        let n = q.dim();
        let mut m = vec![vec![0.0; n]; n];
        for &(i, j, v) in q.entries() {
            m[i][j] = v;
            m[j][i] = v;
        }
        m
    }

    #[test]
    fn maxcut_single_edge_matrix() {
        let q = build_maxcut_qubo(&edge());
        assert_eq!(dense(&q), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        assert_eq!(q.loss(&[1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(q.natural_objective(&[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn maxcut_relaxed_loss_keeps_linear_terms_linear() {
        // 2(.25) - .5 - .5
        let q = build_maxcut_qubo(&edge());
        assert_eq!(q.loss(&[0.5, 0.5]).unwrap(), -0.5);
        assert_eq!(q.loss(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(q.grad(&[0.0, 0.0]).unwrap(), vec![-1.0, -1.0]);
    }

    #[test]
    fn tsp_relaxed_loss_is_the_expanded_objective() {
        let dist = vec![vec![0.0, 3.0, 4.0], vec![3.0, 0.0, 5.0], vec![4.0, 5.0, 0.0]];
        let m = 10.0;
        let q = build_tsp_qubo(&dist, m).unwrap();
        let mut rng = crate::seed::rng(5);
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        let n = 3;
        let mut direct = 0.0;
        for i in 0..n {
            for j in 0..n {
                for v in 0..n {
                    direct += dist[i][j] * x[i * n + v] * x[j * n + (v + 1) % n];
                }
            }
        }
        for k in 0..n {
            let row: f64 = (0..n).map(|v| x[k * n + v]).sum();
            let col: f64 = (0..n).map(|i| x[i * n + k]).sum();
            direct += m * (1.0 - row).powi(2) + m * (1.0 - col).powi(2);
        }
        assert!((q.loss(&x).unwrap() - direct).abs() < 1e-9);
        // Uniform 1/n rows and columns pay no penalty.
        let u = vec![1.0 / 3.0; 9];
        let tour: f64 = dist.iter().flatten().sum::<f64>() / 3.0;
        assert!((q.loss(&u).unwrap() - tour).abs() < 1e-9);
    }

    #[test]
    fn maxcut_empty_graph_is_zero() {
        let g = GraphSnapshot::unweighted(4, vec![]).unwrap();
        let q = build_maxcut_qubo(&g);
        assert!(q.entries().is_empty());
        assert_eq!(q.loss(&[1.0, 0.3, 0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn maxcut_triangle_brute_force() {
        let q = build_maxcut_qubo(&triangle());
        assert_eq!(q.loss(&[1.0, 0.0, 0.0]).unwrap(), -2.0);
        assert_eq!(q.natural_objective(&[1, 0, 0]).unwrap(), 2.0);
        let best = (0..8u32)
            .map(|m| {
                let x: Vec<f64> = (0..3).map(|k| ((m >> k) & 1) as f64).collect();
                q.loss(&x).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, -2.0);
    }

    #[test]
    fn mis_single_edge() {
        let q = build_mis_qubo(&edge(), 2.0).unwrap();
        assert_eq!(q.loss(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(q.loss(&[1.0, 0.0]).unwrap(), -1.0);
        assert!(q.natural_objective(&[1, 1]).is_err());
        assert!(build_mis_qubo(&edge(), 0.0).is_err());
        assert!(build_mis_qubo(&edge(), -1.0).is_err());
    }

    #[test]
    fn mis_empty_graph() {
        let g = GraphSnapshot::unweighted(5, vec![]).unwrap();
        let q = build_mis_qubo(&g, 2.0).unwrap();
        assert_eq!(q.loss(&[1.0; 5]).unwrap(), -5.0);
        assert_eq!(q.natural_objective(&[1; 5]).unwrap(), 5.0);
    }

    fn permutation_matrix(order: &[usize]) -> Vec<f64> {
        let n = order.len();
        let mut x = vec![0.0; n * n];
        for (v, &i) in order.iter().enumerate() {
            x[i * n + v] = 1.0;
        }
        x
    }

    #[test]
    fn tsp_unit_triangle() {
        let dist = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let q = build_tsp_qubo(&dist, 2.0).unwrap();
        assert_eq!(q.offset(), 12.0);
        assert_eq!(q.loss(&permutation_matrix(&[0, 1, 2])).unwrap(), 3.0);
        assert_eq!(q.loss(&[0.0; 9]).unwrap(), 2.0 * 2.0 * 3.0);
        assert_eq!(q.natural_objective(&[2, 0, 1]).unwrap(), 3.0);
        assert!(q.natural_objective(&[0, 0, 1]).is_err());
    }

    #[test]
    fn tsp_two_nodes_counts_both_directions() {
        let dist = vec![vec![0.0, 7.0], vec![7.0, 0.0]];
        let q = build_tsp_qubo(&dist, 20.0).unwrap();
        assert_eq!(q.loss(&permutation_matrix(&[0, 1])).unwrap(), 14.0);
        assert_eq!(q.loss(&permutation_matrix(&[1, 0])).unwrap(), 14.0);
    }

    #[test]
    fn tsp_rejects_bad_distances() {
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(build_tsp_qubo(&asym, 1.0).is_err());
        let neg = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(build_tsp_qubo(&neg, 1.0).is_err());
        let ok = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(build_tsp_qubo(&ok, 0.0).is_err());
    }

    #[test]
    fn gradient_on_a_single_edge() {
        let q = build_maxcut_qubo(&edge());
        assert_eq!(q.grad(&[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(q.grad(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert!(q.grad(&[1.0]).is_err());
        assert!(q.loss(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = crate::seed::rng(11);
        let n = 5;
        let mut b = Builder::default();
        for i in 0..n {
            for j in i..n {
                b.add_term(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let meta = QuboMeta::Graph { node_count: n, edges: vec![] };
        let square = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = QuboInstance::assemble(n, ProblemKind::MaxCut, 0.0, 0.0, b.finish(), square, meta);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let g = q.grad(&x).unwrap();
        let h = 1e-5;
        for k in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let fd = (q.loss(&xp).unwrap() - q.loss(&xm).unwrap()) / (2.0 * h);
            let rel = (fd - g[k]).abs() / g[k].abs().max(fd.abs()).max(1e-12);
            assert!(rel < 1e-6, "component {k}: analytic {} vs fd {fd}", g[k]);
        }
        let (l, g2) = q.loss_and_grad(&x).unwrap();
        assert!((l - q.loss(&x).unwrap()).abs() < 1e-12);
        assert_eq!(g, g2);
    }

    #[test]
    fn coo_export_has_header() {
        let q = build_maxcut_qubo(&triangle());
        let text = q.to_coo_text();
        assert!(text.starts_with("3 6\n"));
        assert_eq!(text.lines().count(), 7);
    }

    proptest! {
        #[test]
        fn binary_identities(n in 2usize..9, seed in any::<u64>()) {
            let mut rng = crate::seed::rng(seed);
            let mut edges = vec![];
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.4) {
                        edges.push((i, j));
                    }
                }
            }
            let g = GraphSnapshot::unweighted(n, edges.clone()).unwrap();
            let mc = build_maxcut_qubo(&g);
            let mis = build_mis_qubo(&g, 2.0).unwrap();
            for m in 0..(1u32 << n) {
                let bits: Vec<usize> = (0..n).map(|k| ((m >> k) & 1) as usize).collect();
                let x: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
                let cut = edges.iter().filter(|&&(i, j)| bits[i] != bits[j]).count() as f64;
                let viol = edges.iter().filter(|&&(i, j)| bits[i] == 1 && bits[j] == 1).count() as f64;
                let size = bits.iter().sum::<usize>() as f64;
                prop_assert_eq!(mc.loss(&x).unwrap(), -cut);
                prop_assert_eq!(mis.loss(&x).unwrap(), -size + 2.0 * viol);
            }
            for &(i, j, _) in mc.entries() {
                prop_assert!(i <= j);
            }
        }

        #[test]
        fn invalid_assignments_pay_at_least_one_penalty(seed in any::<u64>()) {
            let mut rng = crate::seed::rng(seed);
            let n = 4;
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0))).collect();
            let dist: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt().round()).collect()).collect();
            let m = default_tsp_penalty(&dist).max(1.0);
            let q = build_tsp_qubo(&dist, m).unwrap();
            let bits: Vec<f64> = (0..n * n).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
            let mut tour_term = 0.0;
            for i in 0..n { for j in 0..n { for v in 0..n {
                tour_term += dist[i][j] * bits[i * n + v] * bits[j * n + (v + 1) % n];
            }}}
            let rows_ok = (0..n).all(|i| (0..n).map(|v| bits[i * n + v]).sum::<f64>() == 1.0);
            let cols_ok = (0..n).all(|v| (0..n).map(|i| bits[i * n + v]).sum::<f64>() == 1.0);
            let loss = q.loss(&bits).unwrap();
            if rows_ok && cols_ok {
                prop_assert!((loss - tour_term).abs() < 1e-9);
            } else {
                prop_assert!(loss >= tour_term + m - 1e-9);
            }
        }
    }
}
