//! Exact and reference solvers for approximation-ratio denominators, and the
//! greedy baselines.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSnapshot, ProblemKind};
use crate::par::{self, Exec};
use crate::qubo::{cut_weight, tour_length};
use crate::seed;

pub const MAX_EXHAUSTIVE_NODES: usize = 26;
pub const MAX_BRANCH_AND_BOUND_NODES: usize = 128;
pub const MAX_HELD_KARP_NODES: usize = 18;

/// An optimal (or best-known, when `exact` is false) objective value with a
/// solution attaining it. Cut witnesses are side vectors, independent sets
/// are indicator vectors, tours are permutations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub witness: Vec<usize>,
    pub exact: bool,
}

/// Maximum cut by Gray-code enumeration of the `2^(n-1)` assignments with
/// the last node pinned to side 0.
pub fn exact_maxcut(g: &GraphSnapshot, exec: Exec) -> Result<OracleResult> {
    let n = g.node_count();
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(Error::Capacity { what: "exhaustive MaxCut", n, max: MAX_EXHAUSTIVE_NODES });
    }
    if n <= 1 {
        return Ok(OracleResult { value: 0.0, witness: vec![0; n], exact: true });
    }
    let free = n - 1;
    // Nodes [0, low) are walked in Gray order; the rest are fixed per chunk.
    let high = free.min(6);
    let low = free - high;
    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, w) in g.weighted_edges() {
        nbrs[i].push((j, w));
        nbrs[j].push((i, w));
    }
    let edges: Vec<_> = g.weighted_edges().collect();
    let best = par::map_range(exec, 1 << high, |chunk| {
        let mut side = vec![0usize; n];
        for b in 0..high {
            side[low + b] = (chunk >> b) & 1;
        }
        let mut cut = cut_weight(&edges, &side);
        let mut best = (cut, side.clone());
        for k in 1u64..(1u64 << low) {
            let flip = k.trailing_zeros() as usize;
            let s = side[flip];
            let delta: f64 = nbrs[flip].iter().map(|&(j, w)| if side[j] == s { w } else { -w }).sum();
            side[flip] ^= 1;
            cut += delta;
            if cut > best.0 {
                best = (cut, side.clone());
            }
        }
        best
    });
    let (_, witness) = best
        .into_iter()
        .fold(None::<(f64, Vec<usize>)>, |acc, cand| match acc {
            Some(a) if a.0 >= cand.0 => Some(a),
            _ => Some(cand),
        })
        .expect("at least one chunk");
    // Recompute to drop accumulated rounding from the incremental deltas.
    Ok(OracleResult { value: cut_weight(&edges, &witness), witness, exact: true })
}

/// Maximum independent set: exhaustive over all independent sets up to
/// [`MAX_EXHAUSTIVE_NODES`], branch and bound with a clique-cover bound up to
/// [`MAX_BRANCH_AND_BOUND_NODES`].
pub fn exact_mis(g: &GraphSnapshot) -> Result<OracleResult> {
    let n = g.node_count();
    if n > MAX_BRANCH_AND_BOUND_NODES {
        return Err(Error::Capacity { what: "exact MIS", n, max: MAX_BRANCH_AND_BOUND_NODES });
    }
    let adj: Vec<u128> = g.adjacency().iter().map(|row| row.iter().fold(0u128, |m, &j| m | (1u128 << j))).collect();
    let all = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let mut best = 0u128;
    if n <= MAX_EXHAUSTIVE_NODES {
        enumerate_independent(&adj, 0, n, 0, &mut best);
    } else {
        let mut s = BranchAndBound { adj: &adj, best: 0 };
        s.expand(0, all);
        best = s.best;
    }
    let witness: Vec<usize> = (0..n).map(|i| ((best >> i) & 1) as usize).collect();
    Ok(OracleResult { value: best.count_ones() as f64, witness, exact: true })
}

fn enumerate_independent(adj: &[u128], next: usize, n: usize, set: u128, best: &mut u128) {
    if next == n {
        if set.count_ones() > best.count_ones() {
            *best = set;
        }
        return;
    }
    if adj[next] & set == 0 {
        enumerate_independent(adj, next + 1, n, set | (1u128 << next), best);
    }
    enumerate_independent(adj, next + 1, n, set, best);
}

struct BranchAndBound<'a> {
    adj: &'a [u128],
    best: u128,
}

fn bits(mut m: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        (m != 0).then(|| {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            i
        })
    })
}

impl BranchAndBound<'_> {
    /// Size of a greedy partition of `cand` into cliques; an independent set
    /// takes at most one node from each.
    fn clique_cover(&self, cand: u128) -> u32 {
        let mut cliques: Vec<u128> = Vec::new();
        for v in bits(cand) {
            match cliques.iter_mut().find(|c| **c & !self.adj[v] == 0) {
                Some(c) => *c |= 1u128 << v,
                None => cliques.push(1u128 << v),
            }
        }
        cliques.len() as u32
    }

    fn expand(&mut self, mut set: u128, mut cand: u128) {
        // Nodes with at most one candidate neighbor can always be taken.
        loop {
            let forced = bits(cand).find(|&v| (self.adj[v] & cand).count_ones() <= 1);
            let Some(v) = forced else { break };
            set |= 1u128 << v;
            cand &= !(self.adj[v] | (1u128 << v));
        }
        if cand == 0 {
            if set.count_ones() > self.best.count_ones() {
                self.best = set;
            }
            return;
        }
        if set.count_ones() + self.clique_cover(cand) <= self.best.count_ones() {
            return;
        }
        let v = bits(cand).max_by_key(|&v| ((self.adj[v] & cand).count_ones(), std::cmp::Reverse(v))).unwrap();
        self.expand(set | (1u128 << v), cand & !(self.adj[v] | (1u128 << v)));
        self.expand(set, cand & !(1u128 << v));
    }
}

/// Optimal closed tour by the Held-Karp dynamic program. The tour starts at 0.
pub fn exact_tsp_held_karp(dist: &[Vec<f64>]) -> Result<OracleResult> {
    let n = dist.len();
    if n > MAX_HELD_KARP_NODES {
        return Err(Error::Capacity { what: "Held-Karp", n, max: MAX_HELD_KARP_NODES });
    }
    if dist.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("distance matrix must be square"));
    }
    if n <= 3 {
        let witness: Vec<usize> = (0..n).collect();
        return Ok(OracleResult { value: tour_length(dist, &witness), witness, exact: true });
    }
    // cost[mask * m + j]: shortest path from 0 through the nodes of `mask`
    // (over 1..n, bit k = node k+1) ending at node j+1.
    let m = n - 1;
    let full = 1usize << m;
    let mut cost = vec![f64::INFINITY; full * m];
    let mut parent = vec![u8::MAX; full * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = dist[0][j + 1];
    }
    for mask in 1..full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = cost[mask * m + j];
            if !here.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let c = here + dist[j + 1][k + 1];
                if c < cost[next * m + k] {
                    cost[next * m + k] = c;
                    parent[next * m + k] = j as u8;
                }
            }
        }
    }
    let last = full - 1;
    let (mut end, _) = (0..m).map(|j| (j, cost[last * m + j] + dist[j + 1][0])).fold((0, f64::INFINITY), |a, b| {
        if b.1 < a.1 {
            b
        } else {
            a
        }
    });
    let mut rev = Vec::with_capacity(n);
    let mut mask = last;
    loop {
        rev.push(end + 1);
        let p = parent[mask * m + end];
        mask &= !(1 << end);
        if p == u8::MAX {
            break;
        }
        end = p as usize;
    }
    rev.push(0);
    rev.reverse();
    Ok(OracleResult { value: tour_length(dist, &rev), witness: rev, exact: true })
}

/// One pass in node-index order, each node joining the side that cuts more
/// weight towards the nodes already placed (side 0 on ties).
pub fn greedy_cut_baseline(g: &GraphSnapshot) -> OracleResult {
    let n = g.node_count();
    let adj = weighted_adjacency(g);
    let mut side = vec![0usize; n];
    for v in 0..n {
        let mut gain = [0.0f64; 2];
        for &(u, w) in &adj[v] {
            if u < v {
                gain[1 - side[u]] += w;
            }
        }
        side[v] = usize::from(gain[1] > gain[0]);
    }
    let edges: Vec<_> = g.weighted_edges().collect();
    OracleResult { value: cut_weight(&edges, &side), witness: side, exact: false }
}

/// Nearest-neighbor tour from node 0, lower id on ties.
pub fn greedy_tour_baseline(dist: &[Vec<f64>]) -> OracleResult {
    let n = dist.len();
    if n == 0 {
        return OracleResult { value: 0.0, witness: Vec::new(), exact: false };
    }
    let mut seen = vec![false; n];
    let mut tour = vec![0];
    seen[0] = true;
    while tour.len() < n {
        let cur = *tour.last().unwrap();
        let next = (0..n).filter(|&j| !seen[j]).fold(None::<usize>, |best, j| match best {
            Some(b) if dist[cur][b] <= dist[cur][j] => Some(b),
            _ => Some(j),
        });
        let next = next.unwrap();
        seen[next] = true;
        tour.push(next);
    }
    OracleResult { value: tour_length(dist, &tour), witness: tour, exact: false }
}

fn weighted_adjacency(g: &GraphSnapshot) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); g.node_count()];
    for (i, j, w) in g.weighted_edges() {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    adj
}

/// Settings for the tabu search behind [`best_known_maxcut`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabuConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub tenure: usize,
    pub seed: u64,
}

impl Default for TabuConfig {
    fn default() -> Self {
        TabuConfig { restarts: 32, iterations: 4000, tenure: 8, seed: 0x7ab5 }
    }
}

/// MaxCut value for graphs beyond exhaustive reach: the exact optimum when
/// `n <= 26`, otherwise the best cut found by multi-start one-flip tabu
/// search, marked non-exact.
pub fn best_known_maxcut(g: &GraphSnapshot, cfg: &TabuConfig, exec: Exec) -> Result<OracleResult> {
    if g.node_count() <= MAX_EXHAUSTIVE_NODES {
        return exact_maxcut(g, exec);
    }
    let n = g.node_count();
    let adj = weighted_adjacency(g);
    let edges: Vec<_> = g.weighted_edges().collect();
    let runs = par::map_range(exec, cfg.restarts.max(1), |r| {
        let mut rng = seed::rng(seed::derive(cfg.seed, r as u64));
        let mut side: Vec<usize> = (0..n).map(|_| usize::from(rng.random_bool(0.5))).collect();
        // gain[v]: change in cut weight if v switches side.
        let mut gain: Vec<f64> =
            (0..n).map(|v| adj[v].iter().map(|&(u, w)| if side[u] == side[v] { w } else { -w }).sum()).collect();
        let mut cut = cut_weight(&edges, &side);
        let mut best = (cut, side.clone());
        let mut tabu_until = vec![0usize; n];
        for it in 1..=cfg.iterations {
            let mut pick = None::<usize>;
            for v in 0..n {
                let allowed = tabu_until[v] < it || cut + gain[v] > best.0;
                if allowed && pick.is_none_or(|p| gain[v] > gain[p]) {
                    pick = Some(v);
                }
            }
            let Some(v) = pick else { continue };
            cut += gain[v];
            side[v] ^= 1;
            gain[v] = -gain[v];
            for &(u, w) in &adj[v] {
                gain[u] += if side[u] == side[v] { 2.0 * w } else { -2.0 * w };
            }
            tabu_until[v] = it + cfg.tenure + rng.random_range(0..=cfg.tenure / 2);
            if cut > best.0 {
                best = (cut, side.clone());
            }
        }
        best
    });
    let (_, witness) = runs
        .into_iter()
        .fold(None::<(f64, Vec<usize>)>, |acc, c| match acc {
            Some(a) if a.0 >= c.0 => Some(a),
            _ => Some(c),
        })
        .expect("at least one restart");
    Ok(OracleResult { value: cut_weight(&edges, &witness), witness, exact: false })
}

/// Denominator for one snapshot: exact where feasible, best-known MaxCut
/// above the exhaustive limit.
pub fn solve_snapshot(problem: ProblemKind, g: &GraphSnapshot, exec: Exec) -> Result<OracleResult> {
    match problem {
        ProblemKind::MaxCut => best_known_maxcut(g, &TabuConfig::default(), exec),
        ProblemKind::Mis => exact_mis(g),
        ProblemKind::Tsp => exact_tsp_held_karp(&g.distance_matrix()),
    }
}

/// Mean of `achieved[t] / optimal[t]`. For maximization problems this is at
/// most one; for tours it is at least one.
pub fn mean_apr(achieved: &[f64], optimal: &[f64]) -> Result<f64> {
    if achieved.len() != optimal.len() {
        return Err(Error::DimensionMismatch { expected: optimal.len(), got: achieved.len() });
    }
    if achieved.is_empty() {
        return Err(Error::invalid("no snapshots to average over"));
    }
    let mut sum = 0.0;
    for (a, o) in achieved.iter().zip(optimal) {
        if *o == 0.0 {
            return Err(Error::invalid("optimal value is zero; ratio undefined"));
        }
        sum += a / o;
    }
    Ok(sum / achieved.len() as f64)
}

/// Cached optima for the snapshots of one instance, keyed by snapshot index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleCache {
    pub instance_hash: String,
    pub entries: BTreeMap<usize, OracleResult>,
}

impl OracleCache {
    pub fn new(instance_hash: impl Into<String>) -> Self {
        OracleCache { instance_hash: instance_hash.into(), entries: BTreeMap::new() }
    }

    /// Reads a cache file, returning an empty cache when the file is missing
    /// or belongs to a different instance.
    pub fn load_or_new(path: &Path, instance_hash: &str) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::new(instance_hash));
        }
        let cache: OracleCache = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(if cache.instance_hash == instance_hash { cache } else { Self::new(instance_hash) })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Returns the cached optimum for snapshot `t`, computing it on a miss.
    pub fn get_or_solve(
        &mut self,
        t: usize,
        problem: ProblemKind,
        g: &GraphSnapshot,
        exec: Exec,
    ) -> Result<&OracleResult> {
        match self.entries.entry(t) {
            std::collections::btree_map::Entry::Occupied(e) => Ok(e.into_mut()),
            std::collections::btree_map::Entry::Vacant(e) => Ok(e.insert(solve_snapshot(problem, g, exec)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_temporal_er;
    use crate::qubo::build_for;

    fn cycle(n: usize) -> GraphSnapshot {
        GraphSnapshot::unweighted(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).unwrap()
    }

    fn er(n: usize, p: f64, seed: u64) -> GraphSnapshot {
        let mut rng = seed::rng(seed);
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    e.push((i, j));
                }
            }
        }
        GraphSnapshot::unweighted(n, e).unwrap()
    }

    fn brute_maxcut(g: &GraphSnapshot) -> f64 {
        let n = g.node_count();
        let edges: Vec<_> = g.weighted_edges().collect();
        (0..1usize << n)
            .map(|m| cut_weight(&edges, &(0..n).map(|i| (m >> i) & 1).collect::<Vec<_>>()))
            .fold(0.0, f64::max)
    }

    fn brute_mis(g: &GraphSnapshot) -> usize {
        let n = g.node_count();
        (0..1usize << n)
            .filter(|m| g.edges().iter().all(|&(i, j)| (m >> i) & 1 == 0 || (m >> j) & 1 == 0))
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap()
    }

    #[test]
    fn maxcut_small_cases() {
        assert_eq!(exact_maxcut(&cycle(3), Exec::Sequential).unwrap().value, 2.0);
        assert_eq!(exact_maxcut(&cycle(5), Exec::Sequential).unwrap().value, 4.0);
        let empty = GraphSnapshot::unweighted(6, vec![]).unwrap();
        assert_eq!(exact_maxcut(&empty, Exec::Parallel).unwrap().value, 0.0);
    }

    #[test]
    fn maxcut_matches_brute_force() {
        for s in 0..15 {
            let g = er(4 + s % 9, 0.4, s as u64);
            let r = exact_maxcut(&g, Exec::Parallel).unwrap();
            assert_eq!(r.value, brute_maxcut(&g));
            let q = build_for(ProblemKind::MaxCut, &g, None).unwrap();
            assert_eq!(q.natural_objective(&r.witness).unwrap(), r.value);
        }
    }

    #[test]
    fn maxcut_capacity() {
        let g = GraphSnapshot::unweighted(27, vec![]).unwrap();
        assert!(matches!(exact_maxcut(&g, Exec::Sequential), Err(Error::Capacity { .. })));
    }

    #[test]
    fn mis_small_cases() {
        let edge = GraphSnapshot::unweighted(2, vec![(0, 1)]).unwrap();
        assert_eq!(exact_mis(&edge).unwrap().value, 1.0);
        assert_eq!(exact_mis(&cycle(5)).unwrap().value, 2.0);
        assert_eq!(exact_mis(&GraphSnapshot::unweighted(7, vec![]).unwrap()).unwrap().value, 7.0);
    }

    #[test]
    fn mis_matches_brute_force_and_branch_and_bound() {
        for s in 0..15 {
            let g = er(5 + s % 10, 0.3, 100 + s as u64);
            let r = exact_mis(&g).unwrap();
            assert_eq!(r.value as usize, brute_mis(&g));
            let q = build_for(ProblemKind::Mis, &g, None).unwrap();
            assert_eq!(q.natural_objective(&r.witness).unwrap(), r.value);

            let adj: Vec<u128> =
                g.adjacency().iter().map(|row| row.iter().fold(0u128, |m, &j| m | (1u128 << j))).collect();
            let mut bb = BranchAndBound { adj: &adj, best: 0 };
            bb.expand(0, (1u128 << g.node_count()) - 1);
            assert_eq!(bb.best.count_ones() as f64, r.value);
        }
    }

    #[test]
    fn mis_branch_and_bound_on_sparse_sixty() {
        let g = er(60, 0.08, 3);
        let r = exact_mis(&g).unwrap();
        let q = build_for(ProblemKind::Mis, &g, None).unwrap();
        assert_eq!(q.natural_objective(&r.witness).unwrap(), r.value);
        assert!(r.value >= 20.0);
    }

    fn square() -> Vec<Vec<f64>> {
        let p = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        p.iter()
            .map(|a: &(f64, f64)| p.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
            .collect()
    }

    #[test]
    fn held_karp_square_and_triangle() {
        assert_eq!(exact_tsp_held_karp(&square()).unwrap().value, 4.0);
        let tri = vec![vec![0.0, 3.0, 4.0], vec![3.0, 0.0, 5.0], vec![4.0, 5.0, 0.0]];
        assert_eq!(exact_tsp_held_karp(&tri).unwrap().value, 12.0);
        assert_eq!(greedy_tour_baseline(&tri).value, 12.0);
        assert_eq!(greedy_tour_baseline(&square()).value, 4.0);
    }

    #[test]
    fn held_karp_burma14() {
        let set = crate::graph::parse_tsplib(crate::graph::BURMA14).unwrap();
        let r = exact_tsp_held_karp(&set.distance_matrix()).unwrap();
        assert_eq!(r.value, 3323.0);
        assert!(crate::decode::is_permutation(&r.witness, 14));
    }

    #[test]
    fn nearest_neighbor_can_be_suboptimal() {
        let p = [(9.0, 1.0), (5.0, 0.0), (0.0, 0.0), (8.0, 0.0), (6.0, 3.0)];
        let d: Vec<Vec<f64>> =
            p.iter().map(|a: &(f64, f64)| p.iter().map(|b| (a.0 - b.0).abs() + (a.1 - b.1).abs()).collect()).collect();
        let nn = greedy_tour_baseline(&d);
        let opt = exact_tsp_held_karp(&d).unwrap();
        assert_eq!(nn.witness, vec![0, 3, 1, 4, 2]);
        assert_eq!(nn.value, 28.0);
        assert_eq!(opt.value, 24.0);
    }

    #[test]
    fn greedy_cut_traces() {
        assert_eq!(greedy_cut_baseline(&cycle(3)).value, 2.0);
        let k22 = GraphSnapshot::unweighted(4, vec![(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert_eq!(greedy_cut_baseline(&k22).value, 4.0);
        assert_eq!(greedy_cut_baseline(&GraphSnapshot::unweighted(3, vec![]).unwrap()).value, 0.0);
    }

    #[test]
    fn tabu_reaches_the_optimum_on_mid_sized_graphs() {
        for s in 0..4 {
            let g = er(22, 0.25, 40 + s);
            let exact = exact_maxcut(&g, Exec::Parallel).unwrap().value;
            let cfg = TabuConfig { restarts: 8, ..Default::default() };
            // Force the heuristic path by calling the search directly.
            let big = GraphSnapshot::new(30, g.edges().to_vec(), g.weights().to_vec()).unwrap();
            let r = best_known_maxcut(&big, &cfg, Exec::Sequential).unwrap();
            assert!(!r.exact);
            assert_eq!(r.value, exact);
        }
    }

    #[test]
    fn apr_arithmetic() {
        assert_eq!(mean_apr(&[10.0, 10.0], &[10.0, 10.0]).unwrap(), 1.0);
        assert!((mean_apr(&[8.0, 9.0], &[10.0, 10.0]).unwrap() - 0.85).abs() < 1e-15);
        assert!((mean_apr(&[110.0, 105.0], &[100.0, 100.0]).unwrap() - 1.075).abs() < 1e-15);
        assert!(mean_apr(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("dyco-oracle-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cache.json");
        let ev = random_temporal_er(8, 12, 1).unwrap();
        let g = GraphSnapshot::unweighted(ev.node_count, ev.events.iter().map(|e| (e.u, e.v)).collect()).unwrap();
        let mut c = OracleCache::new("abc");
        let v = c.get_or_solve(0, ProblemKind::Mis, &g, Exec::Sequential).unwrap().value;
        c.save(&path).unwrap();
        let back = OracleCache::load_or_new(&path, "abc").unwrap();
        assert_eq!(back.entries[&0].value, v);
        assert!(OracleCache::load_or_new(&path, "other").unwrap().entries.is_empty());
        std::fs::remove_dir_all(&dir).ok();
    }
}
