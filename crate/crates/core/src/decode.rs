//! Turning relaxed outputs into feasible discrete solutions.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::graph::{GraphSnapshot, ProblemKind};
use crate::seed;

/// Default rounding threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Probabilities are clamped into `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum DiscreteSolution {
    /// Side (0 or 1) of every node.
    Cut(Vec<usize>),
    /// Membership indicator (0 or 1) of every node; never violates an edge.
    IndependentSet(Vec<usize>),
    /// Node visited at each step.
    Tour(Vec<usize>),
}

impl DiscreteSolution {
    pub fn payload(&self) -> &[usize] {
        match self {
            DiscreteSolution::Cut(v) | DiscreteSolution::IndependentSet(v) | DiscreteSolution::Tour(v) => v,
        }
    }

    pub fn problem(&self) -> ProblemKind {
        match self {
            DiscreteSolution::Cut(_) => ProblemKind::MaxCut,
            DiscreteSolution::IndependentSet(_) => ProblemKind::Mis,
            DiscreteSolution::Tour(_) => ProblemKind::Tsp,
        }
    }
}

/// Serialized form: `{kind, payload, natural_objective}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    #[serde(flatten)]
    pub solution: DiscreteSolution,
    pub natural_objective: f64,
}

pub fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

/// `x_i >= threshold` maps to 1, everything else to 0. Ties round up.
pub fn round_binary(x: &[f64], threshold: f64) -> Vec<usize> {
    x.iter().map(|&v| usize::from(v >= threshold)).collect()
}

/// Order in which MIS violations are resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum RepairRule {
    /// Repeatedly drop the selected node touching the most violated edges,
    /// lowest id first on ties.
    #[default]
    MaxViolations,
    /// Walk violated edges in edge order and drop the endpoint of larger
    /// graph degree (higher id on ties), keeping the lower-degree node.
    KeepMinDegree,
    /// Walk violated edges in a seeded random order and drop a random endpoint.
    Random { seed: u64 },
}

/// Removes nodes from `selection` until no edge has both endpoints selected.
/// Only removals happen; nothing is ever added back.
pub fn repair_mis(g: &GraphSnapshot, selection: &[usize], rule: RepairRule) -> DiscreteSolution {
    assert_eq!(selection.len(), g.node_count(), "selection length must equal node count");
    let mut sel: Vec<bool> = selection.iter().map(|&b| b == 1).collect();
    match rule {
        RepairRule::MaxViolations => {
            let adj = g.adjacency();
            let mut viol: Vec<usize> =
                (0..sel.len()).map(|i| if sel[i] { adj[i].iter().filter(|&&j| sel[j]).count() } else { 0 }).collect();
            loop {
                let mut worst = None;
                let mut most = 0;
                for (i, &c) in viol.iter().enumerate() {
                    if c > most {
                        most = c;
                        worst = Some(i);
                    }
                }
                let Some(i) = worst else { break };
                sel[i] = false;
                viol[i] = 0;
                for &j in &adj[i] {
                    if sel[j] {
                        viol[j] -= 1;
                    }
                }
            }
        }
        RepairRule::KeepMinDegree => {
            let deg = g.degrees();
            for &(i, j) in g.edges() {
                if sel[i] && sel[j] {
                    let drop = if (deg[i], i) > (deg[j], j) { i } else { j };
                    sel[drop] = false;
                }
            }
        }
        RepairRule::Random { seed } => {
            let mut rng = seed::rng(seed);
            let mut order: Vec<usize> = (0..g.edge_count()).collect();
            order.shuffle(&mut rng);
            for k in order {
                let (i, j) = g.edges()[k];
                if sel[i] && sel[j] {
                    sel[if rng.random_bool(0.5) { i } else { j }] = false;
                }
            }
        }
    }
    DiscreteSolution::IndependentSet(sel.into_iter().map(usize::from).collect())
}

fn log_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR).ln()
}

/// Sum of clamped log-probabilities of the entries a tour selects, where
/// `probs[i * n + v]` is the probability of visiting node `i` at step `v`.
pub fn tour_score(probs: &[f64], n: usize, order: &[usize]) -> f64 {
    order.iter().enumerate().map(|(v, &i)| log_prob(probs[i * n + v])).sum()
}

/// Step-by-step greedy decoding: at each step take the most likely node not
/// yet visited, lowest id on ties.
pub fn decode_tour_greedy(probs: &[f64], n: usize) -> DiscreteSolution {
    assert_eq!(probs.len(), n * n, "probability matrix must be n x n");
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for v in 0..n {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !visited[i]) {
            if best.is_none_or(|b| probs[i * n + v] > probs[b * n + v]) {
                best = Some(i);
            }
        }
        let i = best.expect("an unvisited node remains at every step");
        visited[i] = true;
        order.push(i);
    }
    DiscreteSolution::Tour(order)
}

struct Partial {
    score: f64,
    order: Vec<usize>,
    visited: Vec<bool>,
}

fn beam_pass(probs: &[f64], n: usize, width: usize) -> (f64, Vec<usize>) {
    let mut beam = vec![Partial { score: 0.0, order: Vec::new(), visited: vec![false; n] }];
    for v in 0..n {
        let mut children: Vec<(f64, usize, usize)> = Vec::new();
        for (p, partial) in beam.iter().enumerate() {
            let mut options: Vec<usize> = (0..n).filter(|&i| !partial.visited[i]).collect();
            options.sort_by(|&a, &b| probs[b * n + v].total_cmp(&probs[a * n + v]).then(a.cmp(&b)));
            options.truncate(width);
            for i in options {
                children.push((partial.score + log_prob(probs[i * n + v]), p, i));
            }
        }
        children.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| beam[a.1].order.cmp(&beam[b.1].order)).then(a.2.cmp(&b.2))
        });
        children.truncate(width);
        beam = children
            .into_iter()
            .map(|(score, p, i)| {
                let mut order = beam[p].order.clone();
                order.push(i);
                let mut visited = beam[p].visited.clone();
                visited[i] = true;
                Partial { score, order, visited }
            })
            .collect();
    }
    let best = beam.swap_remove(0);
    (best.score, best.order)
}

/// Beam-search decoding over partial tours, scored by summed log
/// probabilities, expanding up to `width` unvisited nodes per partial.
///
/// Plain beam search is not monotone in its width, so the result is the best
/// tour over passes of every width `1..=width`. That keeps width 1 identical
/// to [`decode_tour_greedy`] and makes a wider beam never score worse.
pub fn decode_tour_beam(probs: &[f64], n: usize, width: usize) -> DiscreteSolution {
    assert_eq!(probs.len(), n * n, "probability matrix must be n x n");
    let width = width.max(1);
    let mut best = beam_pass(probs, n, 1);
    for w in 2..=width {
        let cand = beam_pass(probs, n, w);
        if cand.0 > best.0 {
            best = cand;
        }
    }
    DiscreteSolution::Tour(best.1)
}
