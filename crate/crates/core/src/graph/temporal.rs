use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DynamicInstance, GraphSnapshot, ProblemKind};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub u: usize,
    pub v: usize,
    pub timestamp: f64,
}

/// Chronologically sorted, deduplicated, loop-free edge events over a dense
/// node id range `0..node_count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdgeList {
    pub node_count: usize,
    pub events: Vec<TemporalEdge>,
}

impl TemporalEdgeList {
    /// Writes the list back out in the ingestion format (`u v w ts`).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{} {} 1 {}", e.u, e.v, e.timestamp);
        }
        out
    }
}

/// Parses a KONECT-style edge list.
///
/// Events are sorted by timestamp (stably, so ties keep file order), self-loops
/// are dropped, and only the earliest occurrence of each undirected pair is
/// kept. Node ids are then renumbered densely in order of first appearance.
pub fn ingest_temporal_edges(raw: &str) -> Result<TemporalEdgeList> {
    let mut parsed: Vec<(u64, u64, f64)> = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(Error::Parse { line: lineno + 1, message: "expected at least two columns".into() });
        }
        let parse_id = |tok: &str| {
            tok.parse::<u64>()
                .map_err(|_| Error::Parse { line: lineno + 1, message: format!("non-numeric node id `{tok}`") })
        };
        let parse_real = |tok: &str| {
            tok.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse { line: lineno + 1, message: format!("non-numeric value `{tok}`") })
        };
        let u = parse_id(tokens[0])?;
        let v = parse_id(tokens[1])?;
        if let Some(w) = tokens.get(2) {
            parse_real(w)?;
        }
        let ts = match tokens.get(3) {
            Some(t) => parse_real(t)?,
            None => parsed.len() as f64,
        };
        parsed.push((u, v, ts));
    }
    if parsed.is_empty() {
        return Err(Error::invalid("edge list contains no events"));
    }

    parsed.sort_by(|a, b| a.2.total_cmp(&b.2));

    let mut seen = HashSet::new();
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut events = Vec::new();
    for (u, v, ts) in parsed {
        if u == v || !seen.insert((u.min(v), u.max(v))) {
            continue;
        }
        let next = ids.len();
        let u = *ids.entry(u).or_insert(next);
        let next = ids.len();
        let v = *ids.entry(v).or_insert(next);
        events.push(TemporalEdge { u, v, timestamp: ts });
    }
    if events.is_empty() {
        return Err(Error::invalid("edge list contains only self-loops"));
    }
    Ok(TemporalEdgeList { node_count: ids.len(), events })
}

/// Uniform random graph with `edge_count` distinct edges on `node_count`
/// nodes, arriving in random order at timestamps `0, 1, 2, ...`.
pub fn random_temporal_er(node_count: usize, edge_count: usize, seed: u64) -> Result<TemporalEdgeList> {
    let max_edges = node_count * node_count.saturating_sub(1) / 2;
    if node_count < 2 || edge_count == 0 || edge_count > max_edges {
        return Err(Error::invalid(format!("cannot place {edge_count} edges on {node_count} nodes")));
    }
    let mut rng = seed::rng(seed);
    let mut seen = HashSet::with_capacity(edge_count);
    let mut pairs = Vec::with_capacity(edge_count);
    while pairs.len() < edge_count {
        let a = rng.random_range(0..node_count);
        let b = rng.random_range(0..node_count);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            pairs.push((a, b));
        }
    }
    pairs.shuffle(&mut rng);
    let events = pairs.into_iter().enumerate().map(|(k, (u, v))| TemporalEdge { u, v, timestamp: k as f64 }).collect();
    Ok(TemporalEdgeList { node_count, events })
}

/// Cumulative edge count per growth snapshot.
///
/// Snapshot `t` (1-based) holds `round_half_up(t * fraction * |E|)` edges,
/// clamped to `|E|`; the last snapshot always holds every edge.
pub fn snapshot_edge_counts(total: usize, snapshots: usize, fraction: f64) -> Result<Vec<usize>> {
    if snapshots < 1 {
        return Err(Error::invalid("at least one snapshot is required"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction {fraction} must lie in (0, 1]")));
    }
    if fraction * (snapshots as f64) < 1.0 - 1e-9 {
        return Err(Error::invalid(format!("{snapshots} snapshots of {fraction} each never reach the full edge set")));
    }
    let counts = (1..=snapshots)
        .map(|t| {
            if t == snapshots {
                total
            } else {
                let exact = t as f64 * fraction * total as f64;
                ((exact + 0.5 + 1e-9).floor() as usize).min(total)
            }
        })
        .collect();
    Ok(counts)
}

fn prefix_snapshot(edges: &TemporalEdgeList, count: usize) -> Result<GraphSnapshot> {
    let pairs = edges.events[..count].iter().map(|e| (e.u, e.v)).collect();
    GraphSnapshot::unweighted(edges.node_count, pairs)
}

/// Growing snapshots: each holds a chronological prefix of the events over a
/// fixed node set.
pub fn build_growth_snapshots(
    edges: &TemporalEdgeList,
    snapshots: usize,
    fraction_per_step: f64,
) -> Result<DynamicInstance> {
    let counts = snapshot_edge_counts(edges.events.len(), snapshots, fraction_per_step)?;
    let snaps = counts.into_iter().map(|c| prefix_snapshot(edges, c)).collect::<Result<Vec<_>>>()?;
    DynamicInstance::new(ProblemKind::MaxCut, snaps)
}

/// The growth sequence played backwards, so edges are deleted over time.
pub fn build_deletion_snapshots(
    edges: &TemporalEdgeList,
    snapshots: usize,
    fraction_per_step: f64,
) -> Result<DynamicInstance> {
    let growth = build_growth_snapshots(edges, snapshots, fraction_per_step)?;
    let mut snaps = growth.snapshots().to_vec();
    snaps.reverse();
    DynamicInstance::new(ProblemKind::Mis, snaps)
}
