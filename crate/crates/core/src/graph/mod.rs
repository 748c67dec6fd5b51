//! Graph snapshots, dynamic instances, and their construction from raw data.

mod temporal;
mod tsplib;

pub use temporal::{
    build_deletion_snapshots, build_growth_snapshots, ingest_temporal_edges, random_temporal_er, snapshot_edge_counts,
    TemporalEdge, TemporalEdgeList,
};
pub use tsplib::{
    build_moving_node_instance, moving_node_position, parse_tsplib, Metric, TspNodeSet, BURMA14, BURMA14_TRAJECTORY,
};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    MaxCut,
    Mis,
    Tsp,
}

impl ProblemKind {
    /// MaxCut and MIS are maximized; tour length is minimized.
    pub fn maximizes(self) -> bool {
        !matches!(self, ProblemKind::Tsp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::MaxCut => "maxcut",
            ProblemKind::Mis => "mis",
            ProblemKind::Tsp => "tsp",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maxcut" => Ok(ProblemKind::MaxCut),
            "mis" => Ok(ProblemKind::Mis),
            "tsp" => Ok(ProblemKind::Tsp),
            other => Err(Error::invalid(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// One undirected, weighted graph. Edges are stored once each, in insertion
/// order, with no self-loops and no duplicate pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSnapshot {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl GraphSnapshot {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        if edges.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: edges.len(), got: weights.len() });
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for (k, &(i, j)) in edges.iter().enumerate() {
            if i == j {
                return Err(Error::invalid(format!("self-loop on node {i}")));
            }
            if i >= node_count || j >= node_count {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for {node_count} nodes")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
            let w = weights[k];
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
        }
        Ok(GraphSnapshot { node_count, edges, weights })
    }

    /// Unit-weight graph, as used for MaxCut and MIS.
    pub fn unweighted(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let weights = vec![1.0; edges.len()];
        Self::new(node_count, edges, weights)
    }

    /// Complete graph whose weights are read from a symmetric distance matrix.
    pub fn complete(dist: &[Vec<f64>]) -> Result<Self> {
        let n = dist.len();
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut weights = Vec::with_capacity(edges.capacity());
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for j in i + 1..n {
                edges.push((i, j));
                weights.push(row[j]);
            }
        }
        Self::new(n, edges, weights)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weighted_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().zip(&self.weights).map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Neighbor lists, each sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Dense symmetric weight matrix with a zero diagonal.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.node_count;
        let mut d = vec![vec![0.0; n]; n];
        for (i, j, w) in self.weighted_edges() {
            d[i][j] = w;
            d[j][i] = w;
        }
        d
    }

    pub fn is_complete(&self) -> bool {
        let n = self.node_count;
        self.edges.len() == n * (n - 1) / 2
    }
}

/// An ordered sequence of snapshots that together form one dynamic problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicInstance {
    problem: ProblemKind,
    snapshots: Vec<GraphSnapshot>,
}

impl DynamicInstance {
    pub fn new(problem: ProblemKind, snapshots: Vec<GraphSnapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::invalid("a dynamic instance needs at least one snapshot"));
        }
        if problem == ProblemKind::Tsp {
            let first = &snapshots[0];
            if first.node_count() < 2 || !first.is_complete() {
                return Err(Error::invalid("TSP snapshots must be complete graphs"));
            }
            for s in &snapshots[1..] {
                if s.node_count() != first.node_count() || s.edges() != first.edges() {
                    return Err(Error::invalid("TSP snapshots must share node count and edge set"));
                }
            }
        }
        Ok(DynamicInstance { problem, snapshots })
    }

    pub fn problem(&self) -> ProblemKind {
        self.problem
    }

    pub fn snapshots(&self) -> &[GraphSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&InstanceDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotDoc {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    problem: ProblemKind,
    #[serde(rename = "T")]
    t: usize,
    snapshots: Vec<SnapshotDoc>,
}

impl From<&DynamicInstance> for InstanceDoc {
    fn from(inst: &DynamicInstance) -> Self {
        InstanceDoc {
            problem: inst.problem,
            t: inst.snapshots.len(),
            snapshots: inst
                .snapshots
                .iter()
                .map(|s| SnapshotDoc { n: s.node_count, edges: s.weighted_edges().collect() })
                .collect(),
        }
    }
}

impl TryFrom<InstanceDoc> for DynamicInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.t != doc.snapshots.len() {
            return Err(Error::invalid(format!("T = {} but {} snapshots present", doc.t, doc.snapshots.len())));
        }
        let snapshots = doc
            .snapshots
            .into_iter()
            .map(|s| {
                let (edges, weights) = s.edges.into_iter().map(|(i, j, w)| ((i, j), w)).unzip();
                GraphSnapshot::new(s.n, edges, weights)
            })
            .collect::<Result<Vec<_>>>()?;
        DynamicInstance::new(doc.problem, snapshots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_snapshots() {
        assert!(GraphSnapshot::unweighted(3, vec![(0, 0)]).is_err());
        assert!(GraphSnapshot::unweighted(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(GraphSnapshot::unweighted(3, vec![(0, 3)]).is_err());
        assert!(GraphSnapshot::new(3, vec![(0, 1)], vec![]).is_err());
        assert!(GraphSnapshot::new(3, vec![(0, 1)], vec![-1.0]).is_err());
    }

    #[test]
    fn tsp_instances_require_shared_structure() {
        let a = GraphSnapshot::complete(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = GraphSnapshot::unweighted(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(DynamicInstance::new(ProblemKind::Tsp, vec![a.clone(), a.clone()]).is_ok());
        assert!(DynamicInstance::new(ProblemKind::Tsp, vec![a, b]).is_err());
        assert!(DynamicInstance::new(ProblemKind::MaxCut, vec![]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = GraphSnapshot::unweighted(4, vec![(0, 1), (2, 3)]).unwrap();
        let inst = DynamicInstance::new(ProblemKind::Mis, vec![g.clone(), g]).unwrap();
        let text = inst.to_json().unwrap();
        assert!(text.contains("\"T\":2"));
        assert_eq!(DynamicInstance::from_json(&text).unwrap(), inst);
    }
}
