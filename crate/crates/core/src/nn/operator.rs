use serde::{Deserialize, Serialize};

use super::mat::Mat;
use crate::graph::GraphSnapshot;

/// Graph convolution flavour.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    /// `h' = D^-1/2 (A + I) D^-1/2 h W + b`
    #[default]
    Gcn,
    /// `h' = h W_self + mean_{j in N(i)} h_j W_neigh + b`
    Sage,
}

impl std::str::FromStr for LayerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" | "gcnconv" => Ok(LayerKind::Gcn),
            "sage" | "sageconv" => Ok(LayerKind::Sage),
            other => Err(crate::Error::invalid(format!("unknown layer kind `{other}`"))),
        }
    }
}

/// Square sparse matrix in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                rows[self.cols[k]].push((r, self.vals[k]));
            }
        }
        SparseMatrix::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row[self.cols[k]] += self.vals[k];
            }
        }
        d
    }

    /// `self * x`.
    pub fn mul(&self, x: &Mat) -> Mat {
        assert_eq!(x.rows(), self.n, "sparse product shape mismatch");
        let mut out = Mat::zeros(self.n, x.cols());
        for r in 0..self.n {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let dst = out.row_mut(r);
            for k in lo..hi {
                let w = self.vals[k];
                for (o, v) in dst.iter_mut().zip(x.row(self.cols[k])) {
                    *o += w * v;
                }
            }
        }
        out
    }
}

/// Per-snapshot message-passing structure.
#[derive(Clone, Debug)]
pub enum GraphOperator {
    /// Symmetric normalized adjacency with self-loops.
    Gcn { norm_adj: SparseMatrix },
    /// Row-normalized neighbor mean and its transpose (for the backward pass).
    Sage { mean: SparseMatrix, mean_t: SparseMatrix },
}

impl GraphOperator {
    /// Builds the operator from the snapshot's structure. Edge weights are
    /// ignored; every edge is a unit connection.
    pub fn new(kind: LayerKind, g: &GraphSnapshot) -> Self {
        let adj = g.adjacency();
        match kind {
            LayerKind::Gcn => {
                let inv_sqrt: Vec<f64> = adj.iter().map(|nb| 1.0 / ((nb.len() + 1) as f64).sqrt()).collect();
                let rows = adj
                    .iter()
                    .enumerate()
                    .map(|(i, nb)| {
                        let mut row: Vec<(usize, f64)> = nb.iter().map(|&j| (j, inv_sqrt[i] * inv_sqrt[j])).collect();
                        row.push((i, inv_sqrt[i] * inv_sqrt[i]));
                        row.sort_by_key(|e| e.0);
                        row
                    })
                    .collect();
                GraphOperator::Gcn { norm_adj: SparseMatrix::from_rows(rows) }
            }
            LayerKind::Sage => {
                let rows = adj
                    .iter()
                    .map(|nb| {
                        let w = 1.0 / nb.len().max(1) as f64;
                        nb.iter().map(|&j| (j, w)).collect()
                    })
                    .collect();
                let mean = SparseMatrix::from_rows(rows);
                let mean_t = mean.transpose();
                GraphOperator::Sage { mean, mean_t }
            }
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            GraphOperator::Gcn { .. } => LayerKind::Gcn,
            GraphOperator::Sage { .. } => LayerKind::Sage,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            GraphOperator::Gcn { norm_adj } => norm_adj.dim(),
            GraphOperator::Sage { mean, .. } => mean.dim(),
        }
    }
}
