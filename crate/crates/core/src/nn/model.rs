use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::mat::{gemm, matmul, Mat};
use super::operator::{GraphOperator, LayerKind, SparseMatrix};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_EMBEDDING_DIM: usize = 512;
pub const DEFAULT_HIDDEN_DIM: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub nodes: usize,
    pub embedding: usize,
    pub hidden: usize,
    pub output: usize,
}

impl ModelDims {
    pub fn new(nodes: usize, embedding: usize, hidden: usize, output: usize) -> Self {
        ModelDims { nodes, embedding, hidden, output }
    }
}

/// Which part of the network a parameter tensor belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamGroup {
    Embedding,
    Gnn,
}

/// A learnable tensor with its Adam moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: Mat,
    pub(crate) m: Mat,
    pub(crate) v: Mat,
    pub(crate) step: u64,
}

impl Param {
    fn new(value: Mat) -> Self {
        let (r, c) = value.shape();
        Param { value, m: Mat::zeros(r, c), v: Mat::zeros(r, c), step: 0 }
    }

    pub(crate) fn reset_moments(&mut self) {
        self.m.fill(0.0);
        self.v.fill(0.0);
        self.step = 0;
    }

    pub fn adam_step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Mat {
        &self.m
    }

    pub fn second_moment(&self) -> &Mat {
        &self.v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv {
    /// `in x out`; the self weight for SAGE.
    pub weight: Param,
    /// `in x out` neighbor weight, SAGE only.
    pub neigh: Option<Param>,
    /// `1 x out`.
    pub bias: Param,
}

impl Conv {
    fn glorot(kind: LayerKind, fan_in: usize, fan_out: usize, rng: &mut seed::Rng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let sample = |rng: &mut seed::Rng| Mat::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound));
        let weight = Param::new(sample(rng));
        let neigh = match kind {
            LayerKind::Gcn => None,
            LayerKind::Sage => Some(Param::new(sample(rng))),
        };
        Conv { weight, neigh, bias: Param::new(Mat::zeros(1, fan_out)) }
    }

    fn params(&self) -> impl Iterator<Item = &Param> {
        std::iter::once(&self.weight).chain(self.neigh.as_ref()).chain(std::iter::once(&self.bias))
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        std::iter::once(&mut self.weight).chain(self.neigh.as_mut()).chain(std::iter::once(&mut self.bias))
    }
}

/// Learnable parameters of embedding -> conv -> ReLU -> conv -> sigmoid,
/// with Adam state attached to each tensor.
/// Distribution of the initial node embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingInit {
    /// `U(-1/sqrt(d), 1/sqrt(d))`.
    #[default]
    Uniform,
    /// `N(0, 1)`.
    Normal,
}

impl std::str::FromStr for EmbeddingInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(EmbeddingInit::Uniform),
            "normal" => Ok(EmbeddingInit::Normal),
            other => Err(Error::invalid(format!("unknown embedding init `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    kind: LayerKind,
    dims: ModelDims,
    pub embedding: Param,
    pub conv1: Conv,
    pub conv2: Conv,
    /// Bumped on every parameter change; tapes remember the value they saw.
    version: u64,
}

/// Gradients laid out like the model's tensors, in [`ModelState::params`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Mat>,
}

impl Gradients {
    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            for v in t.as_mut_slice() {
                *v *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }
}

/// Activations cached by [`ModelState::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    version: u64,
    /// Pre-activation of the first layer.
    z1: Mat,
    /// ReLU output.
    h1: Mat,
    /// Sigmoid output.
    y: Mat,
    /// Neighbor means of the layer inputs (SAGE only).
    agg0: Option<Mat>,
    agg1: Option<Mat>,
}

impl ForwardTape {
    /// The sigmoid output, `nodes x output`.
    pub fn output(&self) -> &Mat {
        &self.y
    }
}

fn conv_forward(conv: &Conv, h: &Mat, op: &GraphOperator) -> (Mat, Option<Mat>) {
    let (mut z, agg) = match op {
        GraphOperator::Gcn { norm_adj } => (norm_adj.mul(&matmul(h, false, &conv.weight.value, false)), None),
        GraphOperator::Sage { mean, .. } => {
            let agg = mean.mul(h);
            let mut z = matmul(h, false, &conv.weight.value, false);
            let neigh = conv.neigh.as_ref().expect("SAGE layers carry a neighbor weight");
            gemm(1.0, &agg, false, &neigh.value, false, 1.0, &mut z);
            (z, Some(agg))
        }
    };
    z.add_row_broadcast(&conv.bias.value);
    (z, agg)
}

/// Returns `(grads in params order, d input)` for one conv layer.
fn conv_backward(
    conv: &Conv,
    input: &Mat,
    agg: Option<&Mat>,
    dz: &Mat,
    op: &GraphOperator,
    need_input_grad: bool,
) -> (Vec<Mat>, Option<Mat>) {
    let db = dz.column_sums();
    match op {
        GraphOperator::Gcn { norm_adj } => {
            // The normalized adjacency is symmetric.
            let s = norm_adj.mul(dz);
            let dw = matmul(input, true, &s, false);
            let dh = need_input_grad.then(|| matmul(&s, false, &conv.weight.value, true));
            (vec![dw, db], dh)
        }
        GraphOperator::Sage { mean_t, .. } => {
            let agg = agg.expect("SAGE tape stores neighbor means");
            let neigh = conv.neigh.as_ref().expect("SAGE layers carry a neighbor weight");
            let dws = matmul(input, true, dz, false);
            let dwn = matmul(agg, true, dz, false);
            let dh = need_input_grad.then(|| {
                let mut dh = matmul(dz, false, &conv.weight.value, true);
                let through_mean = mean_t_mul(mean_t, &matmul(dz, false, &neigh.value, true));
                for (a, b) in dh.as_mut_slice().iter_mut().zip(through_mean.as_slice()) {
                    *a += b;
                }
                dh
            });
            (vec![dws, dwn, db], dh)
        }
    }
}

fn mean_t_mul(mean_t: &SparseMatrix, x: &Mat) -> Mat {
    mean_t.mul(x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ModelState {
    /// Random initialization with the default uniform embedding.
    pub fn init(dims: ModelDims, kind: LayerKind, seed: u64) -> Self {
        Self::init_with(dims, kind, EmbeddingInit::Uniform, seed)
    }

    /// Random initialization: embedding drawn from `emb`, conv weights
    /// Glorot-uniform, biases zero, Adam state zero.
    pub fn init_with(dims: ModelDims, kind: LayerKind, emb: EmbeddingInit, seed: u64) -> Self {
        assert!(
            dims.nodes > 0 && dims.embedding > 0 && dims.hidden > 0 && dims.output > 0,
            "model dimensions must be positive"
        );
        let mut rng = seed::rng(seed);
        let embedding = match emb {
            EmbeddingInit::Uniform => {
                let bound = 1.0 / (dims.embedding as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bounds");
                Mat::from_fn(dims.nodes, dims.embedding, |_, _| dist.sample(&mut rng))
            }
            EmbeddingInit::Normal => Mat::from_fn(dims.nodes, dims.embedding, |_, _| StandardNormal.sample(&mut rng)),
        };
        let embedding = Param::new(embedding);
        let conv1 = Conv::glorot(kind, dims.embedding, dims.hidden, &mut rng);
        let conv2 = Conv::glorot(kind, dims.hidden, dims.output, &mut rng);
        ModelState { kind, dims, embedding, conv1, conv2, version: 0 }
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    #[cfg(test)]
    pub(crate) fn touch(&mut self) {
        self.version += 1;
    }

    /// All tensors in a fixed order: embedding, conv1 (weight, neighbor
    /// weight, bias), conv2 (same).
    pub fn params(&self) -> Vec<(ParamGroup, &Param)> {
        std::iter::once((ParamGroup::Embedding, &self.embedding))
            .chain(self.conv1.params().map(|p| (ParamGroup::Gnn, p)))
            .chain(self.conv2.params().map(|p| (ParamGroup::Gnn, p)))
            .collect()
    }

    pub(crate) fn params_mut(&mut self) -> Vec<(ParamGroup, &mut Param)> {
        self.version += 1;
        std::iter::once((ParamGroup::Embedding, &mut self.embedding))
            .chain(self.conv1.params_mut().map(|p| (ParamGroup::Gnn, p)))
            .chain(self.conv2.params_mut().map(|p| (ParamGroup::Gnn, p)))
            .collect()
    }

    /// Mutable access to the `k`-th tensor value. Invalidates existing tapes.
    pub fn tensor_mut(&mut self, k: usize) -> &mut Mat {
        let mut all = self.params_mut();
        assert!(k < all.len(), "tensor index out of range");
        &mut all.swap_remove(k).1.value
    }

    /// Zeroes Adam moments and step counters of every tensor.
    pub fn reset_adam(&mut self) {
        for (_, p) in self.params_mut() {
            p.reset_moments();
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.value.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|(_, p)| p.value.is_finite())
    }

    /// Runs the network on `op` and returns the sigmoid output flattened
    /// row-major (`nodes x output`), plus the tape for [`Self::backward`].
    pub fn forward(&self, op: &GraphOperator) -> Result<(Vec<f64>, ForwardTape)> {
        if op.node_count() != self.dims.nodes {
            return Err(Error::DimensionMismatch { expected: self.dims.nodes, got: op.node_count() });
        }
        if op.kind() != self.kind {
            return Err(Error::invalid("graph operator built for a different layer kind"));
        }
        let h0 = &self.embedding.value;
        let (z1, agg0) = conv_forward(&self.conv1, h0, op);
        let mut h1 = z1.clone();
        for v in h1.as_mut_slice() {
            *v = v.max(0.0);
        }
        let (mut y, agg1) = conv_forward(&self.conv2, &h1, op);
        for v in y.as_mut_slice() {
            *v = sigmoid(*v);
        }
        let out = y.as_slice().to_vec();
        Ok((out, ForwardTape { version: self.version, z1, h1, y, agg0, agg1 }))
    }

    /// Gradients of a scalar loss with respect to every parameter, given the
    /// loss gradient with respect to the flattened output.
    pub fn backward(&self, tape: &ForwardTape, d_output: &[f64], op: &GraphOperator) -> Result<Gradients> {
        if tape.version != self.version {
            return Err(Error::StaleTape);
        }
        let (n, d_out) = tape.y.shape();
        if d_output.len() != n * d_out {
            return Err(Error::DimensionMismatch { expected: n * d_out, got: d_output.len() });
        }
        let dz2 =
            Mat::from_vec(n, d_out, d_output.iter().zip(tape.y.as_slice()).map(|(g, s)| g * s * (1.0 - s)).collect());
        let (g2, dh1) = conv_backward(&self.conv2, &tape.h1, tape.agg1.as_ref(), &dz2, op, true);
        let mut dz1 = dh1.expect("hidden gradient requested");
        for (d, z) in dz1.as_mut_slice().iter_mut().zip(tape.z1.as_slice()) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        let (g1, dh0) = conv_backward(&self.conv1, &self.embedding.value, tape.agg0.as_ref(), &dz1, op, true);
        let mut tensors = Vec::with_capacity(1 + g1.len() + g2.len());
        tensors.push(dh0.expect("embedding gradient requested"));
        tensors.extend(g1);
        tensors.extend(g2);
        Ok(Gradients { tensors })
    }
}
