//! Fixed-architecture graph network: embedding table, two graph
//! convolutions, hand-written reverse pass, Adam and shrink-and-perturb.

mod checkpoint;
mod mat;
mod model;
mod operator;
mod optim;

pub use checkpoint::{Checkpoint, RngState};
pub use mat::{gemm, matmul, Mat};
pub use model::{
    Conv, EmbeddingInit, ForwardTape, Gradients, ModelDims, ModelState, Param, ParamGroup, DEFAULT_EMBEDDING_DIM,
    DEFAULT_HIDDEN_DIM,
};
pub use operator::{GraphOperator, LayerKind, SparseMatrix};
pub use optim::{
    adam_step, shrink_perturb, Noise, ShrinkPerturb, SpSubset, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, DEFAULT_LR,
    DEFAULT_PERTURB, DEFAULT_SHRINK, DEFAULT_SIGMA,
};
