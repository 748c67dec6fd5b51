//! Instance-specific GNN solvers for dynamic combinatorial optimization.
//!
//! A dynamic problem is a sequence of graph snapshots. Each snapshot is encoded
//! as a QUBO, relaxed, and minimized by optimizing the parameters of a small
//! graph neural network directly on that instance. Three strategies are
//! provided for moving from one snapshot to the next: a fresh start, a warm
//! start from the previous parameters, and shrink-and-perturb applied to the
//! previous parameters.
//!
//! Around the solver sit exact oracles for approximation ratios at desk scale
//! and a Goemans-Williamson laboratory for studying how perturbing an SDP
//! point changes the odds of rounding to the optimal cut.

#![allow(clippy::needless_range_loop)]

pub mod decode;
pub mod error;
pub mod graph;
pub mod gwlab;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod qubo;
pub mod report;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{DynamicInstance, GraphSnapshot, ProblemKind};
