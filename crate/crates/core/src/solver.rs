//! Static, warm-start and shrink-and-perturb solves over a snapshot sequence.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decode::{self, DiscreteSolution, RepairRule, SolutionRecord};
use crate::error::{Error, Result};
use crate::graph::{DynamicInstance, GraphSnapshot, ProblemKind};
use crate::nn::{
    adam_step, shrink_perturb, EmbeddingInit, GraphOperator, LayerKind, ModelDims, ModelState, Noise, ShrinkPerturb,
    SpSubset, DEFAULT_EMBEDDING_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_LR, DEFAULT_PERTURB, DEFAULT_SHRINK, DEFAULT_SIGMA,
};
use crate::par::{self, Exec};
use crate::qubo::{build_for, QuboInstance};
use crate::seed;

const SP_NOISE_LABEL: u64 = 0x5350;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Fresh initialization on every snapshot.
    #[default]
    Static,
    /// Continue from the previous snapshot's parameters.
    Warm,
    /// Shrink and perturb the previous parameters, then continue.
    Sp,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Static => "static",
            Strategy::Warm => "warm",
            Strategy::Sp => "sp",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Strategy::Static),
            "warm" => Ok(Strategy::Warm),
            "sp" => Ok(Strategy::Sp),
            other => Err(Error::invalid(format!("unknown strategy `{other}` (expected static, warm or sp)"))),
        }
    }
}

/// Everything that controls a solve. Deserializes from JSON with every field
/// optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSchedule {
    pub strategy: Strategy,
    pub sp_subset: SpSubset,
    /// Epochs spent on the first snapshot.
    pub epoch_max: usize,
    /// Epochs spent on every later snapshot.
    pub epoch_ws: usize,
    pub lr: f64,
    pub lambda_shrink: f64,
    pub lambda_perturb: f64,
    pub sigma: f64,
    /// Replace the Gaussian perturbation by zeros.
    pub zero_noise: bool,
    pub seed: u64,
    /// Decode every this many epochs in best-checkpoint mode.
    pub checkpoint_every: usize,
    /// Report the best tour over all checkpoints instead of the last one.
    pub best_checkpoint: bool,
    pub repetitions: usize,
    pub layer: LayerKind,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub embedding_init: EmbeddingInit,
    /// Keep Adam moments of perturbed tensors across a shrink-and-perturb step.
    pub keep_adam_state: bool,
    /// Carry Adam moments from one snapshot to the next (warm and SP).
    pub carry_adam: bool,
    /// QUBO penalty for MIS and TSP; problem default when absent.
    pub penalty: Option<f64>,
    pub threshold: f64,
    pub repair: RepairRule,
    /// Tour decoding beam width; 1 is greedy.
    pub beam_width: usize,
}

impl Default for SolveSchedule {
    fn default() -> Self {
        SolveSchedule {
            strategy: Strategy::Static,
            sp_subset: SpSubset::Full,
            epoch_max: 3000,
            epoch_ws: 3000,
            lr: DEFAULT_LR,
            lambda_shrink: DEFAULT_SHRINK,
            lambda_perturb: DEFAULT_PERTURB,
            sigma: DEFAULT_SIGMA,
            zero_noise: false,
            seed: 0,
            checkpoint_every: 100,
            best_checkpoint: false,
            repetitions: 1,
            layer: LayerKind::Gcn,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            embedding_init: EmbeddingInit::Uniform,
            keep_adam_state: false,
            carry_adam: true,
            penalty: None,
            threshold: decode::DEFAULT_THRESHOLD,
            repair: RepairRule::MaxViolations,
            beam_width: 20,
        }
    }
}

impl SolveSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epoch_max == 0 {
            return Err(Error::invalid("epoch_max must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.repetitions == 0 || self.checkpoint_every == 0 || self.beam_width == 0 {
            return Err(Error::invalid("repetitions, checkpoint_every and beam_width must be positive"));
        }
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if self.strategy == Strategy::Sp {
            self.shrink_perturb().validate()?;
        }
        Ok(())
    }

    pub fn shrink_perturb(&self) -> ShrinkPerturb {
        ShrinkPerturb {
            shrink: self.lambda_shrink,
            perturb: self.lambda_perturb,
            subset: self.sp_subset,
            noise: if self.zero_noise { Noise::Zero } else { Noise::Gaussian { sigma: self.sigma } },
            reset_adam: !self.keep_adam_state,
        }
    }

    /// Short method label such as `static`, `warm` or `sp-full`.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Sp => format!("sp-{}", self.sp_subset.as_str()),
            s => s.as_str().to_string(),
        }
    }

    /// Seed of repetition `rep`.
    pub fn repetition_seed(&self, rep: usize) -> u64 {
        seed::derive(self.seed, rep as u64)
    }
}

/// One snapshot prepared for optimization: its QUBO and message-passing
/// operator are built once and reused every epoch.
pub struct SnapshotProblem<'a> {
    pub graph: &'a GraphSnapshot,
    pub problem: ProblemKind,
    pub qubo: QuboInstance,
    pub op: GraphOperator,
}

impl<'a> SnapshotProblem<'a> {
    pub fn new(problem: ProblemKind, graph: &'a GraphSnapshot, sched: &SolveSchedule) -> Result<Self> {
        Ok(SnapshotProblem {
            graph,
            problem,
            qubo: build_for(problem, graph, sched.penalty)?,
            op: GraphOperator::new(sched.layer, graph),
        })
    }

    pub fn dims(&self, sched: &SolveSchedule) -> ModelDims {
        let n = self.graph.node_count();
        let out = if self.problem == ProblemKind::Tsp { n } else { 1 };
        ModelDims::new(n, sched.embedding_dim, sched.hidden_dim, out)
    }

    /// Turns a relaxed output into a feasible solution and scores it.
    pub fn decode(&self, relaxed: &[f64], sched: &SolveSchedule) -> Result<SolutionRecord> {
        let solution = match self.problem {
            ProblemKind::MaxCut => DiscreteSolution::Cut(decode::round_binary(relaxed, sched.threshold)),
            ProblemKind::Mis => {
                decode::repair_mis(self.graph, &decode::round_binary(relaxed, sched.threshold), sched.repair)
            }
            ProblemKind::Tsp => decode::decode_tour_beam(relaxed, self.graph.node_count(), sched.beam_width),
        };
        let natural_objective = self.qubo.natural_objective(solution.payload())?;
        Ok(SolutionRecord { solution, natural_objective })
    }

    fn better(&self, a: f64, b: f64) -> bool {
        if self.problem.maximizes() {
            a > b
        } else {
            a < b
        }
    }
}

/// Runs `epochs` epochs of forward, loss, backward and Adam on `model`.
///
/// `visit(epoch, output, loss, model)` sees the state after `epoch` updates,
/// for `epoch` in `0..=epochs`. Returns the loss recorded before each update.
pub fn train(
    model: &mut ModelState,
    sp: &SnapshotProblem<'_>,
    epochs: usize,
    lr: f64,
    mut visit: impl FnMut(usize, &[f64], f64, &ModelState) -> Result<()>,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(epochs);
    let (mut out, mut tape) = model.forward(&sp.op)?;
    let mut loss = sp.qubo.loss(&out)?;
    visit(0, &out, loss, model)?;
    for epoch in 1..=epochs {
        let grad = sp.qubo.grad(&out)?;
        losses.push(loss);
        let grads = model.backward(&tape, &grad, &sp.op)?;
        adam_step(model, &grads, lr)?;
        if cfg!(debug_assertions) && !model.is_finite() {
            return Err(Error::NonFinite("model parameters"));
        }
        (out, tape) = model.forward(&sp.op)?;
        loss = sp.qubo.loss(&out)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        visit(epoch, &out, loss, model)?;
    }
    Ok(losses)
}

/// Decoded state of one snapshot after a given number of epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetCut {
    pub epochs: usize,
    pub loss: f64,
    pub relaxed: Vec<f64>,
    pub solution: SolutionRecord,
    /// Wall-clock since the snapshot's optimization started, decoding included.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTrace {
    pub index: usize,
    /// One entry per requested budget, ascending.
    pub cuts: Vec<BudgetCut>,
    /// Loss before each update of the longest run on this snapshot.
    pub losses: Vec<f64>,
    /// First snapshot only: the state after `epoch_max` epochs.
    pub reference: Option<BudgetCut>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub method: String,
    pub problem: ProblemKind,
    pub repetition: usize,
    pub budgets: Vec<usize>,
    pub snapshots: Vec<SnapshotTrace>,
}

impl SolveTrace {
    /// Natural objective of every snapshot at budget index `k`.
    pub fn objectives_at(&self, k: usize) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.cuts[k].solution.natural_objective).collect()
    }

    /// Copy with every wall-clock field zeroed, for equality checks.
    pub fn without_timing(&self) -> SolveTrace {
        let mut t = self.clone();
        for s in &mut t.snapshots {
            for c in s.cuts.iter_mut().chain(s.reference.as_mut()) {
                c.seconds = 0.0;
            }
        }
        t
    }
}

struct RunOutput {
    cuts: Vec<BudgetCut>,
    losses: Vec<f64>,
    states: Vec<ModelState>,
}

/// Optimizes one snapshot from `start`, capturing decoded solutions (and,
/// if asked, parameters) after each epoch count in `cuts`.
fn run_snapshot(
    mut model: ModelState,
    sp: &SnapshotProblem<'_>,
    sched: &SolveSchedule,
    cuts: &[usize],
    keep_states: bool,
) -> Result<RunOutput> {
    let epochs = cuts.last().copied().unwrap_or(0);
    let best_mode = sched.best_checkpoint && sp.problem == ProblemKind::Tsp;
    let started = Instant::now();
    let mut best: Option<SolutionRecord> = None;
    let mut out = RunOutput { cuts: Vec::with_capacity(cuts.len()), losses: Vec::new(), states: Vec::new() };
    let mut next_cut = 0;
    out.losses = train(&mut model, sp, epochs, sched.lr, |epoch, relaxed, loss, m| {
        let at_cut = next_cut < cuts.len() && cuts[next_cut] == epoch;
        let at_checkpoint = best_mode && epoch > 0 && epoch % sched.checkpoint_every == 0;
        if !at_cut && !at_checkpoint {
            return Ok(());
        }
        let decoded = sp.decode(relaxed, sched)?;
        let solution = if best_mode {
            let keep = match &best {
                Some(b) => !sp.better(decoded.natural_objective, b.natural_objective),
                None => false,
            };
            if !keep {
                best = Some(decoded);
            }
            best.clone().expect("set above")
        } else {
            decoded
        };
        while next_cut < cuts.len() && cuts[next_cut] == epoch {
            out.cuts.push(BudgetCut {
                epochs: epoch,
                loss,
                relaxed: relaxed.to_vec(),
                solution: solution.clone(),
                seconds: started.elapsed().as_secs_f64(),
            });
            if keep_states {
                out.states.push(m.clone());
            }
            next_cut += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

/// Parameters a later snapshot starts from, given the previous snapshot's
/// final parameters.
pub fn prepare_start(
    prev: &ModelState,
    sched: &SolveSchedule,
    dims: ModelDims,
    rep_seed: u64,
    t: usize,
) -> Result<ModelState> {
    let snap_seed = seed::derive(rep_seed, t as u64);
    match sched.strategy {
        Strategy::Static => Ok(ModelState::init(dims, sched.layer, snap_seed)),
        Strategy::Warm | Strategy::Sp => {
            if prev.dims() != dims {
                return Err(Error::invalid("snapshots must keep the node count for warm starts"));
            }
            let mut m = prev.clone();
            if !sched.carry_adam {
                m.reset_adam();
            }
            if sched.strategy == Strategy::Sp {
                shrink_perturb(&mut m, &sched.shrink_perturb(), seed::derive(snap_seed, SP_NOISE_LABEL))?;
            }
            Ok(m)
        }
    }
}

/// Parameters the first snapshot starts from. Shared by every strategy.
pub fn initial_model(sched: &SolveSchedule, dims: ModelDims, rep_seed: u64) -> ModelState {
    ModelState::init_with(dims, sched.layer, sched.embedding_init, seed::derive(rep_seed, 0))
}

fn check_budgets(budgets: &[usize], cap: usize) -> Result<()> {
    if budgets.is_empty() {
        return Err(Error::invalid("at least one budget is required"));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("budgets must be strictly ascending"));
    }
    if *budgets.last().unwrap() > cap {
        return Err(Error::invalid(format!("largest budget exceeds epoch_ws = {cap}")));
    }
    Ok(())
}

/// One repetition of `sched` with decoded solutions captured at every budget.
///
/// Each budget behaves as if the schedule had been run with `epoch_ws` equal
/// to that budget. Snapshots whose starting point does not depend on the
/// budget (every static snapshot, the first snapshot, and the second snapshot
/// of a chained strategy) are optimized once with all cuts taken along the
/// way. Later snapshots of a chain start from the budget-specific state of
/// their predecessor, so each budget continues its own run.
pub fn run_budget_sweep(
    inst: &DynamicInstance,
    sched: &SolveSchedule,
    budgets: &[usize],
    repetition: usize,
) -> Result<SolveTrace> {
    sched.validate()?;
    check_budgets(budgets, sched.epoch_ws)?;
    let rep_seed = sched.repetition_seed(repetition);
    let problem = inst.problem();
    let graphs = inst.snapshots();
    let mut traces = Vec::with_capacity(graphs.len());

    let sp0 = SnapshotProblem::new(problem, &graphs[0], sched)?;
    let mut cuts0: Vec<usize> = budgets.to_vec();
    if !cuts0.contains(&sched.epoch_max) {
        cuts0.push(sched.epoch_max);
        cuts0.sort_unstable();
    }
    let first = run_snapshot(initial_model(sched, sp0.dims(sched), rep_seed), &sp0, sched, &cuts0, true)?;
    let ref_pos = cuts0.iter().position(|&c| c == sched.epoch_max).unwrap();
    let mut starts = vec![first.states[ref_pos].clone()];
    traces.push(SnapshotTrace {
        index: 0,
        cuts: first.cuts.iter().filter(|c| budgets.contains(&c.epochs)).cloned().collect(),
        losses: first.losses,
        reference: Some(first.cuts[ref_pos].clone()),
    });

    for (t, g) in graphs.iter().enumerate().skip(1) {
        let sp = SnapshotProblem::new(problem, g, sched)?;
        let dims = sp.dims(sched);
        let chained = sched.strategy != Strategy::Static;
        if starts.len() == 1 {
            let start = prepare_start(&starts[0], sched, dims, rep_seed, t)?;
            let run = run_snapshot(start, &sp, sched, budgets, chained)?;
            if chained {
                starts = run.states;
            }
            traces.push(SnapshotTrace { index: t, cuts: run.cuts, losses: run.losses, reference: None });
        } else {
            let mut cuts = Vec::with_capacity(budgets.len());
            let mut losses = Vec::new();
            for (k, &b) in budgets.iter().enumerate() {
                let start = prepare_start(&starts[k], sched, dims, rep_seed, t)?;
                let mut run = run_snapshot(start, &sp, sched, &[b], true)?;
                starts[k] = run.states.pop().expect("one cut requested");
                cuts.push(run.cuts.pop().expect("one cut requested"));
                if run.losses.len() > losses.len() {
                    losses = run.losses;
                }
            }
            traces.push(SnapshotTrace { index: t, cuts, losses, reference: None });
        }
    }
    Ok(SolveTrace { method: sched.label(), problem, repetition, budgets: budgets.to_vec(), snapshots: traces })
}

/// A single-budget solve at `epoch_ws`.
pub fn solve(inst: &DynamicInstance, sched: &SolveSchedule, repetition: usize) -> Result<SolveTrace> {
    run_budget_sweep(inst, sched, &[sched.epoch_ws], repetition)
}

fn expect_strategy(sched: &SolveSchedule, s: Strategy) -> Result<()> {
    if sched.strategy != s {
        return Err(Error::invalid(format!(
            "schedule strategy is {}, expected {}",
            sched.strategy.as_str(),
            s.as_str()
        )));
    }
    Ok(())
}

pub fn solve_static(inst: &DynamicInstance, sched: &SolveSchedule) -> Result<SolveTrace> {
    expect_strategy(sched, Strategy::Static)?;
    solve(inst, sched, 0)
}

pub fn solve_warm(inst: &DynamicInstance, sched: &SolveSchedule) -> Result<SolveTrace> {
    expect_strategy(sched, Strategy::Warm)?;
    solve(inst, sched, 0)
}

pub fn solve_sp(inst: &DynamicInstance, sched: &SolveSchedule) -> Result<SolveTrace> {
    expect_strategy(sched, Strategy::Sp)?;
    solve(inst, sched, 0)
}

/// All repetitions of a sweep, fanned out over `exec` and returned in
/// repetition order.
pub fn run_repetitions(
    inst: &DynamicInstance,
    sched: &SolveSchedule,
    budgets: &[usize],
    exec: Exec,
) -> Result<Vec<SolveTrace>> {
    par::map_range(exec, sched.repetitions, |r| run_budget_sweep(inst, sched, budgets, r)).into_iter().collect()
}
