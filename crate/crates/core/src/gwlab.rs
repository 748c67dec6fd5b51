//! Goemans-Williamson laboratory: a factorized MaxCut SDP solver, hyperplane
//! rounding, projection onto the elliptope, and Monte-Carlo experiments on
//! how perturbing an SDP point changes the chance of rounding to an optimal
//! cut.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSnapshot;
use crate::oracle::exact_maxcut;
use crate::par::{self, Exec};
use crate::seed;

/// Tolerance for the PSD and unit-diagonal checks.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// A point of the elliptope: symmetric, positive semidefinite, unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpPoint {
    x: DMatrix<f64>,
}

impl SdpPoint {
    /// Validates `x` against the feasibility tolerance.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let p = SdpPoint { x };
        p.check()?;
        Ok(p)
    }

    /// The rank-one point with every entry equal to one.
    pub fn all_ones(n: usize) -> Self {
        SdpPoint { x: DMatrix::from_element(n, n, 1.0) }
    }

    pub fn identity(n: usize) -> Self {
        SdpPoint { x: DMatrix::identity(n, n) }
    }

    /// `V V^T` for a matrix whose rows are unit vectors.
    pub fn from_vectors(v: &DMatrix<f64>) -> Self {
        let mut x = v * v.transpose();
        for i in 0..x.nrows() {
            x[(i, i)] = 1.0;
        }
        symmetrize(&mut x);
        SdpPoint { x }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.x.clone()).eigenvalues.min()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.x.nrows();
        if self.x.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.x.ncols() });
        }
        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("SDP matrix"));
        }
        for i in 0..n {
            if (self.x[(i, i)] - 1.0).abs() > FEASIBILITY_TOL {
                return Err(Error::invalid(format!("diagonal entry {i} is {}", self.x[(i, i)])));
            }
            for j in 0..i {
                if self.x[(i, j)] != self.x[(j, i)] {
                    return Err(Error::invalid("SDP matrix is not symmetric"));
                }
            }
        }
        let lmin = self.min_eigenvalue();
        if lmin < -FEASIBILITY_TOL {
            return Err(Error::invalid(format!("SDP matrix has eigenvalue {lmin}")));
        }
        Ok(())
    }

    /// Rows `Y_i` with `Y Y^T = X`, from the eigendecomposition with
    /// eigenvalues below `1e-12 * max` treated as zero.
    pub fn factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.x.clone());
        let top = eig.eigenvalues.max().max(0.0);
        let mut y = eig.eigenvectors;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = if lam > 1e-12 * top { lam.sqrt() } else { 0.0 };
            y.column_mut(k).scale_mut(s);
        }
        y
    }
}

fn symmetrize(x: &mut DMatrix<f64>) {
    let n = x.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
}

/// Weighted graph Laplacian.
pub fn laplacian(g: &GraphSnapshot) -> DMatrix<f64> {
    let n = g.node_count();
    let mut l = DMatrix::zeros(n, n);
    for (i, j, w) in g.weighted_edges() {
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    l
}

/// `Tr(L X) / 4`, the expected cut weight of the relaxation.
pub fn sdp_objective(l: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    l.component_mul(x).sum() / 4.0
}

/// Upper bound on the SDP optimum from a dual-feasible certificate built
/// around `x`: `y_i = (L X)_ii / 4`, shifted until `Diag(y) - L/4` is PSD.
pub fn dual_bound(g: &GraphSnapshot, x: &SdpPoint) -> f64 {
    let l = laplacian(g);
    let lx = &l * x.matrix();
    let n = l.nrows();
    let mut s = -&l / 4.0;
    for i in 0..n {
        s[(i, i)] += lx[(i, i)] / 4.0;
    }
    let shift = (-SymmetricEigen::new(s).eigenvalues.min()).max(0.0);
    (0..n).map(|i| lx[(i, i)] / 4.0 + shift).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpConfig {
    pub max_iters: usize,
    /// Stop once an iteration improves the objective by less than
    /// `tol * max(1, objective)`.
    pub tol: f64,
    /// Ascent step, scaled by the largest weighted degree.
    pub step: f64,
    pub seed: u64,
}

impl Default for SdpConfig {
    fn default() -> Self {
        SdpConfig { max_iters: 100_000, tol: 1e-14, step: 10.0, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub point: SdpPoint,
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iters` ran out before the improvement fell below `tol`.
    pub converged: bool,
}

fn normalize_rows(v: &mut DMatrix<f64>) {
    for mut row in v.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

/// Projected ascent on `Tr(L V V^T) / 4` over matrices with unit rows,
/// starting from `v`. Each step is `V <- rownorm((I + c L) V)`, which never
/// decreases the objective because it maximizes a convex function's
/// linearization over the product of spheres.
pub fn ascend_from(g: &GraphSnapshot, mut v: DMatrix<f64>, cfg: &SdpConfig) -> Result<SdpSolution> {
    let n = g.node_count();
    if v.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.nrows() });
    }
    if g.edge_count() == 0 {
        return Err(Error::invalid("the SDP needs at least one edge"));
    }
    let l = laplacian(g);
    let max_deg = (0..n).map(|i| l[(i, i)]).fold(0.0, f64::max);
    let m = DMatrix::identity(n, n) + &l * (cfg.step / max_deg);
    normalize_rows(&mut v);
    let objective = |v: &DMatrix<f64>| sdp_objective(&l, &(v * v.transpose()));
    let mut f = objective(&v);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut next = &m * &v;
        normalize_rows(&mut next);
        let f_next = objective(&next);
        let gain = f_next - f;
        if f_next >= f {
            v = next;
            f = f_next;
        }
        if gain < cfg.tol * f.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let point = SdpPoint::from_vectors(&v);
    let objective = sdp_objective(&l, point.matrix());
    Ok(SdpSolution { point, objective, iterations, converged })
}

/// Solves the MaxCut SDP from a random full-rank start.
pub fn solve_gw_sdp(g: &GraphSnapshot, cfg: &SdpConfig) -> Result<SdpSolution> {
    let n = g.node_count();
    let mut rng = seed::rng(cfg.seed);
    let v = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    ascend_from(g, v, cfg)
}

/// Outcome of repeated hyperplane rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingStats {
    pub trials: usize,
    pub best_cut: f64,
    pub best_assignment: Vec<usize>,
    pub mean_cut: f64,
    /// `(cut value, count)`, ascending by value.
    pub distribution: Vec<(f64, usize)>,
}

impl RoundingStats {
    /// Number of trials whose cut reached `target`.
    pub fn hits(&self, target: f64) -> usize {
        self.distribution.iter().filter(|(c, _)| *c >= target - 1e-9).map(|(_, k)| k).sum()
    }
}

fn round_once(y: &DMatrix<f64>, edges: &[(usize, usize, f64)], rng: &mut seed::Rng, side: &mut [usize]) -> f64 {
    let r: Vec<f64> = (0..y.ncols()).map(|_| rng.sample(StandardNormal)).collect();
    for (i, s) in side.iter_mut().enumerate() {
        let dot: f64 = y.row(i).iter().zip(&r).map(|(a, b)| a * b).sum();
        *s = usize::from(dot < 0.0);
    }
    crate::qubo::cut_weight(edges, side)
}

/// Hyperplane rounding: factor `X = Y Y^T`, then for each trial draw
/// `r ~ N(0, I)` and put node `i` on side `sign(Y_i . r)`.
pub fn gw_round(g: &GraphSnapshot, x: &SdpPoint, trials: usize, seed: u64, exec: Exec) -> Result<RoundingStats> {
    if x.dim() != g.node_count() {
        return Err(Error::DimensionMismatch { expected: g.node_count(), got: x.dim() });
    }
    if trials == 0 {
        return Err(Error::invalid("at least one rounding trial is required"));
    }
    let y = x.factor();
    let edges: Vec<_> = g.weighted_edges().collect();
    const CHUNK: usize = 256;
    let chunks = trials.div_ceil(CHUNK);
    let parts = par::map_range(exec, chunks, |c| {
        let mut rng = seed::rng(seed::derive(seed, c as u64));
        let mut side = vec![0; g.node_count()];
        let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, Vec::new());
        let mut cuts = Vec::with_capacity(CHUNK);
        for _ in c * CHUNK..((c + 1) * CHUNK).min(trials) {
            let cut = round_once(&y, &edges, &mut rng, &mut side);
            if cut > best.0 {
                best = (cut, side.clone());
            }
            cuts.push(cut);
        }
        (best, cuts)
    });
    let mut hist: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, Vec::new());
    let mut total = 0.0;
    for (b, cuts) in parts {
        if b.0 > best.0 {
            best = b;
        }
        for c in cuts {
            total += c;
            // Order-preserving key for non-negative floats.
            hist.entry(c.to_bits()).or_insert((c, 0)).1 += 1;
        }
    }
    Ok(RoundingStats {
        trials,
        best_cut: best.0,
        best_assignment: best.1,
        mean_cut: total / trials as f64,
        distribution: hist.into_values().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { max_sweeps: 10_000, tol: 1e-9 }
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub point: SdpPoint,
    pub sweeps: usize,
    pub converged: bool,
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&clamped) * q.transpose();
    symmetrize(&mut out);
    out
}

/// Nearest point of the elliptope to a symmetric `m`, by Dykstra's
/// alternating projections between the PSD cone and the unit-diagonal
/// plane. A final shift `(X + dI) / (1 + d)` removes any leftover negative
/// eigenvalue while keeping the diagonal at one.
pub fn project_feasible(m: &DMatrix<f64>, cfg: &ProjectionConfig) -> Result<Projection> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    let mut x = m.clone();
    symmetrize(&mut x);
    let mut p = DMatrix::zeros(n, n);
    let mut q = DMatrix::zeros(n, n);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let y = project_psd(&(&x + &p));
        p = &x + &p - &y;
        let mut next = &y + &q;
        for i in 0..n {
            next[(i, i)] = 1.0;
        }
        q = &y + &q - &next;
        let change = (&next - &x).norm();
        x = next;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    let lmin = SymmetricEigen::new(x.clone()).eigenvalues.min();
    if lmin < 0.0 {
        let d = -lmin;
        x = (x + DMatrix::identity(n, n) * d) / (1.0 + d);
        for i in 0..n {
            x[(i, i)] = 1.0;
        }
    }
    symmetrize(&mut x);
    Ok(Projection { point: SdpPoint::new(x)?, sweeps, converged })
}

/// `(A + A^T) / 2` with standard normal entries in `A`.
pub fn sample_goe(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub lambda: f64,
    pub trials: usize,
    pub successes: usize,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl ExperimentRow {
    fn new(lambda: f64, trials: usize, successes: usize) -> Self {
        let (wilson_lo, wilson_hi) = wilson_interval(successes, trials);
        ExperimentRow { lambda, trials, successes, p_hat: successes as f64 / trials as f64, wilson_lo, wilson_hi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Perturbation draws per lambda.
    pub draws: usize,
    /// Rounding trials per draw.
    pub rounding_trials: usize,
    pub seed: u64,
    pub projection: ProjectionConfig,
    pub sdp: SdpConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            draws: 200,
            rounding_trials: 100,
            seed: 0,
            projection: ProjectionConfig::default(),
            sdp: SdpConfig { max_iters: 20_000, tol: 1e-12, ..SdpConfig::default() },
        }
    }
}

fn run_experiment(
    g: &GraphSnapshot,
    x0: &SdpPoint,
    lambdas: &[f64],
    cfg: &ExperimentConfig,
    exec: Exec,
    resolve: bool,
) -> Result<Vec<ExperimentRow>> {
    let n = g.node_count();
    if x0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.dim() });
    }
    if cfg.draws == 0 || cfg.rounding_trials == 0 {
        return Err(Error::invalid("draws and rounding trials must be positive"));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("perturbation scales must be finite and non-negative"));
    }
    let c_star = exact_maxcut(g, Exec::Sequential)?.value;
    let mut rows = Vec::with_capacity(lambdas.len());
    for (li, &lambda) in lambdas.iter().enumerate() {
        let lam_seed = seed::derive(cfg.seed, li as u64);
        let hits = par::map_range(exec, cfg.draws, |d| -> Result<usize> {
            let draw_seed = seed::derive(lam_seed, d as u64);
            let start = if lambda == 0.0 {
                x0.clone()
            } else {
                let z = sample_goe(n, seed::derive(draw_seed, 1));
                project_feasible(&(x0.matrix() + z * lambda), &cfg.projection)?.point
            };
            let point = if resolve {
                let mut sdp = cfg.sdp;
                sdp.seed = seed::derive(draw_seed, 3);
                ascend_from(g, start.factor(), &sdp)?.point
            } else {
                start
            };
            let stats = gw_round(g, &point, cfg.rounding_trials, seed::derive(draw_seed, 2), Exec::Sequential)?;
            Ok(stats.hits(c_star))
        });
        let successes = hits.into_iter().sum::<Result<usize>>()?;
        rows.push(ExperimentRow::new(lambda, cfg.draws * cfg.rounding_trials, successes));
    }
    Ok(rows)
}

/// For each scale `lambda`, the fraction of (perturbation, rounding) pairs
/// that reach the maximum cut when rounding `Proj(x0 + lambda Z)` with GOE
/// `Z`. The `lambda = 0` row rounds `x0` itself.
pub fn perturbation_experiment(
    g: &GraphSnapshot,
    x0: &SdpPoint,
    lambdas: &[f64],
    cfg: &ExperimentConfig,
    exec: Exec,
) -> Result<Vec<ExperimentRow>> {
    run_experiment(g, x0, lambdas, cfg, exec, false)
}

/// Like [`perturbation_experiment`], but the perturbed point only
/// initializes the SDP ascent, and the ascent's result is rounded.
pub fn warmstart_sdp_experiment(
    g: &GraphSnapshot,
    x_init: &SdpPoint,
    lambdas: &[f64],
    cfg: &ExperimentConfig,
    exec: Exec,
) -> Result<Vec<ExperimentRow>> {
    run_experiment(g, x_init, lambdas, cfg, exec, true)
}

/// CSV with header `lambda,trials,successes,p_hat,wilson_lo,wilson_hi`.
pub fn rows_to_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
