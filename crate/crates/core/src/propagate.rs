//! Propagation engines: matrix-form signed steps, SBP updates, clamped
//! pairwise dynamics and Dirichlet-energy tracking.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::balance::{row_softmax, row_softmax_in_place, SignedGraph};
use crate::error::{invalid, shape_err, Error, Result};
use crate::graph::SparseGraph;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::operator::Operator;

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const DEFAULT_DIVERGENCE_CAP: f64 = 1e8;
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "snake_case")]
pub enum PostStep {
    None,
    LayerNorm,
    Clamp(f64),
}

impl PostStep {
    pub fn apply(&self, x: DenseMatrix) -> DenseMatrix {
        match *self {
            PostStep::None => x,
            PostStep::LayerNorm => layer_norm(&x),
            PostStep::Clamp(c) => x.map(|z| clamp_fc(z, c)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub steps: usize,
    pub post_step: PostStep,
    pub divergence_norm_cap: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            lambda: 0.5,
            steps: 10,
            post_step: PostStep::LayerNorm,
            divergence_norm_cap: DEFAULT_DIVERGENCE_CAP,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite())
            || !(self.beta >= 0.0 && self.beta.is_finite())
        {
            return Err(invalid!("alpha and beta must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(invalid!("lambda={} outside [0, 1]", self.lambda));
        }
        if let PostStep::Clamp(c) = self.post_step {
            if !(c > 0.0) {
                return Err(invalid!("clamp bound must be positive, got {c}"));
            }
        }
        if !(self.divergence_norm_cap > 0.0) {
            return Err(invalid!("divergence cap must be positive"));
        }
        Ok(())
    }
}

/// Per-node normalization across features, without a learned affine map.
pub fn layer_norm(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    let d = x.cols() as f64;
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / math::sqrt(var + LAYER_NORM_EPS);
        row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
    out
}

/// `F_c(z) = min(max(z, −c), c)`.
pub fn clamp_fc(z: f64, c: f64) -> f64 {
    z.clamp(-c, c)
}

/// `(1 − α + β)X + αÂ⁺X − βÂ⁻X`.
pub fn signed_step(x: &DenseMatrix, g: &SignedGraph, alpha: f64, beta: f64) -> Result<DenseMatrix> {
    let pos = g.pos().apply(x)?;
    let neg = g.neg().apply(x)?;
    let mut out = x.scale(1.0 - alpha + beta);
    out.add_scaled(alpha, &pos)?;
    out.add_scaled(-beta, &neg)?;
    Ok(out)
}

/// Maps a feature matrix to the next layer's features.
pub trait Stepper {
    fn step(&mut self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

impl Stepper for Operator {
    fn step(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.apply(x)
    }
}

/// Matrix-form signed propagation followed by an optional post step.
#[derive(Debug, Clone)]
pub struct SignedStepper {
    pub graph: SignedGraph,
    pub alpha: f64,
    pub beta: f64,
    pub post_step: PostStep,
}

impl Stepper for SignedStepper {
    fn step(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self
            .post_step
            .apply(signed_step(x, &self.graph, self.alpha, self.beta)?))
    }
}

/// `post((1 − λ)X + λ(αÂX − β·N·X))` with a fixed negative operator `N`.
#[derive(Debug, Clone)]
pub struct SbpPropagator {
    pos: Operator,
    neg: Operator,
    cfg: PropagationConfig,
}

impl SbpPropagator {
    /// Caches `softmax(neg_raw)` as the negative operator.
    pub fn new(pos: Operator, neg_raw: &DenseMatrix, cfg: PropagationConfig) -> Result<Self> {
        neg_raw.ensure_square()?;
        Self::with_negative_operator(pos, Operator::Dense(row_softmax(neg_raw)), cfg)
    }

    /// Like [`SbpPropagator::new`], reusing the buffer of `neg_raw`.
    pub fn from_raw(
        pos: Operator,
        mut neg_raw: DenseMatrix,
        cfg: PropagationConfig,
    ) -> Result<Self> {
        neg_raw.ensure_square()?;
        row_softmax_in_place(&mut neg_raw);
        Self::with_negative_operator(pos, Operator::Dense(neg_raw), cfg)
    }

    pub fn with_negative_operator(
        pos: Operator,
        neg: Operator,
        cfg: PropagationConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if pos.n() != neg.n() {
            return Err(shape_err((pos.n(), pos.n()), (neg.n(), neg.n())));
        }
        Ok(Self { pos, neg, cfg })
    }

    pub fn config(&self) -> &PropagationConfig {
        &self.cfg
    }

    pub fn negative(&self) -> &Operator {
        &self.neg
    }
}

impl Stepper for SbpPropagator {
    fn step(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let c = &self.cfg;
        let mut out = x.scale(1.0 - c.lambda);
        out.add_scaled(c.lambda * c.alpha, &self.pos.apply(x)?)?;
        out.add_scaled(-c.lambda * c.beta, &self.neg.apply(x)?)?;
        Ok(c.post_step.apply(out))
    }
}

/// Feature-SBP with the negative term moved to the feature side:
/// `post((1 − λ)X + λ(αÂX − β·X·softmax(−X₀ᵀX₀)))`.
#[derive(Debug, Clone)]
pub struct FeatureSbpV2 {
    pos: Operator,
    factor: DenseMatrix,
    cfg: PropagationConfig,
}

impl FeatureSbpV2 {
    pub fn new(pos: Operator, x0: &DenseMatrix, cfg: PropagationConfig) -> Result<Self> {
        cfg.validate()?;
        if x0.rows() != pos.n() {
            return Err(shape_err((pos.n(), x0.cols()), x0.shape()));
        }
        let factor = row_softmax(&x0.gram_cols().scale(-1.0));
        Ok(Self { pos, factor, cfg })
    }

    /// The cached `d × d` mixing factor.
    pub fn factor(&self) -> &DenseMatrix {
        &self.factor
    }
}

impl Stepper for FeatureSbpV2 {
    fn step(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let c = &self.cfg;
        let mut out = x.scale(1.0 - c.lambda);
        out.add_scaled(c.lambda * c.alpha, &self.pos.apply(x)?)?;
        out.add_scaled(-c.lambda * c.beta, &x.matmul(&self.factor)?)?;
        Ok(c.post_step.apply(out))
    }
}

/// `(1/n) Σ_i Σ_{j ∈ N(i)} ‖x_i − x_j‖²`.
pub fn dirichlet_energy(x: &DenseMatrix, neighbors: &SparseGraph) -> Result<f64> {
    if x.rows() != neighbors.n() {
        return Err(shape_err((neighbors.n(), x.cols()), x.shape()));
    }
    let n = x.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        let xi = x.row(i);
        for j in neighbors.neighbors(i) {
            total += xi
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    Ok(total / n as f64)
}

/// Union of the off-diagonal supports of both operators, as an unweighted graph.
pub fn signed_support(g: &SignedGraph) -> SparseGraph {
    let n = g.n();
    let mut out = SparseGraph::new(n);
    for op in [g.pos(), g.neg()] {
        for i in 0..n {
            for j in op.row_support(i) {
                out.add_edge(i, j)
                    .expect("indices come from an n×n operator");
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    ConvergedToMean,
    Clustered,
    Diverged,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub steps: usize,
    pub divergence_norm_cap: f64,
    /// Stop as soon as the state reaches the column mean.
    pub stop_on_convergence: bool,
}

impl RunOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            divergence_norm_cap: DEFAULT_DIVERGENCE_CAP,
            stop_on_convergence: false,
        }
    }
}

impl From<&PropagationConfig> for RunOptions {
    fn from(cfg: &PropagationConfig) -> Self {
        Self {
            steps: cfg.steps,
            divergence_norm_cap: cfg.divergence_norm_cap,
            stop_on_convergence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub x_final: DenseMatrix,
    pub trace: EnergyTrace,
    pub status: RunStatus,
    pub steps_taken: usize,
}

/// Largest absolute deviation of any entry from its column mean.
pub fn mean_deviation(x: &DenseMatrix) -> f64 {
    let means = x.column_means();
    x.row_iter()
        .flat_map(|row| row.iter().zip(&means).map(|(v, m)| math::abs(v - m)))
        .fold(0.0, f64::max)
}

/// Iterates `stepper`, recording energy over `neighbors` and the Frobenius norm.
/// Divergence always ends the run early.
pub fn run_propagation<S: Stepper + ?Sized>(
    x0: &DenseMatrix,
    stepper: &mut S,
    neighbors: &SparseGraph,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let mut trace = EnergyTrace::default();
    let record = |x: &DenseMatrix, trace: &mut EnergyTrace| -> Result<()> {
        trace.energy.push(dirichlet_energy(x, neighbors)?);
        trace.norm.push(x.frobenius_norm());
        Ok(())
    };
    let mut x = x0.clone();
    record(&x, &mut trace)?;
    let mut prev_delta = f64::INFINITY;
    for k in 1..=opts.steps {
        let next = stepper.step(&x)?;
        if !next.all_finite() {
            if next.as_slice().iter().any(|v| v.is_nan()) {
                return Err(Error::NumericFailure { step: k });
            }
            return Ok(finish(next, trace, RunStatus::Diverged, k));
        }
        prev_delta = next.max_abs_diff(&x)?;
        x = next;
        record(&x, &mut trace)?;
        if x.max_abs() > opts.divergence_norm_cap {
            return Ok(finish(x, trace, RunStatus::Diverged, k));
        }
        if opts.stop_on_convergence && mean_deviation(&x) < CONVERGENCE_TOL {
            return Ok(finish(x, trace, RunStatus::ConvergedToMean, k));
        }
    }
    let status = if mean_deviation(&x) < CONVERGENCE_TOL {
        RunStatus::ConvergedToMean
    } else if prev_delta <= CONVERGENCE_TOL * x.max_abs().max(1.0) {
        RunStatus::Clustered
    } else {
        RunStatus::Running
    };
    Ok(finish(x, trace, status, opts.steps))
}

fn finish(
    x_final: DenseMatrix,
    trace: EnergyTrace,
    status: RunStatus,
    steps_taken: usize,
) -> RunOutcome {
    RunOutcome {
        x_final,
        trace,
        status,
        steps_taken,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseParams {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub steps: usize,
    /// Record the state every this many steps; 0 records only the endpoints.
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRun {
    pub final_state: Vec<f64>,
    /// `(step, state)` snapshots, starting with step 0.
    pub trajectory: Vec<(usize, Vec<f64>)>,
}

/// One interaction between `i` and `j` under sign `s`; both endpoints read pre-step values.
pub fn pairwise_update(xi: f64, xj: f64, sign: f64, alpha: f64, beta: f64, c: f64) -> (f64, f64) {
    let theta = if sign > 0.0 {
        alpha
    } else if sign < 0.0 {
        -beta
    } else {
        0.0
    };
    (
        clamp_fc((1.0 - theta) * xi + theta * xj, c),
        clamp_fc((1.0 - theta) * xj + theta * xi, c),
    )
}

/// Clamped pairwise dynamics on a complete signed graph whose signs are read
/// from `signs` (positive entry attracts, negative repels, zero is inert).
/// Each step draws one unordered pair uniformly at random.
pub fn pairwise_dynamics<R: Rng + ?Sized>(
    x0: &[f64],
    signs: &DenseMatrix,
    params: &PairwiseParams,
    rng: &mut R,
) -> Result<PairwiseRun> {
    signs.ensure_square()?;
    let n = x0.len();
    if signs.rows() != n {
        return Err(shape_err((n, n), signs.shape()));
    }
    if n < 2 {
        return Err(invalid!("pairwise dynamics needs at least two nodes"));
    }
    if !(params.c > 0.0) || params.alpha < 0.0 || params.beta < 0.0 {
        return Err(invalid!("need c > 0 and non-negative alpha, beta"));
    }
    let mut x = x0.to_vec();
    let mut trajectory = alloc::vec![(0, x.clone())];
    for step in 1..=params.steps {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = pairwise_update(
            x[i],
            x[j],
            signs[(i, j)],
            params.alpha,
            params.beta,
            params.c,
        );
        x[i] = a;
        x[j] = b;
        if params.record_every > 0 && step % params.record_every == 0 {
            trajectory.push((step, x.clone()));
        }
    }
    if trajectory.last().map(|(s, _)| *s) != Some(params.steps) {
        trajectory.push((params.steps, x.clone()));
    }
    Ok(PairwiseRun {
        final_state: x,
        trajectory,
    })
}
