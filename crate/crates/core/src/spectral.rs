//! Signed Laplacians, the propagation matrix `M = I − αL⁺ − βLʳ⁻` and the
//! critical repulsion strength β*.

use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{invalid, shape_err, Error, Result};
use crate::graph::SparseGraph;
use crate::matrix::DenseMatrix;
use crate::operator::Operator;
use crate::propagate::{mean_deviation, run_propagation, RunOptions, RunStatus, CONVERGENCE_TOL};

pub const BETA_HI_START: f64 = 10.0;
pub const BETA_HI_LIMIT: f64 = (1u64 << 20) as f64;
pub const BISECTION_TOL: f64 = 1e-9;
pub const PHASE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianMode {
    /// Raw strengths, as in the matrix form `I − αL⁺ − βLʳ⁻`.
    #[default]
    Unnormalized,
    /// Per-node strengths `α/deg⁺_i` and `β/deg⁻_i`; `M` equals the signed step on `Â⁺, Â⁻`.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedLaplacians {
    /// `D⁺ − A⁺`.
    pub l_pos: DenseMatrix,
    /// `−D⁻ + A⁻`, the repelling Laplacian of the negative part.
    pub l_neg_repelling: DenseMatrix,
    pub m: DenseMatrix,
}

fn check_pair(pos: &SparseGraph, neg: &SparseGraph) -> Result<()> {
    if pos.n() != neg.n() {
        return Err(shape_err((pos.n(), pos.n()), (neg.n(), neg.n())));
    }
    if let Some((i, j, _)) = neg.edges().find(|&(i, j, _)| pos.has_edge(i, j)) {
        return Err(invalid!("edge {{{i},{j}}} is both positive and negative"));
    }
    Ok(())
}

fn laplacian(g: &SparseGraph) -> DenseMatrix {
    let mut l = g.to_dense().scale(-1.0);
    for i in 0..g.n() {
        l[(i, i)] = g.weighted_neighbors(i).iter().map(|&(_, w)| w).sum();
    }
    l
}

pub fn build_laplacians(
    pos: &SparseGraph,
    neg: &SparseGraph,
    alpha: f64,
    beta: f64,
    mode: LaplacianMode,
) -> Result<SignedLaplacians> {
    check_pair(pos, neg)?;
    let n = pos.n();
    let l_pos = laplacian(pos);
    let l_neg_repelling = laplacian(neg).scale(-1.0);
    let (a_row, b_row): (alloc::vec::Vec<f64>, alloc::vec::Vec<f64>) = match mode {
        LaplacianMode::Unnormalized => (alloc::vec![alpha; n], alloc::vec![beta; n]),
        LaplacianMode::Normalized => (0..n)
            .map(|i| {
                let dp = l_pos[(i, i)];
                let dn = -l_neg_repelling[(i, i)];
                (
                    if dp > 0.0 { alpha / dp } else { 0.0 },
                    if dn > 0.0 { beta / dn } else { 0.0 },
                )
            })
            .unzip(),
    };
    let m = DenseMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - a_row[i] * l_pos[(i, j)] - b_row[i] * l_neg_repelling[(i, j)]
    });
    Ok(SignedLaplacians {
        l_pos,
        l_neg_repelling,
        m,
    })
}

fn deflated(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows() as f64;
    m.axpby(1.0, &DenseMatrix::filled(m.rows(), m.cols(), 1.0 / n), -1.0)
        .expect("same shape")
}

/// `f(β) = λ_max(M − 11ᵀ/n)` in the unnormalized convention.
pub fn f_beta(pos: &SparseGraph, neg: &SparseGraph, alpha: f64, beta: f64) -> Result<f64> {
    let lap = build_laplacians(pos, neg, alpha, beta, LaplacianMode::Unnormalized)?;
    eigen::lambda_max(&deflated(&lap.m))
}

/// `g(β) = λ_min(M − 11ᵀ/n)`.
pub fn g_beta(pos: &SparseGraph, neg: &SparseGraph, alpha: f64, beta: f64) -> Result<f64> {
    let lap = build_laplacians(pos, neg, alpha, beta, LaplacianMode::Unnormalized)?;
    eigen::lambda_min(&deflated(&lap.m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalBeta {
    /// `f64::INFINITY` when no finite threshold exists.
    pub beta_star: f64,
    pub f_at_star: f64,
    pub iterations: usize,
}

impl CriticalBeta {
    pub fn is_finite(&self) -> bool {
        self.beta_star.is_finite()
    }
}

fn check_phase_preconditions(pos: &SparseGraph, neg: &SparseGraph, alpha: f64) -> Result<()> {
    check_pair(pos, neg)?;
    if !pos.is_connected() {
        return Err(Error::Precondition(alloc::string::String::from(
            "positive subgraph is disconnected",
        )));
    }
    let max_deg = (0..pos.n())
        .map(|i| {
            pos.weighted_neighbors(i)
                .iter()
                .map(|&(_, w)| w)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if !(alpha > 0.0 && alpha * max_deg < 1.0) {
        return Err(Error::Precondition(alloc::format!(
            "alpha={alpha} must lie in (0, 1/{max_deg})"
        )));
    }
    Ok(())
}

/// Solves `f(β*) = 1` by bisection.
pub fn critical_beta(pos: &SparseGraph, neg: &SparseGraph, alpha: f64) -> Result<CriticalBeta> {
    check_phase_preconditions(pos, neg, alpha)?;
    let infinite = CriticalBeta {
        beta_star: f64::INFINITY,
        f_at_star: f_beta(pos, neg, alpha, 0.0)?,
        iterations: 0,
    };
    if neg.num_edges() == 0 {
        return Ok(infinite);
    }
    let mut hi = BETA_HI_START;
    let mut f_hi = f_beta(pos, neg, alpha, hi)?;
    while f_hi <= 1.0 {
        if hi >= BETA_HI_LIMIT {
            return Ok(infinite);
        }
        hi *= 2.0;
        f_hi = f_beta(pos, neg, alpha, hi)?;
    }
    let mut lo = 0.0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f_mid = f_beta(pos, neg, alpha, mid)?;
        if (f_mid - 1.0).abs() < BISECTION_TOL || hi - lo <= f64::EPSILON * hi {
            return Ok(CriticalBeta {
                beta_star: mid,
                f_at_star: f_mid,
                iterations,
            });
        }
        if f_mid > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ConvergedToMean,
    Diverged,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCheck {
    pub observed: Phase,
    /// Prediction from β*, absent inside the margin band.
    pub expected: Option<Phase>,
    pub beta_star: f64,
    pub steps_taken: usize,
    pub consistent: bool,
}

/// Phase reached by iterating `x ← Mx` for at most `steps` steps.
pub fn simulate_phase(
    pos: &SparseGraph,
    neg: &SparseGraph,
    alpha: f64,
    beta: f64,
    x0: &DenseMatrix,
    steps: usize,
) -> Result<(Phase, usize)> {
    if mean_deviation(x0) < CONVERGENCE_TOL {
        return Ok((Phase::Undetermined, 0));
    }
    let lap = build_laplacians(pos, neg, alpha, beta, LaplacianMode::Unnormalized)?;
    let mut op = Operator::Dense(lap.m);
    let mut support = pos.clone();
    for (i, j, _) in neg.edges() {
        support.add_edge(i, j)?;
    }
    let opts = RunOptions {
        stop_on_convergence: true,
        ..RunOptions::new(steps)
    };
    let out = run_propagation(x0, &mut op, &support, &opts)?;
    let phase = match out.status {
        RunStatus::ConvergedToMean => Phase::ConvergedToMean,
        RunStatus::Diverged => Phase::Diverged,
        RunStatus::Clustered | RunStatus::Running => Phase::Undetermined,
    };
    Ok((phase, out.steps_taken))
}

/// Simulates the linear dynamics and compares the outcome with the side of β* that `beta` lies on.
pub fn verify_phase(
    pos: &SparseGraph,
    neg: &SparseGraph,
    alpha: f64,
    beta: f64,
    x0: &DenseMatrix,
    steps: usize,
) -> Result<PhaseCheck> {
    let star = critical_beta(pos, neg, alpha)?.beta_star;
    let (observed, steps_taken) = simulate_phase(pos, neg, alpha, beta, x0, steps)?;
    let expected = if observed == Phase::Undetermined && steps_taken == 0 {
        None
    } else if beta <= star * (1.0 - PHASE_MARGIN) {
        Some(Phase::ConvergedToMean)
    } else if beta >= star * (1.0 + PHASE_MARGIN) {
        Some(Phase::Diverged)
    } else {
        None
    };
    Ok(PhaseCheck {
        observed,
        expected,
        beta_star: star,
        steps_taken,
        consistent: expected.is_none_or(|e| e == observed),
    })
}
