//! Experiment drivers shared by the subcommands and the acceptance suite.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use signedprop_core::balance::{
    feature_sbp_negative, is_structurally_balanced, label_sbp_negative, label_sbp_v2_prune, sid,
    sid_bound_check, SidBound, SidReport, SignedGraph,
};
use signedprop_core::csbm::{generate, CsbmInstance};
use signedprop_core::head::{test_accuracy, LinearHead};
use signedprop_core::propagate::{
    dirichlet_energy, mean_deviation, pairwise_dynamics, run_propagation, FeatureSbpV2,
    PairwiseParams, RunOptions, SbpPropagator, SignedStepper, Stepper,
};
use signedprop_core::rng::{seeded, streams};
use signedprop_core::spectral::{critical_beta, simulate_phase, verify_phase, Phase};
use signedprop_core::unify::{equivalence_gap, random_a_hat, random_features, BaselineKind};
use signedprop_core::{DenseMatrix, Error as CoreError, LabelSet, Operator, SparseGraph};

use crate::config::{
    DepthSweepConfig, EquivalenceConfig, HeadSettings, Injection, SbpSettings, SidTableConfig,
    TheoremsConfig, TrainRatioConfig,
};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    Sgc,
    Signed,
    LabelSbp,
    FeatureSbp,
    LabelSbpV2,
    FeatureSbpV2,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgc => "sgc",
            Method::Signed => "signed",
            Method::LabelSbp => "label_sbp",
            Method::FeatureSbp => "feature_sbp",
            Method::LabelSbpV2 => "label_sbp_v2",
            Method::FeatureSbpV2 => "feature_sbp_v2",
        }
    }
}

/// Graph, features and labels fed to a propagation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: SparseGraph,
    pub negative: Option<SparseGraph>,
    pub features: DenseMatrix,
    pub labels: LabelSet,
}

impl Dataset {
    pub fn from_csbm(inst: CsbmInstance, labels: LabelSet) -> Self {
        Self {
            graph: inst.graph,
            negative: None,
            features: inst.features,
            labels,
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.graph.n();
        if self.features.rows() != n || self.labels.len() != n {
            return Err(CliError::Config(format!(
                "graph has {n} nodes, features {} rows, labels {} entries",
                self.features.rows(),
                self.labels.len()
            )));
        }
        if let Some(neg) = &self.negative {
            if neg.n() != n {
                return Err(CliError::Config("negative graph size differs".into()));
            }
        }
        Ok(())
    }

    /// Edges over which Dirichlet energy is measured.
    pub fn energy_graph(&self, method: Method) -> Result<SparseGraph> {
        match (&self.negative, method) {
            (Some(neg), Method::Signed) => {
                let mut g = self.graph.clone();
                for (i, j, _) in neg.edges() {
                    g.add_edge(i, j)?;
                }
                Ok(g)
            }
            _ => Ok(self.graph.clone()),
        }
    }
}

/// Samples a CSBM instance and a stratified training mask.
pub fn csbm_dataset(
    csbm: &crate::config::CsbmSettings,
    train_ratio: f64,
    seed: u64,
) -> Result<Dataset> {
    let inst = generate(&csbm.params(seed)?)?;
    let labels = inst
        .labels
        .stratified_split(train_ratio, &mut seeded(seed, streams::SPLIT))?;
    Ok(Dataset::from_csbm(inst, labels))
}

/// Stepper for `method`; label-based methods read the training mask of `data.labels`.
pub fn build_stepper(
    method: Method,
    data: &Dataset,
    sbp: &SbpSettings,
) -> Result<Box<dyn Stepper>> {
    data.check()?;
    let cfg = sbp.propagation(0);
    let a_hat = || Operator::Sparse(data.graph.row_normalized());
    Ok(match method {
        Method::Sgc => Box::new(a_hat()),
        Method::Signed => {
            let n = data.graph.n();
            let neg = match &data.negative {
                Some(g) => Operator::Sparse(g.row_normalized()),
                None => Operator::Zero(n),
            };
            Box::new(SignedStepper {
                graph: SignedGraph::new(a_hat(), neg)?,
                alpha: sbp.alpha,
                beta: sbp.beta,
                post_step: sbp.post_step,
            })
        }
        Method::LabelSbp => Box::new(SbpPropagator::from_raw(
            a_hat(),
            label_sbp_negative(&data.labels),
            cfg,
        )?),
        Method::FeatureSbp => Box::new(SbpPropagator::from_raw(
            a_hat(),
            feature_sbp_negative(&data.features),
            cfg,
        )?),
        Method::LabelSbpV2 => {
            let pruned = label_sbp_v2_prune(&data.graph, &data.labels)?;
            let n = pruned.n();
            Box::new(SbpPropagator::with_negative_operator(
                Operator::Sparse(pruned.row_normalized()),
                Operator::Zero(n),
                cfg,
            )?)
        }
        Method::FeatureSbpV2 => Box::new(FeatureSbpV2::new(a_hat(), &data.features, cfg)?),
    })
}

/// Accuracy on the nodes outside the training mask, or `None` when every node is trained.
pub fn holdout_accuracy(
    x: &DenseMatrix,
    labels: &LabelSet,
    head: &HeadSettings,
    seed: u64,
) -> Result<Option<f64>> {
    if labels.train_count() == labels.len() {
        return Ok(None);
    }
    let model = LinearHead::train(x, labels, head.head(seed))?;
    Ok(Some(test_accuracy(&model, x, labels)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRecord {
    pub seed: u64,
    pub depth: usize,
    pub method: Method,
    pub accuracy: f64,
    pub energy: f64,
}

/// Accuracy and energy at every configured depth for one seed, sorted by depth
/// and then by the configured method order.
pub fn depth_sweep_seed(cfg: &DepthSweepConfig, seed: u64) -> Result<Vec<DepthRecord>> {
    let data = csbm_dataset(&cfg.csbm, cfg.train_ratio, seed)?;
    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let mut out = Vec::new();
    for &method in &cfg.methods {
        let mut stepper = build_stepper(method, &data, &cfg.sbp)?;
        let energy_graph = data.energy_graph(method)?;
        let mut x = data.features.clone();
        let mut at = 0;
        for &depth in &depths {
            while at < depth {
                x = stepper.step(&x)?;
                at += 1;
                if !x.all_finite() {
                    return Err(CoreError::NumericFailure { step: at }.into());
                }
            }
            let accuracy = holdout_accuracy(&x, &data.labels, &cfg.head, seed)?
                .expect("train ratio is below one");
            out.push(DepthRecord {
                seed,
                depth,
                method,
                accuracy,
                energy: dirichlet_energy(&x, &energy_graph)?,
            });
        }
    }
    let rank = |m: Method| cfg.methods.iter().position(|&x| x == m);
    out.sort_by_key(|r| (r.depth, rank(r.method)));
    Ok(out)
}

/// All seeds in parallel, assembled in seed order.
pub fn depth_sweep(cfg: &DepthSweepConfig) -> Result<Vec<DepthRecord>> {
    let per_seed: Vec<Vec<DepthRecord>> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|k| depth_sweep_seed(cfg, cfg.seed + k))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// Methods understood by the SID table.
pub const SID_METHODS: [&str; 10] = [
    "sgc",
    "batchnorm",
    "pairnorm",
    "contranorm",
    "dropedge",
    "residual",
    "appnp",
    "jknet",
    "label_sbp",
    "feature_sbp",
];

pub fn check_sid_method(m: &str) -> Result<()> {
    if SID_METHODS.contains(&m) || m == "dagnn" || m == "jknet_dagnn" {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "unknown method {m:?}; expected one of {}",
            SID_METHODS.join(", ")
        )))
    }
}

/// Effective signed matrix of `method` on a CSBM instance.
pub fn sid_effective(
    method: &str,
    inst: &CsbmInstance,
    cfg: &SidTableConfig,
    seed: u64,
) -> Result<DenseMatrix> {
    check_sid_method(method)?;
    let n = inst.graph.n();
    let a_hat = inst.graph.row_normalized().to_dense();
    let sbp = &cfg.sbp;
    let signed = |a_neg: &DenseMatrix| -> Result<DenseMatrix> {
        Ok(a_hat.axpby(sbp.alpha, a_neg, -sbp.beta)?)
    };
    match method {
        "label_sbp" => {
            let labels = inst
                .labels
                .stratified_split(cfg.label_ratio, &mut seeded(seed, streams::SPLIT))?;
            signed(&label_sbp_negative(&labels))
        }
        "feature_sbp" => signed(&feature_sbp_negative(&inst.features)),
        tag => {
            let k = cfg.poly_k.unwrap_or(n);
            let kind = match BaselineKind::from_tag(tag, k)? {
                BaselineKind::DropEdge { drop_prob, .. } => {
                    BaselineKind::DropEdge { drop_prob, seed }
                }
                BaselineKind::ContraNorm { .. } => BaselineKind::ContraNorm {
                    alpha: 1.0,
                    tau: n as f64 / 2.0,
                },
                other => other,
            };
            let x = match kind {
                BaselineKind::ContraNorm { .. } => unit_rows(&inst.features),
                _ => inst.features.clone(),
            };
            Ok(signed_form_effective(&kind, &a_hat, &x)?)
        }
    }
}

fn signed_form_effective(
    kind: &BaselineKind,
    a_hat: &DenseMatrix,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    Ok(signedprop_core::unify::signed_form(kind, a_hat, x)?.effective())
}

fn unit_rows(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidSeed {
    pub seed: u64,
    pub connected: bool,
    pub rows: Vec<(String, SidReport)>,
}

/// One fresh CSBM instance, every configured method measured against ground truth.
pub fn sid_seed(cfg: &SidTableConfig, seed: u64) -> Result<SidSeed> {
    let inst = generate(&cfg.csbm.params(seed)?)?;
    let rows = cfg
        .methods
        .iter()
        .map(|m| {
            let a_s = sid_effective(m, &inst, cfg, seed)?;
            Ok((m.clone(), sid(&a_s, &inst.labels, 0.0)?))
        })
        .collect::<Result<_>>()?;
    Ok(SidSeed {
        seed,
        connected: inst.graph.is_connected(),
        rows,
    })
}

pub fn sid_table(cfg: &SidTableConfig) -> Result<Vec<SidSeed>> {
    (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|k| sid_seed(cfg, cfg.seed + k))
        .collect()
}

/// Mean and sample standard deviation; the deviation is 0 for a single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub seed: u64,
    pub p: f64,
    /// Absent when no node is held out.
    pub accuracy: Option<f64>,
    pub bound: SidBound,
}

/// Label-SBP accuracy and imbalance for every training ratio of one seed.
pub fn train_ratio_seed(cfg: &TrainRatioConfig, seed: u64) -> Result<Vec<RatioRecord>> {
    let inst = generate(&cfg.csbm.params(seed)?)?;
    let a_hat = Operator::Sparse(inst.graph.row_normalized());
    cfg.ratios
        .iter()
        .map(|&p| {
            let labels = inst
                .labels
                .stratified_split(p, &mut seeded(seed, streams::SPLIT))?;
            let data = Dataset {
                graph: inst.graph.clone(),
                negative: None,
                features: inst.features.clone(),
                labels,
            };
            let mut stepper = build_stepper(Method::LabelSbp, &data, &cfg.sbp)?;
            let mut x = data.features.clone();
            for _ in 0..cfg.depth {
                x = stepper.step(&x)?;
            }
            Ok(RatioRecord {
                seed,
                p,
                accuracy: holdout_accuracy(&x, &data.labels, &cfg.head, seed)?,
                bound: sid_bound_check(&data.labels, &a_hat, cfg.bound_alpha, cfg.bound_beta)?,
            })
        })
        .collect()
}

pub fn train_ratio_sweep(cfg: &TrainRatioConfig) -> Result<Vec<RatioRecord>> {
    let per_seed: Vec<Vec<RatioRecord>> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|k| train_ratio_seed(cfg, cfg.seed + k))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// Random signed graph for the phase-transition checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInstance {
    pub pos: SparseGraph,
    pub neg: SparseGraph,
    pub alpha: f64,
    pub x0: DenseMatrix,
}

/// `n ∈ 4..=12`, a random spanning tree plus extra positive (20%) and negative
/// (15%) pairs, at least one negative edge, `α < 1/max_deg⁺`.
pub fn random_phase_instance<R: Rng + ?Sized>(rng: &mut R) -> PhaseInstance {
    let n = rng.random_range(4..=12);
    let mut pos = SparseGraph::new(n);
    for i in 1..n {
        let j = rng.random_range(0..i);
        pos.add_edge(i, j).expect("tree edge in range");
    }
    let mut neg = SparseGraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if pos.has_edge(i, j) {
                continue;
            }
            let u: f64 = rng.random();
            if u < 0.2 {
                pos.add_edge(i, j).expect("pair in range");
            } else if u < 0.35 {
                neg.add_edge(i, j).expect("pair in range");
            }
        }
    }
    if neg.num_edges() == 0 {
        let free = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| !pos.has_edge(i, j));
        let (i, j) = free.unwrap_or((0, 1));
        if pos.has_edge(i, j) {
            // complete positive part: move one non-tree edge over
            pos = SparseGraph::from_edges(
                n,
                &pos.edges()
                    .filter(|&(a, b, _)| (a, b) != (i, j))
                    .map(|(a, b, _)| (a, b))
                    .collect::<Vec<_>>(),
            )
            .expect("subset of valid edges");
        }
        neg.add_edge(i, j).expect("pair in range");
    }
    let alpha = rng.random_range(0.1..0.9) / pos.max_degree() as f64;
    let x0 = DenseMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
    PhaseInstance {
        pos,
        neg,
        alpha,
        x0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub kind: String,
    pub trials: usize,
    pub max_gap: f64,
}

pub const EQUIVALENCE_KINDS: [&str; 8] = [
    "sgc",
    "batchnorm",
    "pairnorm",
    "contranorm",
    "dropedge",
    "residual",
    "appnp",
    "jknet",
];

fn random_kind<R: Rng + ?Sized>(tag: &str, max_k: usize, rng: &mut R) -> Result<BaselineKind> {
    let k = rng.random_range(0..=max_k);
    Ok(match BaselineKind::from_tag(tag, k)? {
        BaselineKind::ContraNorm { .. } => BaselineKind::ContraNorm {
            alpha: rng.random_range(0.0..1.0),
            tau: rng.random_range(0.5..2.0),
        },
        BaselineKind::DropEdge { .. } => BaselineKind::DropEdge {
            drop_prob: rng.random_range(0.0..1.0),
            seed: rng.random(),
        },
        BaselineKind::Residual { .. } => BaselineKind::Residual {
            alpha: rng.random_range(0.0..1.0),
        },
        BaselineKind::Appnp { k, .. } => BaselineKind::Appnp {
            alpha: rng.random_range(0.0..1.0),
            k,
        },
        other => other,
    })
}

/// Largest gap between direct and signed-form evaluation for one kind over random instances.
pub fn equivalence_row(
    tag: &str,
    cfg: &EquivalenceConfig,
    stream_offset: u64,
) -> Result<EquivalenceRow> {
    let mut rng = seeded(cfg.seed.wrapping_add(stream_offset), streams::INSTANCES);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < cfg.trials {
        let n = rng.random_range(2..=cfg.max_n);
        let d = rng.random_range(1..=cfg.max_d);
        let kind = random_kind(tag, cfg.max_k, &mut rng)?;
        let a_hat = random_a_hat(n, 0.3, &mut rng);
        let x = random_features(n, d, &mut rng);
        match equivalence_gap(&kind, &a_hat, &x) {
            Ok(gap) => {
                worst = worst.max(gap);
                done += 1;
            }
            // a zero-variance column has no normalized output; draw again
            Err(CoreError::Degenerate(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(EquivalenceRow {
        kind: tag.to_owned(),
        trials: cfg.trials,
        max_gap: worst,
    })
}

pub fn equivalence_table(cfg: &EquivalenceConfig) -> Result<Vec<EquivalenceRow>> {
    EQUIVALENCE_KINDS
        .par_iter()
        .enumerate()
        .map(|(i, tag)| equivalence_row(tag, cfg, i as u64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Result<CheckResult> {
    let start = Instant::now();
    let (passed, detail) = f()?;
    Ok(CheckResult {
        name: name.to_owned(),
        passed,
        seconds: start.elapsed().as_secs_f64(),
        detail,
    })
}

fn check_equivalence(cfg: &TheoremsConfig) -> Result<(bool, String)> {
    let eq = EquivalenceConfig {
        seed: cfg.seed,
        trials: cfg.equivalence_trials,
        ..EquivalenceConfig::default()
    };
    let rows = equivalence_table(&eq)?;
    let worst = rows.iter().map(|r| r.max_gap).fold(0.0, f64::max);
    Ok((
        worst < eq.tolerance,
        format!("max gap {worst:.3e} over {} kinds", rows.len()),
    ))
}

fn check_phase(cfg: &TheoremsConfig) -> Result<(bool, String)> {
    let below_expect = match cfg.inject {
        Some(Injection::ExpectDivergeBelowStar) => Phase::Diverged,
        None => Phase::ConvergedToMean,
    };
    let failures: Vec<String> = (0..cfg.phase_instances as u64)
        .into_par_iter()
        .map(|k| -> Result<Option<String>> {
            let inst =
                random_phase_instance(&mut seeded(cfg.seed.wrapping_add(k), streams::INSTANCES));
            let star = critical_beta(&inst.pos, &inst.neg, inst.alpha)?.beta_star;
            let (at_zero, _) = simulate_phase(
                &inst.pos,
                &inst.neg,
                inst.alpha,
                0.0,
                &inst.x0,
                cfg.phase_steps,
            )?;
            if at_zero != Phase::ConvergedToMean {
                return Ok(Some(format!("instance {k}: beta=0 gave {at_zero:?}")));
            }
            for (factor, expected) in [(0.5, below_expect), (2.0, Phase::Diverged)] {
                let check = verify_phase(
                    &inst.pos,
                    &inst.neg,
                    inst.alpha,
                    factor * star,
                    &inst.x0,
                    cfg.phase_steps,
                )?;
                if check.observed != expected {
                    return Ok(Some(format!(
                        "instance {k}: beta={factor}*beta_star gave {:?}, expected {expected:?}",
                        check.observed
                    )));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let detail = match failures.first() {
        None => format!(
            "{} instances consistent with beta_star",
            cfg.phase_instances
        ),
        Some(first) => format!("{} failures; {first}", failures.len()),
    };
    Ok((failures.is_empty(), detail))
}

/// Two groups of `group` nodes, positive inside and negative across.
pub fn balanced_signs(group: usize) -> DenseMatrix {
    DenseMatrix::from_fn(2 * group, 2 * group, |i, j| {
        if (i < group) == (j < group) {
            1.0
        } else {
            -1.0
        }
    })
}

/// Whether one group sits within `tol` of `+c` and the other of `−c`.
pub fn is_polarized(state: &[f64], group: usize, c: f64, tol: f64) -> bool {
    let s = if state[0] >= 0.0 { c } else { -c };
    state[..group].iter().all(|v| (v - s).abs() <= tol)
        && state[group..].iter().all(|v| (v + s).abs() <= tol)
}

fn check_clustering(cfg: &TheoremsConfig) -> Result<(bool, String)> {
    let group = 10;
    let signs = balanced_signs(group);
    let params = PairwiseParams {
        alpha: 0.3,
        beta: 5.0,
        c: 1.0,
        steps: cfg.clustering_steps,
        record_every: 0,
    };
    let hits = (0..cfg.clustering_runs as u64)
        .into_par_iter()
        .map(|k| -> Result<bool> {
            let seed = cfg.seed.wrapping_add(k);
            let mut init = seeded(seed, streams::INSTANCES);
            let x0: Vec<f64> = (0..2 * group)
                .map(|_| init.random_range(-1.0..=1.0))
                .collect();
            let run =
                pairwise_dynamics(&x0, &signs, &params, &mut seeded(seed, streams::DYNAMICS))?;
            Ok(is_polarized(&run.final_state, group, params.c, 1e-6))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&h| h)
        .count();
    let need = (cfg.clustering_runs * 95).div_ceil(100);
    Ok((
        hits >= need,
        format!("{hits}/{} runs polarized", cfg.clustering_runs),
    ))
}

/// Random labels with `2..=4` classes on `4..=40` nodes and a random training mask.
pub fn random_labeled_instance<R: Rng + ?Sized>(rng: &mut R) -> (LabelSet, DenseMatrix) {
    let n = rng.random_range(4..=40);
    let c = rng.random_range(2..=4);
    let classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let p = rng.random_range(0.0..=1.0);
    let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
    let a_hat = random_a_hat(n, 0.2, rng);
    (LabelSet::new(classes, mask).expect("equal lengths"), a_hat)
}

fn check_sid_balanced(cfg: &TheoremsConfig) -> Result<(bool, String)> {
    let mut rng = seeded(cfg.seed, streams::INSTANCES);
    for k in 0..cfg.bound_instances {
        let n = rng.random_range(2..=40);
        let groups = rng.random_range(2..=4);
        let part: Vec<usize> = (0..n).map(|_| rng.random_range(0..groups)).collect();
        let signs = DenseMatrix::from_fn(n, n, |i, j| if part[i] == part[j] { 1.0 } else { -1.0 });
        let report = sid(&signs, &LabelSet::fully_labeled(part), 0.0)?;
        if report.sid != 0.0 {
            return Ok((false, format!("instance {k}: SID {}", report.sid)));
        }
        let verdict = is_structurally_balanced(&signs, 0.0)?;
        if !(verdict.is_balanced() || verdict.is_weakly_balanced()) {
            return Ok((false, format!("instance {k}: not detected as balanced")));
        }
    }
    Ok((
        true,
        format!(
            "{} balanced complete graphs with SID 0",
            cfg.bound_instances
        ),
    ))
}

fn bound_instances(cfg: &TheoremsConfig) -> Result<Vec<SidBound>> {
    let mut rng = seeded(cfg.seed.wrapping_add(1), streams::INSTANCES);
    (0..cfg.bound_instances)
        .map(|_| {
            let (labels, a_hat) = random_labeled_instance(&mut rng);
            Ok(sid_bound_check(&labels, &Operator::Dense(a_hat), 1.0, 2.0)?)
        })
        .collect()
}

fn check_sid_bound(bounds: &[SidBound]) -> (bool, String) {
    let violations: Vec<&SidBound> = bounds.iter().filter(|b| !b.ok).collect();
    let worst = bounds
        .iter()
        .filter(|b| b.bound > 0.0)
        .map(|b| b.sid_count / b.bound)
        .fold(0.0, f64::max);
    (
        violations.is_empty(),
        format!(
            "{}/{} instances exceed (1-p)n/2; worst sid/bound {worst:.3}",
            violations.len(),
            bounds.len()
        ),
    )
}

fn check_trained_rows(bounds: &[SidBound]) -> (bool, String) {
    let worst = bounds
        .iter()
        .map(|b| b.trained_row_ratio)
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    let infinite = bounds.iter().any(|b| b.trained_row_ratio.is_infinite());
    (
        worst <= 1.0 && !infinite,
        format!("largest trained-row imbalance per untrained node {worst:.3}"),
    )
}

fn check_full_supervision(cfg: &TheoremsConfig) -> Result<(bool, String)> {
    let mut rng = seeded(cfg.seed.wrapping_add(2), streams::INSTANCES);
    for k in 0..cfg.bound_instances {
        let (labels, a_hat) = random_labeled_instance(&mut rng);
        let full = labels.with_mask(vec![true; labels.len()])?;
        let b = sid_bound_check(&full, &Operator::Dense(a_hat), 1.0, 2.0)?;
        if b.sid_count != 0.0 {
            return Ok((false, format!("instance {k}: SID {} at p=1", b.sid_count)));
        }
    }
    Ok((
        true,
        format!("{} fully labeled instances with SID 0", cfg.bound_instances),
    ))
}

/// Runs every check; the report passes only when all checks pass.
pub fn verify_theorems(cfg: &TheoremsConfig) -> Result<TheoremReport> {
    let mut checks = vec![
        timed("equivalence", || check_equivalence(cfg))?,
        timed("phase_transition", || check_phase(cfg))?,
        timed("balanced_clustering", || check_clustering(cfg))?,
        timed("sid_balanced_zero", || check_sid_balanced(cfg))?,
    ];
    let start = Instant::now();
    let bounds = bound_instances(cfg)?;
    let shared = start.elapsed().as_secs_f64();
    for (name, f) in [
        (
            "sid_label_bound",
            check_sid_bound as fn(&[SidBound]) -> (bool, String),
        ),
        ("sid_trained_rows", check_trained_rows),
    ] {
        let mut c = timed(name, || Ok(f(&bounds)))?;
        c.seconds += shared;
        checks.push(c);
    }
    checks.push(timed("sid_full_supervision", || {
        check_full_supervision(cfg)
    })?);
    Ok(TheoremReport {
        seed: cfg.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Phase observed from `x0` under `M` at each β, with the spectral `f(β)`.
pub fn beta_sweep_rows(
    inst: &PhaseInstance,
    betas: &[f64],
    steps: usize,
) -> Result<Vec<(f64, f64, Phase)>> {
    betas
        .par_iter()
        .map(|&beta| {
            let f = signedprop_core::spectral::f_beta(&inst.pos, &inst.neg, inst.alpha, beta)?;
            let (phase, _) =
                simulate_phase(&inst.pos, &inst.neg, inst.alpha, beta, &inst.x0, steps)?;
            Ok((beta, f, phase))
        })
        .collect()
}

/// Deviation of `x0` from its mean; used to skip constant starting states.
pub fn initial_spread(inst: &PhaseInstance) -> f64 {
    mean_deviation(&inst.x0)
}

/// Energy and accuracy of one configured run.
pub fn run_dataset(
    method: Method,
    data: &Dataset,
    sbp: &SbpSettings,
    steps: usize,
) -> Result<signedprop_core::propagate::RunOutcome> {
    let mut stepper = build_stepper(method, data, sbp)?;
    let opts = RunOptions {
        divergence_norm_cap: sbp.propagation(steps).divergence_norm_cap,
        ..RunOptions::new(steps)
    };
    Ok(run_propagation(
        &data.features,
        stepper.as_mut(),
        &data.energy_graph(method)?,
        &opts,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CsbmSettings;

    fn small_sweep() -> DepthSweepConfig {
        DepthSweepConfig {
            seeds: 2,
            depths: vec![2, 0],
            csbm: CsbmSettings {
                n: 40,
                ..CsbmSettings::default()
            },
            ..DepthSweepConfig::default()
        }
    }

    #[test]
    fn depth_rows_are_ordered() {
        let rows = depth_sweep(&small_sweep()).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        let keys: Vec<(u64, usize)> = rows.iter().map(|r| (r.seed, r.depth)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(rows[0].method, Method::Sgc);
    }

    #[test]
    fn depth_zero_ignores_the_method() {
        let rows = depth_sweep_seed(&small_sweep(), 3).unwrap();
        let zero: Vec<f64> = rows
            .iter()
            .filter(|r| r.depth == 0)
            .map(|r| r.accuracy)
            .collect();
        assert!(zero.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn every_method_builds_and_steps() {
        let mut data = csbm_dataset(
            &CsbmSettings {
                n: 20,
                ..CsbmSettings::default()
            },
            0.5,
            1,
        )
        .unwrap();
        data.negative = Some(SparseGraph::from_edges(20, &[(0, 19)]).unwrap());
        for m in [
            Method::Sgc,
            Method::Signed,
            Method::LabelSbp,
            Method::FeatureSbp,
            Method::LabelSbpV2,
            Method::FeatureSbpV2,
        ] {
            let out = run_dataset(m, &data, &SbpSettings::default(), 3).unwrap();
            assert_eq!(out.trace.len(), 4, "{}", m.name());
            assert!(out.x_final.all_finite());
        }
    }

    #[test]
    fn phase_instances_meet_preconditions() {
        for k in 0..50 {
            let inst = random_phase_instance(&mut seeded(k, streams::INSTANCES));
            assert!(inst.pos.is_connected());
            assert!(inst.neg.num_edges() >= 1);
            assert!(inst.alpha * (inst.pos.max_degree() as f64) < 1.0);
            assert!(inst.neg.edges().all(|(i, j, _)| !inst.pos.has_edge(i, j)));
        }
    }

    #[test]
    fn polarization_test() {
        assert!(is_polarized(&[1.0, 1.0, -1.0, -1.0], 2, 1.0, 1e-6));
        assert!(is_polarized(&[-1.0, -1.0, 1.0, 1.0], 2, 1.0, 1e-6));
        assert!(!is_polarized(&[1.0, -1.0, -1.0, -1.0], 2, 1.0, 1e-6));
    }

    #[test]
    fn mean_std_of_constant_values() {
        assert_eq!(mean_std(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unknown_sid_method_is_rejected() {
        assert!(check_sid_method("gcnii").is_err());
        assert!(check_sid_method("dagnn").is_ok());
    }
}
