//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use signedprop_core::csbm::generate;
use signedprop_core::propagate::RunStatus;
use signedprop_core::rng::{seeded, streams};
use signedprop_core::spectral::{critical_beta, Phase};
use signedprop_core::DenseMatrix;

use crate::config::{
    config_hash, BetaSweepConfig, CsbmGenConfig, DepthSweepConfig, EquivalenceConfig,
    PropagateConfig, SidTableConfig, TheoremsConfig, TrainRatioConfig,
};
use crate::error::{CliError, Result};
use crate::experiments::{
    beta_sweep_rows, build_stepper, csbm_dataset, depth_sweep, equivalence_table, holdout_accuracy,
    initial_spread, mean_std, random_phase_instance, sid_table, train_ratio_sweep, verify_theorems,
    Dataset, DepthRecord, PhaseInstance,
};
use crate::io::{self, SignedEdgeList};
use crate::report::{fmt4, fmt4_opt, CsvTable, ExperimentReport};

/// File names written by `csbm-gen`.
pub const GRAPH_FILE: &str = "graph.edgelist";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const PARAMS_FILE: &str = "params.json";

/// File names written by `propagate`.
pub const X_FINAL_FILE: &str = "x_final.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to `out`, or to stdout when absent.
fn emit(table: &CsvTable, hash: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_text(path, &table.to_string(hash)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table
                .write(&mut lock, hash)
                .map_err(|e| CliError::io("<stdout>", e))?;
            lock.flush().map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn csbm_gen(cfg: &CsbmGenConfig, out_dir: &Path) -> Result<()> {
    let params = cfg.csbm.params(cfg.seed)?;
    let inst = generate(&params)?;
    let labels = inst
        .labels
        .stratified_split(cfg.train_ratio, &mut seeded(cfg.seed, streams::SPLIT))?;
    let hash = config_hash(cfg);
    let comment = format!("config-hash: {hash}");
    ensure_dir(out_dir)?;
    let graph = SignedEdgeList {
        negative: signedprop_core::SparseGraph::new(inst.graph.n()),
        positive: inst.graph,
    };
    io::save_signed_edgelist(&out_dir.join(GRAPH_FILE), &graph)?;
    io::save_dense_csv(&out_dir.join(FEATURES_FILE), &inst.features, Some(&comment))?;
    let labels_path = out_dir.join(LABELS_FILE);
    let mut buf = format!("# {comment}\n").into_bytes();
    io::write_labels_csv(&mut buf, &labels).map_err(|e| CliError::io(&labels_path, e))?;
    fs::write(&labels_path, buf).map_err(|e| CliError::io(&labels_path, e))?;
    let sidecar = serde_json::to_string_pretty(&params).expect("params serialize");
    write_text(&out_dir.join(PARAMS_FILE), &(sidecar + "\n"))
}

fn propagate_dataset(cfg: &PropagateConfig) -> Result<Dataset> {
    match (&cfg.graph, &cfg.features, &cfg.labels) {
        (Some(g), Some(f), Some(l)) => {
            let graph = io::load_signed_edgelist(g)?;
            let negative = (graph.negative.num_edges() > 0).then_some(graph.negative);
            Ok(Dataset {
                graph: graph.positive,
                negative,
                features: io::load_dense_csv(f)?,
                labels: io::load_labels_csv(l)?,
            })
        }
        (None, None, None) => csbm_dataset(&cfg.csbm, cfg.train_ratio, cfg.seed),
        _ => Err(CliError::Config(
            "graph, features and labels must be given together".into(),
        )),
    }
}

pub fn propagate(cfg: &PropagateConfig, out_dir: &Path) -> Result<RunStatus> {
    let hash = config_hash(cfg);
    let mut report = ExperimentReport::new("propagate", cfg, cfg.seed);
    let start = Instant::now();
    let data = propagate_dataset(cfg)?;
    report
        .wall_times
        .insert("load".into(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    let sbp = cfg.sbp();
    let mut stepper = build_stepper(cfg.method, &data, &sbp)?;
    let opts = signedprop_core::propagate::RunOptions::from(&sbp.propagation(cfg.steps));
    let outcome = signedprop_core::propagate::run_propagation(
        &data.features,
        stepper.as_mut(),
        &data.energy_graph(cfg.method)?,
        &opts,
    )?;
    report
        .wall_times
        .insert("propagate".into(), start.elapsed().as_secs_f64());

    if outcome.status != RunStatus::Diverged {
        let start = Instant::now();
        if let Some(accuracy) =
            holdout_accuracy(&outcome.x_final, &data.labels, &cfg.head, cfg.seed)?
        {
            report.accuracies.push(DepthRecord {
                seed: cfg.seed,
                depth: outcome.steps_taken,
                method: cfg.method,
                accuracy,
                energy: outcome.trace.energy.last().copied().unwrap_or(0.0),
            });
        }
        report
            .wall_times
            .insert("head".into(), start.elapsed().as_secs_f64());
    }

    ensure_dir(out_dir)?;
    let comment = format!("config-hash: {hash}");
    io::save_dense_csv(
        &out_dir.join(X_FINAL_FILE),
        &outcome.x_final,
        Some(&comment),
    )?;
    let mut trace = CsvTable::new(&["step", "energy", "norm"]);
    for (k, (e, n)) in outcome
        .trace
        .energy
        .iter()
        .zip(&outcome.trace.norm)
        .enumerate()
    {
        trace.push(vec![k.to_string(), fmt4(*e), fmt4(*n)]);
    }
    write_text(&out_dir.join(TRACE_FILE), &trace.to_string(&hash))?;
    report.energy = Some(outcome.trace);
    write_text(&out_dir.join(REPORT_FILE), &(report.to_json() + "\n"))?;
    Ok(outcome.status)
}

pub fn sid_table_csv(cfg: &SidTableConfig) -> Result<CsvTable> {
    let seeds = sid_table(cfg)?;
    let multi = cfg.seeds > 1;
    let mut header = vec!["method", "P_pct", "N_pct", "SID_pct"];
    if multi {
        header.extend(["P_std", "N_std", "SID_std"]);
    }
    let mut table = CsvTable::new(&header);
    for (k, method) in cfg.methods.iter().enumerate() {
        let col = |f: fn(&signedprop_core::balance::SidReport) -> f64| {
            mean_std(&seeds.iter().map(|s| f(&s.rows[k].1)).collect::<Vec<_>>())
        };
        let (p, n, s) = (col(|r| r.p_pct), col(|r| r.n_pct), col(|r| r.sid_pct));
        let mut row = vec![method.clone(), fmt4(p.0), fmt4(n.0), fmt4(s.0)];
        if multi {
            row.extend([fmt4(p.1), fmt4(n.1), fmt4(s.1)]);
        }
        table.push(row);
    }
    Ok(table)
}

pub fn sid_table_cmd(cfg: &SidTableConfig, out: Option<&Path>) -> Result<()> {
    emit(&sid_table_csv(cfg)?, &config_hash(cfg), out)
}

pub fn depth_sweep_csv(rows: &[DepthRecord]) -> CsvTable {
    let mut table = CsvTable::new(&["seed", "depth", "method", "accuracy", "energy"]);
    for r in rows {
        table.push(vec![
            r.seed.to_string(),
            r.depth.to_string(),
            r.method.name().to_owned(),
            fmt4(r.accuracy),
            fmt4(r.energy),
        ]);
    }
    table
}

pub fn depth_sweep_cmd(
    cfg: &DepthSweepConfig,
    out: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let start = Instant::now();
    let rows = depth_sweep(cfg)?;
    let hash = config_hash(cfg);
    if let Some(path) = report_path {
        let mut report = ExperimentReport::new("depth-sweep", cfg, cfg.seed);
        report.accuracies = rows.clone();
        report
            .wall_times
            .insert("sweep".into(), start.elapsed().as_secs_f64());
        write_text(path, &(report.to_json() + "\n"))?;
    }
    emit(&depth_sweep_csv(&rows), &hash, out)
}

fn beta_instance(cfg: &BetaSweepConfig) -> Result<PhaseInstance> {
    let mut rng = seeded(cfg.seed, streams::INSTANCES);
    let mut inst = match &cfg.graph {
        Some(path) => {
            let g = io::load_signed_edgelist(path)?;
            let n = g.n();
            let max_deg = g.positive.max_degree().max(1) as f64;
            PhaseInstance {
                pos: g.positive,
                neg: g.negative,
                alpha: 0.5 / max_deg,
                x0: DenseMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0)),
            }
        }
        None => random_phase_instance(&mut rng),
    };
    if let Some(alpha) = cfg.alpha {
        inst.alpha = alpha;
    }
    Ok(inst)
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::ConvergedToMean => "converged_to_mean",
        Phase::Diverged => "diverged",
        Phase::Undetermined => "undetermined",
    }
}

pub fn beta_sweep_csv(cfg: &BetaSweepConfig) -> Result<CsvTable> {
    let inst = beta_instance(cfg)?;
    let star = critical_beta(&inst.pos, &inst.neg, inst.alpha)?;
    let betas = if cfg.betas.is_empty() {
        if !star.is_finite() {
            return Err(CliError::Config(
                "no finite critical beta; list betas explicitly".into(),
            ));
        }
        let top = 2.0 * star.beta_star;
        (0..cfg.points)
            .map(|k| top * k as f64 / (cfg.points - 1) as f64)
            .collect()
    } else {
        cfg.betas.clone()
    };
    let mut table = CsvTable::new(&["beta", "f_beta", "empirical_status"]);
    table.notes.push(format!("beta_star: {}", star.beta_star));
    table.notes.push(format!("alpha: {}", inst.alpha));
    if initial_spread(&inst) == 0.0 {
        table
            .notes
            .push("initial state is constant; every status is undetermined".into());
    }
    for (beta, f, phase) in beta_sweep_rows(&inst, &betas, cfg.steps)? {
        table.push(vec![fmt4(beta), fmt4(f), phase_name(phase).to_owned()]);
    }
    Ok(table)
}

pub fn beta_sweep_cmd(cfg: &BetaSweepConfig, out: Option<&Path>) -> Result<()> {
    emit(&beta_sweep_csv(cfg)?, &config_hash(cfg), out)
}

pub fn verify_equivalence_cmd(cfg: &EquivalenceConfig, out: Option<&Path>) -> Result<()> {
    let rows = equivalence_table(cfg)?;
    let mut table = CsvTable::new(&["kind", "trials", "max_gap", "passed"]);
    for r in &rows {
        table.push(vec![
            r.kind.clone(),
            r.trials.to_string(),
            format!("{:.4e}", r.max_gap),
            (r.max_gap < cfg.tolerance).to_string(),
        ]);
    }
    emit(&table, &config_hash(cfg), out)?;
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| r.max_gap >= cfg.tolerance)
        .map(|r| r.kind.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "signed form differs from direct evaluation for {}",
            failed.join(", ")
        )))
    }
}

pub fn verify_theorems_cmd(cfg: &TheoremsConfig, json: bool) -> Result<()> {
    let report = verify_theorems(cfg)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let text = if json {
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
    } else {
        let mut s = format!("{:<22} {:<6} {:>9}  detail\n", "check", "status", "seconds");
        for c in &report.checks {
            s += &format!(
                "{:<22} {:<6} {:>9.3}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.seconds,
                c.detail
            );
        }
        s
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}

pub fn train_ratio_csv(cfg: &TrainRatioConfig) -> Result<CsvTable> {
    let rows = train_ratio_sweep(cfg)?;
    let mut table = CsvTable::new(&["seed", "p", "accuracy", "sid_count", "bound", "ok"]);
    for r in rows {
        table.push(vec![
            r.seed.to_string(),
            fmt4(r.p),
            fmt4_opt(r.accuracy),
            fmt4(r.bound.sid_count),
            fmt4(r.bound.bound),
            r.bound.ok.to_string(),
        ]);
    }
    Ok(table)
}

pub fn train_ratio_cmd(cfg: &TrainRatioConfig, out: Option<&Path>) -> Result<()> {
    emit(&train_ratio_csv(cfg)?, &config_hash(cfg), out)
}

/// Paths of the files `csbm-gen` writes into `dir`.
pub fn csbm_outputs(dir: &Path) -> [PathBuf; 4] {
    [GRAPH_FILE, FEATURES_FILE, LABELS_FILE, PARAMS_FILE].map(|f| dir.join(f))
}
