//! Versioned JSON configuration for every subcommand.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use signedprop_core::csbm::{homophily_sweep, CsbmParams, DEFAULT_DIM};
use signedprop_core::head::HeadConfig;
use signedprop_core::propagate::{PostStep, PropagationConfig, DEFAULT_DIVERGENCE_CAP};

use crate::error::{CliError, Result};
use crate::experiments::Method;

pub const SCHEMA: u32 = 1;

/// Environment variable that overrides the `seed` of any config.
pub const SEED_ENV: &str = "SIGNEDPROP_SEED";

/// Shared by all command configs.
pub trait CommandConfig: Serialize + DeserializeOwned + Default {
    fn seed_mut(&mut self) -> &mut u64;

    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

/// Reads `path`, or returns defaults when absent. The file must declare `"schema": 1`.
pub fn load<C: CommandConfig>(path: Option<&Path>) -> Result<C> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

pub fn parse<C: CommandConfig>(text: &str) -> Result<C> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    match value.get("schema").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA) => {}
        Some(v) => {
            return Err(CliError::Config(format!(
                "unsupported schema {v}, expected {SCHEMA}"
            )))
        }
        None => return Err(CliError::Config(format!("missing \"schema\": {SCHEMA}"))),
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

/// Seed precedence: command-line flag, then the environment, then the config file.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config_seed: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(raw) => raw.trim().parse().map_err(|_| {
            CliError::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer"))
        }),
        None => Ok(config_seed),
    }
}

/// Applies the seed override and validates.
pub fn finalize<C: CommandConfig>(mut cfg: C, seed_flag: Option<u64>) -> Result<C> {
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(seed_flag, env.as_deref(), *cfg.seed_mut())?;
    *cfg.seed_mut() = seed;
    cfg.validate()?;
    Ok(cfg)
}

/// Hex SHA-256 of the config's JSON encoding.
pub fn config_hash<C: Serialize>(cfg: &C) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configs serialize to JSON");
    hex::encode(Sha256::digest(bytes))
}

fn schema() -> u32 {
    SCHEMA
}

fn check_ratio(name: &str, r: f64, allow_one: bool) -> Result<()> {
    let ok = r > 0.0 && (r < 1.0 || (allow_one && r == 1.0));
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name}={r} outside (0, 1{}",
            if allow_one { "]" } else { ")" }
        )))
    }
}

/// CSBM settings; `p` and `q` default to `2 ln n / n` and `ln n / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsbmSettings {
    pub n: usize,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub dim: usize,
    /// Class means are `−mu·1` and `+mu·1`.
    pub mu: f64,
    pub sigma: f64,
    /// Redistributes `p + q` towards homophily (`+1`) or heterophily (`−1`).
    pub phi: Option<f64>,
}

impl Default for CsbmSettings {
    fn default() -> Self {
        Self {
            n: 100,
            p: None,
            q: None,
            dim: DEFAULT_DIM,
            mu: 1.0,
            sigma: 1.0,
            phi: None,
        }
    }
}

impl CsbmSettings {
    pub fn params(&self, seed: u64) -> Result<CsbmParams> {
        let ln_n = (self.n.max(1) as f64).ln();
        let n = self.n.max(1) as f64;
        let base = CsbmParams {
            n: self.n,
            p: self.p.unwrap_or(2.0 * ln_n / n),
            q: self.q.unwrap_or(ln_n / n),
            mu1: vec![-self.mu; self.dim],
            mu2: vec![self.mu; self.dim],
            sigma: self.sigma,
            seed,
        };
        let params = match self.phi {
            Some(phi) => homophily_sweep(&base, phi)?,
            None => base,
        };
        params.validate()?;
        Ok(params)
    }
}

/// SBP strengths; `beta = 2` gives trained label pairs a strictly signed entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbpSettings {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub post_step: PostStep,
}

impl Default for SbpSettings {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            lambda: 0.5,
            post_step: PostStep::LayerNorm,
        }
    }
}

impl SbpSettings {
    pub fn propagation(&self, steps: usize) -> PropagationConfig {
        PropagationConfig {
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            steps,
            post_step: self.post_step,
            divergence_norm_cap: DEFAULT_DIVERGENCE_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
}

impl Default for HeadSettings {
    fn default() -> Self {
        let d = HeadConfig::default();
        Self {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            weight_decay: d.weight_decay,
        }
    }
}

impl HeadSettings {
    pub fn head(&self, seed: u64) -> HeadConfig {
        HeadConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsbmGenConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    pub csbm: CsbmSettings,
    /// Stratified training ratio written to the label mask; `1` marks every node.
    pub train_ratio: f64,
}

impl Default for CsbmGenConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            seed: 0,
            csbm: CsbmSettings::default(),
            train_ratio: 0.6,
        }
    }
}

impl CommandConfig for CsbmGenConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn validate(&self) -> Result<()> {
        self.csbm.params(self.seed)?;
        check_ratio("train_ratio", self.train_ratio, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub steps: usize,
    pub post_step: PostStep,
    /// Signed edge list; a CSBM instance is sampled when absent.
    pub graph: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// Labels with training mask; a stratified split is drawn when absent.
    pub labels: Option<PathBuf>,
    pub train_ratio: f64,
    pub csbm: CsbmSettings,
    pub head: HeadSettings,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        let sbp = SbpSettings::default();
        Self {
            schema: SCHEMA,
            seed: 0,
            method: Method::LabelSbp,
            alpha: sbp.alpha,
            beta: sbp.beta,
            lambda: sbp.lambda,
            steps: 10,
            post_step: sbp.post_step,
            graph: None,
            features: None,
            labels: None,
            train_ratio: 0.6,
            csbm: CsbmSettings::default(),
            head: HeadSettings::default(),
        }
    }
}

impl PropagateConfig {
    pub fn sbp(&self) -> SbpSettings {
        SbpSettings {
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            post_step: self.post_step,
        }
    }
}

impl CommandConfig for PropagateConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn validate(&self) -> Result<()> {
        self.sbp().propagation(self.steps).validate()?;
        let given = [
            self.graph.is_some(),
            self.features.is_some(),
            self.labels.is_some(),
        ];
        if given.iter().any(|&g| g != given[0]) {
            return Err(CliError::Config(
                "graph, features and labels must be given together".into(),
            ));
        }
        check_ratio("train_ratio", self.train_ratio, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SidTableConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    pub seeds: usize,
    pub methods: Vec<String>,
    /// Training ratio behind the Label-SBP negative graph.
    pub label_ratio: f64,
    /// Polynomial depth for APPNP and JKNET; defaults to the node count.
    pub poly_k: Option<usize>,
    pub csbm: CsbmSettings,
    pub sbp: SbpSettings,
}

impl Default for SidTableConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            seed: 0,
            seeds: 1,
            methods: crate::experiments::SID_METHODS
                .iter()
                .map(|s| (*s).to_owned())
                .collect(),
            label_ratio: 0.5,
            poly_k: None,
            csbm: CsbmSettings::default(),
            sbp: SbpSettings::default(),
        }
    }
}

impl CommandConfig for SidTableConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(CliError::Config("seeds must be positive".into()));
        }
        for m in &self.methods {
            crate::experiments::check_sid_method(m)?;
        }
        self.csbm.params(self.seed)?;
        check_ratio("label_ratio", self.label_ratio, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthSweepConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    pub seeds: usize,
    pub depths: Vec<usize>,
    pub methods: Vec<Method>,
    pub train_ratio: f64,
    pub csbm: CsbmSettings,
    pub sbp: SbpSettings,
    pub head: HeadSettings,
}

impl Default for DepthSweepConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            seed: 0,
            seeds: 10,
            depths: vec![0, 2, 10, 50, 100, 200, 300],
            methods: vec![Method::Sgc, Method::LabelSbp, Method::FeatureSbp],
            train_ratio: 0.6,
            csbm: CsbmSettings::default(),
            sbp: SbpSettings::default(),
            head: HeadSettings::default(),
        }
    }
}

impl CommandConfig for DepthSweepConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.depths.is_empty() || self.methods.is_empty() {
            return Err(CliError::Config(
                "seeds, depths and methods must be non-empty".into(),
            ));
        }
        if self.methods.contains(&Method::Signed) {
            return Err(CliError::Config(
                "the signed method needs a signed input graph".into(),
            ));
        }
        self.sbp.propagation(0).validate()?;
        self.csbm.params(self.seed)?;
        check_ratio("train_ratio", self.train_ratio, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSweepConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    /// Signed edge list; a random instance is drawn when absent.
    pub graph: Option<PathBuf>,
    /// Defaults to `0.5 / max positive degree`.
    pub alpha: Option<f64>,
    /// Explicit β grid; when empty, `points` values spanning `[0, 2β*]`.
    pub betas: Vec<f64>,
    pub points: usize,
    pub steps: usize,
}

impl Default for BetaSweepConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            seed: 0,
            graph: None,
            alpha: None,
            betas: Vec::new(),
            points: 21,
            steps: 20_000,
        }
    }
}

impl CommandConfig for BetaSweepConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn validate(&self) -> Result<()> {
        if self.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(CliError::Config(
                "betas must be finite and non-negative".into(),
            ));
        }
        if self.betas.is_empty() && self.points < 2 {
            return Err(CliError::Config("points must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    pub trials: usize,
    pub max_n: usize,
    pub max_d: usize,
    pub max_k: usize,
    pub tolerance: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            seed: 0,
            trials: 100,
            max_n: 20,
            max_d: 8,
            max_k: 6,
            tolerance: 1e-9,
        }
    }
}

impl CommandConfig for EquivalenceConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.max_n < 2 || self.max_d == 0 {
            return Err(CliError::Config(
                "trials, max_n >= 2 and max_d must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremsConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    pub equivalence_trials: usize,
    pub phase_instances: usize,
    pub phase_steps: usize,
    pub clustering_runs: usize,
    pub clustering_steps: usize,
    pub bound_instances: usize,
    /// Deliberately wrong expectation, used to exercise the failure path.
    pub inject: Option<Injection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Injection {
    /// Expect divergence below β*.
    ExpectDivergeBelowStar,
}

impl Default for TheoremsConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            seed: 0,
            equivalence_trials: 100,
            phase_instances: 20,
            phase_steps: 200_000,
            clustering_runs: 100,
            clustering_steps: 50_000,
            bound_instances: 1000,
            inject: None,
        }
    }
}

impl CommandConfig for TheoremsConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRatioConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub seed: u64,
    pub seeds: usize,
    pub ratios: Vec<f64>,
    pub depth: usize,
    pub csbm: CsbmSettings,
    pub sbp: SbpSettings,
    pub head: HeadSettings,
    /// Strengths of the signed matrix whose imbalance is counted.
    pub bound_alpha: f64,
    pub bound_beta: f64,
}

impl Default for TrainRatioConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            seed: 0,
            seeds: 20,
            ratios: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            depth: 10,
            csbm: CsbmSettings::default(),
            sbp: SbpSettings::default(),
            head: HeadSettings::default(),
            bound_alpha: 1.0,
            bound_beta: 2.0,
        }
    }
}

impl CommandConfig for TrainRatioConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }

    fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.ratios.is_empty() {
            return Err(CliError::Config(
                "seeds and ratios must be non-empty".into(),
            ));
        }
        for &r in &self.ratios {
            check_ratio("ratio", r, true)?;
        }
        self.sbp.propagation(self.depth).validate()?;
        self.csbm.params(self.seed)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("5"), 7).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some("5"), 7).unwrap(), 5);
        assert_eq!(resolve_seed(None, None, 7).unwrap(), 7);
        assert!(resolve_seed(None, Some("-1"), 7).is_err());
    }

    #[test]
    fn schema_is_required() {
        assert!(parse::<DepthSweepConfig>(r#"{"seeds": 2}"#).is_err());
        assert!(parse::<DepthSweepConfig>(r#"{"schema": 2, "seeds": 2}"#).is_err());
        let cfg: DepthSweepConfig = parse(r#"{"schema": 1, "seeds": 2}"#).unwrap();
        assert_eq!(cfg.seeds, 2);
        assert_eq!(cfg.depths, DepthSweepConfig::default().depths);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse::<PropagateConfig>(r#"{"schema": 1, "stpes": 3}"#).is_err());
    }

    #[test]
    fn propagate_config_accepts_post_steps() {
        let cfg: PropagateConfig =
            parse(r#"{"schema": 1, "method": "feature_sbp_v2", "post_step": {"kind": "clamp", "c": 2.0}}"#).unwrap();
        assert_eq!(cfg.method, Method::FeatureSbpV2);
        assert_eq!(cfg.post_step, PostStep::Clamp(2.0));
    }

    #[test]
    fn hash_tracks_content() {
        let a = SidTableConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn reference_csbm_defaults() {
        let p = CsbmSettings::default().params(4).unwrap();
        let r = CsbmParams::reference(4);
        assert!((p.p - r.p).abs() < 1e-15 && (p.q - r.q).abs() < 1e-15);
        assert_eq!(
            (p.n, &p.mu1, &p.mu2, p.sigma, p.seed),
            (r.n, &r.mu1, &r.mu2, r.sigma, r.seed)
        );
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = TrainRatioConfig::default();
        cfg.ratios.push(0.0);
        assert!(cfg.validate().is_err());
        let mut sid = SidTableConfig::default();
        sid.methods.push("gat".into());
        assert!(sid.validate().is_err());
    }
}
