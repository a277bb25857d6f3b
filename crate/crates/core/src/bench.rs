//! Replicated simulation study: random hybrid models, nested sample sizes,
//! exact-structure accuracy per method.
//!
//! Each replicate draws one DAG, one parameterization and `max(n)` rows from
//! its own RNG stream; the estimate at sample size `n` uses the first `n`
//! rows, so smaller sizes see a prefix of the larger ones.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline_pc::{mean_discretize, pc_skeleton, DEFAULT_ALPHA};
use crate::dataset::{write_json, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::{skeleton_f1, Dag, Skeleton, MAX_ENUMERATION_NODES};
use crate::scalar::Scalar;
use crate::search::{exhaustive_search_with, oracle_search_with, SearchOptions};
use crate::synth::{
    random_dag, random_model_with, sample, GenerativeModel, InterceptPolicy, ModelOptions, NoiseFamily, NoiseSpec,
    RngSeed,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exhaustive BIC search over all DAGs.
    Hybrid,
    /// BIC search over orientations of the true skeleton.
    HybridOracle,
    /// Mean discretization + PC skeleton.
    PcBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hybrid => "hybrid",
            Method::HybridOracle => "hybrid_oracle",
            Method::PcBaseline => "pc_baseline",
        }
    }

    pub fn produces_dag(self) -> bool {
        !matches!(self, Method::PcBaseline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub c: usize,
    pub edge_prob: f64,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub noise: NoiseFamily,
    pub noise_scale: f64,
    pub intercepts: InterceptPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p: 4,
            c: 2,
            edge_prob: 0.5,
            sample_sizes: vec![100, 1000, 10_000, 30_000],
            replicates: 30,
            seed: 0,
            methods: vec![Method::Hybrid, Method::HybridOracle, Method::PcBaseline],
            alpha: DEFAULT_ALPHA,
            noise: NoiseFamily::Laplace,
            noise_scale: 1.0,
            intercepts: InterceptPolicy::Zero,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(Error::Usage(m));
        if self.p == 0 {
            return usage("p must be at least 1".into());
        }
        if self.c > self.p {
            return usage(format!("c = {} exceeds p = {}", self.c, self.p));
        }
        if self.replicates == 0 {
            return usage("replicates must be at least 1".into());
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return usage("sample_sizes must be non-empty and positive".into());
        }
        if self.methods.is_empty() {
            return usage("no methods selected".into());
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return usage(format!("edge_prob {} outside [0, 1]", self.edge_prob));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return usage(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return usage(format!("noise_scale {} must be positive", self.noise_scale));
        }
        if self.methods.contains(&Method::Hybrid) && self.p > MAX_ENUMERATION_NODES {
            return Err(Error::Capability(format!(
                "hybrid search supports p <= {MAX_ENUMERATION_NODES}, got {}",
                self.p
            )));
        }
        Ok(())
    }

    fn model_options(&self) -> ModelOptions<f64> {
        ModelOptions {
            intercepts: self.intercepts,
            noise: NoiseSpec {
                family: self.noise,
                scale: self.noise_scale,
            },
        }
    }

    fn max_n(&self) -> usize {
        self.sample_sizes.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub method: Method,
    pub n: usize,
    /// Estimated edges; directed for DAG methods, `(min, max)` pairs for PC.
    pub estimate: Vec<(usize, usize)>,
    pub skeleton_match: bool,
    pub dag_match: Option<bool>,
    pub edge_f1: f64,
    /// SHA-256 of the first `n` rows the method saw.
    pub data_hash: String,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub true_graph: Vec<(usize, usize)>,
    pub continuous: Vec<usize>,
    pub evaluations: Vec<Evaluation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub c: usize,
    pub n: usize,
    pub skeleton_accuracy: f64,
    /// Absent for skeleton-only methods.
    pub dag_accuracy: Option<f64>,
    pub mean_edge_f1: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub records: Vec<ReplicateRecord>,
}

impl ExperimentResult {
    pub fn cell(&self, method: Method, n: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.method == method && c.n == n)
    }

    /// Equality ignoring wall-clock fields.
    pub fn same_outcome(&self, other: &ExperimentResult) -> bool {
        let strip = |r: &ExperimentResult| {
            let mut r = r.clone();
            for rec in &mut r.records {
                for e in &mut rec.evaluations {
                    e.wall_time_ms = 0.0;
                }
            }
            r
        };
        strip(self) == strip(other)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// SHA-256 over the bit patterns of all values, column by column.
pub fn data_hash<T: Scalar>(ds: &Dataset<T>) -> String {
    let mut h = Sha256::new();
    for i in 0..ds.column_count() {
        for &v in ds.col(i) {
            h.update(v.bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The generating model and full-length dataset of replicate `index`.
pub fn replicate_data(cfg: &ExperimentConfig, index: usize) -> Result<(GenerativeModel<f64>, Dataset<f64>)> {
    let mut rng = RngSeed(cfg.seed).replicate_rng(index as u64);
    let dag = random_dag(cfg.p, cfg.edge_prob, &mut rng)?;
    let model = random_model_with(&dag, cfg.c, &cfg.model_options(), &mut rng)?;
    let data = sample(&model, cfg.max_n(), &mut rng)?;
    Ok((model, data))
}

fn evaluate(method: Method, truth: &Dag, data: &Dataset<f64>, n: usize, alpha: f64) -> Evaluation {
    let start = Instant::now();
    let true_skel = truth.skeleton();
    let (hash, outcome) = match data.prefix(n) {
        Ok(prefix) => (data_hash(&prefix), estimate(method, &true_skel, &prefix, alpha)),
        Err(e) => (String::new(), Err(e)),
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(Estimate::Dag(d)) => Evaluation {
            method,
            n,
            skeleton_match: d.skeleton() == true_skel,
            dag_match: Some(&d == truth),
            edge_f1: skeleton_f1(&true_skel, &d.skeleton()),
            estimate: d.edges().to_vec(),
            data_hash: hash,
            wall_time_ms,
            error: None,
        },
        Ok(Estimate::Skeleton(s)) => Evaluation {
            method,
            n,
            skeleton_match: s == true_skel,
            dag_match: None,
            edge_f1: skeleton_f1(&true_skel, &s),
            estimate: s.edges().to_vec(),
            data_hash: hash,
            wall_time_ms,
            error: None,
        },
        Err(e) => Evaluation {
            method,
            n,
            estimate: Vec::new(),
            skeleton_match: false,
            dag_match: method.produces_dag().then_some(false),
            edge_f1: 0.0,
            data_hash: hash,
            wall_time_ms,
            error: Some(e.to_string()),
        },
    }
}

enum Estimate {
    Dag(Dag),
    Skeleton(Skeleton),
}

fn estimate(method: Method, true_skel: &Skeleton, data: &Dataset<f64>, alpha: f64) -> Result<Estimate> {
    let serial = SearchOptions::serial();
    Ok(match method {
        Method::Hybrid => Estimate::Dag(exhaustive_search_with(data, &serial)?.best.dag),
        Method::HybridOracle => Estimate::Dag(oracle_search_with(data, true_skel, &serial)?.best.dag),
        Method::PcBaseline => Estimate::Skeleton(pc_skeleton(&mean_discretize(data), alpha)?),
    })
}

fn run_replicate(cfg: &ExperimentConfig, index: usize) -> ReplicateRecord {
    match replicate_data(cfg, index) {
        Ok((model, data)) => {
            let truth = model.dag();
            let evaluations = cfg
                .methods
                .iter()
                .flat_map(|&m| cfg.sample_sizes.iter().map(move |&n| (m, n)))
                .map(|(m, n)| evaluate(m, truth, &data, n, cfg.alpha))
                .collect();
            ReplicateRecord {
                replicate: index,
                seed: cfg.seed,
                true_graph: truth.edges().to_vec(),
                continuous: (0..cfg.p).filter(|&i| data.kind(i) == ColumnKind::Continuous).collect(),
                evaluations,
                error: None,
            }
        }
        Err(e) => ReplicateRecord {
            replicate: index,
            seed: cfg.seed,
            true_graph: Vec::new(),
            continuous: Vec::new(),
            evaluations: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, None)
}

/// Runs every replicate (in parallel unless `workers == Some(1)`) and
/// aggregates in replicate order. Failed replicates count as misses.
pub fn run_experiment_with(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let records: Vec<ReplicateRecord> = match workers {
        Some(1) => (0..cfg.replicates).map(|r| run_replicate(cfg, r)).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                builder = builder.num_threads(w);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
            pool.install(|| (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, r)).collect())
        }
    };

    let total = cfg.replicates as f64;
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &n in &cfg.sample_sizes {
            let evals: Vec<&Evaluation> = records
                .iter()
                .flat_map(|r| r.evaluations.iter())
                .filter(|e| e.method == method && e.n == n)
                .collect();
            let skel_hits = evals.iter().filter(|e| e.skeleton_match).count() as f64;
            let dag_hits = evals.iter().filter(|e| e.dag_match == Some(true)).count() as f64;
            let f1 = evals.iter().map(|e| e.edge_f1).sum::<f64>();
            cells.push(CellResult {
                method,
                c: cfg.c,
                n,
                skeleton_accuracy: skel_hits / total,
                dag_accuracy: method.produces_dag().then_some(dag_hits / total),
                mean_edge_f1: f1 / total,
                replicates: cfg.replicates,
            });
        }
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        cells,
        records,
    })
}

/// Writes `results.csv` (tidy: method, c, n, metric, value) and
/// `results.json` (config, cells and every replicate record) into `dir`.
pub fn emit_results(res: &ExperimentResult, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("results.csv");
    let mut text = String::from("method,c,n,metric,value\n");
    for cell in &res.cells {
        let m = cell.method.name();
        text.push_str(&format!("{m},{},{},skeleton_accuracy,{}\n", cell.c, cell.n, cell.skeleton_accuracy));
        if let Some(d) = cell.dag_accuracy {
            text.push_str(&format!("{m},{},{},dag_accuracy,{d}\n", cell.c, cell.n));
        }
    }
    std::fs::write(&csv_path, text).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join("results.json");
    write_json(&json_path, res)?;
    Ok((csv_path, json_path))
}
