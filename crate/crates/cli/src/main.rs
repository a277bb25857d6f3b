//! `hybrid-lingam`: simulate, discover, score, baseline and evaluate from the
//! command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data or validation, 3 capability.
//! Failures are reported on stderr as one JSON line `{code, message, context}`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use hybrid_lingam::baseline_pc::{mean_discretize, pc_skeleton, DEFAULT_ALPHA};
use hybrid_lingam::bench::{emit_results, run_experiment_with, ExperimentConfig};
use hybrid_lingam::graph::{Dag, GraphJson, Skeleton};
use hybrid_lingam::scoring::{Scorer, ScoringConfig};
use hybrid_lingam::search::{exhaustive_search_with, oracle_search_with, SearchOptions};
use hybrid_lingam::synth::{
    random_dag, random_model_with, sample, GenerativeModel, InterceptPolicy, ModelOptions, NoiseFamily, NoiseSpec,
    RngSeed,
};
use hybrid_lingam::{Dataset, Error, FittedLocal, SearchReport};

#[derive(Parser, Debug)]
#[command(name = "hybrid-lingam", version, about = "Causal discovery for mixed continuous and binary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random hybrid model and sample a dataset from it.
    Simulate(SimulateArgs),
    /// Find the maximum-BIC DAG (all DAGs, or orientations of a given skeleton).
    Discover(DiscoverArgs),
    /// Print the BIC of a given graph with its per-node breakdown.
    Score(ScoreArgs),
    /// Estimate a skeleton with mean discretization and PC.
    Baseline(BaselineArgs),
    /// Run a replicated simulation study from a config file.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON giving each column's name and kind.
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of variables.
    #[arg(long)]
    p: usize,
    /// Number of continuous variables; the rest are binary.
    #[arg(long)]
    c: usize,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Probability that each pair of nodes is joined.
    #[arg(long, default_value_t = 0.5)]
    edge_prob: f64,
    #[arg(long, value_enum, default_value_t = Noise::Laplace)]
    noise: Noise,
    /// Laplace scale, or half-width of the uniform noise.
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, value_enum, default_value_t = Intercepts::Zero)]
    intercepts: Intercepts,
    /// Output directory for data.csv, schema.json, truth.json, manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiscoverArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Skeleton JSON; restricts the search to its acyclic orientations.
    #[arg(long)]
    skeleton: Option<PathBuf>,
    /// Worker threads (default: available parallelism; 1 runs serially).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for graph.json and report.json; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Graph JSON to score.
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    input: DataArgs,
    /// Significance level of each G2 test.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Output directory for skeleton.json; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv and results.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: available parallelism; 1 runs serially).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Noise {
    Laplace,
    Uniform,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Intercepts {
    Zero,
    Uniform,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let message = rendered
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .collect::<Vec<_>>()
                .join(" ");
            emit_error("usage", message.trim_start_matches("error: "), json!({ "argv": argv }));
            return ExitCode::from(1);
        }
    };
    let sub = subcommand_name(&cli.command);
    match run(cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_error(e.code(), &e.to_string(), context(&e, sub));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Discover(_) => "discover",
        Command::Score(_) => "score",
        Command::Baseline(_) => "baseline",
        Command::Evaluate(_) => "evaluate",
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.code() {
        "usage" => 1,
        "capability" => 3,
        _ => 2,
    }
}

fn context(e: &Error, subcommand: &str) -> Value {
    let mut ctx = json!({ "subcommand": subcommand });
    let mut cur = e;
    loop {
        match cur {
            Error::Node { node, name, source } => {
                ctx["node"] = json!(node);
                ctx["node_name"] = json!(name);
                cur = source;
            }
            Error::Cell { row, column, .. } => {
                ctx["row"] = json!(row);
                ctx["column"] = json!(column);
                break;
            }
            Error::Io { path, .. } => {
                ctx["path"] = json!(path.display().to_string());
                break;
            }
            _ => break,
        }
    }
    ctx
}

fn emit_error(code: &str, message: &str, context: Value) {
    eprintln!("{}", json!({ "code": code, "message": message, "context": context }));
}

fn run(command: Command, argv: &[String]) -> Result<(), Error> {
    match command {
        Command::Simulate(a) => simulate(a, argv),
        Command::Discover(a) => discover(a),
        Command::Score(a) => score(a),
        Command::Baseline(a) => baseline(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn load(input: &DataArgs) -> Result<Dataset, Error> {
    Dataset::load_csv(&input.data, &input.schema)
}

fn read_graph(path: &Path) -> Result<GraphJson, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("graph {}: {e}", path.display())))
}

fn write_pretty(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn check_workers(workers: Option<usize>) -> Result<(), Error> {
    if workers == Some(0) {
        return Err(Error::Usage("--workers must be at least 1".into()));
    }
    Ok(())
}

fn simulate(a: SimulateArgs, argv: &[String]) -> Result<(), Error> {
    if a.p == 0 {
        return Err(Error::Usage("--p must be at least 1".into()));
    }
    if a.c > a.p {
        return Err(Error::Usage(format!("--c {} exceeds --p {}", a.c, a.p)));
    }
    if a.n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&a.edge_prob) {
        return Err(Error::Usage(format!("--edge-prob {} outside [0, 1]", a.edge_prob)));
    }
    let family = match a.noise {
        Noise::Laplace => NoiseFamily::Laplace,
        Noise::Uniform => NoiseFamily::Uniform,
    };
    let noise = NoiseSpec::new(family, a.noise_scale).map_err(|e| Error::Usage(e.to_string()))?;
    let intercepts = match a.intercepts {
        Intercepts::Zero => InterceptPolicy::Zero,
        Intercepts::Uniform => InterceptPolicy::Uniform,
    };
    let mut rng = RngSeed(a.seed).rng();
    let dag = random_dag(a.p, a.edge_prob, &mut rng)?;
    let model: GenerativeModel<f64> = random_model_with(&dag, a.c, &ModelOptions { intercepts, noise }, &mut rng)?;
    let data = sample(&model, a.n, &mut rng)?;
    let names = data.names();

    create_dir(&a.out)?;
    data.save_csv(a.out.join("data.csv"))?;
    data.schema_file().save(a.out.join("schema.json"))?;
    write_pretty(&a.out.join("truth.json"), &dag.to_json(&names)?)?;
    let weights: Vec<Value> = model
        .weights()
        .iter()
        .map(|(&(from, to), w)| json!({ "parent": names[from], "child": names[to], "weight": w }))
        .collect();
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "invocation": argv,
        "seed": a.seed,
        "p": a.p,
        "c": a.c,
        "n": a.n,
        "edge_prob": a.edge_prob,
        "noise": family,
        "noise_scale": a.noise_scale,
        "intercepts": intercepts,
        "continuous": (0..a.p).filter(|&i| model.noise(i).is_some()).map(|i| &names[i]).collect::<Vec<_>>(),
        "weights": weights,
        "intercept_values": model.intercepts(),
    });
    write_pretty(&a.out.join("manifest.json"), &manifest)
}

#[derive(Serialize)]
struct LocalReport<'a> {
    node: &'a str,
    kind: &'static str,
    parents: Vec<&'a str>,
    coefficients: &'a [f64],
    intercept: f64,
    residual_scale: Option<f64>,
    loglik: f64,
    param_count: usize,
    converged: bool,
    iterations: usize,
}

fn local_reports<'a>(locals: &'a [FittedLocal], names: &'a [String]) -> Vec<LocalReport<'a>> {
    locals
        .iter()
        .map(|l| LocalReport {
            node: &names[l.node],
            kind: if l.residual_scale.is_some() { "continuous" } else { "binary" },
            parents: l.parents.iter().map(|&p| names[p].as_str()).collect(),
            coefficients: &l.coefficients,
            intercept: l.intercept,
            residual_scale: l.residual_scale,
            loglik: l.loglik,
            param_count: l.param_count,
            converged: l.converged,
            iterations: l.iterations,
        })
        .collect()
}

fn discover(a: DiscoverArgs) -> Result<(), Error> {
    check_workers(a.workers)?;
    let skeleton_json = a.skeleton.as_deref().map(read_graph).transpose()?;
    let ds = load(&a.input)?;
    let names = ds.names();
    let options = SearchOptions {
        scoring: ScoringConfig::default(),
        workers: a.workers,
    };
    let (mode, report): (&str, SearchReport) = match &skeleton_json {
        Some(sk) => ("oracle", oracle_search_with(&ds, &Skeleton::from_json(sk, &names)?, &options)?),
        None => ("exhaustive", exhaustive_search_with(&ds, &options)?),
    };
    let graph = report.best.dag.to_json(&names)?;
    let summary = json!({
        "mode": mode,
        "rows": ds.rows(),
        "bic": report.best.bic,
        "loglik": report.best.total_loglik(),
        "penalty": report.best.penalty(ds.rows()),
        "best_index": report.best_index,
        "candidates_scored": report.candidates_scored,
        "runner_up_margin": report.runner_up_margin,
        "wall_time_ms": report.wall_time.as_secs_f64() * 1e3,
        "nodes": local_reports(&report.best.locals, &names),
    });
    match a.out {
        Some(dir) => {
            create_dir(&dir)?;
            write_pretty(&dir.join("graph.json"), &graph)?;
            write_pretty(&dir.join("report.json"), &summary)
        }
        None => {
            println!("{}", json!({ "graph": graph, "report": summary }));
            Ok(())
        }
    }
}

fn score(a: ScoreArgs) -> Result<(), Error> {
    let graph = read_graph(&a.graph)?;
    let ds = load(&a.input)?;
    let names = ds.names();
    let dag = Dag::from_json(&graph, &names)?;
    let scored = Scorer::uncached(&ds, ScoringConfig::default()).score(&dag)?;
    let out = json!({
        "rows": ds.rows(),
        "bic": scored.bic,
        "loglik": scored.total_loglik(),
        "penalty": scored.penalty(ds.rows()),
        "dim": dag.edge_count() + dag.node_count(),
        "nodes": local_reports(&scored.locals, &names),
    });
    println!("{out}");
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<(), Error> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Usage(format!("--alpha {} outside (0, 1)", a.alpha)));
    }
    let ds = load(&a.input)?;
    let sk = pc_skeleton(&mean_discretize(&ds), a.alpha)?;
    let json = sk.to_json(&ds.names())?;
    match a.out {
        Some(dir) => {
            create_dir(&dir)?;
            write_pretty(&dir.join("skeleton.json"), &json)
        }
        None => {
            println!("{}", serde_json::to_string(&json)?);
            Ok(())
        }
    }
}

fn evaluate(a: EvaluateArgs) -> Result<(), Error> {
    check_workers(a.workers)?;
    let cfg = ExperimentConfig::load(&a.config)?;
    let res = run_experiment_with(&cfg, a.workers)?;
    let (csv, json_path) = emit_results(&res, &a.out)?;
    for cell in &res.cells {
        let dag = cell.dag_accuracy.map_or("-".to_string(), |d| format!("{d:.3}"));
        eprintln!(
            "{:<14} c={} n={:<6} skeleton {:.3} dag {dag}",
            cell.method.name(),
            cell.c,
            cell.n,
            cell.skeleton_accuracy
        );
    }
    println!("{}", json!({ "csv": csv.display().to_string(), "json": json_path.display().to_string() }));
    Ok(())
}
