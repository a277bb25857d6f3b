//! Exhaustive BIC maximization over all DAGs, or over the acyclic
//! orientations of a given skeleton.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{enumerate_dags, enumerate_orientations, Dag, Skeleton, MAX_ENUMERATION_NODES};
use crate::scalar::Scalar;
use crate::scoring::{ScoredDag, Scorer, ScoringConfig};

/// Scores closer than this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

const BATCH: usize = 4096;

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    pub scoring: ScoringConfig,
    /// Worker threads; `None` uses the available parallelism, `Some(1)` runs
    /// serially on the calling thread.
    pub workers: Option<usize>,
}

impl SearchOptions {
    pub fn serial() -> Self {
        SearchOptions {
            workers: Some(1),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchReport<T> {
    pub best: ScoredDag<T>,
    /// Enumeration index of `best`.
    pub best_index: usize,
    pub candidates_scored: usize,
    /// `best.bic` minus the best score among the other candidates, floored
    /// at zero (zero for ties and single-candidate spaces).
    pub runner_up_margin: T,
    pub wall_time: Duration,
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    index: usize,
    edges: usize,
    bic: T,
}

/// Maximum-BIC DAG among every DAG on `ds.column_count()` nodes.
pub fn exhaustive_search<T: Scalar>(ds: &Dataset<T>) -> Result<SearchReport<T>> {
    exhaustive_search_with(ds, &SearchOptions::default())
}

pub fn exhaustive_search_with<T: Scalar>(ds: &Dataset<T>, options: &SearchOptions) -> Result<SearchReport<T>> {
    let p = ds.column_count();
    if p > MAX_ENUMERATION_NODES {
        return Err(Error::Capability(format!(
            "exhaustive search supports at most {MAX_ENUMERATION_NODES} variables, the data has {p}; \
             supply a skeleton to search its orientations instead"
        )));
    }
    enumerate_dags(p)?;
    run(ds, || enumerate_dags(p).expect("checked above"), options)
}

/// Maximum-BIC DAG among the acyclic orientations of `skeleton`.
pub fn oracle_search<T: Scalar>(ds: &Dataset<T>, skeleton: &Skeleton) -> Result<SearchReport<T>> {
    oracle_search_with(ds, skeleton, &SearchOptions::default())
}

pub fn oracle_search_with<T: Scalar>(
    ds: &Dataset<T>,
    skeleton: &Skeleton,
    options: &SearchOptions,
) -> Result<SearchReport<T>> {
    if skeleton.node_count() != ds.column_count() {
        return Err(Error::Usage(format!(
            "skeleton has {} nodes but the dataset has {} columns",
            skeleton.node_count(),
            ds.column_count()
        )));
    }
    run(ds, || enumerate_orientations(skeleton), options)
}

fn run<T: Scalar, I: Iterator<Item = Dag>>(
    ds: &Dataset<T>,
    make_space: impl Fn() -> I,
    options: &SearchOptions,
) -> Result<SearchReport<T>> {
    let start = Instant::now();
    let scorer = Scorer::new(ds, options.scoring.clone());
    let workers = options.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Usage(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    // Only (index, edge count, bic) is kept per candidate so the tie rule can
    // be applied after the full scan; the winning DAG is recovered by walking
    // the enumeration a second time.
    let mut scored: Vec<Candidate<T>> = Vec::new();
    let mut batch: Vec<Dag> = Vec::with_capacity(BATCH);
    let mut space = make_space().peekable();
    let mut index = 0usize;
    while space.peek().is_some() {
        batch.clear();
        batch.extend(space.by_ref().take(BATCH));
        let first = index;
        let score_one = |(k, dag): (usize, &Dag)| -> Result<Candidate<T>> {
            Ok(Candidate {
                index: first + k,
                edges: dag.edge_count(),
                bic: scorer.bic(dag)?,
            })
        };
        let results: Vec<Result<Candidate<T>>> = match &pool {
            Some(pool) => pool.install(|| batch.par_iter().enumerate().map(score_one).collect()),
            None => batch.iter().enumerate().map(score_one).collect(),
        };
        for r in results {
            scored.push(r?);
        }
        index += batch.len();
    }
    if scored.is_empty() {
        return Err(Error::Structural("empty search space".into()));
    }

    let (winner, margin) = select(&scored);
    let best_dag = make_space().nth(winner.index).expect("enumeration is deterministic");
    let best = scorer.score(&best_dag)?;
    debug_assert_eq!(best.bic.bits(), winner.bic.bits());
    Ok(SearchReport {
        best,
        best_index: winner.index,
        candidates_scored: scored.len(),
        runner_up_margin: margin,
        wall_time: start.elapsed(),
    })
}

/// Among candidates within [`TIE_TOLERANCE`] of the top score, picks the one
/// with the fewest edges, then the lowest enumeration index. The result does
/// not depend on how the scan was partitioned.
fn select<T: Scalar>(scored: &[Candidate<T>]) -> (Candidate<T>, T) {
    let top = scored.iter().map(|c| c.bic).fold(T::neg_infinity(), T::max);
    let tol = T::lit(TIE_TOLERANCE);
    let winner = *scored
        .iter()
        .filter(|c| c.bic >= top - tol)
        .min_by_key(|c| (c.edges, c.index))
        .expect("top score attained");
    let runner_up = scored
        .iter()
        .filter(|c| c.index != winner.index)
        .map(|c| c.bic)
        .fold(T::neg_infinity(), T::max);
    let margin = if runner_up == T::neg_infinity() || winner.bic - runner_up < tol {
        T::zero()
    } else {
        winner.bic - runner_up
    };
    (winner, margin)
}

/// Scores every DAG on `p` nodes without caching or batching, returning the
/// full list in enumeration order; a reference scan for tests and audits.
pub fn score_all<T: Scalar>(ds: &Dataset<T>, config: &ScoringConfig) -> Result<Vec<ScoredDag<T>>> {
    let scorer = Scorer::uncached(ds, config.clone());
    enumerate_dags(ds.column_count())?.map(|d| scorer.score(&d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnKind, ColumnSchema};
    use crate::synth::{random_dag, random_model, sample, RngSeed};

    fn small_data(seed: u64, p: usize, c: usize, n: usize) -> (Dag, Dataset<f64>) {
        let mut rng = RngSeed(seed).rng();
        let dag = random_dag(p, 0.5, &mut rng).unwrap();
        let model = random_model(&dag, c, &mut rng).unwrap();
        (dag, sample(&model, n, &mut rng).unwrap())
    }

    #[test]
    fn single_variable() {
        let ds = Dataset::from_columns(
            vec![ColumnSchema::new("x", ColumnKind::Continuous)],
            vec![vec![0.1, -0.4, 2.0, 0.3]],
        )
        .unwrap();
        let r = exhaustive_search(&ds).unwrap();
        assert_eq!(r.candidates_scored, 1);
        assert_eq!(r.best.dag, Dag::empty(1));
        assert_eq!(r.runner_up_margin, 0.0);
    }

    #[test]
    fn three_variables_score_all_candidates() {
        let (_, ds) = small_data(1, 3, 2, 400);
        let r = exhaustive_search(&ds).unwrap();
        assert_eq!(r.candidates_scored, 25);
        assert!(r.runner_up_margin >= 0.0);
        let all = score_all(&ds, &ScoringConfig::default()).unwrap();
        let max = all.iter().map(|s| s.bic).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best.bic.to_bits(), max.to_bits());
        assert_eq!(all[r.best_index].dag, r.best.dag);
    }

    #[test]
    fn oracle_counts_and_subset_bound() {
        let (_, ds) = small_data(2, 3, 3, 500);
        let chain = Skeleton::new(3, [(0, 1), (1, 2)]).unwrap();
        let r = oracle_search(&ds, &chain).unwrap();
        assert_eq!(r.candidates_scored, 4);
        assert_eq!(r.best.dag.skeleton(), chain);
        let full = exhaustive_search(&ds).unwrap();
        assert!(r.best.bic <= full.best.bic);

        let e = oracle_search(&ds, &Skeleton::empty(3)).unwrap();
        assert_eq!(e.candidates_scored, 1);
        assert_eq!(e.best.dag, Dag::empty(3));
        assert!(oracle_search(&ds, &Skeleton::empty(4)).is_err());
    }

    #[test]
    fn serial_and_parallel_agree() {
        let (_, ds) = small_data(3, 4, 2, 600);
        let s = exhaustive_search_with(&ds, &SearchOptions::serial()).unwrap();
        for workers in [2, 4] {
            let opts = SearchOptions {
                workers: Some(workers),
                ..Default::default()
            };
            let p = exhaustive_search_with(&ds, &opts).unwrap();
            assert_eq!(p.best.dag, s.best.dag);
            assert_eq!(p.best.bic.to_bits(), s.best.bic.to_bits());
            assert_eq!(p.runner_up_margin.to_bits(), s.runner_up_margin.to_bits());
            assert_eq!(p.candidates_scored, 543);
        }
    }

    #[test]
    fn ties_prefer_fewer_edges_then_index() {
        let c = |index, edges, bic: f64| Candidate { index, edges, bic };
        let (w, m) = select(&[c(0, 2, 1.0), c(1, 1, 1.0 - 1e-12), c(2, 1, 1.0), c(3, 0, 0.5)]);
        assert_eq!(w.index, 1);
        assert_eq!(m, 0.0);
        let (w, m) = select(&[c(0, 0, -3.0), c(1, 1, -1.0), c(2, 2, -2.0)]);
        assert_eq!(w.index, 1);
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_variables_is_capability_error() {
        let schema: Vec<ColumnSchema> = (0..7).map(|i| ColumnSchema::new(format!("x{i}"), ColumnKind::Continuous)).collect();
        let cols = (0..7).map(|i| vec![i as f64, 1.0, 0.0]).collect();
        let ds = Dataset::from_columns(schema, cols).unwrap();
        assert!(matches!(exhaustive_search(&ds), Err(Error::Capability(_))));
    }
}
