//! Local model fitting and the decomposable BIC score.
//!
//! Continuous nodes are regressed on their parents by ordinary least squares
//! and their residuals scored under a non-Gaussian density (Laplace by
//! default). Binary nodes get a logistic conditional distribution fitted by
//! Newton/IRLS. The score of a DAG is the sum of local log-likelihoods minus
//! `ln(M) / 2` per free parameter, where a node with `k` parents has `k + 1`
//! parameters, so `Dim[G] = |E| + p`.

use std::sync::Arc;

use dashmap::DashMap;

use crate::dataset::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::{least_squares, weighted_least_squares};
use crate::scalar::Scalar;

/// Residual density used for continuous nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContinuousLikelihood {
    /// `f(r) = exp(-|r| / b) / (2 b)` with `b` = mean absolute residual.
    #[default]
    Laplace,
    /// Hyperbolic secant, `f(r) = 1 / (pi s cosh(r / s))`, with `s` matched to
    /// the residual variance (`var = pi^2 s^2 / 4`).
    LogCosh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    pub continuous: ContinuousLikelihood,
    /// IRLS iteration limit.
    pub max_iter: usize,
    /// IRLS stops once the gradient max-norm falls below this, or once the
    /// predicted Newton gain is below the rounding level of the log-likelihood.
    pub gradient_tol: f64,
    /// Logistic coefficients are clamped to `[-cap, cap]`.
    pub coefficient_cap: f64,
    /// Ridge used when a design matrix is rank deficient.
    pub ridge: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            continuous: ContinuousLikelihood::Laplace,
            max_iter: 100,
            gradient_tol: 1e-8,
            coefficient_cap: 30.0,
            ridge: 1e-8,
        }
    }
}

/// Fitted conditional distribution of one node given a parent set.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedLocal<T> {
    pub node: usize,
    /// Sorted parent indices; `coefficients[k]` belongs to `parents[k]`.
    pub parents: Vec<usize>,
    pub coefficients: Vec<T>,
    pub intercept: T,
    /// Residual scale for continuous nodes, `None` for binary ones.
    pub residual_scale: Option<T>,
    pub loglik: T,
    pub param_count: usize,
    /// `false` when IRLS hit the iteration limit or clamped a coefficient.
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDag<T> {
    pub dag: Dag,
    pub bic: T,
    pub locals: Vec<FittedLocal<T>>,
}

impl<T: Scalar> ScoredDag<T> {
    pub fn total_loglik(&self) -> T {
        self.locals.iter().map(|l| l.loglik).sum()
    }

    pub fn penalty(&self, rows: usize) -> T {
        bic_penalty(rows, self.dag.edge_count() + self.dag.node_count())
    }
}

/// `ln(M) / 2 * dim`.
pub fn bic_penalty<T: Scalar>(rows: usize, dim: usize) -> T {
    T::from_usize_lossy(rows).ln() / T::lit(2.0) * T::from_usize_lossy(dim)
}

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(sigmoid(z))`, stable for large `|z|`.
pub fn log_sigmoid<T: Scalar>(z: T) -> T {
    // -softplus(-z)
    let x = -z;
    -(x.max(T::zero()) + (-x.abs()).exp().ln_1p())
}

fn log_cosh<T: Scalar>(x: T) -> T {
    let a = x.abs();
    a + (T::lit(-2.0) * a).exp().ln_1p() - T::lit(std::f64::consts::LN_2)
}

fn check_family<T: Scalar>(ds: &Dataset<T>, node: usize, parents: &[usize]) -> Result<Vec<usize>> {
    let p = ds.column_count();
    if node >= p {
        return Err(Error::Usage(format!("node {node} out of range for {p} columns")));
    }
    let mut sorted = parents.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != parents.len() {
        return Err(Error::Usage(format!("duplicate parents {parents:?}")));
    }
    if let Some(&bad) = sorted.iter().find(|&&j| j >= p) {
        return Err(Error::Usage(format!("parent {bad} out of range for {p} columns")));
    }
    if sorted.contains(&node) {
        return Err(Error::Usage(format!("node {node} listed among its own parents")));
    }
    if ds.rows() <= sorted.len() + 1 {
        return Err(Error::InsufficientData(format!(
            "{} rows cannot identify {} parameters",
            ds.rows(),
            sorted.len() + 1
        )));
    }
    Ok(sorted)
}

fn design<T: Scalar>(ds: &Dataset<T>, parents: &[usize]) -> Vec<Vec<T>> {
    let mut cols = Vec::with_capacity(parents.len() + 1);
    cols.push(vec![T::one(); ds.rows()]);
    cols.extend(parents.iter().map(|&j| ds.col(j).to_vec()));
    cols
}

fn predict<T: Scalar>(cols: &[Vec<T>], beta: &[T], m: usize) -> T {
    cols.iter().zip(beta).map(|(c, &b)| c[m] * b).sum()
}

/// Residuals of the OLS fit of column `node` on `[1, parents]`, along with
/// the coefficients `[intercept, b_1, ..]`.
pub fn ols_residuals<T: Scalar>(
    ds: &Dataset<T>,
    node: usize,
    parents: &[usize],
    config: &ScoringConfig,
) -> Result<(Vec<T>, Vec<T>)> {
    let parents = check_family(ds, node, parents)?;
    let cols = design(ds, &parents);
    let y = ds.col(node);
    let beta = least_squares(&cols, y, T::lit(config.ridge)).coefficients;
    let resid = (0..ds.rows()).map(|m| y[m] - predict(&cols, &beta, m)).collect();
    Ok((resid, beta))
}

/// OLS fit of a continuous node with a non-Gaussian residual log-likelihood.
pub fn fit_continuous<T: Scalar>(
    ds: &Dataset<T>,
    node: usize,
    parents: &[usize],
    config: &ScoringConfig,
) -> Result<FittedLocal<T>> {
    if node < ds.column_count() && ds.kind(node) != ColumnKind::Continuous {
        return Err(Error::Usage(format!("node {node} is not continuous")));
    }
    let sorted = check_family(ds, node, parents)?;
    let (resid, beta) = ols_residuals(ds, node, &sorted, config)?;
    let n = T::from_usize_lossy(resid.len());
    let y = ds.col(node);
    let y_scale = y.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let floor = T::epsilon() * (T::one() + y_scale);

    let (scale, loglik) = match config.continuous {
        ContinuousLikelihood::Laplace => {
            let b = (resid.iter().map(|r| r.abs()).sum::<T>() / n).max(floor);
            let log2b = (b + b).ln();
            let ll = resid.iter().map(|&r| -log2b - r.abs() / b).sum();
            (b, ll)
        }
        ContinuousLikelihood::LogCosh => {
            let sd = (resid.iter().map(|&r| r * r).sum::<T>() / n).sqrt();
            let s = (T::lit(2.0) * sd / T::lit(std::f64::consts::PI)).max(floor);
            let log_pi_s = (T::lit(std::f64::consts::PI) * s).ln();
            let ll = resid.iter().map(|&r| -log_pi_s - log_cosh(r / s)).sum();
            (s, ll)
        }
    };
    Ok(FittedLocal {
        node,
        param_count: sorted.len() + 1,
        parents: sorted,
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        residual_scale: Some(scale),
        loglik,
        converged: true,
        iterations: 1,
    })
}

/// Result of a logistic MLE, with the per-iteration log-likelihood trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<T> {
    /// `[b_0, b_1, ..]` matching the design columns.
    pub beta: Vec<T>,
    pub loglik: T,
    /// Gradient of the log-likelihood at `beta`.
    pub gradient: Vec<T>,
    /// Log-likelihood after each accepted iterate, starting at `beta = 0`.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub clamped: bool,
}

/// `sum_m y_m ln(p_m) + (1 - y_m) ln(1 - p_m)` with `y_m = 1` for outcome "1".
pub fn logistic_loglik<T: Scalar>(cols: &[Vec<T>], y_is_one: &[bool], beta: &[T]) -> T {
    y_is_one
        .iter()
        .enumerate()
        .map(|(m, &one)| {
            let eta = predict(cols, beta, m);
            if one {
                log_sigmoid(eta)
            } else {
                log_sigmoid(-eta)
            }
        })
        .sum()
}

pub fn logistic_gradient<T: Scalar>(cols: &[Vec<T>], y_is_one: &[bool], beta: &[T]) -> Vec<T> {
    let mut g = vec![T::zero(); cols.len()];
    for (m, &one) in y_is_one.iter().enumerate() {
        let p = sigmoid(predict(cols, beta, m));
        let r = if one { T::one() - p } else { -p };
        for (gk, c) in g.iter_mut().zip(cols) {
            *gk = *gk + c[m] * r;
        }
    }
    g
}

/// Newton/IRLS with step halving; every accepted step is non-decreasing in
/// log-likelihood.
pub fn logistic_mle<T: Scalar>(cols: &[Vec<T>], y_is_one: &[bool], config: &ScoringConfig) -> LogisticFit<T> {
    let k = cols.len();
    let rows = y_is_one.len();
    let cap = T::lit(config.coefficient_cap);
    let tol = T::lit(config.gradient_tol);
    let min_w = T::lit(1e-10);

    let mut beta = vec![T::zero(); k];
    let mut ll = logistic_loglik(cols, y_is_one, &beta);
    let mut trace = vec![ll];
    let mut grad = logistic_gradient(cols, y_is_one, &beta);
    let mut converged = false;
    let mut clamped = false;
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        if grad.iter().fold(T::zero(), |a, g| a.max(g.abs())) < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut weights = Vec::with_capacity(rows);
        let mut z = Vec::with_capacity(rows);
        for (m, &one) in y_is_one.iter().enumerate() {
            let p = sigmoid(predict(cols, &beta, m));
            let w = (p * (T::one() - p)).max(min_w);
            let r = if one { T::one() - p } else { -p };
            weights.push(w);
            z.push(r / w);
        }
        let step = weighted_least_squares(cols, &z, &weights, T::lit(config.ridge)).coefficients;
        // a full step gains about g.d / 2; once that is below the rounding
        // level of the loglik, one unsearched Newton step finishes the job
        let gain: T = grad.iter().zip(&step).map(|(&g, &d)| g * d).sum();
        if gain.abs() <= T::epsilon() * T::lit(64.0) * (T::one() + ll.abs()) {
            let polished: Vec<T> = beta.iter().zip(&step).map(|(&b, &d)| b + d).collect();
            let polished_ll = logistic_loglik(cols, y_is_one, &polished);
            if polished_ll >= ll && polished.iter().all(|v| v.abs() <= cap) {
                beta = polished;
                ll = polished_ll;
                trace.push(ll);
                grad = logistic_gradient(cols, y_is_one, &beta);
            }
            converged = true;
            break;
        }

        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let mut hit_cap = false;
            let candidate: Vec<T> = beta
                .iter()
                .zip(&step)
                .map(|(&b, &d)| {
                    let v = b + t * d;
                    if v.abs() > cap {
                        hit_cap = true;
                        cap.copysign(v)
                    } else {
                        v
                    }
                })
                .collect();
            let cand_ll = logistic_loglik(cols, y_is_one, &candidate);
            if cand_ll >= ll {
                accepted = Some((candidate, cand_ll, hit_cap));
                break;
            }
            t = t / T::lit(2.0);
        }
        match accepted {
            Some((b, new_ll, hit_cap)) => {
                let stalled = b == beta;
                beta = b;
                ll = new_ll;
                trace.push(ll);
                grad = logistic_gradient(cols, y_is_one, &beta);
                clamped |= hit_cap;
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    if !converged && grad.iter().fold(T::zero(), |a, g| a.max(g.abs())) < tol {
        converged = true;
    }
    LogisticFit {
        beta,
        loglik: ll,
        gradient: grad,
        trace,
        iterations,
        converged: converged && !clamped,
        clamped,
    }
}

/// Logistic-CPD fit of a binary node; outcome `1` has probability
/// `sigmoid(b_0 + sum_j b_j X_j)` with parents entering at their raw values.
pub fn fit_binary<T: Scalar>(
    ds: &Dataset<T>,
    node: usize,
    parents: &[usize],
    config: &ScoringConfig,
) -> Result<FittedLocal<T>> {
    if node < ds.column_count() && ds.kind(node) != ColumnKind::Binary {
        return Err(Error::Usage(format!("node {node} is not binary")));
    }
    let sorted = check_family(ds, node, parents)?;
    let cols = design(ds, &sorted);
    let y: Vec<bool> = ds.col(node).iter().map(|&v| v == T::one()).collect();
    let fit = logistic_mle(&cols, &y, config);
    Ok(FittedLocal {
        node,
        param_count: sorted.len() + 1,
        parents: sorted,
        intercept: fit.beta[0],
        coefficients: fit.beta[1..].to_vec(),
        residual_scale: None,
        loglik: fit.loglik,
        converged: fit.converged,
        iterations: fit.iterations,
    })
}

/// Dispatches on the column kind.
pub fn fit_local<T: Scalar>(
    ds: &Dataset<T>,
    node: usize,
    parents: &[usize],
    config: &ScoringConfig,
) -> Result<FittedLocal<T>> {
    if node >= ds.column_count() {
        return Err(Error::Usage(format!("node {node} out of range")));
    }
    let res = match ds.kind(node) {
        ColumnKind::Continuous => fit_continuous(ds, node, parents, config),
        ColumnKind::Binary => fit_binary(ds, node, parents, config),
    };
    res.map_err(|e| Error::Node {
        node,
        name: ds.schema()[node].name.clone(),
        source: Box::new(e),
    })
}

/// Uncached BIC of `dag` on `ds` with the default configuration.
pub fn bic_score<T: Scalar>(ds: &Dataset<T>, dag: &Dag) -> Result<ScoredDag<T>> {
    Scorer::uncached(ds, ScoringConfig::default()).score(dag)
}

type CacheKey = (usize, Vec<usize>);

/// Scores DAGs against one dataset, optionally memoizing local fits by
/// `(node, sorted parent set)`. Safe to share across threads.
pub struct Scorer<'a, T> {
    ds: &'a Dataset<T>,
    config: ScoringConfig,
    cache: Option<DashMap<CacheKey, Arc<FittedLocal<T>>>>,
}

impl<'a, T: Scalar> Scorer<'a, T> {
    pub fn new(ds: &'a Dataset<T>, config: ScoringConfig) -> Self {
        Scorer {
            ds,
            config,
            cache: Some(DashMap::new()),
        }
    }

    pub fn uncached(ds: &'a Dataset<T>, config: ScoringConfig) -> Self {
        Scorer {
            ds,
            config,
            cache: None,
        }
    }

    pub fn dataset(&self) -> &Dataset<T> {
        self.ds
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.config
    }

    pub fn cached_families(&self) -> usize {
        self.cache.as_ref().map_or(0, DashMap::len)
    }

    pub fn local(&self, node: usize, parents: &[usize]) -> Result<Arc<FittedLocal<T>>> {
        let Some(cache) = &self.cache else {
            return fit_local(self.ds, node, parents, &self.config).map(Arc::new);
        };
        let mut key_parents = parents.to_vec();
        key_parents.sort_unstable();
        let key = (node, key_parents);
        if let Some(hit) = cache.get(&key) {
            return Ok(Arc::clone(&hit));
        }
        // fits are deterministic, so a racing duplicate insert stores an identical value
        let fit = Arc::new(fit_local(self.ds, node, &key.1, &self.config)?);
        cache.insert(key, Arc::clone(&fit));
        Ok(fit)
    }

    fn check_dag(&self, dag: &Dag) -> Result<()> {
        if dag.node_count() != self.ds.column_count() {
            return Err(Error::Usage(format!(
                "graph has {} nodes but the dataset has {} columns",
                dag.node_count(),
                self.ds.column_count()
            )));
        }
        Ok(())
    }

    /// BIC only; sums local terms in node order.
    pub fn bic(&self, dag: &Dag) -> Result<T> {
        self.check_dag(dag)?;
        let mut total = T::zero();
        for node in 0..dag.node_count() {
            total = total + self.local(node, &dag.parents(node))?.loglik;
        }
        Ok(total - bic_penalty(self.ds.rows(), dag.edge_count() + dag.node_count()))
    }

    pub fn score(&self, dag: &Dag) -> Result<ScoredDag<T>> {
        self.check_dag(dag)?;
        let locals = (0..dag.node_count())
            .map(|node| self.local(node, &dag.parents(node)).map(|f| (*f).clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut total = T::zero();
        for l in &locals {
            total = total + l.loglik;
        }
        let bic = total - bic_penalty(self.ds.rows(), dag.edge_count() + dag.node_count());
        Ok(ScoredDag {
            dag: dag.clone(),
            bic,
            locals,
        })
    }
}
