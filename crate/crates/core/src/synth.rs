//! Seeded generator for the hybrid model: random DAGs, random parameters and
//! ancestral sampling.
//!
//! Continuous nodes: `X_i = b_i0 + sum_j b_ij X_j + e_i` with independent
//! non-Gaussian `e_i`. Binary nodes: `P(X_i = 1) = sigmoid(b_i0 + sum_j b_ij X_j)`,
//! otherwise `X_i = 2`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::Scalar;
use crate::scoring::sigmoid;

/// Counter-based generator used throughout; seed plus stream id fully
/// determine the sequence.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }

    /// Independent stream for replicate `index`. The result does not depend
    /// on which other replicates were drawn, or in what order.
    pub fn replicate_rng(self, index: u64) -> SimRng {
        let mut rng = SimRng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    /// Density `exp(-|e| / scale) / (2 scale)`; variance `2 scale^2`.
    #[default]
    Laplace,
    /// Uniform on `[-scale, scale]`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub family: NoiseFamily,
    pub scale: T,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn new(family: NoiseFamily, scale: T) -> Result<Self> {
        if !(scale.is_finite() && scale > T::zero()) {
            return Err(Error::Usage(format!("noise scale must be positive, got {scale}")));
        }
        Ok(NoiseSpec { family, scale })
    }

    pub fn laplace(scale: T) -> Result<Self> {
        Self::new(NoiseFamily::Laplace, scale)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let s = self.scale.as_f64();
        let v = match self.family {
            NoiseFamily::Laplace => {
                // inverse CDF on an open-interval uniform
                let u: f64 = loop {
                    let u: f64 = rng.gen();
                    if u > 0.0 {
                        break u;
                    }
                };
                if u < 0.5 {
                    s * (2.0 * u).ln()
                } else {
                    -s * (2.0 * (1.0 - u)).ln()
                }
            }
            NoiseFamily::Uniform => s * (2.0 * rng.gen::<f64>() - 1.0),
        };
        T::lit(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InterceptPolicy {
    #[default]
    Zero,
    /// Each `b_i0` uniform on `[-1, 1]`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOptions<T> {
    pub intercepts: InterceptPolicy,
    pub noise: NoiseSpec<T>,
}

impl<T: Scalar> Default for ModelOptions<T> {
    fn default() -> Self {
        ModelOptions {
            intercepts: InterceptPolicy::Zero,
            noise: NoiseSpec {
                family: NoiseFamily::Laplace,
                scale: T::one(),
            },
        }
    }
}

/// A DAG with parameters for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel<T> {
    dag: Dag,
    schema: Vec<ColumnSchema>,
    /// keyed by the DAG edge `(parent, child)`, i.e. `b_{child, parent}`
    weights: BTreeMap<(usize, usize), T>,
    intercepts: Vec<T>,
    noise: Vec<Option<NoiseSpec<T>>>,
}

impl<T: Scalar> GenerativeModel<T> {
    /// `noise[i]` must be `Some` exactly for continuous nodes and `weights`
    /// must be keyed by exactly the edges of `dag`.
    pub fn new(
        dag: Dag,
        schema: Vec<ColumnSchema>,
        weights: BTreeMap<(usize, usize), T>,
        intercepts: Vec<T>,
        noise: Vec<Option<NoiseSpec<T>>>,
    ) -> Result<Self> {
        let p = dag.node_count();
        if schema.len() != p || intercepts.len() != p || noise.len() != p {
            return Err(Error::Usage(format!(
                "model for {p} nodes needs {p} schema entries, intercepts and noise specs"
            )));
        }
        let keys: Vec<(usize, usize)> = weights.keys().copied().collect();
        if keys != dag.edges() {
            return Err(Error::Usage(format!(
                "weights keyed by {keys:?} but the DAG has edges {:?}",
                dag.edges()
            )));
        }
        for (i, (c, n)) in schema.iter().zip(&noise).enumerate() {
            match (c.kind, n) {
                (ColumnKind::Continuous, None) => {
                    return Err(Error::Usage(format!("continuous node {i} has no noise spec")))
                }
                (ColumnKind::Binary, Some(_)) => {
                    return Err(Error::Usage(format!("binary node {i} has a noise spec")))
                }
                _ => {}
            }
        }
        Ok(GenerativeModel {
            dag,
            schema,
            weights,
            intercepts,
            noise,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    /// `b_{child, parent}` for the edge `parent -> child`.
    pub fn weight(&self, parent: usize, child: usize) -> Option<T> {
        self.weights.get(&(parent, child)).copied()
    }

    pub fn weights(&self) -> &BTreeMap<(usize, usize), T> {
        &self.weights
    }

    pub fn intercepts(&self) -> &[T] {
        &self.intercepts
    }

    pub fn noise(&self, node: usize) -> Option<&NoiseSpec<T>> {
        self.noise[node].as_ref()
    }

    pub fn continuous_count(&self) -> usize {
        self.schema.iter().filter(|c| c.kind == ColumnKind::Continuous).count()
    }

    fn linear_predictor(&self, node: usize, parents: &[usize], row: &[T]) -> T {
        parents.iter().fold(self.intercepts[node], |acc, &j| {
            acc + self.weights[&(j, node)] * row[j]
        })
    }
}

/// Random DAG on `p` nodes.
///
/// Unordered pairs are visited once each in a shuffled order; with
/// probability `edge_prob` an edge is added in a random direction, reversed if
/// that direction would close a cycle (the reverse never does).
pub fn random_dag<R: Rng + ?Sized>(p: usize, edge_prob: f64, rng: &mut R) -> Result<Dag> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Usage(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(rng);
    let mut reach = vec![vec![false; p]; p];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    let mut edges = Vec::new();
    for (a, b) in pairs {
        let add = rng.gen_bool(edge_prob);
        let flip = rng.gen_bool(0.5);
        if !add {
            continue;
        }
        let (mut from, mut to) = if flip { (b, a) } else { (a, b) };
        if reach[to][from] {
            std::mem::swap(&mut from, &mut to);
        }
        edges.push((from, to));
        // transitive closure update: everything reaching `from` now reaches
        // everything `to` reaches
        let targets: Vec<usize> = (0..p).filter(|&w| reach[to][w]).collect();
        for row in reach.iter_mut().filter(|row| row[from]) {
            for &w in &targets {
                row[w] = true;
            }
        }
    }
    Dag::new(p, edges)
}

/// Random parameters for `dag` with `c` continuous nodes (chosen uniformly at
/// random) and default options: zero intercepts, Laplace(1) noise.
pub fn random_model<T: Scalar, R: Rng + ?Sized>(dag: &Dag, c: usize, rng: &mut R) -> Result<GenerativeModel<T>> {
    random_model_with(dag, c, &ModelOptions::default(), rng)
}

/// Each weight has magnitude uniform on `[0.5, 1]` and a fair-coin sign.
pub fn random_model_with<T: Scalar, R: Rng + ?Sized>(
    dag: &Dag,
    c: usize,
    options: &ModelOptions<T>,
    rng: &mut R,
) -> Result<GenerativeModel<T>> {
    let p = dag.node_count();
    if c > p {
        return Err(Error::Usage(format!("{c} continuous variables requested for {p} nodes")));
    }
    let mut labels: Vec<usize> = (0..p).collect();
    labels.shuffle(rng);
    let mut kinds = vec![ColumnKind::Binary; p];
    for &node in &labels[..c] {
        kinds[node] = ColumnKind::Continuous;
    }
    let schema: Vec<ColumnSchema> = kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| ColumnSchema::new(format!("X{}", i + 1), k))
        .collect();
    let weights = dag
        .edges()
        .iter()
        .map(|&e| {
            let magnitude = rng.gen_range(0.5..=1.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (e, T::lit(sign * magnitude))
        })
        .collect();
    let intercepts = (0..p)
        .map(|_| match options.intercepts {
            InterceptPolicy::Zero => T::zero(),
            InterceptPolicy::Uniform => T::lit(rng.gen_range(-1.0..=1.0)),
        })
        .collect();
    let noise = kinds
        .iter()
        .map(|k| (*k == ColumnKind::Continuous).then_some(options.noise))
        .collect();
    GenerativeModel::new(dag.clone(), schema, weights, intercepts, noise)
}

/// Draws `n` rows by ancestral sampling in topological order.
pub fn sample<T: Scalar, R: Rng + ?Sized>(model: &GenerativeModel<T>, n: usize, rng: &mut R) -> Result<Dataset<T>> {
    ancestral(model, n, |node, _, rng: &mut R| model.noise[node].as_ref().map(|s| s.draw(rng)), rng)
}

/// Ancestral sampling with the continuous noise supplied explicitly:
/// `noise[i][m]` is `e_i` for row `m` (ignored for binary nodes, which still
/// draw from `rng`).
pub fn sample_with_noise<T: Scalar, R: Rng + ?Sized>(
    model: &GenerativeModel<T>,
    noise: &[Vec<T>],
    rng: &mut R,
) -> Result<Dataset<T>> {
    let p = model.dag.node_count();
    if noise.len() != p {
        return Err(Error::Usage(format!("{} noise columns for {p} nodes", noise.len())));
    }
    let n = noise.iter().map(Vec::len).max().unwrap_or(0);
    if noise.iter().enumerate().any(|(i, c)| model.noise[i].is_some() && c.len() != n) {
        return Err(Error::Usage("noise columns differ in length".into()));
    }
    ancestral(model, n, |node, m, _: &mut R| model.noise[node].map(|_| noise[node][m]), rng)
}

fn ancestral<T: Scalar, R: Rng + ?Sized>(
    model: &GenerativeModel<T>,
    n: usize,
    mut noise: impl FnMut(usize, usize, &mut R) -> Option<T>,
    rng: &mut R,
) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::Usage("sample size must be at least 1".into()));
    }
    let p = model.dag.node_count();
    let order = model.dag.topological_order()?;
    let parents: Vec<Vec<usize>> = (0..p).map(|i| model.dag.parents(i)).collect();
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut row = vec![T::zero(); p];
    let two = T::lit(2.0);
    for m in 0..n {
        for &node in &order {
            let eta = model.linear_predictor(node, &parents[node], &row);
            row[node] = match model.schema[node].kind {
                ColumnKind::Continuous => eta + noise(node, m, rng).expect("continuous node has noise"),
                ColumnKind::Binary => {
                    let u: f64 = rng.gen();
                    if u < sigmoid(eta).as_f64() {
                        T::one()
                    } else {
                        two
                    }
                }
            };
        }
        for (col, &v) in columns.iter_mut().zip(&row) {
            col.push(v);
        }
    }
    Dataset::from_columns(model.schema.clone(), columns)
}
