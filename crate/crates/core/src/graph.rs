//! DAGs over column indices, undirected skeletons, and exhaustive enumeration
//! of both the full DAG space and the acyclic orientations of a skeleton.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count accepted by [`enumerate_dags`]. There are 3,781,503
/// labeled DAGs on 6 nodes; 7 nodes already has about 1.1e9.
pub const MAX_ENUMERATION_NODES: usize = 6;

/// Directed acyclic graph on nodes `0..node_count`.
///
/// Edges `(i, j)` mean `i -> j` and are kept sorted, so two `Dag`s compare
/// equal exactly when their edge sets are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dag {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Dag {
    pub fn empty(node_count: usize) -> Self {
        Dag {
            node_count,
            edges: Vec::new(),
        }
    }

    /// Builds a DAG, rejecting out-of-range indices, self loops, duplicates
    /// and directed cycles.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::Usage(format!(
                    "edge ({i}, {j}) out of range for {node_count} nodes"
                )));
            }
            if i == j {
                return Err(Error::Structural(format!("self loop on node {i}")));
            }
            if !set.insert((i, j)) {
                return Err(Error::Structural(format!("duplicate edge ({i}, {j})")));
            }
        }
        let dag = Dag {
            node_count,
            edges: set.into_iter().collect(),
        };
        dag.topological_order()?;
        Ok(dag)
    }

    /// Unchecked constructor for enumerators that maintain acyclicity
    /// themselves.
    fn from_sorted_unchecked(node_count: usize, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        Dag { node_count, edges }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    /// Sorted parent indices of `node`.
    pub fn parents(&self, node: usize) -> Vec<usize> {
        // edges are sorted by source, so the result comes out sorted
        self.edges
            .iter()
            .filter(|&&(_, j)| j == node)
            .map(|&(i, _)| i)
            .collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(i, _)| i == node)
            .map(|&(_, j)| j)
            .collect()
    }

    /// Kahn's algorithm, always taking the lowest-index available root.
    ///
    /// Fails with [`Error::Structural`] if the edge set contains a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let p = self.node_count;
        let mut indegree = vec![0usize; p];
        let mut children = vec![Vec::new(); p];
        for &(i, j) in &self.edges {
            indegree[j] += 1;
            children[i].push(j);
        }
        let mut ready: BTreeSet<usize> = (0..p).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != p {
            return Err(Error::Structural(format!(
                "directed cycle among nodes {:?}",
                (0..p).filter(|&v| indegree[v] > 0).collect::<Vec<_>>()
            )));
        }
        Ok(order)
    }

    pub fn skeleton(&self) -> Skeleton {
        skeleton_of(self)
    }

    pub fn to_json(&self, names: &[String]) -> Result<GraphJson> {
        check_names(self.node_count, names)?;
        Ok(GraphJson {
            nodes: names.to_vec(),
            edges: self
                .edges
                .iter()
                .map(|&(i, j)| [names[i].clone(), names[j].clone()])
                .collect(),
        })
    }

    /// Resolves a graph JSON document against the column names of a schema.
    /// The node list must equal `names` in order.
    pub fn from_json(json: &GraphJson, names: &[String]) -> Result<Self> {
        let index = json.resolve(names)?;
        Dag::new(names.len(), index)
    }

    pub fn to_dot(&self, names: &[String]) -> Result<String> {
        check_names(self.node_count, names)?;
        let mut out = String::from("digraph G {\n");
        for n in names {
            let _ = writeln!(out, "  \"{}\";", dot_escape(n));
        }
        for &(i, j) in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\";",
                dot_escape(&names[i]),
                dot_escape(&names[j])
            );
        }
        out.push_str("}\n");
        Ok(out)
    }
}

/// Undirected graph; each edge is stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Skeleton {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Skeleton {
    pub fn empty(node_count: usize) -> Self {
        Skeleton {
            node_count,
            edges: Vec::new(),
        }
    }

    pub fn complete(node_count: usize) -> Self {
        let edges = (0..node_count)
            .flat_map(|i| (i + 1..node_count).map(move |j| (i, j)))
            .collect();
        Skeleton { node_count, edges }
    }

    /// Builds a skeleton from unordered pairs in either orientation.
    /// Duplicates (including `{a,b}` given as both `(a,b)` and `(b,a)`) collapse.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::Usage(format!(
                    "edge {{{a}, {b}}} out of range for {node_count} nodes"
                )));
            }
            if a == b {
                return Err(Error::Structural(format!("self loop on node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Skeleton {
            node_count,
            edges: set.into_iter().collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Returns whether the edge was present.
    pub fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        match self.edges.binary_search(&(a.min(b), a.max(b))) {
            Ok(pos) => {
                self.edges.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    /// Sorted neighbors of `node`.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == node {
                    Some(b)
                } else if b == node {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn to_json(&self, names: &[String]) -> Result<GraphJson> {
        check_names(self.node_count, names)?;
        Ok(GraphJson {
            nodes: names.to_vec(),
            edges: self
                .edges
                .iter()
                .map(|&(i, j)| [names[i].clone(), names[j].clone()])
                .collect(),
        })
    }

    /// Reads a skeleton from graph JSON; edge direction, if any, is dropped.
    pub fn from_json(json: &GraphJson, names: &[String]) -> Result<Self> {
        let index = json.resolve(names)?;
        Skeleton::new(names.len(), index)
    }

    pub fn to_dot(&self, names: &[String]) -> Result<String> {
        check_names(self.node_count, names)?;
        let mut out = String::from("graph G {\n");
        for n in names {
            let _ = writeln!(out, "  \"{}\";", dot_escape(n));
        }
        for &(i, j) in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\";",
                dot_escape(&names[i]),
                dot_escape(&names[j])
            );
        }
        out.push_str("}\n");
        Ok(out)
    }
}

/// On-disk graph format: `{"nodes": [...], "edges": [["parent", "child"], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

impl GraphJson {
    fn resolve(&self, names: &[String]) -> Result<Vec<(usize, usize)>> {
        if self.nodes != names {
            return Err(Error::Data(format!(
                "graph nodes {:?} do not match schema columns {:?}",
                self.nodes, names
            )));
        }
        let lookup: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        self.edges
            .iter()
            .map(|[a, b]| {
                let find = |n: &String| {
                    lookup
                        .get(n.as_str())
                        .copied()
                        .ok_or_else(|| Error::Data(format!("unknown node `{n}` in graph edges")))
                };
                Ok((find(a)?, find(b)?))
            })
            .collect()
    }
}

fn check_names(node_count: usize, names: &[String]) -> Result<()> {
    if names.len() != node_count {
        return Err(Error::Usage(format!(
            "{} names given for a graph on {node_count} nodes",
            names.len()
        )));
    }
    Ok(())
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn topological_order(g: &Dag) -> Result<Vec<usize>> {
    g.topological_order()
}

pub fn skeleton_of(g: &Dag) -> Skeleton {
    let edges: BTreeSet<(usize, usize)> = g.edges.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect();
    Skeleton {
        node_count: g.node_count,
        edges: edges.into_iter().collect(),
    }
}

pub fn structures_equal(a: &Dag, b: &Dag) -> Result<bool> {
    if a.node_count != b.node_count {
        return Err(Error::Usage(format!(
            "comparing DAGs on {} and {} nodes",
            a.node_count, b.node_count
        )));
    }
    Ok(a.edges == b.edges)
}

pub fn skeletons_equal(a: &Skeleton, b: &Skeleton) -> Result<bool> {
    if a.node_count != b.node_count {
        return Err(Error::Usage(format!(
            "comparing skeletons on {} and {} nodes",
            a.node_count, b.node_count
        )));
    }
    Ok(a.edges == b.edges)
}

/// Precision, recall and F1 of the estimated skeleton's edges against the
/// truth. Two empty skeletons score F1 = 1.
pub fn skeleton_f1(truth: &Skeleton, estimate: &Skeleton) -> f64 {
    let tp = estimate
        .edges
        .iter()
        .filter(|&&(a, b)| truth.has_edge(a, b))
        .count() as f64;
    let denom = (truth.edge_count() + estimate.edge_count()) as f64;
    if denom == 0.0 {
        1.0
    } else {
        2.0 * tp / denom
    }
}

/// Streams every labeled DAG on `p` nodes exactly once.
///
/// The ordered pairs `(i, j)`, `i != j`, are laid out lexicographically and
/// pair `k` is bit `k` of a counter; DAGs come out in increasing counter value
/// (starting with the empty graph), skipping subsets with a cycle.
pub fn enumerate_dags(p: usize) -> Result<DagEnumerator> {
    if p == 0 {
        return Err(Error::Usage("enumerate_dags needs at least one node".into()));
    }
    if p > MAX_ENUMERATION_NODES {
        return Err(Error::Capability(format!(
            "exhaustive DAG enumeration supports at most {MAX_ENUMERATION_NODES} nodes, got {p}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let levels = pairs.iter().map(|&e| [None, Some(e)]).collect();
    Ok(DagEnumerator {
        inner: Backtracker::new(p, levels),
    })
}

/// Streams every acyclic orientation of `s`, i.e. every DAG whose skeleton is
/// `s`. Edge `k` (in canonical order) is bit `k` of a counter: 0 orients
/// `min -> max`, 1 orients `max -> min`.
pub fn enumerate_orientations(s: &Skeleton) -> OrientationEnumerator {
    let levels = s
        .edges
        .iter()
        .map(|&(a, b)| [Some((a, b)), Some((b, a))])
        .collect();
    OrientationEnumerator {
        inner: Backtracker::new(s.node_count, levels),
    }
}

pub struct DagEnumerator {
    inner: Backtracker,
}

impl Iterator for DagEnumerator {
    type Item = Dag;
    fn next(&mut self) -> Option<Dag> {
        self.inner.next_dag()
    }
}

pub struct OrientationEnumerator {
    inner: Backtracker,
}

impl Iterator for OrientationEnumerator {
    type Item = Dag;
    fn next(&mut self) -> Option<Dag> {
        self.inner.next_dag()
    }
}

/// Depth-first walk over binary choices, one level per bit from the most
/// significant down, pruning any choice that closes a directed cycle. Each
/// level must have at least one option that never closes a cycle given an
/// acyclic prefix: "no edge" for DAG enumeration, and one of the two
/// directions of an undirected edge (both directions cycling would need a
/// cycle already).
struct Backtracker {
    node_count: usize,
    // levels[k] is bit k; the walk visits bit len-1 first
    levels: Vec<[Option<(usize, usize)>; 2]>,
    choice: Vec<u8>,
    adjacency: Vec<bool>,
    started: bool,
    done: bool,
}

impl Backtracker {
    fn new(node_count: usize, levels: Vec<[Option<(usize, usize)>; 2]>) -> Self {
        let n = levels.len();
        Backtracker {
            node_count,
            levels,
            choice: vec![0; n],
            adjacency: vec![false; node_count * node_count],
            started: false,
            done: false,
        }
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let p = self.node_count;
        let mut seen = vec![false; p];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for (w, s) in seen.iter_mut().enumerate() {
                if self.adjacency[v * p + w] && !*s {
                    *s = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    fn feasible(&self, edge: Option<(usize, usize)>) -> bool {
        match edge {
            None => true,
            Some((i, j)) => !self.reaches(j, i),
        }
    }

    fn set(&mut self, edge: Option<(usize, usize)>, present: bool) {
        if let Some((i, j)) = edge {
            self.adjacency[i * self.node_count + j] = present;
        }
    }

    /// Assigns the first feasible option to every level below `top`
    /// (exclusive), from the most significant down.
    fn fill_below(&mut self, top: usize) {
        for k in (0..top).rev() {
            let opt = if self.feasible(self.levels[k][0]) { 0 } else { 1 };
            self.choice[k] = opt;
            self.set(self.levels[k][opt as usize], true);
        }
    }

    fn advance(&mut self) -> bool {
        // walk upward from the least significant level
        for k in 0..self.levels.len() {
            let cur = self.choice[k] as usize;
            self.set(self.levels[k][cur], false);
            if cur == 0 && self.feasible(self.levels[k][1]) {
                self.choice[k] = 1;
                self.set(self.levels[k][1], true);
                self.fill_below(k);
                return true;
            }
        }
        false
    }

    fn current(&self) -> Dag {
        let edges = self
            .levels
            .iter()
            .zip(&self.choice)
            .filter_map(|(opts, &c)| opts[c as usize])
            .collect();
        Dag::from_sorted_unchecked(self.node_count, edges)
    }

    fn next_dag(&mut self) -> Option<Dag> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            let n = self.levels.len();
            self.fill_below(n);
            return Some(self.current());
        }
        if self.advance() {
            Some(self.current())
        } else {
            self.done = true;
            None
        }
    }
}
