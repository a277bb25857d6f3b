//! Comparison baseline: discretize continuous columns at their mean, then run
//! the PC adjacency search with G^2 conditional-independence tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::{ColumnKind, ColumnSchema, Dataset};
use crate::error::{Error, Result};
use crate::graph::Skeleton;
use crate::scalar::Scalar;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct CITestResult<T> {
    pub pair: (usize, usize),
    pub conditioning_set: Vec<usize>,
    /// G^2 statistic summed over strata.
    pub statistic: T,
    pub dof: usize,
    pub p_value: T,
    pub independent: bool,
    /// No stratum had a non-degenerate 2x2 table, so nothing was tested
    /// (`dof = 0`, `p_value = 1`). PC keeps the edge in that case.
    pub inconclusive: bool,
}

/// Replaces each continuous column by `1` where the value is at most the
/// column mean and `2` elsewhere; binary columns pass through. A constant
/// column maps to all `1`.
pub fn mean_discretize<T: Scalar>(ds: &Dataset<T>) -> Dataset<T> {
    let n = T::from_usize_lossy(ds.rows());
    let two = T::lit(2.0);
    let mut schema = Vec::with_capacity(ds.column_count());
    let mut columns = Vec::with_capacity(ds.column_count());
    for (i, c) in ds.schema().iter().enumerate() {
        let col = ds.col(i);
        match c.kind {
            ColumnKind::Binary => columns.push(col.to_vec()),
            ColumnKind::Continuous => {
                let mean = col.iter().copied().sum::<T>() / n;
                columns.push(col.iter().map(|&v| if v <= mean { T::one() } else { two }).collect());
            }
        }
        schema.push(ColumnSchema::new(c.name.clone(), ColumnKind::Binary));
    }
    Dataset::from_columns(schema, columns).expect("discretized data satisfies the binary domain")
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// G^2 test of `X_i _||_ X_j | X_cond` on all-binary data.
///
/// Each configuration of the conditioning set is a stratum with its own 2x2
/// table. A stratum contributes `(r - 1)(c - 1)` degrees of freedom where
/// `r`, `c` count its non-empty rows and columns, so empty or one-sided strata
/// add nothing. Zero cells contribute zero to the statistic.
pub fn g2_test<T: Scalar>(ds: &Dataset<T>, i: usize, j: usize, cond: &[usize], alpha: f64) -> Result<CITestResult<T>> {
    let p = ds.column_count();
    if i >= p || j >= p || cond.iter().any(|&k| k >= p) {
        return Err(Error::Usage(format!("test indices out of range for {p} columns")));
    }
    if i == j || cond.contains(&i) || cond.contains(&j) {
        return Err(Error::Usage(format!(
            "invalid test {i} vs {j} given {cond:?}"
        )));
    }
    if let Some(k) = (0..p).find(|&k| ds.kind(k) != ColumnKind::Binary && (k == i || k == j || cond.contains(&k))) {
        return Err(Error::Usage(format!(
            "column `{}` is not binary; discretize first",
            ds.schema()[k].name
        )));
    }
    if cond.len() > 20 {
        return Err(Error::Capability(format!("conditioning set of size {} is too large", cond.len())));
    }

    // canonical operand order makes the statistic bitwise symmetric
    let (i, j) = (i.min(j), i.max(j));
    let mut cond = cond.to_vec();
    cond.sort_unstable();

    let strata = 1usize << cond.len();
    let mut counts = vec![[[0u64; 2]; 2]; strata];
    let (xi, xj) = (ds.col(i), ds.col(j));
    for m in 0..ds.rows() {
        let s = cond
            .iter()
            .enumerate()
            .fold(0usize, |acc, (b, &k)| acc | (usize::from(ds.col(k)[m] != T::one()) << b));
        let a = usize::from(xi[m] != T::one());
        let b = usize::from(xj[m] != T::one());
        counts[s][a][b] += 1;
    }

    let mut g2 = 0.0f64;
    let mut dof = 0usize;
    for table in &counts {
        let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let total = rows[0] + rows[1];
        if total == 0 {
            continue;
        }
        let r = rows.iter().filter(|&&v| v > 0).count();
        let c = cols.iter().filter(|&&v| v > 0).count();
        dof += (r - 1) * (c - 1);
        for a in 0..2 {
            for b in 0..2 {
                let obs = table[a][b];
                if obs == 0 {
                    continue;
                }
                let expected = rows[a] as f64 * cols[b] as f64 / total as f64;
                g2 += obs as f64 * (obs as f64 / expected).ln();
            }
        }
    }
    g2 *= 2.0;
    let inconclusive = dof == 0;
    let p_value = if inconclusive { 1.0 } else { chi_square_sf(g2, dof) };
    Ok(CITestResult {
        pair: (i, j),
        conditioning_set: cond,
        statistic: T::lit(g2.max(0.0)),
        dof,
        p_value: T::lit(p_value),
        independent: p_value > alpha,
        inconclusive,
    })
}

/// PC adjacency search starting from the complete graph.
///
/// For `l = 0, 1, ..`, edges `{i, j}` (`i < j`) are visited in lexicographic
/// order; conditioning sets of size `l` are drawn first from the current
/// neighbors of `i` (excluding `j`), then of `j` (excluding `i`), in
/// lexicographic combination order. The first accepted independence removes
/// the edge; neighborhoods are read live, so later tests in the same level see
/// earlier removals. The search stops when no edge has a neighborhood large
/// enough for the next level.
pub fn pc_skeleton<T: Scalar>(ds: &Dataset<T>, alpha: f64) -> Result<Skeleton> {
    Ok(pc_skeleton_traced(ds, alpha)?.0)
}

/// [`pc_skeleton`] together with the independence test that removed each
/// edge, in removal order.
pub fn pc_skeleton_traced<T: Scalar>(ds: &Dataset<T>, alpha: f64) -> Result<(Skeleton, Vec<CITestResult<T>>)> {
    let p = ds.column_count();
    if let Some(c) = ds.schema().iter().find(|c| c.kind != ColumnKind::Binary) {
        return Err(Error::Usage(format!("column `{}` is not binary; discretize first", c.name)));
    }
    let mut skel = Skeleton::complete(p);
    let mut removals = Vec::new();
    let mut level = 0usize;
    loop {
        let mut any_testable = false;
        let edges: Vec<(usize, usize)> = skel.edges().to_vec();
        for (i, j) in edges {
            if !skel.has_edge(i, j) {
                continue;
            }
            'sides: for (x, y) in [(i, j), (j, i)] {
                let pool: Vec<usize> = skel.neighbors(x).into_iter().filter(|&v| v != y).collect();
                if pool.len() < level {
                    continue;
                }
                any_testable = true;
                for subset in combinations(&pool, level) {
                    let res = g2_test(ds, i, j, &subset, alpha)?;
                    if res.independent && !res.inconclusive {
                        skel.remove_edge(i, j);
                        removals.push(res);
                        break 'sides;
                    }
                }
            }
        }
        if !any_testable || level + 3 > p {
            break;
        }
        level += 1;
    }
    Ok((skel, removals))
}

/// `k`-subsets of `items` in lexicographic order of positions.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&q| items[q]).collect());
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] != pos + n - k {
                break;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}
