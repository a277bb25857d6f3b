//! Householder QR least squares for tall, narrow design matrices.

use crate::scalar::Scalar;

/// Solution of `min ||X b - y||` (optionally row-weighted).
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    pub coefficients: Vec<T>,
    /// The design was numerically rank deficient and the ridge-augmented
    /// system was solved instead.
    pub ridged: bool,
}

/// Least squares on a column-major design (`columns[k][m]`).
///
/// If `R` has a diagonal entry below `sqrt(eps) * 1e-2` times the largest,
/// the problem is re-solved with `ridge * I` appended to the design, which is
/// always full rank for `ridge > 0`.
pub fn least_squares<T: Scalar>(columns: &[Vec<T>], y: &[T], ridge: T) -> LeastSquares<T> {
    let k = columns.len();
    let m = y.len();
    debug_assert!(columns.iter().all(|c| c.len() == m));
    let mut a: Vec<Vec<T>> = columns.to_vec();
    let mut rhs = y.to_vec();
    if let Some(coef) = qr_solve(&mut a, &mut rhs) {
        return LeastSquares {
            coefficients: coef,
            ridged: false,
        };
    }
    let s = ridge.sqrt();
    let mut a: Vec<Vec<T>> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut col = c.clone();
            col.extend((0..k).map(|i| if i == j { s } else { T::zero() }));
            col
        })
        .collect();
    let mut rhs = y.to_vec();
    rhs.extend(std::iter::repeat_n(T::zero(), k));
    let coef = qr_solve(&mut a, &mut rhs).unwrap_or_else(|| vec![T::zero(); k]);
    LeastSquares {
        coefficients: coef,
        ridged: true,
    }
}

/// Weighted least squares: minimizes `sum_m w_m (x_m . b - y_m)^2`.
pub fn weighted_least_squares<T: Scalar>(columns: &[Vec<T>], y: &[T], weights: &[T], ridge: T) -> LeastSquares<T> {
    let sw: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
    let scaled: Vec<Vec<T>> = columns
        .iter()
        .map(|c| c.iter().zip(&sw).map(|(&x, &s)| x * s).collect())
        .collect();
    let ys: Vec<T> = y.iter().zip(&sw).map(|(&v, &s)| v * s).collect();
    least_squares(&scaled, &ys, ridge)
}

/// In-place Householder triangularization followed by back substitution.
/// Returns `None` when `R` is numerically singular.
fn qr_solve<T: Scalar>(a: &mut [Vec<T>], rhs: &mut [T]) -> Option<Vec<T>> {
    let k = a.len();
    let m = rhs.len();
    if k == 0 {
        return Some(Vec::new());
    }
    if m < k {
        return None;
    }
    let mut diag = vec![T::zero(); k];
    for j in 0..k {
        let norm = a[j][j..].iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            return None;
        }
        let alpha = if a[j][j] > T::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in a[j][j..]
        a[j][j] = a[j][j] - alpha;
        let vnorm2 = a[j][j..].iter().map(|&v| v * v).sum::<T>();
        diag[j] = alpha;
        if vnorm2 == T::zero() {
            continue;
        }
        let (head, tail) = a.split_at_mut(j + 1);
        let v = &head[j][j..];
        for col in tail.iter_mut() {
            let dot: T = v.iter().zip(&col[j..]).map(|(&x, &y)| x * y).sum();
            let f = (dot + dot) / vnorm2;
            for (c, &x) in col[j..].iter_mut().zip(v) {
                *c = *c - f * x;
            }
        }
        let dot: T = v.iter().zip(&rhs[j..]).map(|(&x, &y)| x * y).sum();
        let f = (dot + dot) / vnorm2;
        for (c, &x) in rhs[j..].iter_mut().zip(v) {
            *c = *c - f * x;
        }
    }
    let scale = diag.iter().fold(T::zero(), |acc, d| acc.max(d.abs()));
    let tol = scale * T::epsilon().sqrt() * T::lit(1e-2);
    if diag.iter().any(|d| d.abs() <= tol) {
        return None;
    }
    let mut b = vec![T::zero(); k];
    for j in (0..k).rev() {
        let mut s = rhs[j];
        for (l, bl) in b.iter().enumerate().skip(j + 1) {
            s = s - a[l][j] * *bl;
        }
        b[j] = s / diag[j];
    }
    Some(b)
}
