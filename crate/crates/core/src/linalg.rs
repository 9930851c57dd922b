//! Dense least-squares helpers shared by the CI test and the ridge solver.
//!
//! Rank deficiency is handled by skipping pivots in declaration order during
//! the Cholesky factorization of the Gram matrix, so dropped columns are
//! deterministic for a given column layout.

use crate::error::{Error, Result};
use crate::scalar::{s, Scalar};
use ndarray::{Array1, Array2};

/// Result of regressing target columns on a design with intercept.
#[derive(Debug, Clone)]
pub struct OlsFit<S: Scalar> {
    /// Indices of retained design columns (intercept not included).
    pub kept: Vec<usize>,
    /// Indices of design columns dropped as collinear, in pivot order.
    pub dropped: Vec<usize>,
    /// Residual matrix, one column per target.
    pub residuals: Array2<S>,
}

/// Ordinary least squares of each `targets` column on `design` plus an
/// intercept, returning residuals.
///
/// Collinear design columns are dropped at the Cholesky pivot that exposes
/// them (relative tolerance 1e-10 on the diagonal), always in declaration
/// order.
pub fn residualize<S: Scalar>(design: &Array2<S>, targets: &Array2<S>) -> Result<OlsFit<S>> {
    let n = targets.nrows();
    if design.nrows() != n {
        return Err(Error::Domain("design/target row mismatch".into()));
    }
    let p = design.ncols();
    let m = targets.ncols();

    // Augmented design [1 | design]; Gram and cross products.
    let mut aug = Array2::<S>::ones((n, p + 1));
    aug.slice_mut(ndarray::s![.., 1..]).assign(design);
    let gram = aug.t().dot(&aug);
    let cross = aug.t().dot(targets);

    let total = p + 1;
    let tol = s::<S>(1e-10);
    let mut kept: Vec<usize> = Vec::with_capacity(total);
    let mut dropped: Vec<usize> = Vec::new();
    // Lower-triangular factor restricted to kept pivots.
    let mut low = Array2::<S>::zeros((total, total));

    for j in 0..total {
        let mut d = gram[[j, j]];
        let mut row_j: Vec<S> = Vec::with_capacity(kept.len());
        for (ki, &k) in kept.iter().enumerate() {
            let mut v = gram[[j, k]];
            for pi in 0..ki {
                v -= row_j[pi] * low[[k, pi]];
            }
            v /= low[[k, ki]];
            row_j.push(v);
            d -= v * v;
        }
        if d <= gram[[j, j]] * tol || d <= S::zero() {
            if j > 0 {
                dropped.push(j - 1);
            } else {
                // Intercept collapses only for an empty sample.
                return Err(Error::Domain("degenerate design: zero intercept pivot".into()));
            }
            continue;
        }
        for (pi, v) in row_j.into_iter().enumerate() {
            low[[j, pi]] = v;
        }
        low[[j, kept.len()]] = d.sqrt();
        kept.push(j);
    }

    // Solve L L^T beta = cross (restricted to kept pivots) per target column.
    let r = kept.len();
    let mut beta = Array2::<S>::zeros((r, m));
    for c in 0..m {
        let mut y: Vec<S> = kept.iter().map(|&k| cross[[k, c]]).collect();
        // Forward substitution.
        for i in 0..r {
            let mut v = y[i];
            for k in 0..i {
                v -= low[[kept[i], k]] * y[k];
            }
            y[i] = v / low[[kept[i], i]];
        }
        // Back substitution.
        for i in (0..r).rev() {
            let mut v = y[i];
            for k in i + 1..r {
                v -= low[[kept[k], i]] * y[k];
            }
            y[i] = v / low[[kept[i], i]];
            beta[[i, c]] = y[i];
        }
    }

    let mut residuals = targets.clone();
    for c in 0..m {
        for i in 0..n {
            let mut fitted = S::zero();
            for (ri, &k) in kept.iter().enumerate() {
                fitted += aug[[i, k]] * beta[[ri, c]];
            }
            residuals[[i, c]] -= fitted;
        }
    }

    // Report design-column indexing (intercept excluded).
    let kept_design: Vec<usize> = kept.iter().filter(|&&k| k > 0).map(|&k| k - 1).collect();
    Ok(OlsFit { kept: kept_design, dropped, residuals })
}

/// Cholesky factor (lower triangular) of a symmetric positive definite matrix.
pub fn cholesky<S: Scalar>(a: &Array2<S>) -> Result<Array2<S>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Domain("cholesky requires a square matrix".into()));
    }
    let mut low = Array2::<S>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= low[[j, k]] * low[[j, k]];
        }
        if d <= S::zero() {
            return Err(Error::Domain(format!("matrix not positive definite at pivot {j}")));
        }
        low[[j, j]] = d.sqrt();
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= low[[i, k]] * low[[j, k]];
            }
            low[[i, j]] = v / low[[j, j]];
        }
    }
    Ok(low)
}

/// Solves `A x = b` for SPD `A` given its Cholesky factor.
pub fn cholesky_solve<S: Scalar>(low: &Array2<S>, b: &Array1<S>) -> Array1<S> {
    let n = low.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v -= low[[i, k]] * y[k];
        }
        y[i] = v / low[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in i + 1..n {
            v -= low[[k, i]] * y[k];
        }
        y[i] = v / low[[i, i]];
    }
    y
}

/// Inverse of an SPD matrix via its Cholesky factorization.
pub fn spd_inverse<S: Scalar>(a: &Array2<S>) -> Result<Array2<S>> {
    let n = a.nrows();
    let low = cholesky(a)?;
    let mut inv = Array2::<S>::zeros((n, n));
    let mut e = Array1::<S>::zeros(n);
    for c in 0..n {
        e.fill(S::zero());
        e[c] = S::one();
        let x = cholesky_solve(&low, &e);
        inv.column_mut(c).assign(&x);
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn residualize_removes_linear_component() {
        // y = 2 + 3 z exactly: residuals vanish.
        let n = 50;
        let design = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 * 0.1);
        let targets = Array2::from_shape_fn((n, 1), |(i, _)| 2.0 + 3.0 * (i as f64 * 0.1));
        let fit = residualize(&design, &targets).unwrap();
        assert!(fit.dropped.is_empty());
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn duplicate_column_dropped_in_order() {
        let n = 40;
        let z = Array1::from_shape_fn(n, |i| (i as f64 * 0.37).sin());
        let mut design = Array2::<f64>::zeros((n, 3));
        design.column_mut(0).assign(&z);
        design.column_mut(1).assign(&z); // exact duplicate; must be the one dropped
        design.column_mut(2).assign(&Array1::from_shape_fn(n, |i| (i as f64 * 0.11).cos()));
        let targets = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let fit = residualize(&design, &targets).unwrap();
        assert_eq!(fit.dropped, vec![1]);
        assert_eq!(fit.kept, vec![0, 2]);
    }

    #[test]
    fn onehot_block_overlaps_intercept() {
        // Two one-hot columns summing to the intercept: the later one drops.
        let n = 10;
        let design = Array2::from_shape_fn((n, 2), |(i, j)| {
            if (i < 5) == (j == 0) {
                1.0
            } else {
                0.0
            }
        });
        let targets = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 * 0.5);
        let fit = residualize(&design, &targets).unwrap();
        assert_eq!(fit.dropped, vec![1]);
    }

    #[test]
    fn spd_inverse_matches_identity() {
        let a = array![[4.0, 1.0, 0.2], [1.0, 3.0, 0.5], [0.2, 0.5, 2.0]];
        let inv = spd_inverse(&a).unwrap();
        let prod = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expected: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_err());
    }
}
