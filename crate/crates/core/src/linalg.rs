//! Thin wrappers around nalgebra for the dense factorizations used by the
//! spectral initializer and the M-steps.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{DdeError, Result};

pub fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `a = u diag(s) vt` with singular values sorted descending.
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub vt: Array2<f64>,
}

pub fn svd(a: &Array2<f64>) -> Result<Svd> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(DdeError::Numeric("SVD input has non-finite entries".into()));
    }
    let m = to_dmatrix(a);
    let svd = m.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| DdeError::Numeric("SVD did not return U".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| DdeError::Numeric("SVD did not return V".into()))?;
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let u = Array2::from_shape_fn((u.nrows(), order.len()), |(i, k)| u[(i, order[k])]);
    let vt = Array2::from_shape_fn((order.len(), vt.ncols()), |(k, j)| vt[(order[k], j)]);
    let s = order.iter().map(|&k| s[k]).collect();
    Ok(Svd { u, s, vt })
}

pub fn singular_values(a: &Array2<f64>) -> Result<Array1<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(DdeError::Numeric("SVD input has non-finite entries".into()));
    }
    let mut s: Vec<f64> = to_dmatrix(a).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(Array1::from(s))
}

/// Solves the symmetric positive (semi)definite system `m x = b` for every
/// column of `b`. Falls back to a ridge of `1e-8 * trace(m)` when the
/// Cholesky factorization fails. Returns the solution and whether the ridge
/// was needed.
pub fn solve_spd(m: &Array2<f64>, b: &Array2<f64>) -> Result<(Array2<f64>, bool)> {
    let mm = to_dmatrix(m);
    let bb = to_dmatrix(b);
    if let Some(ch) = mm.clone().cholesky() {
        return Ok((from_dmatrix(&ch.solve(&bb)), false));
    }
    let ridge = 1e-8 * mm.trace().abs().max(1e-300);
    let mut reg = mm;
    for i in 0..reg.nrows() {
        reg[(i, i)] += ridge;
    }
    match reg.clone().cholesky() {
        Some(ch) => Ok((from_dmatrix(&ch.solve(&bb)), true)),
        None => reg
            .lu()
            .solve(&bb)
            .map(|x| (from_dmatrix(&x), true))
            .ok_or_else(|| DdeError::Numeric("singular system even after ridge".into())),
    }
}

/// Solves a small dense system, `None` if singular.
pub fn solve_small(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(b));
    }
    m.clone().lu().solve(b)
}

/// Least squares `argmin ||x beta - y||` column by column via the normal
/// equations.
pub fn least_squares(x: &Array2<f64>, y: &Array2<f64>) -> Result<(Array2<f64>, bool)> {
    let xtx = x.t().dot(x);
    let xty = x.t().dot(y);
    solve_spd(&xtx, &xty)
}

pub fn center_columns(a: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let means = a
        .mean_axis(ndarray::Axis(0))
        .unwrap_or_else(|| Array1::zeros(a.ncols()));
    (a - &means, means)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use ndarray::array;

    use super::*;

    #[test]
    fn svd_reconstructs_and_sorts() {
        let a = array![
            [1.0, 0.0, 2.0],
            [0.0, 3.0, 0.0],
            [1.0, 1.0, 1.0],
            [0.5, -1.0, 4.0]
        ];
        let f = svd(&a).unwrap();
        assert!(f.s.windows(2).into_iter().all(|w| w[0] >= w[1]));
        let rec = (&f.u * &f.s).dot(&f.vt);
        for (x, y) in rec.iter().zip(a.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
        let s = singular_values(&a).unwrap();
        for (x, y) in s.iter().zip(f.s.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn ridge_fallback_on_singular_system() {
        let m = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![[2.0], [2.0]];
        let (x, ridged) = solve_spd(&m, &b).unwrap();
        assert!(ridged);
        assert_relative_eq!(x[[0, 0]] + x[[1, 0]], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn least_squares_exact_fit() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        let y = array![[1.0], [3.0], [5.0]];
        let (b, _) = least_squares(&x, &y).unwrap();
        assert_relative_eq!(b[[0, 0]], 1.0, epsilon = 1e-10);
        assert_relative_eq!(b[[1, 0]], 2.0, epsilon = 1e-10);
    }
}
