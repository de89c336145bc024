//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Singular values of `a`, sorted in decreasing order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Spectral (ℓ² → ℓ²) operator norm.
pub fn op_norm(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Smallest of the `min(m, n)` singular values.
pub fn sigma_min(a: &Matrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Minimum-norm solution of `a d = r` for a matrix with full row rank.
///
/// Returns `None` when `a` is numerically rank deficient.
pub fn min_norm_solve(a: &Matrix, r: &Vector) -> Option<Vector> {
    let (m, n) = a.shape();
    if m == 0 {
        return Some(Vector::zeros(n));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-13 * smax.max(f64::MIN_POSITIVE);
    if svd.singular_values.iter().take(m.min(n)).any(|&s| s <= tol) && m <= n {
        return None;
    }
    svd.solve(r, tol).ok()
}

/// Least-squares / minimum-norm solve that tolerates rank deficiency.
pub fn pinv_solve(a: &Matrix, r: &Vector) -> Vector {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Vector::zeros(n);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-12 * smax.max(f64::MIN_POSITIVE);
    svd.solve(r, tol).unwrap_or_else(|_| Vector::zeros(n))
}

/// ℓᵖ norm for `p ∈ [1, ∞)`.
pub fn p_norm(v: &Vector, p: f64) -> f64 {
    if p == 2.0 {
        return v.norm();
    }
    let scale = v.amax();
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

pub fn is_symmetric(a: &Matrix) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= 1e-12 * scale))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_range(a: &Matrix) -> (f64, f64) {
    let eig = a.clone().symmetric_eigen();
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_of_diagonal() {
        let a = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert!((op_norm(&a) - 5.0).abs() < 1e-12);
        assert!((sigma_min(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wide_matrix_sigma_min() {
        let a = Matrix::from_row_slice(1, 3, &[0.0, 3.0, 4.0]);
        assert!((sigma_min(&a) - 5.0).abs() < 1e-12);
        let d = min_norm_solve(&a, &Vector::from_vec(vec![5.0])).unwrap();
        assert!((d - Vector::from_vec(vec![0.0, 0.6, 0.8])).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(min_norm_solve(&a, &Vector::from_vec(vec![1.0, 0.0])).is_none());
    }

    #[test]
    fn p_norms() {
        let v = Vector::from_vec(vec![3.0, -4.0]);
        assert!((p_norm(&v, 2.0) - 5.0).abs() < 1e-12);
        assert!((p_norm(&v, 1.0) - 7.0).abs() < 1e-12);
        assert!((p_norm(&v, 3.0) - 91f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }
}
