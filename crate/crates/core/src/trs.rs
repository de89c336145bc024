//! Global minimization of a quadratic over a Euclidean ball or an ellipsoid
//! (the trust-region subproblem), including the hard case.

use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrsSolution {
    pub x: Vector,
    pub value: f64,
    /// Multiplier of the ball constraint (zero for interior solutions).
    pub mu: f64,
}

/// Minimizes `½xᵀHx + gᵀx + c0` over `‖x − center‖ ≤ radius`.
pub fn minimize_on_ball(h: &Matrix, g: &Vector, c0: f64, center: &Vector, radius: f64) -> TrsSolution {
    // Shift to the centre: x = center + d.
    let g_shift = g + h * center;
    let (d, mu) = solve_centered(h, &g_shift, radius);
    let x = center + &d;
    let value = 0.5 * x.dot(&(h * &x)) + g.dot(&x) + c0;
    TrsSolution { x, value, mu }
}

/// Minimizes `½xᵀHx + gᵀx + c0` over `(x − m)ᵀA(x − m) ≤ level` with `A` positive definite.
pub fn minimize_on_ellipsoid(h: &Matrix, g: &Vector, c0: f64, a: &Matrix, m: &Vector, level: f64) -> TrsSolution {
    // x = m + L⁻ᵀ y with A = L Lᵀ turns the ellipsoid into ‖y‖ ≤ √level.
    let chol = a.clone().cholesky().expect("ellipsoid matrix must be positive definite");
    let l = chol.l();
    let lt_inv = l.transpose().try_inverse().expect("cholesky factor is invertible");
    let hy = lt_inv.transpose() * h * &lt_inv;
    let hy = (&hy + hy.transpose()) * 0.5;
    let gy = lt_inv.transpose() * (g + h * m);
    let (y, mu) = solve_centered(&hy, &gy, level.max(0.0).sqrt());
    let x = m + &lt_inv * y;
    let value = 0.5 * x.dot(&(h * &x)) + g.dot(&x) + c0;
    TrsSolution { x, value, mu }
}

/// Global minimizer of `½dᵀHd + gᵀd` over `‖d‖ ≤ delta`, with its multiplier.
fn solve_centered(h: &Matrix, g: &Vector, delta: f64) -> (Vector, f64) {
    let n = g.len();
    if delta <= 0.0 {
        return (Vector::zeros(n), 0.0);
    }
    let hs = (h + h.transpose()) * 0.5;
    let eig = hs.symmetric_eigen();
    let lam = &eig.eigenvalues;
    let q = &eig.eigenvectors;
    let gt = q.transpose() * g;
    let scale = lam.amax().max(g.norm() / delta).max(1e-300);
    let lmin = lam.min();

    let step = |mu: f64| -> Vector { Vector::from_iterator(n, (0..n).map(|i| -gt[i] / (lam[i] + mu))) };

    // Interior Newton point.
    if lmin > 1e-14 * scale {
        let d = step(0.0);
        if d.norm() <= delta {
            return (q * d, 0.0);
        }
    }

    let mu_lo = (-lmin).max(0.0);
    let near = mu_lo + 1e-13 * scale;
    let norm_at = |mu: f64| step(mu).norm();
    if norm_at(near) < delta {
        // Hard case: the gradient has no weight on the lowest eigenspace.
        let mu = mu_lo;
        let mut d = Vector::zeros(n);
        let mut k_min = 0;
        for i in 0..n {
            if (lam[i] - lmin).abs() <= 1e-12 * scale {
                k_min = i;
                continue;
            }
            d[i] = -gt[i] / (lam[i] + mu);
        }
        let tau = (delta * delta - d.norm_squared()).max(0.0).sqrt();
        // Either sign is optimal; pick the one aligned with -g for determinism.
        let sign = if gt[k_min] > 0.0 { -1.0 } else { 1.0 };
        d[k_min] += sign * tau;
        return (q * d, mu);
    }
    let mut hi = near.max(1.0);
    while norm_at(hi) > delta {
        hi *= 2.0;
    }
    let mut lo = near;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1e-300) {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    let mut d = step(mu);
    // Put the point exactly on the sphere.
    let dn = d.norm();
    if dn > 0.0 {
        d *= delta / dn;
    }
    (q * d, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn brute_force_disc(h: &Matrix, g: &Vector, center: &Vector, r: f64) -> f64 {
        let mut best = f64::INFINITY;
        let steps = 1500;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = center
                    + Vector::from_vec(vec![
                        r * (2.0 * i as f64 / steps as f64 - 1.0),
                        r * (2.0 * j as f64 / steps as f64 - 1.0),
                    ]);
                if (&x - center).norm() <= r {
                    best = best.min(0.5 * x.dot(&(h * &x)) + g.dot(&x));
                }
            }
        }
        for k in 0..20_000 {
            let t = std::f64::consts::TAU * k as f64 / 20_000.0;
            let x = center + Vector::from_vec(vec![r * t.cos(), r * t.sin()]);
            best = best.min(0.5 * x.dot(&(h * &x)) + g.dot(&x));
        }
        best
    }

    #[test]
    fn matches_grid_on_random_planar_instances() {
        let mut rng = sampling::rng(42);
        for _ in 0..12 {
            let a = sampling::gaussian_vector(&mut rng, 4);
            let h = Matrix::from_row_slice(2, 2, &[a[0], a[1], a[1], a[2]]);
            let g = sampling::gaussian_vector(&mut rng, 2);
            let c = sampling::gaussian_vector(&mut rng, 2) * 0.3;
            let r = 0.2 + a[3].abs();
            let sol = minimize_on_ball(&h, &g, 0.0, &c, r);
            assert!((&sol.x - &c).norm() <= r * (1.0 + 1e-12));
            let brute = brute_force_disc(&h, &g, &c, r);
            assert!(sol.value <= brute + 1e-12, "{} vs {}", sol.value, brute);
            assert!(sol.value >= brute - 1e-4, "{} vs {}", sol.value, brute);
        }
    }

    #[test]
    fn hard_case() {
        // H = diag(-1, 1), g orthogonal to the negative eigenvector.
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0]));
        let g = Vector::from_vec(vec![0.0, 0.5]);
        let sol = minimize_on_ball(&h, &g, 0.0, &Vector::zeros(2), 1.0);
        // Minimizer: d2 = -0.5/(1+1) = -0.25, d1 = ±√(1 − 0.0625).
        assert!((sol.x[1] + 0.25).abs() < 1e-12);
        assert!((sol.x.norm() - 1.0).abs() < 1e-12);
        let expected = -0.5 * (1.0 - 0.0625) + 0.5 * 0.0625 - 0.125;
        assert!((sol.value - expected).abs() < 1e-12);
    }

    #[test]
    fn interior_minimum() {
        let h = Matrix::identity(2, 2) * 2.0;
        let g = Vector::from_vec(vec![-0.2, 0.4]);
        let sol = minimize_on_ball(&h, &g, 1.0, &Vector::zeros(2), 1.0);
        assert!((sol.x - Vector::from_vec(vec![0.1, -0.2])).norm() < 1e-14);
        assert_eq!(sol.mu, 0.0);
    }

    #[test]
    fn ellipsoid_matches_sampling() {
        let a = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let m = Vector::from_vec(vec![0.3, -0.1]);
        let h = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -3.0]);
        let g = Vector::from_vec(vec![0.5, 0.2]);
        let sol = minimize_on_ellipsoid(&h, &g, 0.0, &a, &m, 1.5);
        let d = &sol.x - &m;
        assert!(d.dot(&(&a * &d)) <= 1.5 * (1.0 + 1e-10));
        let mut best = f64::INFINITY;
        for k in 0..200_000 {
            let t = std::f64::consts::TAU * k as f64 / 200_000.0;
            let u = Vector::from_vec(vec![t.cos(), t.sin()]);
            let s = (1.5 / u.dot(&(&a * &u))).sqrt();
            for frac in [1.0, 0.75, 0.5, 0.25, 0.0] {
                let x = &m + &u * (s * frac);
                best = best.min(0.5 * x.dot(&(&h * &x)) + g.dot(&x));
            }
        }
        assert!(sol.value <= best + 1e-12);
        assert!(sol.value >= best - 1e-6);
    }
}
