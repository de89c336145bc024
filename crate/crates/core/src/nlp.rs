//! Small dense constrained minimization: an augmented-Lagrangian local solver
//! with Newton inner steps, and a multi-start driver seeded by projecting
//! low-discrepancy samples onto the constraints.
//!
//! Everything here targets desk-scale problems (n ≤ 3 or so), where dense
//! seeding plus local polish recovers global minima reliably.

use rayon::prelude::*;

use crate::calculus::{QuadraticComponent, SmoothMap};
use crate::geometry::{ConvexSet, SetKind};
use crate::linalg::{min_norm_solve, pinv_solve, Matrix, Vector};
use crate::sampling;

/// A twice differentiable scalar function.
#[derive(Debug, Clone)]
pub enum ScalarFn {
    Quadratic(QuadraticComponent),
    /// Component `index` of a (black-box or quadratic) map.
    MapComponent {
        map: SmoothMap,
        index: usize,
    },
    /// `‖x − center‖_p^p / radius^p − 1`.
    PNormLevel {
        center: Vector,
        radius: f64,
        p: f64,
    },
    /// `Σ wᵢ fᵢ`.
    Sum(Vec<(f64, ScalarFn)>),
}

impl ScalarFn {
    /// Component `index` of `map`, kept analytic when the map is quadratic.
    pub fn component(map: &SmoothMap, index: usize) -> Self {
        match map.components() {
            Some(c) => ScalarFn::Quadratic(c[index].clone()),
            None => ScalarFn::MapComponent { map: map.clone(), index },
        }
    }

    /// `Σ wᵢ fᵢ`, merged into one quadratic when every term is quadratic.
    pub fn combination(terms: Vec<(f64, ScalarFn)>) -> Self {
        let quads: Option<Vec<(f64, &QuadraticComponent)>> = terms
            .iter()
            .map(|(w, f)| match f {
                ScalarFn::Quadratic(q) => Some((*w, q)),
                _ => None,
            })
            .collect();
        match quads {
            Some(qs) if !qs.is_empty() => {
                let n = qs[0].1.b.len();
                let mut a = Matrix::zeros(n, n);
                let mut b = Vector::zeros(n);
                let mut c = 0.0;
                for (w, q) in qs {
                    a += &q.a * w;
                    b += &q.b * w;
                    c += w * q.c;
                }
                ScalarFn::Quadratic(QuadraticComponent::new(a, b, c))
            }
            _ => ScalarFn::Sum(terms),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticComponent> {
        match self {
            ScalarFn::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    /// `NaN` when the underlying evaluator fails.
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            ScalarFn::Quadratic(q) => q.value(x),
            ScalarFn::MapComponent { map, index } => map.eval(x).map_or(f64::NAN, |y| y[*index]),
            ScalarFn::PNormLevel { center, radius, p } => {
                (x - center).iter().map(|d| d.abs().powf(*p)).sum::<f64>() / radius.powf(*p) - 1.0
            }
            ScalarFn::Sum(terms) => terms.iter().map(|(w, f)| w * f.value(x)).sum(),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            ScalarFn::Quadratic(q) => q.gradient(x),
            ScalarFn::MapComponent { map, index } => {
                map.jacobian(x).map_or_else(|_| Vector::from_element(x.len(), f64::NAN), |j| j.row(*index).transpose())
            }
            ScalarFn::PNormLevel { center, radius, p } => {
                let s = p / radius.powf(*p);
                (x - center).map(|d| s * d.signum() * d.abs().powf(p - 1.0))
            }
            ScalarFn::Sum(terms) => terms.iter().fold(Vector::zeros(x.len()), |acc, (w, f)| acc + f.gradient(x) * *w),
        }
    }

    pub fn hessian(&self, x: &Vector) -> Matrix {
        let n = x.len();
        match self {
            ScalarFn::Quadratic(q) => q.a.clone(),
            ScalarFn::MapComponent { map, index } => {
                map.hessian(*index, x).unwrap_or_else(|_| Matrix::from_element(n, n, f64::NAN))
            }
            ScalarFn::PNormLevel { center, radius, p } => {
                let s = p * (p - 1.0) / radius.powf(*p);
                // |d|^{p−2} blows up at 0 for p < 2; the floor keeps Newton steps finite.
                Matrix::from_diagonal(&(x - center).map(|d| s * d.abs().max(1e-8).powf(p - 2.0)))
            }
            ScalarFn::Sum(terms) => terms.iter().fold(Matrix::zeros(n, n), |acc, (w, f)| acc + f.hessian(x) * *w),
        }
    }
}

/// Smooth description of a set as inequalities `q(x) ≤ 0`.
pub fn set_constraints(set: &ConvexSet) -> Vec<ScalarFn> {
    let n = set.dim();
    let ball = |c: &Vector, r: f64| {
        ScalarFn::Quadratic(QuadraticComponent::new(Matrix::identity(n, n), -c, 0.5 * (c.norm_squared() - r * r)))
    };
    match set.kind() {
        SetKind::PNormBall { center, radius, p } if *p == 2.0 => vec![ball(center, *radius)],
        SetKind::PNormBall { center, radius, p } => {
            vec![ScalarFn::PNormLevel { center: center.clone(), radius: *radius, p: *p }]
        }
        SetKind::BallIntersection { centers, radius } => centers.iter().map(|c| ball(c, *radius)).collect(),
        SetKind::Sublevel(q) => {
            vec![ScalarFn::Quadratic(QuadraticComponent::new(q.a.clone(), q.b.clone(), q.c - q.alpha))]
        }
        SetKind::Box { lower, upper } => (0..n)
            .flat_map(|i| {
                let mut e = Vector::zeros(n);
                e[i] = 1.0;
                [
                    ScalarFn::Quadratic(QuadraticComponent::linear(e.clone(), -upper[i])),
                    ScalarFn::Quadratic(QuadraticComponent::linear(-e, lower[i])),
                ]
            })
            .collect(),
    }
}

/// `eq(x) = 0`, `ineq(x) ≤ 0`.
#[derive(Debug, Clone, Default)]
pub struct Constraints {
    pub eq: Vec<ScalarFn>,
    pub ineq: Vec<ScalarFn>,
}

impl Constraints {
    /// Largest constraint violation (`∞` on evaluation failure).
    pub fn violation(&self, x: &Vector) -> f64 {
        let e = self.eq.iter().map(|h| h.value(x).abs());
        let i = self.ineq.iter().map(|q| q.value(x).max(0.0));
        e.chain(i).fold(0.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
    }

    /// Gauss–Newton projection onto the constraint set: minimum-norm steps on
    /// the currently violated rows.
    pub fn project(&self, x: &Vector, iters: usize) -> Vector {
        let mut x = x.clone();
        for _ in 0..iters {
            let mut rows: Vec<Vector> = Vec::new();
            let mut rhs: Vec<f64> = Vec::new();
            for h in &self.eq {
                rows.push(h.gradient(&x));
                rhs.push(-h.value(&x));
            }
            for q in &self.ineq {
                let v = q.value(&x);
                if v > 0.0 {
                    rows.push(q.gradient(&x));
                    // Aim slightly inside so later steps do not re-violate.
                    rhs.push(-v - 1e-12);
                }
            }
            if rows.is_empty() || rhs.iter().all(|r| r.abs() <= 1e-15) {
                break;
            }
            let j = Matrix::from_fn(rows.len(), x.len(), |i, k| rows[i][k]);
            let r = Vector::from_vec(rhs);
            let d = min_norm_solve(&j, &r).unwrap_or_else(|| pinv_solve(&j, &r));
            if !d.iter().all(|v| v.is_finite()) {
                break;
            }
            x += d;
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vector,
    pub value: f64,
    pub violation: f64,
    /// Multipliers of the equality constraints.
    pub lambda: Vec<f64>,
    /// Multipliers (≥ 0) of the inequality constraints.
    pub mu: Vec<f64>,
}

struct AugLag<'a> {
    f: &'a ScalarFn,
    cons: &'a Constraints,
    lambda: &'a [f64],
    mu: &'a [f64],
    rho: f64,
}

impl AugLag<'_> {
    fn value(&self, x: &Vector) -> f64 {
        let mut v = self.f.value(x);
        for (h, l) in self.cons.eq.iter().zip(self.lambda) {
            let hv = h.value(x);
            v += l * hv + 0.5 * self.rho * hv * hv;
        }
        for (q, m) in self.cons.ineq.iter().zip(self.mu) {
            let s = (m + self.rho * q.value(x)).max(0.0);
            v += (s * s - m * m) / (2.0 * self.rho);
        }
        v
    }

    fn derivatives(&self, x: &Vector) -> (Vector, Matrix) {
        let mut g = self.f.gradient(x);
        let mut hess = self.f.hessian(x);
        for (h, l) in self.cons.eq.iter().zip(self.lambda) {
            let w = l + self.rho * h.value(x);
            let gh = h.gradient(x);
            g += &gh * w;
            hess += h.hessian(x) * w + &gh * gh.transpose() * self.rho;
        }
        for (q, m) in self.cons.ineq.iter().zip(self.mu) {
            let s = m + self.rho * q.value(x);
            if s > 0.0 {
                let gq = q.gradient(x);
                g += &gq * s;
                hess += q.hessian(x) * s + &gq * gq.transpose() * self.rho;
            }
        }
        (g, hess)
    }
}

/// Damped Newton with an eigenvalue shift and Armijo backtracking.
fn newton_minimize(al: &AugLag<'_>, mut x: Vector, max_iter: usize) -> Vector {
    let n = x.len();
    let mut v = al.value(&x);
    for _ in 0..max_iter {
        let (g, h) = al.derivatives(&x);
        if !g.iter().all(|t| t.is_finite()) || !h.iter().all(|t| t.is_finite()) {
            break;
        }
        if g.norm() <= 1e-13 * (1.0 + v.abs()) {
            break;
        }
        let hs = (&h + h.transpose()) * 0.5;
        let eig = hs.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1e-12);
        let floor = 1e-10 * scale;
        let lam = eig.eigenvalues.map(|l| if l < floor { l.abs().max(floor) } else { l });
        let gt = eig.eigenvectors.transpose() * &g;
        let mut d = &eig.eigenvectors * Vector::from_iterator(n, (0..n).map(|i| -gt[i] / lam[i]));
        // Flat directions (linear objectives) give huge steps; cap them.
        let cap = 1.0 + x.norm();
        if d.norm() > cap {
            d *= cap / d.norm();
        }
        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let xt = &x + &d * t;
            let vt = al.value(&xt);
            if vt.is_finite() && vt <= v + 1e-4 * t * slope {
                let moved = (&xt - &x).norm();
                x = xt;
                v = vt;
                accepted = moved > 1e-16 * (1.0 + x.norm());
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    x
}

/// Local minimizer of `f` subject to `cons` from the start `x`.
pub fn local_solve(f: &ScalarFn, cons: &Constraints, x: &Vector) -> LocalResult {
    let mut lambda = vec![0.0; cons.eq.len()];
    let mut mu = vec![0.0; cons.ineq.len()];
    let mut rho = 10.0;
    let mut x = x.clone();
    let mut last_viol = cons.violation(&x);
    for _ in 0..40 {
        let al = AugLag { f, cons, lambda: &lambda, mu: &mu, rho };
        x = newton_minimize(&al, x, 100);
        for (h, l) in cons.eq.iter().zip(lambda.iter_mut()) {
            *l += rho * h.value(&x);
        }
        for (q, m) in cons.ineq.iter().zip(mu.iter_mut()) {
            *m = (*m + rho * q.value(&x)).max(0.0);
        }
        let viol = cons.violation(&x);
        if !viol.is_finite() {
            break;
        }
        if viol <= 1e-13 && rho > 1e3 {
            break;
        }
        if viol > 0.25 * last_viol {
            rho = (rho * 10.0).min(1e12);
        }
        last_viol = viol;
    }
    LocalResult { value: f.value(&x), violation: cons.violation(&x), x, lambda, mu }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalOptions {
    /// Low-discrepancy seeds per run.
    pub seeds: usize,
    /// Best seeds handed to the local solver.
    pub polish: usize,
    /// Feasibility tolerance for accepting a local result.
    pub feas_tol: f64,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self { seeds: 4096, polish: 24, feas_tol: 1e-9 }
    }
}

/// Multi-start minimization over the box `[lo, hi]`: project Halton seeds
/// onto the constraints, keep the best distinct ones and polish them.
/// `extra` starts are always polished. Returns `None` when no start ends
/// feasible within `feas_tol`.
pub fn global_minimize(
    f: &ScalarFn,
    cons: &Constraints,
    lo: &Vector,
    hi: &Vector,
    extra: &[Vector],
    opts: &GlobalOptions,
) -> Option<LocalResult> {
    let projected: Vec<(f64, f64, Vector)> = (0..opts.seeds as u64)
        .into_par_iter()
        .map(|i| {
            let x = cons.project(&sampling::halton_in_box(i, lo, hi), 30);
            (cons.violation(&x), f.value(&x), x)
        })
        .collect();
    let loose = 1e-6_f64.max(opts.feas_tol);
    let mut ranked: Vec<&(f64, f64, Vector)> =
        projected.iter().filter(|(viol, val, _)| *viol <= loose && val.is_finite()).collect();
    if ranked.is_empty() {
        // Nothing projected cleanly; fall back to the least violating seeds.
        ranked = projected.iter().filter(|(v, _, _)| v.is_finite()).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    } else {
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.2, &b.2)));
    }
    let spread = (hi - lo).norm().max(1e-12);
    let mut starts: Vec<Vector> = extra.to_vec();
    for (_, _, x) in ranked {
        if starts.len() >= opts.polish + extra.len() {
            break;
        }
        if starts.iter().all(|s| (s - x).norm() > 1e-3 * spread) {
            starts.push(x.clone());
        }
    }
    let results: Vec<LocalResult> = starts.par_iter().map(|s| local_solve(f, cons, s)).collect();
    results
        .into_iter()
        .filter(|r| r.violation <= opts.feas_tol && r.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value).then_with(|| lex_cmp(&a.x, &b.x)))
}

/// Lexicographic order on points: the deterministic tie-break for reductions.
pub fn lex_cmp(a: &Vector, b: &Vector) -> std::cmp::Ordering {
    a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}
