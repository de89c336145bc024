//! Uniformly convex sets in Rⁿ and their moduli of convexity.
//!
//! Every set is described analytically so that the signed distance to its
//! boundary (the *margin*) is available: exact for balls, ball intersections
//! and boxes, and computed by a one-dimensional secular equation for
//! quadratic sublevel sets (ellipsoids). The modulus of convexity
//!
//! ```text
//! δ_S(ε) = inf { sup{ δ ≥ 0 : ball((x1 + x2)/2, δ) ⊆ S } : x1, x2 ∈ S, ‖x1 − x2‖ = ε }
//! ```
//!
//! is then bounded from below analytically and estimated from above by
//! sampling chords.

use rand::Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{p_norm, sym_eig_range, Matrix, Vector};
use crate::sampling::{self, SeededRng};

/// Power-2 constant of the Euclidean norm: δ_{ℓ²}(ε) ≥ ε²/8.
pub const EUCLIDEAN_GAMMA: f64 = 0.125;

/// θ(s) = κ·sᵉ, the modulus of a uniformly convex function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerModulus {
    pub kappa: f64,
    pub exponent: f64,
}

impl PowerModulus {
    pub fn quadratic(kappa: f64) -> Self {
        Self { kappa, exponent: 2.0 }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.kappa * s.powf(self.exponent)
    }

    /// κ when θ is of power type 2.
    pub fn power2(&self) -> Option<f64> {
        (self.exponent == 2.0).then_some(self.kappa)
    }
}

/// `{x : ½xᵀAx + bᵀx + c ≤ α}` with `A` symmetric positive definite.
///
/// Stored in centred form `(x − m)ᵀA(x − m) ≤ level` together with the
/// eigendecomposition of `A`.
#[derive(Debug, Clone)]
pub struct QuadraticSublevel {
    pub a: Matrix,
    pub b: Vector,
    pub c: f64,
    pub alpha: f64,
    pub theta: PowerModulus,
    /// Bound on ‖∇φ‖ over the set.
    pub lip: f64,
    center: Vector,
    level: f64,
    eigvecs: Matrix,
    eigvals: Vector,
}

impl QuadraticSublevel {
    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    /// Right-hand side of the centred form `(x − m)ᵀA(x − m) ≤ level`.
    pub fn level(&self) -> f64 {
        self.level
    }

    /// Signed Euclidean distance to the ellipsoid surface, positive inside.
    fn signed_distance(&self, x: &Vector) -> f64 {
        let z = self.eigvecs.transpose() * (x - &self.center);
        let a = &self.eigvals;
        let q: f64 = z.iter().zip(a.iter()).map(|(zi, ai)| ai * zi * zi).sum();
        let r = self.level;
        if (q - r).abs() <= 1e-15 * r {
            return 0.0;
        }
        let f = |mu: f64| -> f64 {
            z.iter()
                .zip(a.iter())
                .map(|(zi, ai)| {
                    let d = 1.0 + mu * ai;
                    ai * zi * zi / (d * d)
                })
                .sum()
        };
        let dist_at = |mu: f64| -> f64 {
            z.iter()
                .zip(a.iter())
                .map(|(zi, ai)| {
                    let wi = zi / (1.0 + mu * ai);
                    (wi - zi) * (wi - zi)
                })
                .sum::<f64>()
                .sqrt()
        };
        if q < r {
            let amax = a.max();
            let pole = -1.0 / amax;
            let near = pole * (1.0 - 1e-12);
            if f(near) < r {
                // Nearest point lies on the major-curvature axis: that part of
                // z is (numerically) zero and the secular equation has no root.
                let mut dist2 = 0.0;
                let mut used = 0.0;
                let mut axis_weight = 0.0;
                for (zi, ai) in z.iter().zip(a.iter()) {
                    if (ai - amax).abs() <= 1e-12 * amax {
                        axis_weight += zi * zi;
                        continue;
                    }
                    let wi = zi / (1.0 - ai / amax);
                    used += ai * wi * wi;
                    dist2 += (wi - zi) * (wi - zi);
                }
                let rest = ((r - used).max(0.0) / amax).sqrt();
                let along = axis_weight.sqrt();
                dist2 += (rest - along).powi(2);
                return dist2.sqrt();
            }
            let (mut lo, mut hi) = (near, 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > r {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-17 * lo.abs() {
                    break;
                }
            }
            dist_at(0.5 * (lo + hi))
        } else {
            let mut hi = 1.0 / a.max();
            while f(hi) > r {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > r {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-17 * hi {
                    break;
                }
            }
            -dist_at(0.5 * (lo + hi))
        }
    }
}

#[derive(Debug, Clone)]
pub enum SetKind {
    /// `{x : ‖x − center‖_p ≤ radius}`; the ambient norm is the same ℓᵖ norm.
    PNormBall {
        center: Vector,
        radius: f64,
        p: f64,
    },
    /// Intersection of Euclidean balls of a common radius (an r-convex set).
    BallIntersection {
        centers: Vec<Vector>,
        radius: f64,
    },
    Sublevel(QuadraticSublevel),
    /// Axis-aligned box. Convex but not uniformly convex; used as a control.
    Box {
        lower: Vector,
        upper: Vector,
    },
}

/// A closed bounded convex set with nonempty interior and an exact margin oracle.
#[derive(Debug, Clone)]
pub struct ConvexSet {
    kind: SetKind,
    dim: usize,
    interior: Vector,
    bbox: (Vector, Vector),
    diameter: f64,
}

/// Result of a membership query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub inside: bool,
    /// Distance to the boundary: positive inside, negative outside.
    pub margin: f64,
}

/// Lower bound or estimate of the modulus of convexity at one chord length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusBound {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub diam: Option<f64>,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ConvexSet {
    pub fn p_norm_ball(center: Vector, radius: f64, p: f64) -> Result<Self> {
        positive("radius", radius)?;
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p-norm ball needs 1 < p < ∞ for a uniformly convex norm, got p = {p}"
            )));
        }
        if center.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let dim = center.len();
        let lo = center.add_scalar(-radius);
        let hi = center.add_scalar(radius);
        Ok(Self {
            interior: center.clone(),
            kind: SetKind::PNormBall { center, radius, p },
            dim,
            bbox: (lo, hi),
            diameter: 2.0 * radius,
        })
    }

    pub fn euclidean_ball(center: Vector, radius: f64) -> Result<Self> {
        Self::p_norm_ball(center, radius, 2.0)
    }

    pub fn ball_intersection(centers: Vec<Vector>, radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        let Some(first) = centers.first() else {
            return Err(Error::InvalidParameter("ball intersection needs at least one center".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        for c in &centers {
            check_dim(dim, c.len())?;
        }
        let (mid, reach) = enclosing_ball(&centers);
        if reach >= radius {
            return Err(Error::InvalidParameter(format!(
                "ball intersection has empty interior (centers need radius {reach:.6} > {radius})"
            )));
        }
        let mut lo = first.add_scalar(-radius);
        let mut hi = first.add_scalar(radius);
        for c in &centers[1..] {
            for i in 0..dim {
                lo[i] = lo[i].max(c[i] - radius);
                hi[i] = hi[i].min(c[i] + radius);
            }
        }
        let mut set = Self {
            kind: SetKind::BallIntersection { centers, radius },
            dim,
            interior: mid,
            bbox: (lo, hi),
            diameter: 0.0,
        };
        set.diameter = set.sampled_diameter();
        Ok(set)
    }

    /// Sublevel set of a strongly convex quadratic with θ(s) = (λ_min(A)/2)s²
    /// and the exact gradient bound over the set.
    pub fn sublevel(a: Matrix, b: Vector, c: f64, alpha: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidParameter("sublevel matrix must be square and nonempty".into()));
        }
        check_dim(a.nrows(), b.len())?;
        if !crate::linalg::is_symmetric(&a) {
            return Err(Error::AsymmetricMatrix { component: 0 });
        }
        let (lmin, lmax) = sym_eig_range(&a);
        if lmin <= 0.0 {
            return Err(Error::InvalidParameter("sublevel quadratic must be positive definite".into()));
        }
        let center = -a.clone().cholesky().expect("positive definite").solve(&b);
        let phi_min = 0.5 * center.dot(&(&a * &center)) + b.dot(&center) + c;
        let level = 2.0 * (alpha - phi_min);
        let lip = (lmax * level.max(0.0)).sqrt();
        Self::sublevel_with(a, b, c, alpha, PowerModulus::quadratic(0.5 * lmin), lip)
    }

    /// Sublevel set with a caller-supplied modulus θ and Lipschitz bound.
    pub fn sublevel_with(a: Matrix, b: Vector, c: f64, alpha: f64, theta: PowerModulus, lip: f64) -> Result<Self> {
        positive("lipschitz bound", lip)?;
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidParameter("sublevel matrix must be square and nonempty".into()));
        }
        let dim = a.nrows();
        check_dim(dim, b.len())?;
        if !crate::linalg::is_symmetric(&a) {
            return Err(Error::AsymmetricMatrix { component: 0 });
        }
        let eig = a.clone().symmetric_eigen();
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::InvalidParameter("sublevel quadratic must be positive definite".into()));
        }
        let center = -a.clone().cholesky().expect("positive definite").solve(&b);
        let phi_min = 0.5 * center.dot(&(&a * &center)) + b.dot(&center) + c;
        let level = 2.0 * (alpha - phi_min);
        if level <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sublevel set has empty interior: α = {alpha} ≤ min φ = {phi_min}"
            )));
        }
        let inv = a.clone().try_inverse().expect("positive definite");
        let half: Vector = Vector::from_iterator(dim, (0..dim).map(|i| (level * inv[(i, i)]).sqrt()));
        let diameter = 2.0 * (level / eig.eigenvalues.min()).sqrt();
        let bbox = (&center - &half, &center + &half);
        Ok(Self {
            interior: center.clone(),
            kind: SetKind::Sublevel(QuadraticSublevel {
                a,
                b,
                c,
                alpha,
                theta,
                lip,
                center,
                level,
                eigvecs: eig.eigenvectors,
                eigvals: eig.eigenvalues,
            }),
            dim,
            bbox,
            diameter,
        })
    }

    pub fn axis_box(lower: Vector, upper: Vector) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() || lower.iter().zip(upper.iter()).any(|(l, u)| !(u > l)) {
            return Err(Error::InvalidParameter("box needs lower < upper in every coordinate".into()));
        }
        let interior = (&lower + &upper) * 0.5;
        let diameter = (&upper - &lower).norm();
        Ok(Self {
            dim: lower.len(),
            interior,
            bbox: (lower.clone(), upper.clone()),
            kind: SetKind::Box { lower, upper },
            diameter,
        })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// A point with positive margin.
    pub fn interior_point(&self) -> &Vector {
        &self.interior
    }

    pub fn bounding_box(&self) -> (&Vector, &Vector) {
        (&self.bbox.0, &self.bbox.1)
    }

    /// Exact for balls, ellipsoids and boxes; support-sampled for ball intersections.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Exponent of the norm in which chords and margins are measured.
    pub fn ambient_p(&self) -> f64 {
        match &self.kind {
            SetKind::PNormBall { p, .. } => *p,
            _ => 2.0,
        }
    }

    pub fn norm(&self, v: &Vector) -> f64 {
        p_norm(v, self.ambient_p())
    }

    /// Signed distance to the boundary in the ambient norm.
    pub fn margin(&self, x: &Vector) -> f64 {
        match &self.kind {
            SetKind::PNormBall { center, radius, p } => radius - p_norm(&(x - center), *p),
            SetKind::BallIntersection { centers, radius } => {
                centers.iter().map(|c| radius - (x - c).norm()).fold(f64::INFINITY, f64::min)
            }
            SetKind::Sublevel(q) => q.signed_distance(x),
            SetKind::Box { lower, upper } => {
                let mut outside = 0.0;
                let mut inside = f64::INFINITY;
                for i in 0..self.dim {
                    let below = lower[i] - x[i];
                    let above = x[i] - upper[i];
                    let excess = below.max(above);
                    if excess > 0.0 {
                        outside += excess * excess;
                    } else {
                        inside = inside.min(-excess);
                    }
                }
                if outside > 0.0 {
                    -outside.sqrt()
                } else {
                    inside
                }
            }
        }
    }

    pub fn is_member(&self, x: &Vector) -> bool {
        self.margin(x) >= 0.0
    }

    /// Largest `c` with `δ_S(ε) ≥ c·ε²` that the analytic description guarantees.
    ///
    /// ℓᵖ balls with `p > 2` have a modulus of power type `p`, so the
    /// power-2 constant is zero for them.
    pub fn power2_constant(&self) -> f64 {
        match &self.kind {
            SetKind::PNormBall { radius, p, .. } => lp_power2_constant(*p) / radius,
            SetKind::BallIntersection { radius, .. } => EUCLIDEAN_GAMMA / radius,
            SetKind::Sublevel(q) => q.theta.power2().map_or(0.0, |k| k / (4.0 * q.lip)),
            SetKind::Box { .. } => 0.0,
        }
    }

    /// Analytic lower bound on `δ_S(ε)`.
    pub fn analytic_modulus(&self, epsilon: f64) -> f64 {
        match &self.kind {
            SetKind::PNormBall { radius, p, .. } => {
                let e = (epsilon / radius).min(2.0);
                radius * lp_modulus_value(*p, e)
            }
            SetKind::BallIntersection { radius, .. } => {
                let e = (epsilon / radius).min(2.0);
                radius * lp_modulus_value(2.0, e)
            }
            SetKind::Sublevel(q) => q.theta.eval(epsilon) / (4.0 * q.lip),
            SetKind::Box { .. } => 0.0,
        }
    }

    /// Boundary point on the ray from the interior point in direction `v`.
    pub fn boundary_point(&self, v: &Vector) -> Vector {
        let q = &self.interior;
        let t = match &self.kind {
            SetKind::PNormBall { radius, p, .. } => radius / p_norm(v, *p),
            SetKind::BallIntersection { centers, radius } => centers
                .iter()
                .map(|c| {
                    let w = q - c;
                    let vv = v.dot(v);
                    let b = w.dot(v);
                    let cc = w.dot(&w) - radius * radius;
                    (-b + (b * b - vv * cc).max(0.0).sqrt()) / vv
                })
                .fold(f64::INFINITY, f64::min),
            SetKind::Sublevel(s) => (s.level / v.dot(&(&s.a * v))).sqrt(),
            SetKind::Box { lower, upper } => (0..self.dim)
                .filter(|&i| v[i] != 0.0)
                .map(|i| if v[i] > 0.0 { (upper[i] - q[i]) / v[i] } else { (lower[i] - q[i]) / v[i] })
                .fold(f64::INFINITY, f64::min),
        };
        q + v * t
    }

    /// Rejection sample from the bounding box.
    pub fn sample_interior(&self, rng: &mut SeededRng) -> Option<Vector> {
        for _ in 0..10_000 {
            let x = sampling::uniform_in_box(rng, &self.bbox.0, &self.bbox.1);
            if self.is_member(&x) {
                return Some(x);
            }
        }
        None
    }

    /// Farthest distance (in the ambient norm) from `x0` to a point of the set.
    pub fn reach_from(&self, x0: &Vector) -> f64 {
        match &self.kind {
            SetKind::PNormBall { center, radius, p } if *p == 2.0 => (x0 - center).norm() + radius,
            _ => {
                let dirs = sampling::sphere_directions(self.dim, 4096, 11);
                dirs.iter().map(|v| (self.boundary_point(v) - x0).norm()).fold(0.0, f64::max)
            }
        }
    }

    fn sampled_diameter(&self) -> f64 {
        let count = match self.dim {
            1 => 2,
            2 => 1024,
            3 => 2048,
            _ => 4096,
        };
        let dirs = sampling::sphere_directions(self.dim, count, 5);
        let pts: Vec<Vector> = dirs.iter().map(|v| self.boundary_point(v)).collect();
        let (mut best, mut bi, mut bj) = (0.0f64, 0, 0);
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d = self.norm(&(&pts[i] - &pts[j]));
                if d > best {
                    (best, bi, bj) = (d, i, j);
                }
            }
        }
        // Kinks (e.g. lens tips) fall between sample rays; polish the best pair.
        let (mut u, mut w) = (dirs[bi].clone(), dirs[bj].clone());
        let mut step = 0.5 / count as f64 * std::f64::consts::TAU;
        let mut r = sampling::rng(17);
        while step > 1e-10 {
            let mut improved = false;
            for _ in 0..8 * self.dim {
                let du = sampling::gaussian_vector(&mut r, self.dim) * step;
                let dw = sampling::gaussian_vector(&mut r, self.dim) * step;
                let (cu, cw) = ((&u + du).normalize(), (&w + dw).normalize());
                let d = self.norm(&(self.boundary_point(&cu) - self.boundary_point(&cw)));
                if d > best {
                    (best, u, w, improved) = (d, cu, cw, true);
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }
}

/// Approximate minimum enclosing ball of a point cloud (Bădoiu–Clarkson iteration).
fn enclosing_ball(points: &[Vector]) -> (Vector, f64) {
    let mut c = points[0].clone();
    for k in 1..=2000 {
        let far = points.iter().max_by(|a, b| (*a - &c).norm().total_cmp(&(*b - &c).norm())).expect("nonempty");
        c += (far - &c) / (k as f64 + 1.0);
    }
    let reach = points.iter().map(|p| (p - &c).norm()).fold(0.0, f64::max);
    (c, reach)
}

fn lp_modulus_value(p: f64, epsilon: f64) -> f64 {
    if p >= 2.0 {
        1.0 - (1.0 - (epsilon / 2.0).powf(p)).max(0.0).powf(1.0 / p)
    } else {
        (p - 1.0) * epsilon * epsilon / 8.0
    }
}

fn lp_power2_constant(p: f64) -> f64 {
    if p < 2.0 {
        (p - 1.0) / 8.0
    } else if p == 2.0 {
        EUCLIDEAN_GAMMA
    } else {
        0.0
    }
}

/// Modulus of convexity of the ℓᵖ unit ball: exact for `p ≥ 2`, the
/// `(p − 1)ε²/8` lower bound for `1 < p < 2`.
pub fn modulus_lp_ball(p: f64, epsilon: f64) -> Result<ModulusBound> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must satisfy 1 < p < ∞, got {p}")));
    }
    if !(epsilon > 0.0 && epsilon <= 2.0) {
        return Err(Error::Domain { name: "epsilon", value: epsilon, domain: "(0, 2]" });
    }
    Ok(ModulusBound { epsilon, delta: lp_modulus_value(p, epsilon), c: lp_power2_constant(p), diam: Some(2.0) })
}

/// Lower bound for an r-convex set in a space with `δ_X(ε) ≥ γε²`.
pub fn modulus_scaled(gamma: f64, r: f64, epsilon: f64) -> Result<ModulusBound> {
    positive("gamma", gamma)?;
    positive("r", r)?;
    if !(epsilon > 0.0 && epsilon <= 2.0 * r) {
        return Err(Error::Domain { name: "epsilon", value: epsilon, domain: "(0, 2r]" });
    }
    Ok(ModulusBound { epsilon, delta: gamma * epsilon * epsilon / r, c: gamma / r, diam: Some(2.0 * r) })
}

/// Lower bound θ(ε)/(4·lip φ) for a sublevel set of a uniformly convex function.
pub fn modulus_sublevel(theta: PowerModulus, lip_phi: f64, epsilon: f64) -> Result<ModulusBound> {
    positive("lip_phi", lip_phi)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain { name: "epsilon", value: epsilon, domain: "(0, ∞)" });
    }
    if !(theta.kappa > 0.0 && theta.exponent > 0.0) {
        return Err(Error::InvalidParameter("θ must be increasing and vanish only at 0".into()));
    }
    Ok(ModulusBound {
        epsilon,
        delta: theta.eval(epsilon) / (4.0 * lip_phi),
        c: theta.power2().map_or(0.0, |k| k / (4.0 * lip_phi)),
        diam: None,
    })
}

/// Power-2 constant of a finite intersection: the minimum of the constants.
pub fn modulus_intersection(constants: &[f64]) -> Result<f64> {
    if constants.is_empty() {
        return Err(Error::InvalidParameter("no constants given".into()));
    }
    if let Some(bad) = constants.iter().find(|c| !(**c > 0.0)) {
        return Err(Error::InvalidParameter(format!("constants must be positive, got {bad}")));
    }
    Ok(constants.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn contains(set: &ConvexSet, x: &Vector) -> Result<Membership> {
    check_dim(set.dim(), x.len())?;
    let margin = set.margin(x);
    Ok(Membership { inside: margin >= 0.0, margin })
}

/// Chord of length `epsilon` with both endpoints on the boundary, found by
/// walking the boundary from `b(v1)` towards `b(w)`.
fn boundary_chord(set: &ConvexSet, rng: &mut SeededRng, epsilon: f64) -> Option<(Vector, Vector)> {
    let n = set.dim();
    let v1 = sampling::unit_direction(rng, n, 2.0);
    let mut w = sampling::unit_direction(rng, n, 2.0);
    if v1.dot(&w) < -0.999 {
        w = sampling::unit_direction(rng, n, 2.0);
    }
    let x1 = set.boundary_point(&v1);
    let at = |t: f64| -> Vector {
        let v = &v1 * (1.0 - t) + &w * t;
        set.boundary_point(&(&v / v.norm()))
    };
    let dist = |t: f64| set.norm(&(at(t) - &x1));
    if dist(1.0) < epsilon {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dist(mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x2 = at(hi);
    Some((x1, x2))
}

/// Brute-force estimate of `δ_S(ε)` from above.
///
/// Draws chords `(x1, x2)` of length `ε` (within `chord_tol`) from three
/// families (boundary–boundary, boundary–interior and interior–interior) and
/// returns the smallest margin found at a chord midpoint.
pub fn empirical_modulus(
    set: &ConvexSet,
    epsilon: f64,
    samples: usize,
    chord_tol: f64,
    seed: u64,
) -> Result<ModulusBound> {
    if !(epsilon > 0.0) || epsilon > set.diameter() * (1.0 + 1e-12) {
        return Err(Error::Domain { name: "epsilon", value: epsilon, domain: "(0, diam S]" });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    positive("chord_tol", chord_tol)?;
    let n = set.dim();
    let p = set.ambient_p();
    let mut rng = sampling::rng(seed);
    let mut best = f64::INFINITY;
    let mut accepted = 0usize;
    let max_draws = 200 * samples.max(100);
    let mut draws = 0usize;
    while accepted < samples && draws < max_draws {
        draws += 1;
        let family = draws % 8;
        let pair = if family < 6 {
            boundary_chord(set, &mut rng, epsilon)
        } else {
            let start = if family == 6 {
                let v = sampling::unit_direction(&mut rng, n, 2.0);
                Some(set.boundary_point(&v))
            } else {
                set.sample_interior(&mut rng)
            };
            start.and_then(|x1| {
                let u = sampling::unit_direction(&mut rng, n, p);
                let x2 = &x1 + u * epsilon;
                set.is_member(&x2).then_some((x1, x2))
            })
        };
        let Some((x1, x2)) = pair else { continue };
        if (set.norm(&(&x1 - &x2)) - epsilon).abs() > chord_tol {
            continue;
        }
        accepted += 1;
        let mid = (&x1 + &x2) * 0.5;
        best = best.min(set.margin(&mid).max(0.0));
    }
    if accepted == 0 {
        return Err(Error::SamplingFailure(format!("no chord of length {epsilon} found after {draws} draws")));
    }
    Ok(ModulusBound { epsilon, delta: best, c: best / (epsilon * epsilon), diam: Some(set.diameter()) })
}

/// Sampled form of "every boundary point is extreme".
///
/// A boundary point `b` is flagged non-extreme when `b ± 2·tol·t` both lie in
/// the set (up to rounding slack) for some tangent direction `t`, i.e. `b` is
/// the midpoint of two members at distance `2·tol` from it.
pub fn extremality_check(set: &ConvexSet, boundary_samples: usize, tol: f64, seed: u64) -> Result<bool> {
    let n = set.dim();
    if n > 3 {
        return Err(Error::UnsupportedDimension(format!("extremality scan needs n ≤ 3, got {n}")));
    }
    positive("tol", tol)?;
    let step = 2.0 * tol;
    let slack = 1e-12 * set.diameter().max(1.0);
    let h = 1e-7 * set.diameter().max(1.0);
    for v in sampling::sphere_directions(n, boundary_samples.max(1), seed) {
        let b = set.boundary_point(&v);
        if !b.iter().all(|x| x.is_finite()) || set.margin(&b).abs() > 1e-9 * set.diameter().max(1.0) {
            return Err(Error::SamplingFailure("boundary point could not be localized".into()));
        }
        let mut normal = Vector::zeros(n);
        for i in 0..n {
            let mut e = Vector::zeros(n);
            e[i] = h;
            normal[i] = (set.margin(&(&b + &e)) - set.margin(&(&b - &e))) / (2.0 * h);
        }
        let nn = normal.norm();
        if nn < 1e-12 {
            continue;
        }
        normal /= nn;
        for t in tangent_fan(&normal) {
            let plus = &b + &t * step;
            let minus = &b - &t * step;
            if set.margin(&plus) >= -slack && set.margin(&minus) >= -slack {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn tangent_fan(normal: &Vector) -> Vec<Vector> {
    let n = normal.len();
    match n {
        1 => Vec::new(),
        2 => vec![Vector::from_vec(vec![-normal[1], normal[0]])],
        _ => {
            // Orthonormal basis of the normal's complement by Gram–Schmidt.
            let mut basis: Vec<Vector> = Vec::new();
            for i in 0..n {
                let mut e = Vector::zeros(n);
                e[i] = 1.0;
                let mut u = &e - normal * normal.dot(&e);
                for q in &basis {
                    u -= q * q.dot(&u);
                }
                if u.norm() > 1e-6 {
                    basis.push(u.normalize());
                }
                if basis.len() == n - 1 {
                    break;
                }
            }
            if n == 3 {
                (0..12)
                    .map(|k| {
                        let a = std::f64::consts::PI * k as f64 / 12.0;
                        &basis[0] * a.cos() + &basis[1] * a.sin()
                    })
                    .collect()
            } else {
                basis
            }
        }
    }
}

/// Random pair of members at distance `epsilon`, used by property tests.
pub fn random_chord(set: &ConvexSet, rng: &mut SeededRng, epsilon: f64) -> Option<(Vector, Vector)> {
    if rng.random::<f64>() < 0.5 {
        boundary_chord(set, rng, epsilon)
    } else {
        let x1 = set.sample_interior(rng)?;
        let u = sampling::unit_direction(rng, set.dim(), set.ambient_p());
        let x2 = &x1 + u * epsilon;
        set.is_member(&x2).then_some((x1, x2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    #[test]
    fn lp_modulus_examples() {
        let m = modulus_lp_ball(2.0, 2.0).unwrap();
        assert!((m.delta - 1.0).abs() < 1e-15);
        let m = modulus_lp_ball(2.0, 1.0).unwrap();
        assert!((m.delta - (1.0 - 3f64.sqrt() / 2.0)).abs() < 1e-15);
        assert!((m.delta - 0.1339746).abs() < 1e-7);
        assert!(modulus_lp_ball(2.0, 1e-9).unwrap().delta < 1e-17);
        let m = modulus_lp_ball(1.5, 1.0).unwrap();
        assert!((m.delta - 0.5 / 8.0).abs() < 1e-15);
        assert!((m.c - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn lp_modulus_errors() {
        assert!(matches!(modulus_lp_ball(1.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(modulus_lp_ball(0.5, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(modulus_lp_ball(2.0, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(modulus_lp_ball(2.0, 2.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn power2_constant_dominates_closed_form() {
        for p in [2.0, 3.0, 4.0, 1.2, 1.8] {
            let c = lp_power2_constant(p);
            for k in 1..=200 {
                let e = 2.0 * k as f64 / 200.0;
                assert!(lp_modulus_value(p, e) + 1e-15 >= c * e * e, "p={p} e={e}");
            }
        }
    }

    #[test]
    fn scaled_modulus_examples() {
        let m = modulus_scaled(0.125, 0.5, 0.2).unwrap();
        assert!((m.delta - 0.01).abs() < 1e-15);
        assert!((m.c - 0.25).abs() < 1e-15);
        assert!((modulus_scaled(0.125, 1.0, 0.3).unwrap().c - 0.125).abs() < 1e-15);
        for r in [0.1, 0.7, 3.0] {
            assert!((modulus_scaled(0.125, r, r).unwrap().c - 1.0 / (8.0 * r)).abs() < 1e-15);
        }
        assert!(modulus_scaled(0.125, 0.0, 0.1).is_err());
        assert!(modulus_scaled(-1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn sublevel_modulus_examples() {
        let m = modulus_sublevel(PowerModulus::quadratic(1.0), 2.0, 1.0).unwrap();
        assert!((m.delta - 0.125).abs() < 1e-15);
        assert!((m.c - 0.125).abs() < 1e-15);
        let m = modulus_sublevel(PowerModulus::quadratic(3.0), 5.0, 0.4).unwrap();
        assert!((m.c - 3.0 / 20.0).abs() < 1e-15);
        assert!(modulus_sublevel(PowerModulus::quadratic(1.0), 2.0, 1e-8).unwrap().delta < 1e-16);
        assert!(modulus_sublevel(PowerModulus::quadratic(1.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn intersection_rule() {
        assert_eq!(modulus_intersection(&[0.25, 0.125]).unwrap(), 0.125);
        assert_eq!(modulus_intersection(&[0.3]).unwrap(), 0.3);
        assert!(modulus_intersection(&[]).is_err());
        assert!(modulus_intersection(&[0.1, 0.0]).is_err());
    }

    #[test]
    fn membership_examples() {
        let disc = ConvexSet::euclidean_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let m = contains(&disc, &v(&[0.0, 0.0])).unwrap();
        assert!(m.inside && (m.margin - 1.0).abs() < 1e-15);
        let m = contains(&disc, &v(&[2.0, 0.0])).unwrap();
        assert!(!m.inside && (m.margin + 1.0).abs() < 1e-15);
        let lens = ConvexSet::ball_intersection(vec![v(&[-0.5, 0.0]), v(&[0.5, 0.0])], 1.0).unwrap();
        let m = contains(&lens, &v(&[0.0, 0.0])).unwrap();
        assert!(m.inside && (m.margin - 0.5).abs() < 1e-15);
        assert!(matches!(contains(&disc, &v(&[0.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_degenerate_sets() {
        assert!(ConvexSet::p_norm_ball(v(&[0.0]), 1.0, 1.0).is_err());
        assert!(ConvexSet::p_norm_ball(v(&[0.0]), 1.0, f64::INFINITY).is_err());
        assert!(ConvexSet::ball_intersection(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])], 1.0).is_err());
        assert!(ConvexSet::sublevel(Matrix::identity(2, 2), v(&[0.0, 0.0]), 0.0, -1.0).is_err());
    }

    #[test]
    fn ellipsoid_distance_matches_brute_force() {
        let a = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let b = v(&[0.3, -0.2]);
        let set = ConvexSet::sublevel(a, b, 0.1, 1.0).unwrap();
        let SetKind::Sublevel(q) = set.kind() else { unreachable!() };
        // Dense boundary trace as the oracle.
        let boundary: Vec<Vector> =
            sampling::sphere_directions(2, 200_000, 0).iter().map(|d| set.boundary_point(d)).collect();
        for (i, x) in
            [v(&[0.0, 0.0]), v(&[0.2, 0.3]), v(&[1.5, -1.0]), q.center().clone(), v(&[-0.4, 0.9])].iter().enumerate()
        {
            let brute = boundary.iter().map(|b| (b - x).norm()).fold(f64::INFINITY, f64::min);
            let sign = if q.value(x) <= q.alpha { 1.0 } else { -1.0 };
            let got = set.margin(x);
            assert!((got - sign * brute).abs() < 1e-6, "point {i}: {got} vs {}", sign * brute);
        }
    }

    #[test]
    fn sphere_margin_on_symmetric_axis() {
        // Centre of a round sublevel set: every component is degenerate.
        let set = ConvexSet::sublevel(Matrix::identity(3, 3) * 2.0, v(&[0.0, 0.0, 0.0]), 0.0, 1.0).unwrap();
        assert!((set.margin(&v(&[0.0, 0.0, 0.0])) - 1.0).abs() < 1e-12);
        assert!((set.margin(&v(&[0.5, 0.0, 0.0])) - 0.5).abs() < 1e-12);
        assert!((set.margin(&v(&[0.0, 2.0, 0.0])) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn boundary_points_have_zero_margin() {
        let sets = [
            ConvexSet::p_norm_ball(v(&[0.1, 0.2]), 0.7, 3.0).unwrap(),
            ConvexSet::ball_intersection(vec![v(&[-0.5, 0.0]), v(&[0.5, 0.1])], 1.0).unwrap(),
            ConvexSet::sublevel(Matrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.0]), v(&[0.1, 0.0]), 0.0, 0.5).unwrap(),
            ConvexSet::axis_box(v(&[0.0, 0.0]), v(&[1.0, 2.0])).unwrap(),
        ];
        for s in &sets {
            for d in sampling::sphere_directions(2, 64, 0) {
                assert!(s.margin(&s.boundary_point(&d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diameters() {
        let lens = ConvexSet::ball_intersection(vec![v(&[-0.5, 0.0]), v(&[0.5, 0.0])], 1.0).unwrap();
        assert!((lens.diameter() - 3f64.sqrt()).abs() < 1e-4);
        assert!(lens.diameter() <= 3f64.sqrt() + 1e-12);
        let e =
            ConvexSet::sublevel(Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]), v(&[0.0, 0.0]), 0.0, 1.0).unwrap();
        assert!((e.diameter() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_modulus_of_unit_disc() {
        let disc = ConvexSet::euclidean_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let est = empirical_modulus(&disc, 1.0, 10_000, 0.01, 1).unwrap();
        let exact = 1.0 - 3f64.sqrt() / 2.0;
        assert!(est.delta >= exact - 1e-9);
        assert!((est.delta - exact) / exact < 0.05);
        let tiny = empirical_modulus(&disc, 1e-4, 1000, 1e-6, 1).unwrap();
        assert!(tiny.delta < 1e-6);
    }

    #[test]
    fn empirical_modulus_of_half_disc_radius() {
        let disc = ConvexSet::euclidean_ball(v(&[0.3, -0.1]), 0.5).unwrap();
        let est = empirical_modulus(&disc, 0.2, 10_000, 0.002, 2).unwrap();
        assert!(est.delta >= modulus_scaled(0.125, 0.5, 0.2).unwrap().delta);
    }

    #[test]
    fn empirical_modulus_errors() {
        let disc = ConvexSet::euclidean_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(matches!(empirical_modulus(&disc, 3.0, 100, 0.01, 0), Err(Error::Domain { .. })));
        assert!(empirical_modulus(&disc, 1.0, 0, 0.01, 0).is_err());
    }

    #[test]
    fn extremality_examples() {
        let disc = ConvexSet::euclidean_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(extremality_check(&disc, 500, 0.01, 0).unwrap());
        let square = ConvexSet::axis_box(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        assert!(!extremality_check(&square, 500, 0.01, 0).unwrap());
        let lens = ConvexSet::ball_intersection(vec![v(&[-0.5, 0.0]), v(&[0.5, 0.0])], 1.0).unwrap();
        assert!(extremality_check(&lens, 500, 0.01, 0).unwrap());
        let cube = ConvexSet::axis_box(v(&[0.0, 0.0, 0.0]), v(&[1.0, 1.0, 1.0])).unwrap();
        assert!(!extremality_check(&cube, 300, 0.01, 0).unwrap());
        let ball3 = ConvexSet::p_norm_ball(v(&[0.0, 0.0, 0.0]), 1.0, 3.0).unwrap();
        assert!(extremality_check(&ball3, 300, 0.01, 0).unwrap());
        let high = ConvexSet::euclidean_ball(Vector::zeros(4), 1.0).unwrap();
        assert!(matches!(extremality_check(&high, 10, 0.01, 0), Err(Error::UnsupportedDimension(_))));
    }
}
