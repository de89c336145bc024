//! Smooth maps `Rⁿ → Rᵐ`, their derivatives and the constants that feed the
//! convexity certificate: the exact regularity bound `reg(f; x0)` and the
//! Lipschitz constant of `Df`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::geometry::ConvexSet;
use crate::linalg::{is_symmetric, op_norm, singular_values, Matrix, Vector};
use crate::sampling;

/// `f_i(x) = ½xᵀA x + bᵀx + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticComponent {
    pub a: Matrix,
    pub b: Vector,
    pub c: f64,
}

impl QuadraticComponent {
    pub fn new(a: Matrix, b: Vector, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn linear(b: Vector, c: f64) -> Self {
        let n = b.len();
        Self { a: Matrix::zeros(n, n), b, c }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.a * x + &self.b
    }
}

pub type EvalFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

#[derive(Clone)]
pub enum MapKind {
    Quadratic(Vec<QuadraticComponent>),
    BlackBox { eval: EvalFn, jacobian: Option<JacobianFn> },
}

/// A `C^{1,1}` map from `Rⁿ` to `Rᵐ`.
#[derive(Clone)]
pub struct SmoothMap {
    kind: MapKind,
    n: usize,
    m: usize,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MapKind::Quadratic(c) => {
                f.debug_struct("SmoothMap").field("n", &self.n).field("m", &self.m).field("components", c).finish()
            }
            MapKind::BlackBox { jacobian, .. } => f
                .debug_struct("SmoothMap")
                .field("n", &self.n)
                .field("m", &self.m)
                .field("analytic_jacobian", &jacobian.is_some())
                .finish_non_exhaustive(),
        }
    }
}

impl SmoothMap {
    pub fn quadratic(n: usize, components: Vec<QuadraticComponent>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("input dimension must be positive".into()));
        }
        for (i, comp) in components.iter().enumerate() {
            if comp.a.nrows() != n || comp.a.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: comp.a.nrows().max(comp.a.ncols()) });
            }
            check_dim(n, comp.b.len())?;
            if !is_symmetric(&comp.a) {
                return Err(Error::AsymmetricMatrix { component: i });
            }
        }
        Ok(Self { m: components.len(), kind: MapKind::Quadratic(components), n })
    }

    pub fn black_box(
        n: usize,
        m: usize,
        eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jacobian: Option<JacobianFn>,
    ) -> Self {
        Self { kind: MapKind::BlackBox { eval: Arc::new(eval), jacobian }, n, m }
    }

    pub fn identity(n: usize) -> Self {
        let comps = (0..n)
            .map(|i| {
                let mut b = Vector::zeros(n);
                b[i] = 1.0;
                QuadraticComponent::linear(b, 0.0)
            })
            .collect();
        Self::quadratic(n, comps).expect("identity is well formed")
    }

    /// Affine map `x ↦ M x + t`.
    pub fn affine(m: &Matrix, t: &Vector) -> Result<Self> {
        check_dim(m.nrows(), t.len())?;
        let comps = (0..m.nrows()).map(|i| QuadraticComponent::linear(m.row(i).transpose(), t[i])).collect();
        Self::quadratic(m.ncols(), comps)
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> Option<&[QuadraticComponent]> {
        match &self.kind {
            MapKind::Quadratic(c) => Some(c),
            MapKind::BlackBox { .. } => None,
        }
    }

    /// Same map evaluated through the black-box path with finite-difference
    /// derivatives. Used to cross-check the analytic route.
    pub fn as_black_box(&self) -> Self {
        let inner = self.clone();
        Self::black_box(self.n, self.m, move |x| inner.eval_unchecked(x), None)
    }

    fn eval_unchecked(&self, x: &Vector) -> Vector {
        match &self.kind {
            MapKind::Quadratic(comps) => Vector::from_iterator(self.m, comps.iter().map(|c| c.value(x))),
            MapKind::BlackBox { eval, .. } => eval(x),
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.n, x.len())?;
        let y = self.eval_unchecked(x);
        check_dim(self.m, y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("map evaluation"));
        }
        Ok(y)
    }

    /// `m × n` Jacobian: analytic rows `(A_i x + b_i)ᵀ` for quadratic maps,
    /// the supplied Jacobian or central differences for black boxes.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.n, x.len())?;
        let j = match &self.kind {
            MapKind::Quadratic(comps) => {
                let mut j = Matrix::zeros(self.m, self.n);
                for (i, c) in comps.iter().enumerate() {
                    j.set_row(i, &c.gradient(x).transpose());
                }
                j
            }
            MapKind::BlackBox { jacobian: Some(jac), .. } => jac(x),
            MapKind::BlackBox { .. } => finite_difference_jacobian(self, x)?,
        };
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("jacobian"));
        }
        Ok(j)
    }

    /// Second derivative of component `i`.
    pub fn hessian(&self, i: usize, x: &Vector) -> Result<Matrix> {
        match &self.kind {
            MapKind::Quadratic(comps) => Ok(comps[i].a.clone()),
            MapKind::BlackBox { .. } => {
                let n = self.n;
                let h = f64::EPSILON.cbrt() * x.norm().max(1.0);
                let mut hess = Matrix::zeros(n, n);
                for k in 0..n {
                    let mut e = Vector::zeros(n);
                    e[k] = h;
                    let gp = self.jacobian(&(x + &e))?.row(i).transpose();
                    let gm = self.jacobian(&(x - &e))?.row(i).transpose();
                    hess.set_column(k, &((gp - gm) / (2.0 * h)));
                }
                Ok((&hess + hess.transpose()) * 0.5)
            }
        }
    }
}

/// Central differences with step `ε_mach^{1/3}·max(1, ‖x‖)`.
pub fn finite_difference_jacobian(f: &SmoothMap, x: &Vector) -> Result<Matrix> {
    check_dim(f.input_dim(), x.len())?;
    let h = f64::EPSILON.cbrt() * x.norm().max(1.0);
    let mut j = Matrix::zeros(f.output_dim(), f.input_dim());
    for k in 0..f.input_dim() {
        let mut e = Vector::zeros(f.input_dim());
        e[k] = h;
        let fp = f.eval(&(x + &e))?;
        let fm = f.eval(&(x - &e))?;
        j.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    Ok(j)
}

/// Euclidean ball `ball(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Region {
    pub fn new(center: &Vector, radius: f64) -> Self {
        Self { center: center.iter().copied().collect(), radius }
    }

    pub fn center(&self) -> Vector {
        Vector::from_vec(self.center.clone())
    }

    pub fn contains(&self, x: &Vector) -> bool {
        (x - self.center()).norm() <= self.radius * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzMethod {
    ExactQuadratic,
    /// Lower estimate from random pairs.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzBound {
    pub value: f64,
    pub region: Region,
    pub method: LipschitzMethod,
}

/// `reg(f; x0)`: `+∞` exactly when `Df(x0)` is not onto.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityBound {
    pub value: f64,
    pub x0: Vec<f64>,
    pub surjective: bool,
}

impl RegularityBound {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

pub fn eval_map(f: &SmoothMap, x: &Vector) -> Result<Vector> {
    f.eval(x)
}

pub fn jacobian(f: &SmoothMap, x: &Vector) -> Result<Matrix> {
    f.jacobian(x)
}

/// Norm of the linear part of `Df` for a quadratic map: the matrix with rows
/// `(A_i u)ᵀ`, at a unit direction `u`.
fn second_derivative_norm(comps: &[QuadraticComponent], u: &Vector) -> f64 {
    let n = u.len();
    let mut m = Matrix::zeros(comps.len(), n);
    for (i, c) in comps.iter().enumerate() {
        m.set_row(i, &(&c.a * u).transpose());
    }
    op_norm(&m)
}

const SPHERE_DIRECTIONS: usize = 10_000;

/// Lipschitz constant of `Df` on `region`.
///
/// Quadratic maps have affine `Df`, so the constant is
/// `max_{‖u‖=1} ‖u ↦ (A_i u)_i‖`, found by a quasi-uniform sphere search
/// followed by coordinate ascent (global for n ≤ 3). Black boxes fall back to
/// [`lip_derivative_sampled`].
pub fn lip_derivative(f: &SmoothMap, region: &Region) -> Result<LipschitzBound> {
    check_dim(f.input_dim(), region.center.len())?;
    if !(region.radius > 0.0) {
        return Err(Error::InvalidParameter("region radius must be positive".into()));
    }
    let Some(comps) = f.components() else {
        return lip_derivative_sampled(f, region, 10_000, 0);
    };
    let n = f.input_dim();
    if comps.iter().all(|c| c.a.iter().all(|v| *v == 0.0)) {
        return Ok(LipschitzBound { value: 0.0, region: region.clone(), method: LipschitzMethod::ExactQuadratic });
    }
    let dirs = sampling::sphere_directions(n, SPHERE_DIRECTIONS, 0);
    let mut scored: Vec<(f64, usize)> =
        dirs.par_iter().enumerate().map(|(k, u)| (second_derivative_norm(comps, u), k)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = scored[0].0;
    for &(_, k) in scored.iter().take(8) {
        let mut u = dirs[k].clone();
        let mut val = second_derivative_norm(comps, &u);
        let mut step = 0.05;
        while step > 1e-13 {
            let mut improved = false;
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut w = u.clone();
                    w[i] += sign * step;
                    let w = w.normalize();
                    let v = second_derivative_norm(comps, &w);
                    if v > val {
                        val = v;
                        u = w;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(val);
    }
    Ok(LipschitzBound { value: best, region: region.clone(), method: LipschitzMethod::ExactQuadratic })
}

/// `max ‖Df(x) − Df(y)‖ / ‖x − y‖` over random pairs in `region`; a lower
/// estimate of the Lipschitz constant.
pub fn lip_derivative_sampled(f: &SmoothMap, region: &Region, samples: usize, seed: u64) -> Result<LipschitzBound> {
    check_dim(f.input_dim(), region.center.len())?;
    if !(region.radius > 0.0) {
        return Err(Error::InvalidParameter("region radius must be positive".into()));
    }
    let n = f.input_dim();
    let c = region.center();
    let shards = 16usize;
    let per = samples.div_ceil(shards);
    let best = (0..shards)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let mut rng = sampling::shard_rng(seed, s as u64);
            let mut best = 0.0f64;
            let ball = |rng: &mut sampling::SeededRng| {
                let u = sampling::unit_direction(rng, n, 2.0);
                let r: f64 = rand::Rng::random::<f64>(rng).powf(1.0 / n as f64);
                &c + u * (r * region.radius)
            };
            for _ in 0..per {
                let x = ball(&mut rng);
                let y = ball(&mut rng);
                let d = (&x - &y).norm();
                if d < 1e-9 * region.radius {
                    continue;
                }
                let diff = f.jacobian(&x)? - f.jacobian(&y)?;
                best = best.max(op_norm(&diff) / d);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(LipschitzBound { value: best, region: region.clone(), method: LipschitzMethod::Sampled })
}

/// Relative rank tolerance: `σ_min ≤ 1e-10·σ_max` means not onto.
pub const RANK_TOL: f64 = 1e-10;

/// `1/σ_min(Df(x0))`, the exact regularity bound in Euclidean coordinates.
pub fn reg_bound(f: &SmoothMap, x0: &Vector) -> Result<RegularityBound> {
    if f.output_dim() > f.input_dim() {
        return Err(Error::NotOnto(format!(
            "a map R^{} → R^{} cannot have a surjective derivative",
            f.input_dim(),
            f.output_dim()
        )));
    }
    let j = f.jacobian(x0)?;
    let s = singular_values(&j);
    let x0v: Vec<f64> = x0.iter().copied().collect();
    let (smax, smin) = match (s.first(), s.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Ok(RegularityBound { value: 0.0, x0: x0v, surjective: true }),
    };
    if smax == 0.0 || smin <= RANK_TOL * smax {
        return Ok(RegularityBound { value: f64::INFINITY, x0: x0v, surjective: false });
    }
    Ok(RegularityBound { value: 1.0 / smin, x0: x0v, surjective: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MidpointDefect {
    pub defect: f64,
    pub bound: f64,
    pub ok: bool,
}

/// `‖(f(x1) + f(x2))/2 − f((x1 + x2)/2)‖` against `lip(Df)/8 · ‖x1 − x2‖²`.
pub fn midpoint_defect_check(f: &SmoothMap, x1: &Vector, x2: &Vector, lip: &LipschitzBound) -> Result<MidpointDefect> {
    check_dim(f.input_dim(), x1.len())?;
    check_dim(f.input_dim(), x2.len())?;
    if !lip.region.contains(x1) || !lip.region.contains(x2) {
        return Err(Error::OutsideRegion);
    }
    let mid = (x1 + x2) * 0.5;
    let defect = ((f.eval(x1)? + f.eval(x2)?) * 0.5 - f.eval(&mid)?).norm();
    let bound = lip.value / 8.0 * (x1 - x2).norm_squared();
    Ok(MidpointDefect { defect, bound, ok: defect <= bound + 1e-9 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageDiameterBound {
    /// `sup_{x ∈ S} ‖Df(x)‖`.
    pub sup_derivative: f64,
    /// `sup ‖Df‖ · diam S`, an upper bound on `diam f(S)`.
    pub bound: f64,
    /// `sup ‖Df‖ + 1`.
    pub beta: f64,
}

/// Sampled and refined `sup_{x ∈ S} ‖Df(x)‖`, with the resulting bound on
/// `diam f(S)`.
pub fn image_diameter_bound(f: &SmoothMap, set: &ConvexSet) -> Result<ImageDiameterBound> {
    check_dim(f.input_dim(), set.dim())?;
    let n = set.dim();
    let norm_at = |x: &Vector| f.jacobian(x).map(|j| op_norm(&j));
    if let Some(comps) = f.components() {
        if comps.iter().all(|c| c.a.iter().all(|v| *v == 0.0)) {
            let s = norm_at(set.interior_point())?;
            return Ok(ImageDiameterBound { sup_derivative: s, bound: s * set.diameter(), beta: s + 1.0 });
        }
    }
    let count = match n {
        1 => 2,
        2 => 2048,
        3 => 4096,
        _ => 8192,
    };
    let dirs = sampling::sphere_directions(n, count, 3);
    let mut scored: Vec<(f64, usize)> = dirs
        .par_iter()
        .enumerate()
        .map(|(k, v)| norm_at(&set.boundary_point(v)).map(|s| (s, k)))
        .collect::<Result<_>>()?;
    let (lo, hi) = set.bounding_box();
    let mut best = 0.0f64;
    for i in 0..1024u64 {
        let x = sampling::halton_in_box(i, lo, hi);
        if set.is_member(&x) {
            best = best.max(norm_at(&x)?);
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    best = best.max(scored[0].0);
    // Local ascent over boundary directions (quadratic maps have convex ‖Df‖,
    // so the supremum sits on the boundary).
    for &(_, k) in scored.iter().take(4) {
        let mut v = dirs[k].clone();
        let mut val = norm_at(&set.boundary_point(&v))?;
        let mut step = 0.05;
        while step > 1e-10 {
            let mut improved = false;
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut w = v.clone();
                    w[i] += sign * step;
                    let w = w.normalize();
                    let s = norm_at(&set.boundary_point(&w))?;
                    if s > val {
                        val = s;
                        v = w;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(val);
    }
    Ok(ImageDiameterBound { sup_derivative: best, bound: best * set.diameter(), beta: best + 1.0 })
}
