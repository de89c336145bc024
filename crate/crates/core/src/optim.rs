//! Problem (P): `min φ(x)` over `x ∈ S` with `g(x) ∈ C`, studied through the
//! image map `Φ_{x0}(x) = (φ(x) − φ(x0), g(x))`.
//!
//! Equality targets `Eq(v)` are handled internally by shifting `g ← g − v`,
//! which turns every target into a cone without changing the feasible set or
//! the multipliers.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{reg_bound, QuadraticComponent, SmoothMap};
use crate::certify::{certify_problem, default_region_radius, Certificate, CertifyOptions};
use crate::cone::{Component, Sign, TargetSet};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, SetKind};
use crate::linalg::{Matrix, Vector};
use crate::nlp::{self, Constraints, GlobalOptions, LocalResult, ScalarFn};
use crate::numfmt;
use crate::sampling;
use crate::trs;

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub phi: SmoothMap,
    /// `None` means no constraint map (`C` is the whole of `R⁰`).
    pub g: Option<SmoothMap>,
    pub set: ConvexSet,
    pub target: TargetSet,
    pub x0: Vector,
}

impl ProblemSpec {
    pub fn new(phi: SmoothMap, g: Option<SmoothMap>, set: ConvexSet, target: TargetSet, x0: Vector) -> Result<Self> {
        let n = set.dim();
        check_dim(n, phi.input_dim())?;
        check_dim(1, phi.output_dim())?;
        check_dim(n, x0.len())?;
        match &g {
            Some(g) => {
                check_dim(n, g.input_dim())?;
                check_dim(g.output_dim(), target.dim())?;
                let gx = g.eval(&x0)?;
                if target.distance(&gx) > 1e-8 * (1.0 + gx.amax()) {
                    return Err(Error::Infeasible(format!(
                        "base point is not feasible: dist(g(x0), C) = {:e}",
                        target.distance(&gx)
                    )));
                }
            }
            None => check_dim(0, target.dim())?,
        }
        Ok(Self { phi, g, set, target, x0 })
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// Number of constraint components `k`.
    pub fn constraint_dim(&self) -> usize {
        self.target.dim()
    }

    pub fn phi_value(&self, x: &Vector) -> Result<f64> {
        Ok(self.phi.eval(x)?[0])
    }

    pub fn g_value(&self, x: &Vector) -> Result<Vector> {
        match &self.g {
            Some(g) => g.eval(x),
            None => Ok(Vector::zeros(0)),
        }
    }

    /// `x ∈ S` and `dist(g(x), C) ≤ tol`.
    pub fn is_feasible(&self, x: &Vector, tol: f64) -> Result<bool> {
        Ok(self.set.margin(x) >= -tol && self.target.distance(&self.g_value(x)?) <= tol)
    }
}

/// `Φ_{x0}` together with `Q = (−∞, 0) × C`.
#[derive(Debug, Clone)]
pub struct ImageSpace {
    pub map: SmoothMap,
    pub target: TargetSet,
    pub phi_x0: f64,
}

impl ImageSpace {
    /// `z ∈ Q` up to `tol` on the `C` part; the first coordinate is strict.
    pub fn in_q(&self, z: &Vector, tol: f64) -> bool {
        z[0] < 0.0 && self.target.distance(&z.rows(1, z.len() - 1).into_owned()) <= tol
    }
}

pub fn build_image_map(p: &ProblemSpec) -> Result<ImageSpace> {
    let phi_x0 = p.phi_value(&p.x0)?;
    let n = p.dim();
    let k = p.constraint_dim();
    let quadratic = p.phi.components().zip(p.g.as_ref().map_or(Some(&[][..]), |g| g.components()));
    let map = match quadratic {
        Some((phi, g)) => {
            let mut comps = Vec::with_capacity(1 + k);
            let f = &phi[0];
            comps.push(QuadraticComponent::new(f.a.clone(), f.b.clone(), f.c - phi_x0));
            comps.extend(g.iter().cloned());
            SmoothMap::quadratic(n, comps)?
        }
        None => {
            let (phi_e, g_e) = (p.phi.clone(), p.g.clone());
            let (phi_j, g_j) = (p.phi.clone(), p.g.clone());
            SmoothMap::black_box(
                n,
                1 + k,
                move |x| {
                    let mut z = Vector::zeros(1 + k);
                    z[0] = phi_e.eval(x).map_or(f64::NAN, |v| v[0] - phi_x0);
                    if let Some(g) = &g_e {
                        let gx = g.eval(x).unwrap_or_else(|_| Vector::from_element(k, f64::NAN));
                        z.rows_mut(1, k).copy_from(&gx);
                    }
                    z
                },
                Some(Arc::new(move |x: &Vector| {
                    let mut j = Matrix::zeros(1 + k, n);
                    let nan = |r, c| Matrix::from_element(r, c, f64::NAN);
                    j.rows_mut(0, 1).copy_from(&phi_j.jacobian(x).unwrap_or_else(|_| nan(1, n)));
                    if let Some(g) = &g_j {
                        j.rows_mut(1, k).copy_from(&g.jacobian(x).unwrap_or_else(|_| nan(k, n)));
                    }
                    j
                })),
            )
        }
    };
    Ok(ImageSpace { map, target: p.target.clone(), phi_x0 })
}

/// `L(y*, x) = φ(x) + ⟨y*, g(x)⟩`.
pub fn lagrangian_eval(p: &ProblemSpec, y: &Vector, x: &Vector) -> Result<f64> {
    check_dim(p.constraint_dim(), y.len())?;
    Ok(p.phi_value(x)? + y.dot(&p.g_value(x)?))
}

/// Certificate for `Φ_{x0}` on `S ⊆ ball(x0, r0)`; `r0` defaults to the
/// smallest such radius.
pub fn certify_instance(p: &ProblemSpec, r0: Option<f64>, opts: &CertifyOptions) -> Result<Certificate> {
    let image = build_image_map(p)?;
    let r0 = r0.unwrap_or_else(|| default_region_radius(&p.set, &p.x0));
    certify_problem(&image.map, &p.set, &p.x0, r0, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Feasibility tolerance.
    pub tol: f64,
    /// Tolerance of the Lagrangian and saddle verifications.
    pub verify_tol: f64,
    pub seed: u64,
    pub global: GlobalOptions,
    /// Cap on `|y_i|` for the multiplier and dual searches.
    pub multiplier_cap: f64,
    pub saddle_samples: usize,
    pub nonopt_radii: Vec<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            verify_tol: 1e-6,
            seed: 0,
            global: GlobalOptions::default(),
            multiplier_cap: 65536.0,
            saddle_samples: 2000,
            nonopt_radii: vec![0.1, 0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub x_bar: Vec<f64>,
    pub phi_value: f64,
    pub multiplier: Option<Vec<f64>>,
    #[serde(serialize_with = "numfmt::float")]
    pub multiplier_residual: f64,
    /// Distance from `x_bar` to the boundary of `S`.
    pub boundary_distance: f64,
    #[serde(serialize_with = "numfmt::opt_float")]
    pub duality_gap: Option<f64>,
    pub gap_truncated: bool,
    pub saddle_ok: bool,
    pub lagrangian_min_ok: bool,
    /// `None` when the check's preconditions fail and it is skipped.
    pub interior_nonopt_ok: Option<bool>,
    pub certified: bool,
}

/// Internal form with shifted equality targets: `g̃ = g − v`, `C̃` a cone.
struct Prepared<'a> {
    p: &'a ProblemSpec,
    phi: ScalarFn,
    g: Vec<ScalarFn>,
    cone: TargetSet,
    set_cons: Vec<ScalarFn>,
}

impl<'a> Prepared<'a> {
    fn new(p: &'a ProblemSpec) -> Self {
        let phi = ScalarFn::component(&p.phi, 0);
        let g = match &p.g {
            Some(map) => p
                .target
                .components
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let gi = ScalarFn::component(map, i);
                    match c {
                        Component::Eq(v) if *v != 0.0 => shift(gi, *v),
                        _ => gi,
                    }
                })
                .collect(),
            None => Vec::new(),
        };
        let cone = TargetSet::new(
            p.target
                .components
                .iter()
                .map(|c| match c {
                    Component::Eq(_) => Component::Eq(0.0),
                    other => *other,
                })
                .collect(),
        );
        Self { p, phi, g, cone, set_cons: nlp::set_constraints(&p.set) }
    }

    fn g_value(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.g.len(), self.g.iter().map(|f| f.value(x)))
    }

    fn constraints(&self) -> Constraints {
        let mut cons = Constraints { eq: Vec::new(), ineq: self.set_cons.clone() };
        for (gi, c) in self.g.iter().zip(&self.cone.components) {
            match c {
                Component::Eq(_) => cons.eq.push(gi.clone()),
                Component::Le => cons.ineq.push(gi.clone()),
                Component::Ge => cons.ineq.push(ScalarFn::combination(vec![(-1.0, gi.clone())])),
                Component::Free => {}
            }
        }
        cons
    }

    fn lagrangian(&self, y: &Vector) -> ScalarFn {
        let mut terms = vec![(1.0, self.phi.clone())];
        for (w, gi) in y.iter().zip(&self.g) {
            if *w != 0.0 {
                terms.push((*w, gi.clone()));
            }
        }
        ScalarFn::combination(terms)
    }

    fn lagrangian_at(&self, y: &Vector, x: &Vector) -> f64 {
        self.phi.value(x) + y.dot(&self.g_value(x))
    }

    /// `min_{x ∈ S} L̃(y, x)`: exact trust-region solve for quadratic data on
    /// balls and ellipsoids, multi-start otherwise. `hints` are always
    /// candidates, so the result never exceeds `L̃(y, hint)`.
    fn inner_min(&self, y: &Vector, hints: &[Vector], global: &GlobalOptions) -> (Vector, f64) {
        let l = self.lagrangian(y);
        let mut best: Option<(Vector, f64)> = None;
        let mut offer = |x: Vector, v: f64| {
            if v.is_finite() && best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((x, v));
            }
        };
        let exact = l.as_quadratic().and_then(|q| match self.p.set.kind() {
            SetKind::PNormBall { center, radius, p } if *p == 2.0 => {
                Some(trs::minimize_on_ball(&q.a, &q.b, q.c, center, *radius))
            }
            SetKind::BallIntersection { centers, radius } if centers.len() == 1 => {
                Some(trs::minimize_on_ball(&q.a, &q.b, q.c, &centers[0], *radius))
            }
            SetKind::Sublevel(s) => Some(trs::minimize_on_ellipsoid(&q.a, &q.b, q.c, &s.a, s.center(), s.level())),
            _ => None,
        });
        match exact {
            Some(sol) => offer(sol.x, sol.value),
            None => {
                let cons = Constraints { eq: Vec::new(), ineq: self.set_cons.clone() };
                let (lo, hi) = self.p.set.bounding_box();
                if let Some(r) = nlp::global_minimize(&l, &cons, lo, hi, hints, global) {
                    offer(r.x, r.value);
                }
            }
        }
        for h in hints {
            offer(h.clone(), l.value(h));
        }
        best.expect("hints are finite or a minimizer exists")
    }
}

fn shift(f: ScalarFn, v: f64) -> ScalarFn {
    match f {
        ScalarFn::Quadratic(q) => ScalarFn::Quadratic(QuadraticComponent::new(q.a, q.b, q.c - v)),
        other => {
            let n = match &other {
                ScalarFn::MapComponent { map, .. } => map.input_dim(),
                _ => unreachable!("constraint components are quadratic or map components"),
            };
            let constant = ScalarFn::Quadratic(QuadraticComponent::linear(Vector::zeros(n), -v));
            ScalarFn::Sum(vec![(1.0, other), (1.0, constant)])
        }
    }
}

/// Global minimizer of (P) by projected low-discrepancy seeding and
/// augmented-Lagrangian polish. Fills `x_bar`, `phi_value` and
/// `boundary_distance`; the verification fields are left unset.
pub fn global_solve(p: &ProblemSpec, opts: &SolveOptions) -> Result<SolveReport> {
    let prep = Prepared::new(p);
    let best = solve_prepared(&prep, opts)?;
    Ok(partial_report(p, &best))
}

fn solve_prepared(prep: &Prepared<'_>, opts: &SolveOptions) -> Result<LocalResult> {
    let p = prep.p;
    let cons = prep.constraints();
    let (lo, hi) = p.set.bounding_box();
    let mut extra = Vec::new();
    if p.is_feasible(&p.x0, opts.tol)? {
        extra.push(p.x0.clone());
    }
    let global = GlobalOptions { feas_tol: opts.tol, ..opts.global };
    let best = nlp::global_minimize(&prep.phi, &cons, lo, hi, &extra, &global)
        .ok_or_else(|| Error::Infeasible("no feasible point found in S ∩ g⁻¹(C)".into()))?;
    if !p.is_feasible(&best.x, opts.tol)? {
        return Err(Error::Infeasible("local polish did not reach feasibility".into()));
    }
    Ok(best)
}

fn partial_report(p: &ProblemSpec, best: &LocalResult) -> SolveReport {
    SolveReport {
        x_bar: best.x.iter().copied().collect(),
        phi_value: best.value,
        multiplier: None,
        multiplier_residual: f64::NEG_INFINITY,
        boundary_distance: p.set.margin(&best.x).abs(),
        duality_gap: None,
        gap_truncated: false,
        saddle_ok: false,
        lagrangian_min_ok: false,
        interior_nonopt_ok: None,
        certified: false,
    }
}

/// Outcome of a multiplier search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierSearch {
    /// Best multiplier found (the verified one when `ok`).
    pub y: Vec<f64>,
    /// `min_S L(y, ·) − L(y, x̄)`; nonpositive, zero for an exact multiplier.
    pub residual: f64,
    pub ok: bool,
    /// The search hit the cap while the residual was still rising.
    pub exhausted: bool,
}

/// Maximizes a concave function over a sign-constrained box by cyclic
/// per-coordinate bisection on the sign of a supergradient, expanding the
/// bracket by doubling up to `cap`.
fn maximize_concave(
    eval: &dyn Fn(&Vector) -> (f64, Vector),
    signs: &[Sign],
    y0: Vector,
    cap: f64,
    stop: &dyn Fn(f64) -> bool,
) -> (Vector, f64, bool) {
    let k = signs.len();
    let mut y = Vector::from_iterator(
        k,
        (0..k).map(|i| {
            let (lo, hi) = signs[i].range(cap);
            y0[i].clamp(lo, hi)
        }),
    );
    let (mut best_v, mut sg) = eval(&y);
    let mut best_y = y.clone();
    let mut truncated = false;
    let sweeps = if k <= 1 { 1 } else { 30 };
    for _ in 0..sweeps {
        if stop(best_v) {
            break;
        }
        let start = best_v;
        for i in 0..k {
            let (lo, hi) = signs[i].range(cap);
            if lo == hi {
                continue;
            }
            let mut probe = |t: f64, y: &mut Vector| -> f64 {
                y[i] = t;
                let (v, s) = eval(y);
                if v > best_v {
                    best_v = v;
                    best_y = y.clone();
                }
                s[i]
            };
            let dir = sg[i];
            if dir == 0.0 {
                continue;
            }
            // Bracket [a, b] with the supergradient changing sign, in the ascent direction.
            let up = dir > 0.0;
            let mut a = y[i];
            let mut step = 1f64.max(a.abs());
            let mut b;
            loop {
                b = if up { (a + step).min(hi) } else { (a - step).max(lo) };
                let s = probe(b, &mut y);
                if (up && s <= 0.0) || (!up && s >= 0.0) {
                    break;
                }
                if b == hi || b == lo {
                    truncated |= b.abs() >= cap;
                    break;
                }
                a = b;
                step *= 2.0;
            }
            for _ in 0..200 {
                if (b - a).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
                    break;
                }
                let mid = 0.5 * (a + b);
                let s = probe(mid, &mut y);
                if (s > 0.0) == up && s != 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            y = best_y.clone();
            sg = eval(&y).1;
        }
        if best_v - start <= 1e-14 * (1.0 + best_v.abs()) {
            break;
        }
    }
    (best_y, best_v, truncated)
}

fn global_for_inner(opts: &SolveOptions) -> GlobalOptions {
    GlobalOptions { seeds: opts.global.seeds.min(1024), polish: opts.global.polish.min(12), feas_tol: 1e-10 }
}

/// Searches `y* ∈ N_C(g(x̄))` with `min_S L(y*, ·) ≥ L(y*, x̄) − tol`.
pub fn find_multiplier(p: &ProblemSpec, x_bar: &Vector, opts: &SolveOptions) -> Result<MultiplierSearch> {
    check_dim(p.dim(), x_bar.len())?;
    let prep = Prepared::new(p);
    let k = p.constraint_dim();
    let gbar = prep.g_value(x_bar);
    let signs = prep.cone.normal_cone_signs(&gbar, opts.tol.max(1e-9));
    // KKT multipliers of a local solve started at x̄ seed the search.
    let local = nlp::local_solve(&prep.phi, &prep.constraints(), x_bar);
    let mut seed = Vector::zeros(k);
    let (mut ie, mut ii) = (0, prep.set_cons.len());
    for (i, c) in prep.cone.components.iter().enumerate() {
        match c {
            Component::Eq(_) => {
                seed[i] = local.lambda.get(ie).copied().unwrap_or(0.0);
                ie += 1;
            }
            Component::Le => {
                seed[i] = local.mu.get(ii).copied().unwrap_or(0.0);
                ii += 1;
            }
            Component::Ge => {
                seed[i] = -local.mu.get(ii).copied().unwrap_or(0.0);
                ii += 1;
            }
            Component::Free => {}
        }
    }
    if !seed.iter().all(|v| v.is_finite()) {
        seed.fill(0.0);
    }
    let global = global_for_inner(opts);
    let hints = [x_bar.clone()];
    let eval = |y: &Vector| -> (f64, Vector) {
        let (x, v) = prep.inner_min(y, &hints, &global);
        (v - prep.lagrangian_at(y, x_bar), prep.g_value(&x) - &gbar)
    };
    let tol = opts.verify_tol;
    let (y, residual, exhausted) = maximize_concave(&eval, &signs, seed, opts.multiplier_cap, &|v| v >= -tol);
    Ok(MultiplierSearch { y: y.iter().copied().collect(), residual, ok: residual >= -tol, exhausted })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    /// `inf_x sup_y L`: the optimal value of (P).
    pub primal: f64,
    /// `sup_{y ∈ C^⊖} inf_{x ∈ S} L`.
    pub dual: f64,
    pub gap: f64,
    pub y_dual: Vec<f64>,
    pub truncated: bool,
}

/// Duality gap with the primal value taken at the global solution `x_bar`.
pub fn duality_gap_at(p: &ProblemSpec, x_bar: &Vector, opts: &SolveOptions) -> Result<GapEstimate> {
    check_dim(p.dim(), x_bar.len())?;
    let prep = Prepared::new(p);
    let primal = p.phi_value(x_bar)?;
    let signs = prep.cone.dual_cone_signs();
    let global = global_for_inner(opts);
    let hints = [x_bar.clone()];
    let eval = |y: &Vector| -> (f64, Vector) {
        let (x, v) = prep.inner_min(y, &hints, &global);
        (v, prep.g_value(&x))
    };
    let k = p.constraint_dim();
    let tiny = 1e-12 * (1.0 + primal.abs());
    let (y, dual, truncated) =
        maximize_concave(&eval, &signs, Vector::zeros(k), opts.multiplier_cap, &|v| v >= primal - tiny);
    Ok(GapEstimate { primal, dual, gap: primal - dual, y_dual: y.iter().copied().collect(), truncated })
}

/// Solves (P) and returns the duality gap estimate.
pub fn duality_gap(p: &ProblemSpec, opts: &SolveOptions) -> Result<GapEstimate> {
    let report = global_solve(p, opts)?;
    duality_gap_at(p, &Vector::from_vec(report.x_bar), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleCheck {
    pub ok: bool,
    /// Worst `L(y, x̄) − L(y*, x̄)` over sampled `y ∈ C^⊖`.
    pub left_violation: f64,
    /// Worst `L(y*, x̄) − L(y*, x)` over sampled `x ∈ S`.
    pub right_violation: f64,
}

/// `L(y, x̄) ≤ L(y*, x̄) ≤ L(y*, x)` on sampled `y ∈ C^⊖` and `x ∈ S`.
pub fn saddle_check(p: &ProblemSpec, x_bar: &Vector, y_star: &Vector, opts: &SolveOptions) -> Result<SaddleCheck> {
    check_dim(p.dim(), x_bar.len())?;
    check_dim(p.constraint_dim(), y_star.len())?;
    let prep = Prepared::new(p);
    let centre = prep.lagrangian_at(y_star, x_bar);
    let bound = 4.0 * y_star.amax().max(1.0);
    let signs = prep.cone.dual_cone_signs();
    let mut rng = sampling::rng(opts.seed);
    let k = signs.len();
    let mut left = f64::NEG_INFINITY;
    for _ in 0..opts.saddle_samples {
        let lo = Vector::from_iterator(k, signs.iter().map(|s| s.range(bound).0));
        let hi = Vector::from_iterator(k, signs.iter().map(|s| s.range(bound).1));
        let y = sampling::uniform_in_box(&mut rng, &lo, &hi);
        left = left.max(prep.lagrangian_at(&y, x_bar) - centre);
    }
    let (_, inner) = prep.inner_min(y_star, std::slice::from_ref(x_bar), &global_for_inner(opts));
    let mut right = centre - inner;
    let l = prep.lagrangian(y_star);
    let (lo, hi) = p.set.bounding_box();
    let mut drawn = 0;
    let mut index = 0u64;
    while drawn < opts.saddle_samples && index < 64 * opts.saddle_samples as u64 {
        let x = sampling::halton_in_box(index, lo, hi);
        index += 1;
        if p.set.is_member(&x) {
            drawn += 1;
            right = right.max(centre - l.value(&x));
        }
    }
    let tol = opts.verify_tol;
    Ok(SaddleCheck { ok: left <= tol && right <= tol, left_violation: left, right_violation: right })
}

/// For each radius, looks for a feasible point of `ball(x0, r) ∩ S` with
/// `φ(x) < φ(x0) − 1e-9·(1 + |φ(x0)|)`. Returns `None` (skipped) unless
/// `reg(Φ_{x0}; x0)` is finite and `x0 ∈ int S`.
pub fn interior_nonoptimality_check(p: &ProblemSpec, radii: &[f64], opts: &SolveOptions) -> Result<Option<bool>> {
    let image = build_image_map(p)?;
    if !reg_bound(&image.map, &p.x0)?.is_finite() || p.set.margin(&p.x0) <= 0.0 {
        return Ok(None);
    }
    let prep = Prepared::new(p);
    let phi0 = image.phi_x0;
    let margin = 1e-9 * (1.0 + phi0.abs());
    let n = p.dim();
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
        }
        let mut cons = prep.constraints();
        cons.ineq.push(ScalarFn::Quadratic(QuadraticComponent::new(
            Matrix::identity(n, n),
            -&p.x0,
            0.5 * (p.x0.norm_squared() - r * r),
        )));
        let lo = p.x0.map(|t| t - r);
        let hi = p.x0.map(|t| t + r);
        let global = GlobalOptions { feas_tol: opts.tol, ..global_for_inner(opts) };
        let found = nlp::global_minimize(&prep.phi, &cons, &lo, &hi, std::slice::from_ref(&p.x0), &global)
            .is_some_and(|best| best.value < phi0 - margin);
        if !found {
            return Ok(Some(false));
        }
    }
    Ok(Some(true))
}

/// The full chain: global solve, multiplier, saddle point, duality gap and
/// the interior non-optimality check. `certified` is recorded as given.
pub fn solve(p: &ProblemSpec, certified: bool, opts: &SolveOptions) -> Result<SolveReport> {
    let prep = Prepared::new(p);
    let best = solve_prepared(&prep, opts)?;
    let mut report = partial_report(p, &best);
    report.certified = certified;
    let x_bar = best.x;
    let mult = find_multiplier(p, &x_bar, opts)?;
    report.multiplier_residual = mult.residual;
    report.lagrangian_min_ok = mult.ok;
    report.multiplier = Some(mult.y.clone());
    report.saddle_ok = mult.ok && saddle_check(p, &x_bar, &Vector::from_vec(mult.y), opts)?.ok;
    let gap = duality_gap_at(p, &x_bar, opts)?;
    report.duality_gap = Some(gap.gap);
    report.gap_truncated = gap.truncated;
    report.interior_nonopt_ok = interior_nonoptimality_check(p, &opts.nonopt_radii, opts)?;
    Ok(report)
}
