//! The convexity certificate: `f(S)` is uniformly convex when
//!
//! ```text
//! reg(f; x0) · lip(Df) / 8 < c,     δ_S(ε) ≥ c ε²,
//! ```
//!
//! and then `δ_{f(S)}(ε) ≥ (σ η / β²) ε²`.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{
    image_diameter_bound, lip_derivative, reg_bound, LipschitzBound, Region, RegularityBound, SmoothMap,
};
use crate::error::{check_dim, Error, Result};
use crate::geometry::ConvexSet;
use crate::linalg::{min_norm_solve, Vector};
use crate::numfmt;
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Failure {
    /// `Df(x0)` is not onto, so `reg = +∞`.
    NotSurjective,
    /// `reg·lip/8 ≥ c`.
    ConditionViolated,
    /// The set carries no power-2 modulus constant (`c = 0`).
    NoPower2Modulus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub c: f64,
    #[serde(serialize_with = "numfmt::float")]
    pub reg: f64,
    pub lip: f64,
    pub r0: f64,
    #[serde(serialize_with = "numfmt::float")]
    pub condition_lhs: f64,
    pub certified: bool,
    #[serde(serialize_with = "numfmt::opt_float")]
    pub rho: Option<f64>,
    pub image_modulus_constant: f64,
    #[serde(serialize_with = "numfmt::opt_float")]
    pub sigma: Option<f64>,
    #[serde(serialize_with = "numfmt::opt_float")]
    pub eta: Option<f64>,
    #[serde(serialize_with = "numfmt::opt_float")]
    pub beta: Option<f64>,
    pub failure: Option<Failure>,
}

/// Strict inequality with a floating-point margin of `1e-12·max(1, c)`.
fn strictly_below(lhs: f64, c: f64) -> bool {
    lhs < c && lhs <= c - 1e-12 * c.max(1.0)
}

/// Checks `reg·lip/8 < c` and returns the partial certificate.
pub fn check_condition(c: f64, reg: &RegularityBound, lip: &LipschitzBound) -> Result<Certificate> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("modulus constant must be positive, got {c}")));
    }
    let (lhs, certified, failure) = if !reg.is_finite() {
        (f64::INFINITY, false, Some(Failure::NotSurjective))
    } else {
        let lhs = reg.value * lip.value / 8.0;
        let ok = strictly_below(lhs, c);
        (lhs, ok, (!ok).then_some(Failure::ConditionViolated))
    };
    Ok(Certificate {
        c,
        reg: reg.value,
        lip: lip.value,
        r0: lip.region.radius,
        condition_lhs: lhs,
        certified,
        rho: None,
        image_modulus_constant: 0.0,
        sigma: None,
        eta: None,
        beta: None,
        failure,
    })
}

/// `8γ / (reg·lip + 1)`: every r-convex set with a smaller radius passes
/// [`check_condition`] with `c = γ/r`.
pub fn admissible_radius(gamma: f64, reg: &RegularityBound, lip: &LipschitzBound) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if !reg.is_finite() {
        return Err(Error::NoAdmissibleRadius);
    }
    Ok(8.0 * gamma / (reg.value * lip.value + 1.0))
}

/// Supremum of the radii `r ∈ [lo, hi]` for which `check_condition(γ/r)`
/// certifies, by bisection (the verdict is antitone in `r`).
pub fn certification_threshold(
    gamma: f64,
    reg: &RegularityBound,
    lip: &LipschitzBound,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let ok = |r: f64| check_condition(gamma / r, reg, lip).map(|c| c.certified);
    if !ok(lo)? {
        return Ok(lo);
    }
    if ok(hi)? {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if ok(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Radius of a ball around `x0` on which the condition survives with the
/// regularity bound taken uniformly: for `‖x − x0‖ ≤ ρ` a perturbation
/// argument gives `reg(f; x) ≤ reg/(1 − reg·lip·ρ)`, and the condition with
/// that bound holds iff `ρ < (8c − reg·lip)/(8c·reg·lip)`. Capped at `r0`;
/// `None` when the condition fails or `reg` is infinite.
pub fn regularity_radius(c: f64, reg: &RegularityBound, lip: &LipschitzBound) -> Option<f64> {
    let r0 = lip.region.radius;
    if !reg.is_finite() || !strictly_below(reg.value * lip.value / 8.0, c) {
        return None;
    }
    let k = reg.value * lip.value;
    if k <= 0.0 {
        return Some(r0);
    }
    // Stay strictly inside the open bound.
    let rho = (8.0 * c - k) / (8.0 * c * k) * (1.0 - 1e-9);
    Some(rho.min(r0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpennessEstimate {
    /// Largest rate for which every sampled target was reached.
    pub sigma_hat: f64,
    /// `1/reg(f; x0)`.
    pub sigma_theory: f64,
    /// `min(σ̂, 1/reg)`.
    pub sigma: f64,
}

/// Number of target directions in the fan around `f(x)`.
const FAN: usize = 32;

fn target_fan(m: usize) -> Vec<Vector> {
    sampling::sphere_directions(m, FAN, 17)
}

/// Min-norm Newton solve of `f(z) = y` from `x`; returns the preimage when it
/// converges inside `ball(x, r)`.
fn inverse_solve(f: &SmoothMap, x: &Vector, y: &Vector, r: f64) -> Option<Vector> {
    let mut z = x.clone();
    let scale = 1.0 + y.norm();
    for _ in 0..60 {
        let res = y - f.eval(&z).ok()?;
        if res.norm() <= 1e-11 * scale {
            return ((&z - x).norm() <= r * (1.0 + 1e-9)).then_some(z);
        }
        let j = f.jacobian(&z).ok()?;
        let step = min_norm_solve(&j, &res)?;
        z += step;
        if (&z - x).norm() > 3.0 * r {
            return None;
        }
    }
    None
}

fn local_rate(f: &SmoothMap, x: &Vector, r: f64, sigma_hi: f64, fan: &[Vector]) -> f64 {
    let Ok(fx) = f.eval(x) else { return 0.0 };
    let hits = |sigma: f64| fan.iter().all(|u| inverse_solve(f, x, &(&fx + u * (sigma * r)), r).is_some());
    if hits(sigma_hi) {
        return sigma_hi;
    }
    let (mut lo, mut hi) = (0.0, sigma_hi);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if hits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn openness_over(f: &SmoothMap, x0: &Vector, bases: &[Vector], radii: &[f64]) -> Result<OpennessEstimate> {
    let reg = reg_bound(f, x0)?;
    if !reg.is_finite() {
        return Err(Error::NotOnto("regularity bound at x0 is infinite".into()));
    }
    let sigma_theory = 1.0 / reg.value;
    let fan = target_fan(f.output_dim());
    let jobs: Vec<(&Vector, f64)> = bases.iter().flat_map(|b| radii.iter().map(move |&r| (b, r))).collect();
    let sigma_hat =
        jobs.par_iter().map(|(x, r)| local_rate(f, x, *r, 2.0 * sigma_theory, &fan)).reduce(|| f64::INFINITY, f64::min);
    Ok(OpennessEstimate { sigma_hat, sigma_theory, sigma: sigma_hat.min(sigma_theory) })
}

/// Empirical rate σ̂ with `f(ball(x, r)) ⊇ ball(f(x), σ̂ r)` for base points
/// `x` drawn from `ball(x0, r)` and `r` in `radii`.
pub fn estimate_openness_rate(
    f: &SmoothMap,
    x0: &Vector,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<OpennessEstimate> {
    check_dim(f.input_dim(), x0.len())?;
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("radii must be a nonempty list of positive values".into()));
    }
    let mut rng = sampling::rng(seed);
    let n = f.input_dim();
    let reg = reg_bound(f, x0)?;
    if !reg.is_finite() {
        return Err(Error::NotOnto("regularity bound at x0 is infinite".into()));
    }
    let sigma_theory = 1.0 / reg.value;
    let mut sigma_hat = f64::INFINITY;
    for &r in radii {
        let mut bases = vec![x0.clone()];
        for _ in 1..samples.max(1) {
            let u = sampling::unit_direction(&mut rng, n, 2.0);
            let t: f64 = rand::Rng::random::<f64>(&mut rng).powf(1.0 / n as f64);
            bases.push(x0 + u * (t * r));
        }
        sigma_hat = sigma_hat.min(openness_over(f, x0, &bases, &[r])?.sigma_hat);
    }
    Ok(OpennessEstimate { sigma_hat, sigma_theory, sigma: sigma_hat.min(sigma_theory) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub seed: u64,
    /// Base points drawn from `S` for the openness estimate.
    pub openness_samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { seed: 0, openness_samples: 16 }
    }
}

/// Assembles the full certificate for `f` on `set ⊆ ball(x0, r0)`.
pub fn certify_problem(
    f: &SmoothMap,
    set: &ConvexSet,
    x0: &Vector,
    r0: f64,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    check_dim(f.input_dim(), set.dim())?;
    check_dim(f.input_dim(), x0.len())?;
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter("r0 must be positive".into()));
    }
    let reach = set.reach_from(x0);
    if reach > r0 * (1.0 + 1e-9) {
        return Err(Error::Containment { r0, reach });
    }
    let reg = reg_bound(f, x0)?;
    let lip = lip_derivative(f, &Region::new(x0, r0))?;
    let c = set.power2_constant();
    if c <= 0.0 {
        return Ok(Certificate {
            c,
            reg: reg.value,
            lip: lip.value,
            r0,
            condition_lhs: reg.value * lip.value / 8.0,
            certified: false,
            rho: None,
            image_modulus_constant: 0.0,
            sigma: None,
            eta: None,
            beta: None,
            failure: Some(if reg.is_finite() { Failure::NoPower2Modulus } else { Failure::NotSurjective }),
        });
    }
    let mut cert = check_condition(c, &reg, &lip)?;
    if !cert.certified {
        return Ok(cert);
    }
    let rho = regularity_radius(c, &reg, &lip).unwrap_or(0.0);
    let diam = image_diameter_bound(f, set)?;
    let beta = diam.beta;
    let mut eta = 0.5 * (c - cert.condition_lhs);
    // Keep the largest ball radius used by the openness argument below ρ.
    if eta * diam.bound * diam.bound / (beta * beta) >= rho {
        eta = 0.5 * rho * beta * beta / (diam.bound * diam.bound);
    }
    let s_max = eta * diam.bound * diam.bound / (beta * beta);
    let sigma = if s_max > 0.0 {
        let mut rng = sampling::rng(opts.seed);
        let mut bases = vec![x0.clone()];
        while bases.len() < opts.openness_samples.max(1) {
            match set.sample_interior(&mut rng) {
                Some(x) => bases.push(x),
                None => break,
            }
        }
        let radii = [s_max, s_max / 4.0, s_max / 16.0];
        openness_over(f, x0, &bases, &radii)?.sigma
    } else {
        1.0 / reg.value
    };
    cert.eta = Some(eta);
    cert.beta = Some(beta);
    cert.sigma = Some(sigma);
    cert.rho = Some(rho);
    cert.image_modulus_constant = sigma * eta / (beta * beta);
    Ok(cert)
}

/// `r0` defaulting to the smallest ball around `x0` that contains `set`.
pub fn default_region_radius(set: &ConvexSet, x0: &Vector) -> f64 {
    set.reach_from(x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{LipschitzBound as Lip, QuadraticComponent};
    use crate::linalg::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    fn example_map() -> SmoothMap {
        SmoothMap::quadratic(
            2,
            vec![
                QuadraticComponent::new(Matrix::from_diagonal(&v(&[2.0, -2.0])), v(&[0.0, 0.0]), 0.0),
                QuadraticComponent::new(Matrix::from_diagonal(&v(&[2.0, 2.0])), v(&[0.0, 0.0]), -1.0),
            ],
        )
        .unwrap()
    }

    fn x0() -> Vector {
        v(&[0.5f64.sqrt(), 0.5f64.sqrt()])
    }

    fn reg_lip() -> (RegularityBound, LipschitzBound) {
        let f = example_map();
        (reg_bound(&f, &x0()).unwrap(), lip_derivative(&f, &Region::new(&x0(), 1.0)).unwrap())
    }

    #[test]
    fn condition_examples() {
        let (reg, lip) = reg_lip();
        let cert = check_condition(0.25, &reg, &lip).unwrap();
        assert!(cert.certified);
        assert!((cert.condition_lhs - 2f64.sqrt() / 8.0).abs() < 1e-9);
        let cert = check_condition(0.125, &reg, &lip).unwrap();
        assert!(!cert.certified);
        assert_eq!(cert.failure, Some(Failure::ConditionViolated));
        let inf = RegularityBound { value: f64::INFINITY, x0: vec![0.0, 0.0], surjective: false };
        let cert = check_condition(10.0, &inf, &lip).unwrap();
        assert!(!cert.certified);
        assert_eq!(cert.failure, Some(Failure::NotSurjective));
        assert!(check_condition(0.0, &reg, &lip).is_err());
    }

    #[test]
    fn admissible_radius_examples() {
        let (reg, lip) = reg_lip();
        let r = admissible_radius(0.125, &reg, &lip).unwrap();
        assert!((r - 1.0 / (2f64.sqrt() + 1.0)).abs() < 1e-9);
        assert!(check_condition(0.125 / (0.9 * r), &reg, &lip).unwrap().certified);
        let zero = LipschitzBound { value: 0.0, ..lip.clone() };
        assert_eq!(admissible_radius(0.3, &reg, &zero).unwrap(), 8.0 * 0.3);
        let inf = RegularityBound { value: f64::INFINITY, x0: vec![0.0, 0.0], surjective: false };
        assert_eq!(admissible_radius(0.125, &inf, &lip), Err(Error::NoAdmissibleRadius));
    }

    #[test]
    fn threshold_bisection() {
        let (reg, lip) = reg_lip();
        let t = certification_threshold(0.125, &reg, &lip, 0.5, 1.0, 1e-12).unwrap();
        assert!((t - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(admissible_radius(0.125, &reg, &lip).unwrap() < t);
    }

    #[test]
    fn openness_of_linear_maps() {
        let id = SmoothMap::identity(2);
        let est = estimate_openness_rate(&id, &v(&[0.0, 0.0]), &[0.1], 4, 0).unwrap();
        assert!((est.sigma - 1.0).abs() < 1e-9);
        let j = example_map().jacobian(&x0()).unwrap();
        let lin = SmoothMap::affine(&j, &v(&[0.0, 0.0])).unwrap();
        let est = estimate_openness_rate(&lin, &v(&[0.0, 0.0]), &[0.01], 4, 0).unwrap();
        assert!((est.sigma_hat - 2.0).abs() < 1e-6);
    }

    #[test]
    fn openness_of_example_map() {
        let est = estimate_openness_rate(&example_map(), &x0(), &[0.05], 8, 3).unwrap();
        assert!((1.8..=2.0).contains(&est.sigma), "σ = {}", est.sigma);
    }

    #[test]
    fn certify_example_instances() {
        let f = example_map();
        let s = ConvexSet::euclidean_ball(x0(), 0.5).unwrap();
        let cert = certify_problem(&f, &s, &x0(), 0.5, &CertifyOptions::default()).unwrap();
        assert!(cert.certified);
        assert!(cert.image_modulus_constant > 0.0);
        let eta = cert.eta.unwrap();
        assert!(eta > 0.0 && eta + cert.condition_lhs < cert.c);

        let s = ConvexSet::euclidean_ball(x0(), 1.0).unwrap();
        let cert = certify_problem(&f, &s, &x0(), 1.0, &CertifyOptions::default()).unwrap();
        assert!(!cert.certified);
        assert_eq!(cert.image_modulus_constant, 0.0);

        let small = ConvexSet::euclidean_ball(x0(), 0.5).unwrap();
        assert!(matches!(
            certify_problem(&f, &small, &x0(), 0.3, &CertifyOptions::default()),
            Err(Error::Containment { .. })
        ));
    }

    #[test]
    fn regularity_radius_examples() {
        let (reg, lip) = reg_lip();
        // r = 0.5: ρ = (2 − √2)/(2√2), well inside the ball.
        let rho = regularity_radius(0.25, &reg, &Lip { region: Region::new(&x0(), 0.5), ..lip.clone() }).unwrap();
        assert!((rho - 0.207_106_781_186_547_5).abs() < 1e-8, "{rho}");
        // r = 1/(2√2) is the fixed point ρ = r.
        let r = 0.353_553_390_593_273_8;
        let rho =
            regularity_radius(1.0 / (8.0 * r), &reg, &Lip { region: Region::new(&x0(), 1.0), ..lip.clone() }).unwrap();
        assert!((rho - r).abs() < 1e-8, "{rho}");
        assert_eq!(regularity_radius(0.1, &reg, &lip), None);
    }

    #[test]
    fn affine_maps_certify_everything() {
        let lin = SmoothMap::affine(&Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), &v(&[0.0, 0.0])).unwrap();
        for r in [0.1, 1.0, 10.0] {
            let s = ConvexSet::euclidean_ball(v(&[0.0, 0.0]), r).unwrap();
            let cert = certify_problem(&lin, &s, &v(&[0.0, 0.0]), r, &CertifyOptions::default()).unwrap();
            assert!(cert.certified);
            assert_eq!(cert.condition_lhs, 0.0);
        }
    }
}
