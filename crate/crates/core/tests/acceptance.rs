//! Acceptance criteria 1–9. Runs as a plain binary (no libtest harness) so
//! each criterion prints exactly one PASS/FAIL line.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::time::{Duration, Instant};

use rand::Rng;
use uniconv_core::calculus::{lip_derivative, lip_derivative_sampled, midpoint_defect_check, reg_bound};
use uniconv_core::certify::{certification_threshold, certify_problem, CertifyOptions};
use uniconv_core::geometry::{empirical_modulus, modulus_intersection, EUCLIDEAN_GAMMA};
use uniconv_core::imagecheck::{
    default_epsilon_grid, empirical_image_modulus, midpoint_convexity_test, polar_map, rasterize_image,
};
use uniconv_core::optim::{
    build_image_map, duality_gap_at, global_solve, solve, ProblemSpec, SolveOptions, SolveReport,
};
use uniconv_core::sampling::{self, SeededRng};
use uniconv_core::{Component, ConvexSet, Matrix, QuadraticComponent, Region, SmoothMap, TargetSet, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn diag(d: &[f64]) -> Matrix {
    Matrix::from_diagonal(&v(d))
}

fn x0() -> Vector {
    v(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])
}

fn example(r: f64) -> ProblemSpec {
    let phi = SmoothMap::quadratic(2, vec![QuadraticComponent::new(diag(&[2.0, -2.0]), v(&[0.0, 0.0]), 0.0)]).unwrap();
    let g = SmoothMap::quadratic(2, vec![QuadraticComponent::new(diag(&[2.0, 2.0]), v(&[0.0, 0.0]), -1.0)]).unwrap();
    let set = ConvexSet::euclidean_ball(x0(), r).unwrap();
    ProblemSpec::new(phi, Some(g), set, TargetSet::zero(1), x0()).unwrap()
}

fn example_image_map() -> SmoothMap {
    build_image_map(&example(1.0)).unwrap().map
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: u32, name: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} [{name}]: {} — {} ({:.2}s / limit {}s{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    pass
}

fn c1_regularity() -> Outcome {
    let reg = reg_bound(&example_image_map(), &x0()).unwrap();
    check((reg.value - 0.5).abs() <= 1e-9, format!("reg = {:.12}, expected 0.5 ± 1e-9", reg.value))
}

fn c2_lipschitz() -> Outcome {
    let f = example_image_map();
    let region = Region::new(&x0(), 1.0);
    let exact = lip_derivative(&f, &region).unwrap().value;
    let sampled = lip_derivative_sampled(&f, &region, 20_000, 0).unwrap().value;
    let target = 2.0 * SQRT_2;
    let rel = (sampled - target).abs() / target;
    check(
        (exact - target).abs() <= 1e-6 && rel <= 0.02,
        format!("exact = {exact:.9} (2√2 ± 1e-6), sampled = {sampled:.6} ({:.3}% off, ≤ 2%)", 100.0 * rel),
    )
}

fn c3_threshold() -> Outcome {
    let f = example_image_map();
    let reg = reg_bound(&f, &x0()).unwrap();
    let lip = lip_derivative(&f, &Region::new(&x0(), 1.0)).unwrap();
    let r = certification_threshold(EUCLIDEAN_GAMMA, &reg, &lip, 0.05, 2.0, 1e-12).unwrap();
    check((r - FRAC_1_SQRT_2).abs() <= 1e-9, format!("threshold = {r:.12}, expected 1/√2 ± 1e-9"))
}

/// φ over the unit-circle arc inside `ball(x0, r)`, from a 10⁶-point sweep.
fn circle_sweep(r: f64) -> f64 {
    let n = 1_000_000;
    (0..n)
        .map(|i| 2.0 * PI * i as f64 / n as f64)
        .filter(|t| (v(&[t.cos(), t.sin()]) - x0()).norm() <= r)
        .map(|t| t.cos().powi(2) - t.sin().powi(2))
        .fold(f64::INFINITY, f64::min)
}

fn c4_certified_solve(opts: &SolveOptions) -> (Outcome, Option<SolveReport>) {
    let p = example(0.5);
    let cert = certify_problem(&example_image_map(), &p.set, &p.x0, 0.5, &CertifyOptions::default()).unwrap();
    let rep = match solve(&p, cert.certified, opts) {
        Ok(r) => r,
        Err(e) => return (check(false, format!("solver error: {e}")), None),
    };
    let xb = v(&rep.x_bar);
    let on_circle = (xb.norm() - 1.0).abs();
    let dist = (&xb - x0()).norm();
    let sweep = circle_sweep(0.5);
    let gap = rep.duality_gap.unwrap_or(f64::NAN);
    let pass = cert.certified
        && on_circle <= 1e-6
        && (dist - 0.5).abs() <= 1e-6
        && (rep.phi_value - sweep).abs() <= 1e-4
        && rep.lagrangian_min_ok
        && rep.multiplier_residual >= -1e-6
        && gap <= 1e-4;
    let out = check(
        pass,
        format!(
            "certified = {}, ‖x̄‖−1 = {on_circle:.1e}, ‖x̄−x0‖ = {dist:.9}, φ(x̄) = {:.6} vs sweep {sweep:.6}, \
             y* = {:?} (residual {:.1e}), gap = {gap:.1e}",
            cert.certified, rep.phi_value, rep.multiplier, rep.multiplier_residual
        ),
    );
    (out, Some(rep))
}

fn c5_uncertified_solve(opts: &SolveOptions) -> Outcome {
    let p = example(0.9);
    let cert = certify_problem(&example_image_map(), &p.set, &p.x0, 0.9, &CertifyOptions::default()).unwrap();
    let rep = match global_solve(&p, opts) {
        Ok(r) => r,
        Err(e) => return check(false, format!("solver error: {e}")),
    };
    let err = (v(&rep.x_bar) - v(&[0.0, 1.0])).norm();
    check(
        !cert.certified && err <= 1e-4 && rep.boundary_distance >= 0.13,
        format!(
            "certified = {}, x̄ = ({:.6}, {:.6}), ‖x̄ − (0,1)‖ = {err:.1e}, boundary_distance = {:.6}",
            cert.certified, rep.x_bar[0], rep.x_bar[1], rep.boundary_distance
        ),
    )
}

fn random_center(rng: &mut SeededRng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)))
}

fn random_spd(rng: &mut SeededRng, n: usize) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &m * m.transpose() + Matrix::identity(n, n) * rng.random_range(0.2..1.0)
}

/// Random instances of every family with an analytic power-2 constant.
fn modulus_corpus(rng: &mut SeededRng) -> Vec<(String, ConvexSet, Vec<ConvexSet>)> {
    let mut sets = Vec::new();
    for p in [2.0, 3.0, 4.0] {
        for _ in 0..50 {
            let n = rng.random_range(2..=3);
            let s = ConvexSet::p_norm_ball(random_center(rng, n), rng.random_range(0.3..2.0), p).unwrap();
            sets.push((format!("ℓ^{p} ball"), s, Vec::new()));
        }
    }
    for _ in 0..50 {
        let n = rng.random_range(2..=3);
        let s = ConvexSet::euclidean_ball(random_center(rng, n), rng.random_range(0.05..5.0)).unwrap();
        sets.push(("scaled ball".into(), s, Vec::new()));
    }
    while sets.len() < 250 {
        let n = rng.random_range(2..=3);
        let r = rng.random_range(0.5..2.0);
        let k = rng.random_range(2..=4);
        let base = random_center(rng, n);
        let centers: Vec<Vector> = (0..k).map(|_| &base + random_center(rng, n) * (0.6 * r / 3f64.sqrt())).collect();
        if let Ok(s) = ConvexSet::ball_intersection(centers.clone(), r) {
            let balls = centers.into_iter().map(|c| ConvexSet::euclidean_ball(c, r).unwrap()).collect();
            sets.push(("ball intersection".into(), s, balls));
        }
    }
    for _ in 0..50 {
        let n = rng.random_range(2..=3);
        let a = random_spd(rng, n);
        let b = random_center(rng, n);
        let centre = -a.clone().cholesky().unwrap().solve(&b);
        let floor = 0.5 * centre.dot(&(&a * &centre)) + b.dot(&centre);
        let s = ConvexSet::sublevel(a, b, 0.0, floor + rng.random_range(0.05..1.0)).unwrap();
        sets.push(("quadratic sublevel".into(), s, Vec::new()));
    }
    sets
}

fn c6_modulus_suite() -> Outcome {
    let mut rng = sampling::rng(6);
    let corpus = modulus_corpus(&mut rng);
    let mut violations = Vec::new();
    let mut pairs_checked = 0usize;
    for (idx, (family, set, parts)) in corpus.iter().enumerate() {
        let diam = set.diameter();
        for frac in [0.25, 0.6, 0.95] {
            let eps = frac * diam;
            let tol = 1e-3 * eps;
            let est = match empirical_modulus(set, eps, 400, tol, idx as u64) {
                Ok(e) => e,
                Err(e) => {
                    violations.push(format!("{family} #{idx}: {e}"));
                    continue;
                }
            };
            // Accepted chords may be up to `tol` short.
            let lower = set.analytic_modulus(eps - tol);
            if lower > est.delta + 1e-12 {
                violations
                    .push(format!("{family} #{idx}: analytic {lower:e} > empirical {:e} at ε = {eps}", est.delta));
            }
            if !parts.is_empty() {
                let each: Vec<f64> = parts.iter().map(|b| b.analytic_modulus(eps - tol)).collect();
                let min_rule = each.iter().copied().fold(f64::INFINITY, f64::min);
                if min_rule > est.delta + 1e-12 {
                    violations.push(format!("{family} #{idx}: min rule {min_rule:e} > empirical {:e}", est.delta));
                }
            }
        }
        if !parts.is_empty() {
            let cs: Vec<f64> = parts.iter().map(|b| b.power2_constant()).collect();
            let rule = modulus_intersection(&cs).unwrap();
            if (rule - set.power2_constant()).abs() > 1e-15 {
                violations
                    .push(format!("{family} #{idx}: intersection constant {} vs min {rule}", set.power2_constant()));
            }
        }
        // Midpoint inclusion: ball(mid, c‖x1 − x2‖²) ⊆ S and, sharper, ball(mid, δ(‖x1 − x2‖)).
        let c = set.power2_constant();
        let n = set.dim();
        for k in 0..1000 {
            let x1 = set.boundary_point(&sampling::unit_direction(&mut rng, n, 2.0));
            let x2 = if k % 4 == 0 {
                set.sample_interior(&mut rng).unwrap()
            } else {
                set.boundary_point(&sampling::unit_direction(&mut rng, n, 2.0))
            };
            let d = set.norm(&(&x1 - &x2));
            let m = set.margin(&((&x1 + &x2) * 0.5));
            let slack = 1e-12 * diam.max(1.0);
            if m < c * d * d - slack || m < set.analytic_modulus(d) - slack {
                violations.push(format!("{family} #{idx}: midpoint margin {m:e} below c·d² = {:e}", c * d * d));
            }
            pairs_checked += 1;
        }
    }
    let first = violations.first().cloned().unwrap_or_default();
    check(
        violations.is_empty(),
        format!("{} instances, {pairs_checked} midpoint pairs, {} violations {first}", corpus.len(), violations.len()),
    )
}

fn random_quadratic_map(rng: &mut SeededRng, n: usize, m: usize) -> SmoothMap {
    let comps = (0..m)
        .map(|_| {
            let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            QuadraticComponent::new(&a + a.transpose(), random_center(rng, n), rng.random_range(-1.0..1.0))
        })
        .collect();
    SmoothMap::quadratic(n, comps).unwrap()
}

fn c7_midpoint_defect() -> Outcome {
    let mut rng = sampling::rng(7);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let f = random_quadratic_map(&mut rng, n, m);
        let region = Region::new(&random_center(&mut rng, n), rng.random_range(0.5..2.0));
        let lip = lip_derivative(&f, &region).unwrap();
        let centre = region.center();
        for _ in 0..1000 {
            let mut draw = || {
                let u = sampling::unit_direction(&mut rng, n, 2.0);
                &centre + u * (region.radius * rng.random::<f64>().powf(1.0 / n as f64))
            };
            let (x1, x2) = (draw(), draw());
            let d = midpoint_defect_check(&f, &x1, &x2, &lip).unwrap();
            if !d.ok {
                violations += 1;
            }
            if d.bound > 0.0 {
                worst = worst.max(d.defect / d.bound);
            }
        }
    }
    check(violations == 0, format!("100 maps × 1000 pairs, {violations} violations, max defect/bound = {worst:.6}"))
}

/// Random near-linear quadratic map on a Euclidean disc, certified.
fn certified_instance(rng: &mut SeededRng) -> (SmoothMap, ConvexSet, Vector, f64) {
    loop {
        let theta: f64 = rng.random_range(0.0..2.0 * PI);
        let scale = rng.random_range(0.7..1.5);
        let rot = Matrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]) * scale;
        let comps = (0..2)
            .map(|i| {
                let a = Matrix::from_fn(2, 2, |_, _| rng.random_range(-0.4..0.4));
                QuadraticComponent::new(&a + a.transpose(), rot.row(i).transpose(), 0.0)
            })
            .collect();
        let f = SmoothMap::quadratic(2, comps).unwrap();
        let centre = random_center(rng, 2) * 0.5;
        let r = rng.random_range(0.05..0.5);
        let set = ConvexSet::euclidean_ball(centre.clone(), r).unwrap();
        if let Ok(cert) = certify_problem(&f, &set, &centre, r, &CertifyOptions::default()) {
            // The conclusion only covers sets inside ball(x0, ρ).
            if cert.certified && cert.rho.is_some_and(|rho| r <= rho) {
                return (f, set, centre, cert.image_modulus_constant);
            }
        }
    }
}

fn c8_image_oracle() -> Outcome {
    let mut rng = sampling::rng(8);
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    for i in 0..20 {
        let (f, set, _, bound) = certified_instance(&mut rng);
        let probe = rasterize_image(&f, &set, 0.05, 8.0).unwrap();
        let extent = (probe.hi()[0] - probe.lo[0]).max(probe.hi()[1] - probe.lo[1]);
        let img = rasterize_image(&f, &set, extent / 600.0, 8.0).unwrap();
        let mid = midpoint_convexity_test(&img, 20_000, i).unwrap();
        let grid = default_epsilon_grid(&img);
        let m = empirical_image_modulus(&img, &grid).unwrap();
        min_margin = min_margin.min(m.c_hat - (bound - m.tolerance));
        if !mid.ok || !(m.c_hat > 0.0) || m.c_hat < bound - m.tolerance {
            failures.push(format!(
                "#{i}: midpoint violations {}, ĉ = {:e}, bound {:e}, tol {:e}",
                mid.violations, m.c_hat, bound, m.tolerance
            ));
        }
    }
    let sector = ConvexSet::axis_box(v(&[0.5, 0.0]), v(&[1.0, 1.5 * PI])).unwrap();
    let mut annulus = Vec::new();
    for h in [0.02, 0.01, 0.005] {
        let img = rasterize_image(&polar_map(), &sector, h, 8.0).unwrap();
        let t = midpoint_convexity_test(&img, 20_000, 99).unwrap();
        annulus.push(t.violations);
        if t.violations == 0 {
            failures.push(format!("annulus h = {h}: no violations"));
        }
    }
    let first = failures.first().cloned().unwrap_or_default();
    check(
        failures.is_empty(),
        format!(
            "20 certified instances, min(ĉ − bound + tol) = {min_margin:.3e}; annulus violations {annulus:?} {first}"
        ),
    )
}

/// Every instance of the duality corpus, certified or not.
fn duality_corpus() -> Vec<(String, ProblemSpec)> {
    let mut out: Vec<(String, ProblemSpec)> =
        [0.3, 0.5, 0.9, 1.2].iter().map(|&r| (format!("worked example r = {r}"), example(r))).collect();
    // Orthant target: x1² + x2² − 1 ≤ 0 on a ball.
    let p = example(0.5);
    out.push((
        "worked example with g ≤ 0".into(),
        ProblemSpec::new(p.phi.clone(), p.g.clone(), p.set.clone(), TargetSet::nonpos_orthant(1), p.x0.clone())
            .unwrap(),
    ));
    // Convex toy.
    let disc = ConvexSet::euclidean_ball(v(&[0.0, 0.0]), 1.0).unwrap();
    let phi = SmoothMap::quadratic(2, vec![QuadraticComponent::linear(v(&[1.0, 2.0]), 0.0)]).unwrap();
    let g = SmoothMap::quadratic(2, vec![QuadraticComponent::linear(v(&[1.0, -1.0]), 0.0)]).unwrap();
    out.push((
        "convex toy".into(),
        ProblemSpec::new(phi, Some(g), disc.clone(), TargetSet::nonpos_orthant(1), v(&[0.0, 0.0])).unwrap(),
    ));
    // Nonconvex objective on an ℓ³ ball and on an ellipse, equality target.
    let phi = SmoothMap::quadratic(2, vec![QuadraticComponent::new(diag(&[-1.0, 0.5]), v(&[0.2, 0.0]), 0.0)]).unwrap();
    let g = SmoothMap::quadratic(2, vec![QuadraticComponent::new(diag(&[0.0, 0.0]), v(&[1.0, 1.0]), -0.1)]).unwrap();
    let l3 = ConvexSet::p_norm_ball(v(&[0.0, 0.0]), 1.0, 3.0).unwrap();
    out.push((
        "ℓ³ ball, linear equality".into(),
        ProblemSpec::new(phi.clone(), Some(g.clone()), l3, TargetSet::zero(1), v(&[0.05, 0.05])).unwrap(),
    ));
    let ellipse = ConvexSet::sublevel(diag(&[2.0, 8.0]), v(&[0.0, 0.0]), 0.0, 1.0).unwrap();
    out.push((
        "ellipse, linear equality".into(),
        ProblemSpec::new(phi, Some(g), ellipse, TargetSet::new(vec![Component::Eq(0.0)]), v(&[0.05, 0.05])).unwrap(),
    ));
    out
}

fn c9_weak_duality(opts: &SolveOptions) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for (name, p) in duality_corpus() {
        let rep = match global_solve(&p, opts) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let gap = duality_gap_at(&p, &v(&rep.x_bar), opts).unwrap();
        worst = worst.min(gap.gap);
        if gap.gap < -1e-9 {
            failures.push(format!("{name}: gap {:e}", gap.gap));
        }
    }
    let first = failures.first().cloned().unwrap_or_default();
    check(failures.is_empty(), format!("{} instances, smallest gap = {worst:.3e} {first}", duality_corpus().len()))
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; listing mode must stay quiet.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let opts = SolveOptions::default();
    let results = [
        run(1, "regularity bound", Duration::from_secs(1), c1_regularity),
        run(2, "Lipschitz constant", Duration::from_secs(5), c2_lipschitz),
        run(3, "certification threshold", Duration::from_secs(1), c3_threshold),
        run(4, "certified solve r = 0.5", Duration::from_secs(30), || c4_certified_solve(&opts).0),
        run(5, "uncertified regime r = 0.9", Duration::from_secs(30), || c5_uncertified_solve(&opts)),
        run(6, "modulus property suite", Duration::from_secs(120), c6_modulus_suite),
        run(7, "second-order midpoint estimate", Duration::from_secs(60), c7_midpoint_defect),
        run(8, "image convexity oracle", Duration::from_secs(300), c8_image_oracle),
        run(9, "weak duality", Duration::from_secs(60), || c9_weak_duality(&opts)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
