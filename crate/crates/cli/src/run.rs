//! Command dispatch: each command fills its sections of the [`Report`] and
//! picks the exit status.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use uniconv_core::calculus::image_diameter_bound;
use uniconv_core::certify::CertifyOptions;
use uniconv_core::cone::Component;
use uniconv_core::imagecheck::{
    convex_like_check, default_epsilon_grid, empirical_image_modulus, midpoint_convexity_test, rasterize_image,
    ConvexLike, ImageModulus, MidpointTest,
};
use uniconv_core::optim::{
    build_image_map, certify_instance, duality_gap_at, global_solve, solve, GapEstimate, ProblemSpec, SolveOptions,
    SolveReport,
};
use uniconv_core::{Certificate, Error, TargetSet, Vector};

use crate::problem::{parse_problem_file, rebuild, with_radius, Options, ParseError, Parsed};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NOT_CERTIFIED: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

/// Raster sample density per cell; lower values leave aliasing holes.
const DENSITY: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Certify,
    ImageCheck,
    Solve,
    Gap,
    All,
}

/// Command-line overrides; each one beats the file's `options`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flags {
    pub radius: Option<f64>,
    pub seed: Option<u64>,
    pub cells: Option<usize>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Status {
    pub exit_code: i32,
    /// `ok`, a parse diagnostic code, `not-certified`, `infeasible`,
    /// `verification-failure` or `error`.
    pub code: String,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageCheck {
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub samples: usize,
    pub marked_cells: usize,
    pub midpoint: MidpointTest,
    pub modulus: ImageModulus,
    pub convex_like: ConvexLike,
    /// Whether `S ⊆ ball(x0, ρ)`, so that the certificate's bound applies.
    pub covered_by_certificate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub seed: u64,
    /// Wall-clock seconds per stage; the only nondeterministic fields.
    pub timings: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Command,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_check: Option<ImageCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapEstimate>,
    pub provenance: Provenance,
}

/// Resolved settings after applying flags over file options over defaults.
#[derive(Debug, Clone)]
struct Settings {
    seed: u64,
    cells: usize,
    cell_size: Option<f64>,
    pairs: usize,
    r0: Option<f64>,
    solve: SolveOptions,
}

fn settings(o: &Options, flags: &Flags) -> Settings {
    let seed = flags.seed.or(o.seed).unwrap_or(0);
    let mut solve = SolveOptions { seed, ..SolveOptions::default() };
    if let Some(t) = flags.tol.or(o.tol) {
        solve.tol = t;
        solve.global.feas_tol = t;
    }
    if let Some(t) = o.verify_tol {
        solve.verify_tol = t;
    }
    if let Some(s) = flags.samples.or(o.samples) {
        solve.global.seeds = s.max(1);
    }
    Settings {
        seed,
        // An explicit --cells beats a file cell size, which beats a file cell count.
        cells: flags.cells.or(o.cells).unwrap_or(1000).max(16),
        cell_size: if flags.cells.is_some() { None } else { o.cell_size },
        pairs: o.midpoint_pairs.unwrap_or(20_000),
        r0: o.r0,
        solve,
    }
}

struct Run {
    report: Report,
    started: Instant,
}

impl Run {
    fn new(command: Command, seed: u64) -> Self {
        Run {
            report: Report {
                command,
                status: Status { exit_code: EXIT_OK, code: "ok".into(), diagnostics: Vec::new() },
                certificate: None,
                image_check: None,
                solve: None,
                gap: None,
                provenance: Provenance { version: env!("CARGO_PKG_VERSION"), seed, timings: BTreeMap::new() },
            },
            started: Instant::now(),
        }
    }

    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.report.provenance.timings.insert(stage, t.elapsed().as_secs_f64());
        out
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.report.status.diagnostics.push(msg.into());
    }

    /// Records a failure; the first recorded status wins.
    fn fail(&mut self, exit: i32, code: &str, msg: impl Into<String>) {
        if self.report.status.exit_code == EXIT_OK {
            self.report.status.exit_code = exit;
            self.report.status.code = code.into();
        }
        self.note(msg);
    }

    fn core_error(&mut self, stage: &str, e: Error) {
        match e {
            Error::Infeasible(m) => self.fail(EXIT_INFEASIBLE, "infeasible", format!("{stage}: {m}")),
            other => self.fail(EXIT_ERROR, "error", format!("{stage}: {other}")),
        }
    }

    fn finish(mut self) -> Report {
        self.report.provenance.timings.insert("total", self.started.elapsed().as_secs_f64());
        self.report
    }
}

/// Parses `text`, applies `flags` and runs `command`.
pub fn run(command: Command, text: &str, flags: &Flags) -> Report {
    let parsed = parse_problem_file(text).and_then(|p| match flags.radius {
        Some(r) => rebuild(with_radius(&p.file, r)?),
        None => Ok(p),
    });
    let parsed = match parsed {
        Ok(p) => p,
        Err(e) => {
            let mut run = Run::new(command, flags.seed.unwrap_or(0));
            parse_failure(&mut run, &e);
            return run.finish();
        }
    };
    run_parsed(command, &parsed, flags)
}

fn parse_failure(run: &mut Run, e: &ParseError) {
    let exit = if matches!(e, ParseError::Infeasible { .. }) { EXIT_INFEASIBLE } else { EXIT_PARSE };
    run.fail(exit, e.code(), e.to_string());
}

pub fn run_parsed(command: Command, parsed: &Parsed, flags: &Flags) -> Report {
    let s = settings(&parsed.file.options, flags);
    let mut run = Run::new(command, s.seed);
    let p = &parsed.spec;
    let copts = CertifyOptions { seed: s.seed, ..CertifyOptions::default() };
    let cert = match run.time("certify", || certify_instance(p, s.r0, &copts)) {
        Ok(c) => c,
        Err(e) => {
            run.core_error("certify", e);
            return run.finish();
        }
    };
    let certified = cert.certified;
    run.report.certificate = Some(cert);

    if matches!(command, Command::ImageCheck | Command::All) {
        image_check(&mut run, p, &s, command == Command::ImageCheck);
    }
    if matches!(command, Command::Solve | Command::All) {
        solve_stage(&mut run, p, &s, certified);
    }
    if matches!(command, Command::Gap | Command::All) {
        gap_stage(&mut run, p, &s, certified);
    }
    if !certified {
        let cert = run.report.certificate.as_ref().expect("set above");
        let msg = match cert.failure {
            Some(f) => format!("not certified ({f:?}): reg·lip/8 = {} vs c = {}", cert.condition_lhs, cert.c),
            None => "not certified".to_string(),
        };
        run.fail(EXIT_NOT_CERTIFIED, "not-certified", msg);
    }
    run.finish()
}

/// The cone added to the image in the convex-likeness check: `R₊` on the
/// objective coordinate and `−C` on the constraint coordinates.
fn image_cone(target: &TargetSet) -> TargetSet {
    let mut comps = vec![Component::Ge];
    comps.extend(target.components.iter().map(|c| match c {
        Component::Eq(_) => Component::Eq(0.0),
        Component::Le => Component::Ge,
        Component::Ge => Component::Le,
        Component::Free => Component::Free,
    }));
    TargetSet::new(comps)
}

fn image_check(run: &mut Run, p: &ProblemSpec, s: &Settings, required: bool) {
    let image = match build_image_map(p) {
        Ok(i) => i,
        Err(e) => return run.core_error("image-check", e),
    };
    if image.map.output_dim() != 2 {
        let msg = format!("image-check needs a planar image, this one has dimension {}", image.map.output_dim());
        if required {
            run.fail(EXIT_PARSE, "unsupported-dimension", msg);
        } else {
            run.note(format!("{msg}; skipped"));
        }
        return;
    }
    let result = run.time("image-check", || -> Result<ImageCheck, Error> {
        let h = match s.cell_size {
            Some(h) => h,
            None => {
                let rough = image_diameter_bound(&image.map, &p.set)?.bound.max(1e-6) / 64.0;
                let probe = rasterize_image(&image.map, &p.set, rough, DENSITY)?;
                let hi = probe.hi();
                (hi[0] - probe.lo[0]).max(hi[1] - probe.lo[1]) / s.cells as f64
            }
        };
        let img = rasterize_image(&image.map, &p.set, h, DENSITY)?;
        let midpoint = midpoint_convexity_test(&img, s.pairs, s.seed)?;
        let modulus = empirical_image_modulus(&img, &default_epsilon_grid(&img))?;
        let convex_like = convex_like_check(&image.map, &p.set, &image_cone(&image.target), &img, 2000, s.seed)?;
        Ok(ImageCheck {
            cell_size: img.h,
            nx: img.nx,
            ny: img.ny,
            samples: img.samples,
            marked_cells: img.marked_count,
            midpoint,
            modulus,
            convex_like,
            covered_by_certificate: false,
        })
    });
    let mut check = match result {
        Ok(c) => c,
        Err(e) => return run.core_error("image-check", e),
    };
    let cert = run.report.certificate.as_ref().expect("certify runs first");
    let reach = p.set.reach_from(&p.x0);
    check.covered_by_certificate = cert.certified && cert.rho.is_some_and(|rho| reach <= rho);
    if check.covered_by_certificate {
        let bound = cert.image_modulus_constant;
        if !check.midpoint.ok {
            run.fail(
                EXIT_VERIFICATION,
                "verification-failure",
                format!("midpoint test: {} violations", check.midpoint.violations),
            );
        } else if check.modulus.c_hat < bound - check.modulus.tolerance {
            run.fail(
                EXIT_VERIFICATION,
                "verification-failure",
                format!("fitted ĉ = {:e} below the certified {:e}", check.modulus.c_hat, bound),
            );
        }
    }
    run.report.image_check = Some(check);
}

fn solve_stage(run: &mut Run, p: &ProblemSpec, s: &Settings, certified: bool) {
    let result = run.time("solve", || if certified { solve(p, true, &s.solve) } else { global_solve(p, &s.solve) });
    let rep = match result {
        Ok(r) => r,
        Err(e) => return run.core_error("solve", e),
    };
    if certified && !rep.lagrangian_min_ok {
        run.fail(
            EXIT_VERIFICATION,
            "verification-failure",
            format!("no multiplier makes x̄ a Lagrangian minimizer (residual {:e})", rep.multiplier_residual),
        );
    }
    run.report.solve = Some(rep);
}

fn gap_stage(run: &mut Run, p: &ProblemSpec, s: &Settings, certified: bool) {
    let x_bar = match &run.report.solve {
        Some(r) => Vector::from_vec(r.x_bar.clone()),
        None => match run.time("solve", || global_solve(p, &s.solve)) {
            Ok(r) => Vector::from_vec(r.x_bar),
            Err(e) => return run.core_error("gap", e),
        },
    };
    let gap = match run.time("gap", || duality_gap_at(p, &x_bar, &s.solve)) {
        Ok(g) => g,
        Err(e) => return run.core_error("gap", e),
    };
    let tol = s.solve.verify_tol * gap.primal.abs().max(1.0);
    if gap.gap < -tol {
        run.fail(EXIT_VERIFICATION, "verification-failure", format!("weak duality violated: gap = {:e}", gap.gap));
    } else if certified && gap.gap > tol && !gap.truncated {
        run.fail(
            EXIT_VERIFICATION,
            "verification-failure",
            format!("positive duality gap {:e} on a certified instance", gap.gap),
        );
    }
    run.report.gap = Some(gap);
}
