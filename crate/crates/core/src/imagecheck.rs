//! Raster oracle for images `f(S) ⊂ R²`: sample `S` densely, mark the cells
//! hit by `f`, then test midpoint convexity, fit a power-2 modulus with a
//! distance transform, and check convex-likeness against a target cone.
//!
//! The raster can refute convexity or corroborate it; it never proves it.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::SmoothMap;
use crate::cone::{Component, TargetSet};
use crate::error::{check_dim, Error, Result};
use crate::geometry::ConvexSet;
use crate::linalg::Vector;
use crate::sampling;

/// Hard cap on the number of sampled points of `S`.
pub const MAX_SAMPLES: usize = 1 << 23;

const SHARD: u64 = 1 << 14;

/// Boolean lattice over a box of `R²` with square cells of side `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RasterImage {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Lower-left corner of the box.
    pub lo: [f64; 2],
    #[serde(skip)]
    marked: Vec<bool>,
    pub marked_count: usize,
    /// Points of `S` mapped into the raster.
    pub samples: usize,
    /// Expected samples per interior cell achieved (may fall short of the
    /// request when [`MAX_SAMPLES`] binds).
    pub density: f64,
}

impl RasterImage {
    /// Empty raster covering `[lo, lo + (nx, ny)·h]`.
    pub fn new(lo: [f64; 2], h: f64, nx: usize, ny: usize) -> Self {
        Self { nx, ny, h, lo, marked: vec![false; nx * ny], marked_count: 0, samples: 0, density: 0.0 }
    }

    /// Raster of an arbitrary membership predicate, one test per cell centre.
    pub fn from_predicate(lo: [f64; 2], hi: [f64; 2], h: f64, inside: impl Fn(f64, f64) -> bool) -> Self {
        let nx = ((hi[0] - lo[0]) / h).ceil() as usize + 4;
        let ny = ((hi[1] - lo[1]) / h).ceil() as usize + 4;
        let mut img = Self::new([lo[0] - 2.0 * h, lo[1] - 2.0 * h], h, nx, ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let [x, y] = img.cell_center(ix, iy);
                if inside(x, y) {
                    img.mark(ix, iy);
                }
            }
        }
        img
    }

    pub fn hi(&self) -> [f64; 2] {
        [self.lo[0] + self.nx as f64 * self.h, self.lo[1] + self.ny as f64 * self.h]
    }

    pub fn is_marked(&self, ix: usize, iy: usize) -> bool {
        self.marked[iy * self.nx + ix]
    }

    fn mark(&mut self, ix: usize, iy: usize) {
        let k = iy * self.nx + ix;
        if !self.marked[k] {
            self.marked[k] = true;
            self.marked_count += 1;
        }
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.lo[0] + (ix as f64 + 0.5) * self.h, self.lo[1] + (iy as f64 + 0.5) * self.h]
    }

    /// Cell containing `(x, y)`, if inside the raster box.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.lo[0]) / self.h).floor();
        let fy = ((y - self.lo[1]) / self.h).floor();
        (fx >= 0.0 && fy >= 0.0 && (fx as usize) < self.nx && (fy as usize) < self.ny)
            .then_some((fx as usize, fy as usize))
    }

    /// Marked area `marked_count · h²`.
    pub fn area(&self) -> f64 {
        self.marked_count as f64 * self.h * self.h
    }

    /// Marked, or with a marked cell among its eight neighbours.
    pub fn near_marked(&self, ix: usize, iy: usize) -> bool {
        let x0 = ix.saturating_sub(1);
        let y0 = iy.saturating_sub(1);
        let x1 = (ix + 1).min(self.nx - 1);
        let y1 = (iy + 1).min(self.ny - 1);
        (y0..=y1).any(|y| (x0..=x1).any(|x| self.is_marked(x, y)))
    }

    fn marked_cells(&self) -> Vec<(usize, usize)> {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .filter(|&(ix, iy)| self.is_marked(ix, iy))
            .collect()
    }

    /// Marked cells with an unmarked 4-neighbour.
    pub fn boundary_cells(&self) -> Vec<(usize, usize)> {
        self.marked_cells()
            .into_iter()
            .filter(|&(ix, iy)| {
                ix == 0
                    || iy == 0
                    || ix + 1 == self.nx
                    || iy + 1 == self.ny
                    || !self.is_marked(ix - 1, iy)
                    || !self.is_marked(ix + 1, iy)
                    || !self.is_marked(ix, iy - 1)
                    || !self.is_marked(ix, iy + 1)
            })
            .collect()
    }

    /// Unmarked cells not 4-connected to the raster border: either genuine
    /// holes of the image or sampling gaps.
    pub fn enclosed_unmarked(&self) -> usize {
        let (nx, ny) = (self.nx, self.ny);
        let mut seen = vec![false; nx * ny];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for ix in 0..nx {
            stack.push((ix, 0));
            stack.push((ix, ny - 1));
        }
        for iy in 0..ny {
            stack.push((0, iy));
            stack.push((nx - 1, iy));
        }
        let mut outside = 0;
        while let Some((x, y)) = stack.pop() {
            let k = y * nx + x;
            if seen[k] || self.marked[k] {
                continue;
            }
            seen[k] = true;
            outside += 1;
            if x > 0 {
                stack.push((x - 1, y));
            }
            if x + 1 < nx {
                stack.push((x + 1, y));
            }
            if y > 0 {
                stack.push((x, y - 1));
            }
            if y + 1 < ny {
                stack.push((x, y + 1));
            }
        }
        nx * ny - self.marked_count - outside
    }

    /// Plain PBM (P1) bitmap, top row first.
    pub fn write_pbm(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "P1")?;
        writeln!(w, "{} {}", self.nx, self.ny)?;
        for iy in (0..self.ny).rev() {
            let row: Vec<&str> = (0..self.nx).map(|ix| if self.is_marked(ix, iy) { "1" } else { "0" }).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn halton_member(set: &ConvexSet, index: u64) -> Option<Vector> {
    let (lo, hi) = set.bounding_box();
    let x = sampling::halton_in_box(index, lo, hi);
    set.is_member(&x).then_some(x)
}

/// Images of the members among the Halton points `[start, end)`, in order.
fn sample_images(f: &SmoothMap, set: &ConvexSet, start: u64, end: u64) -> Result<Vec<[f64; 2]>> {
    let shards: Vec<(u64, u64)> = (start..end).step_by(SHARD as usize).map(|s| (s, (s + SHARD).min(end))).collect();
    let parts: Vec<Result<Vec<[f64; 2]>>> = shards
        .par_iter()
        .map(|&(a, b)| {
            let mut out = Vec::new();
            for i in a..b {
                if let Some(x) = halton_member(set, i) {
                    let z = f.eval(&x)?;
                    out.push([z[0], z[1]]);
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Marks the cells of `f(S)` hit by a low-discrepancy sample of `S`.
///
/// Densities below ~8 leave aliasing holes between Halton points and cells.
///
/// A pilot pass estimates the largest area stretch `|det Df|` (or the image
/// area when `n ≠ 2`) and sizes the main pass so every interior cell expects
/// at least `density` hits, up to [`MAX_SAMPLES`].
pub fn rasterize_image(f: &SmoothMap, set: &ConvexSet, h: f64, density: f64) -> Result<RasterImage> {
    if f.output_dim() != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "image rasterization needs m = 2, got m = {}",
            f.output_dim()
        )));
    }
    check_dim(f.input_dim(), set.dim())?;
    if !(h > 0.0 && h.is_finite()) || !(density > 0.0) {
        return Err(Error::InvalidParameter("cell size and density must be positive".into()));
    }
    let n = set.dim();
    let (blo, bhi) = set.bounding_box();
    let box_vol: f64 = (bhi - blo).iter().product();
    let pilot = 1u64 << 14;
    let mut members = 0usize;
    let mut stretch = 0.0f64;
    let mut pilot_pts = Vec::new();
    for i in 0..pilot {
        if let Some(x) = halton_member(set, i) {
            members += 1;
            let j = f.jacobian(&x)?;
            if n == 2 {
                stretch = stretch.max(j.determinant().abs());
            }
            let z = f.eval(&x)?;
            pilot_pts.push([z[0], z[1]]);
        }
    }
    if members == 0 {
        return Err(Error::SamplingFailure("no Halton point fell inside the set".into()));
    }
    let vol_s = box_vol * members as f64 / pilot as f64;
    // Sampled points of S needed, and how many interior hits per cell they buy.
    let wanted = if n == 2 {
        density * vol_s * stretch.max(1e-300) / (h * h)
    } else {
        // Coarea densities are not tracked: size by the pilot image area instead.
        4.0 * density * distinct_cells(&pilot_pts, h) as f64 * pilot as f64 / members as f64
    };
    let draws = (wanted * pilot as f64 / members as f64).ceil().max(pilot as f64);
    let draws = draws.min(MAX_SAMPLES as f64) as u64;
    let pts = sample_images(f, set, 0, draws)?;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for z in &pts {
        for k in 0..2 {
            lo[k] = lo[k].min(z[k]);
            hi[k] = hi[k].max(z[k]);
        }
    }
    let mut img = RasterImage::from_bounds(lo, hi, h);
    for z in &pts {
        let (ix, iy) = img.cell_of(z[0], z[1]).expect("box covers every sample");
        img.mark(ix, iy);
    }
    img.samples = pts.len();
    img.density = if n == 2 {
        pts.len() as f64 * h * h / (vol_s * stretch.max(1e-300))
    } else {
        density * (pts.len() as f64 / wanted).min(1.0)
    };
    Ok(img)
}

fn distinct_cells(pts: &[[f64; 2]], h: f64) -> usize {
    let mut cells: Vec<(i64, i64)> =
        pts.iter().map(|z| ((z[0] / h).floor() as i64, (z[1] / h).floor() as i64)).collect();
    cells.sort_unstable();
    cells.dedup();
    cells.len()
}

impl RasterImage {
    /// Empty raster whose box contains `[lo, hi]` with a margin of two cells.
    fn from_bounds(lo: [f64; 2], hi: [f64; 2], h: f64) -> Self {
        let nx = ((hi[0] - lo[0]) / h).floor() as usize + 5;
        let ny = ((hi[1] - lo[1]) / h).floor() as usize + 5;
        Self::new([lo[0] - 2.0 * h, lo[1] - 2.0 * h], h, nx, ny)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MidpointTest {
    pub pairs: usize,
    pub violations: usize,
    pub ok: bool,
}

/// Midpoints of random pairs of marked-cell centres must land within one
/// cell of the marked region.
pub fn midpoint_convexity_test(img: &RasterImage, pairs: usize, seed: u64) -> Result<MidpointTest> {
    let cells = img.marked_cells();
    if cells.is_empty() {
        return Err(Error::InvalidParameter("raster has no marked cells".into()));
    }
    let shards = pairs.div_ceil(SHARD as usize);
    let violations: usize = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = sampling::shard_rng(seed, s as u64);
            let count = (pairs - s * SHARD as usize).min(SHARD as usize);
            (0..count)
                .filter(|_| {
                    let a = cells[rng.random_range(0..cells.len())];
                    let b = cells[rng.random_range(0..cells.len())];
                    // Centre of the midpoint is a cell centre or lies on a cell edge;
                    // rounding down picks one adjacent cell, the band covers the rest.
                    let mx = (a.0 + b.0) / 2;
                    let my = (a.1 + b.1) / 2;
                    !img.near_marked(mx, my)
                })
                .count()
        })
        .sum();
    Ok(MidpointTest { pairs, violations, ok: violations == 0 })
}

/// Euclidean distance, in cells, from every cell centre to the nearest
/// unmarked cell centre (cells beyond the border count as unmarked).
pub fn distance_transform(img: &RasterImage) -> Vec<f64> {
    let (nx, ny) = (img.nx, img.ny);
    let big = ((nx + ny + 2) * (nx + ny + 2)) as f64;
    let mut d2 = vec![0.0; nx * ny];
    // Columns: padded with one unmarked cell at both ends.
    for ix in 0..nx {
        let f: Vec<f64> = std::iter::once(0.0)
            .chain((0..ny).map(|iy| if img.is_marked(ix, iy) { big } else { 0.0 }))
            .chain(std::iter::once(0.0))
            .collect();
        let out = edt_1d(&f);
        for iy in 0..ny {
            d2[iy * nx + ix] = out[iy + 1];
        }
    }
    for iy in 0..ny {
        let f: Vec<f64> =
            std::iter::once(0.0).chain((0..nx).map(|ix| d2[iy * nx + ix])).chain(std::iter::once(0.0)).collect();
        let out = edt_1d(&f);
        for ix in 0..nx {
            d2[iy * nx + ix] = out[ix + 1];
        }
    }
    d2.into_iter().map(f64::sqrt).collect()
}

/// Lower envelope of parabolas (Felzenszwalb–Huttenlocher).
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates from −∞.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut out = vec![0.0; n];
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusSample {
    pub epsilon: f64,
    pub delta: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageModulus {
    pub curve: Vec<ModulusSample>,
    /// `min δ̂(ε)/ε²` over the retained chord lengths.
    pub c_hat: f64,
    /// Quantization allowance on `ĉ`: `2h / ε_min²`.
    pub tolerance: f64,
    /// Chord lengths dropped for lack of pairs.
    pub skipped: Vec<f64>,
}

impl ImageModulus {
    /// `epsilon,delta` rows with a header.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "epsilon,delta")?;
        for s in &self.curve {
            writeln!(w, "{},{}", s.epsilon, s.delta)?;
        }
        Ok(())
    }
}

/// Boundary cells used for chord endpoints are thinned to at most this many.
const MAX_BOUNDARY: usize = 6000;
const MIN_PAIRS: usize = 8;

/// For each `ε`, the smallest inscribed-disc radius at midpoints of chords of
/// length `ε ± h` between boundary cells, and the fitted `ĉ`.
pub fn empirical_image_modulus(img: &RasterImage, epsilon_grid: &[f64]) -> Result<ImageModulus> {
    if img.marked_count == 0 {
        return Err(Error::InvalidParameter("raster has no marked cells".into()));
    }
    let h = img.h;
    let dt = distance_transform(img);
    let mut boundary = img.boundary_cells();
    if boundary.len() > MAX_BOUNDARY {
        let stride = boundary.len().div_ceil(MAX_BOUNDARY);
        boundary = boundary.into_iter().step_by(stride).collect();
    }
    let centres: Vec<[f64; 2]> = boundary.iter().map(|&(ix, iy)| img.cell_center(ix, iy)).collect();
    let mut curve = Vec::new();
    let mut skipped = Vec::new();
    for &eps in epsilon_grid {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("chord length must be positive, got {eps}")));
        }
        let (delta, pairs) = (0..centres.len())
            .into_par_iter()
            .map(|i| {
                let mut best = f64::INFINITY;
                let mut count = 0usize;
                for j in (i + 1)..centres.len() {
                    let (a, b) = (centres[i], centres[j]);
                    let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    if (len - eps).abs() > h {
                        continue;
                    }
                    count += 1;
                    let r = match img.cell_of(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])) {
                        Some((ix, iy)) if img.is_marked(ix, iy) => ((dt[iy * img.nx + ix] - 0.5) * h).max(0.0),
                        _ => 0.0,
                    };
                    best = best.min(r);
                }
                (best, count)
            })
            .reduce(|| (f64::INFINITY, 0), |x, y| (x.0.min(y.0), x.1 + y.1));
        if pairs < MIN_PAIRS {
            skipped.push(eps);
        } else {
            curve.push(ModulusSample { epsilon: eps, delta, pairs });
        }
    }
    if curve.is_empty() {
        return Err(Error::SamplingFailure("no chord length had enough boundary pairs".into()));
    }
    let c_hat = curve.iter().map(|s| s.delta / (s.epsilon * s.epsilon)).fold(f64::INFINITY, f64::min);
    let eps_min = curve.iter().map(|s| s.epsilon).fold(f64::INFINITY, f64::min);
    Ok(ImageModulus { curve, c_hat, tolerance: 2.0 * h / (eps_min * eps_min), skipped })
}

/// Chord lengths `fractions · diam` where `diam` is the raster's extent.
pub fn default_epsilon_grid(img: &RasterImage) -> Vec<f64> {
    let cells = img.boundary_cells();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &(ix, iy) in &cells {
        let c = img.cell_center(ix, iy);
        for k in 0..2 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let extent = (hi[0] - lo[0]).min(hi[1] - lo[1]).max(img.h);
    [0.3, 0.45, 0.6, 0.75, 0.9].iter().map(|t| t * extent).collect()
}

/// Summed-area table of marked cells: O(1) rectangle counts.
struct CountTable {
    nx: usize,
    ny: usize,
    sums: Vec<u64>,
}

impl CountTable {
    fn new(img: &RasterImage) -> Self {
        let (nx, ny) = (img.nx, img.ny);
        let mut sums = vec![0u64; (nx + 1) * (ny + 1)];
        for iy in 0..ny {
            for ix in 0..nx {
                let v = u64::from(img.is_marked(ix, iy));
                sums[(iy + 1) * (nx + 1) + ix + 1] =
                    v + sums[iy * (nx + 1) + ix + 1] + sums[(iy + 1) * (nx + 1) + ix] - sums[iy * (nx + 1) + ix];
            }
        }
        Self { nx, ny, sums }
    }

    /// Marked cells in `[x0, x1] × [y0, y1]` (inclusive, clipped).
    fn count(&self, x: (i64, i64), y: (i64, i64)) -> u64 {
        let x0 = x.0.max(0) as usize;
        let y0 = y.0.max(0) as usize;
        if x.1 < 0 || y.1 < 0 {
            return 0;
        }
        let x1 = (x.1 as usize).min(self.nx - 1);
        let y1 = (y.1 as usize).min(self.ny - 1);
        if x0 > x1 || y0 > y1 {
            return 0;
        }
        let w = self.nx + 1;
        self.sums[(y1 + 1) * w + x1 + 1] + self.sums[y0 * w + x0]
            - self.sums[y0 * w + x1 + 1]
            - self.sums[(y1 + 1) * w + x0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexLike {
    pub checked: usize,
    pub violations: usize,
    pub ok: bool,
}

/// `(1 − t) f(x1) + t f(x2) ∈ f(S) + C` for sampled `x1, x2 ∈ S` and
/// `t ∈ {¼, ½, ¾}`, judged on the raster of `f(S)` with a one-cell band.
pub fn convex_like_check(
    f: &SmoothMap,
    set: &ConvexSet,
    cone: &TargetSet,
    img: &RasterImage,
    samples: usize,
    seed: u64,
) -> Result<ConvexLike> {
    check_dim(2, f.output_dim())?;
    check_dim(2, cone.dim())?;
    let table = CountTable::new(img);
    let h = img.h;
    // Index range along one axis of `{w : z − w ∈ C_k}`, widened by one cell.
    let range = |k: usize, z: f64, len: usize| -> (i64, i64) {
        let idx = |t: f64| ((t - img.lo[k]) / h).floor() as i64;
        let far = len as i64 + 1;
        match cone.components[k] {
            Component::Eq(v) => (idx(z - v) - 1, idx(z - v) + 1),
            Component::Le => (idx(z) - 1, far),
            Component::Ge => (-1, idx(z) + 1),
            Component::Free => (-1, far),
        }
    };
    let mut rng = sampling::rng(seed);
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..samples {
        let (Some(x1), Some(x2)) = (set.sample_interior(&mut rng), set.sample_interior(&mut rng)) else {
            return Err(Error::SamplingFailure("could not sample the set".into()));
        };
        let (z1, z2) = (f.eval(&x1)?, f.eval(&x2)?);
        for t in [0.25, 0.5, 0.75] {
            let z = &z1 * (1.0 - t) + &z2 * t;
            checked += 1;
            if table.count(range(0, z[0], img.nx), range(1, z[1], img.ny)) == 0 {
                violations += 1;
            }
        }
    }
    Ok(ConvexLike { checked, violations, ok: violations == 0 })
}

/// Polar map `(ρ, θ) ↦ (ρ cos θ, ρ sin θ)`: on a box of radii and angles its
/// image is an annulus sector, the standard nonconvex control.
pub fn polar_map() -> SmoothMap {
    SmoothMap::black_box(
        2,
        2,
        |x| Vector::from_vec(vec![x[0] * x[1].cos(), x[0] * x[1].sin()]),
        Some(std::sync::Arc::new(|x: &Vector| {
            crate::linalg::Matrix::from_row_slice(
                2,
                2,
                &[x[1].cos(), -x[0] * x[1].sin(), x[1].sin(), x[0] * x[1].cos()],
            )
        })),
    )
}
