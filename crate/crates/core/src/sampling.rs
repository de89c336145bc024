//! Seeded random and low-discrepancy point generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{p_norm, Vector};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for shard `index` of a computation seeded with `seed`.
pub fn shard_rng(seed: u64, index: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index.wrapping_add(1));
    r
}

pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Direction of unit length in the ℓᵖ norm, isotropic in angle.
pub fn unit_direction(rng: &mut impl Rng, n: usize, p: f64) -> Vector {
    loop {
        let g = gaussian_vector(rng, n);
        let norm = p_norm(&g, p);
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// Uniform point in the axis-aligned box `[lo, hi]`.
pub fn uniform_in_box(rng: &mut impl Rng, lo: &Vector, hi: &Vector) -> Vector {
    Vector::from_iterator(lo.len(), lo.iter().zip(hi.iter()).map(|(&a, &b)| a + (b - a) * rng.random::<f64>()))
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// The `index`-th point of the Halton sequence in `[0, 1)^dim` (dim ≤ 16).
pub fn halton(index: u64, dim: usize) -> Vector {
    assert!(dim <= PRIMES.len(), "halton sequence supports at most 16 dimensions");
    Vector::from_iterator(dim, PRIMES[..dim].iter().map(|&b| radical_inverse(index + 1, b)))
}

/// Halton point mapped into the box `[lo, hi]`.
pub fn halton_in_box(index: u64, lo: &Vector, hi: &Vector) -> Vector {
    let u = halton(index, lo.len());
    Vector::from_iterator(lo.len(), (0..lo.len()).map(|i| lo[i] + (hi[i] - lo[i]) * u[i]))
}

/// Quasi-uniform Euclidean unit directions: equally spaced angles in the plane,
/// a Fibonacci lattice on S², seeded Gaussian draws otherwise.
pub fn sphere_directions(n: usize, count: usize, seed: u64) -> Vec<Vector> {
    match n {
        0 => Vec::new(),
        1 => vec![Vector::from_vec(vec![1.0]), Vector::from_vec(vec![-1.0])],
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                Vector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    Vector::from_vec(vec![rad * t.cos(), rad * t.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut r = rng(seed);
            (0..count).map(|_| unit_direction(&mut r, n, 2.0)).collect()
        }
    }
}
