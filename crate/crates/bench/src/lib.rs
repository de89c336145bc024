//! Fixtures shared by the benchmarks.

use uniconv_core::optim::ProblemSpec;
use uniconv_core::{ConvexSet, Matrix, QuadraticComponent, SmoothMap, TargetSet, Vector};

pub fn x0() -> Vector {
    Vector::from_element(2, std::f64::consts::FRAC_1_SQRT_2)
}

/// `x1² − x2²` subject to `x1² + x2² = 1` on `ball(x0, r)`.
pub fn worked_example(r: f64) -> ProblemSpec {
    let q = |d: [f64; 2], c| {
        QuadraticComponent::new(Matrix::from_diagonal(&Vector::from_row_slice(&d)), Vector::zeros(2), c)
    };
    let phi = SmoothMap::quadratic(2, vec![q([2.0, -2.0], 0.0)]).unwrap();
    let g = SmoothMap::quadratic(2, vec![q([2.0, 2.0], -1.0)]).unwrap();
    let set = ConvexSet::euclidean_ball(x0(), r).unwrap();
    ProblemSpec::new(phi, Some(g), set, TargetSet::zero(1), x0()).unwrap()
}
