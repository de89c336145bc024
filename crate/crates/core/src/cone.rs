//! Target sets `C` built component by component: points, orthant-generated
//! cones and the whole space.

use serde::{Deserialize, Serialize};

use crate::linalg::Vector;

/// Constraint on one coordinate of `g(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    /// `y_i = value`.
    Eq(f64),
    /// `y_i ≤ 0`.
    Le,
    /// `y_i ≥ 0`.
    Ge,
    /// No constraint.
    Free,
}

/// Cartesian product of per-coordinate constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub components: Vec<Component>,
}

impl TargetSet {
    pub fn new(components: Vec<Component>) -> Self {
        Self { components }
    }

    /// `C = {0} ⊂ Rᵏ`.
    pub fn zero(k: usize) -> Self {
        Self::new(vec![Component::Eq(0.0); k])
    }

    pub fn point(y: &Vector) -> Self {
        Self::new(y.iter().map(|&v| Component::Eq(v)).collect())
    }

    pub fn nonneg_orthant(k: usize) -> Self {
        Self::new(vec![Component::Ge; k])
    }

    pub fn nonpos_orthant(k: usize) -> Self {
        Self::new(vec![Component::Le; k])
    }

    pub fn whole(k: usize) -> Self {
        Self::new(vec![Component::Free; k])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Closed convex cone with apex at the origin.
    pub fn is_cone(&self) -> bool {
        self.components.iter().all(|c| !matches!(c, Component::Eq(v) if *v != 0.0))
    }

    /// Euclidean distance from `y` to `C`.
    pub fn distance(&self, y: &Vector) -> f64 {
        self.violation(y).norm()
    }

    /// Per-coordinate signed violation: zero when the coordinate is satisfied.
    pub fn violation(&self, y: &Vector) -> Vector {
        Vector::from_iterator(
            self.dim(),
            self.components.iter().zip(y.iter()).map(|(c, &v)| match c {
                Component::Eq(t) => v - t,
                Component::Le => v.max(0.0),
                Component::Ge => v.min(0.0),
                Component::Free => 0.0,
            }),
        )
    }

    pub fn project(&self, y: &Vector) -> Vector {
        y - self.violation(y)
    }

    pub fn contains(&self, y: &Vector, tol: f64) -> bool {
        self.distance(y) <= tol
    }

    /// Admissible sign pattern of a multiplier in the normal cone `N_C(y)`
    /// (within `tol` of the face) for each coordinate.
    pub fn normal_cone_signs(&self, y: &Vector, tol: f64) -> Vec<Sign> {
        self.components
            .iter()
            .zip(y.iter())
            .map(|(c, &v)| match c {
                Component::Eq(_) => Sign::Any,
                Component::Le if v.abs() <= tol => Sign::Nonneg,
                Component::Ge if v.abs() <= tol => Sign::Nonpos,
                _ => Sign::Zero,
            })
            .collect()
    }

    /// Sign pattern of the dual cone `C^⊖ = {y* : ⟨y*, c⟩ ≤ 0 ∀c ∈ C}`.
    pub fn dual_cone_signs(&self) -> Vec<Sign> {
        self.components
            .iter()
            .map(|c| match c {
                Component::Eq(_) => Sign::Any,
                Component::Le => Sign::Nonneg,
                Component::Ge => Sign::Nonpos,
                Component::Free => Sign::Zero,
            })
            .collect()
    }
}

/// Admissible sign of one multiplier coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Any,
    Nonneg,
    Nonpos,
    Zero,
}

impl Sign {
    /// Interval `[lo, hi]` of this sign clipped to `[-bound, bound]`.
    pub fn range(self, bound: f64) -> (f64, f64) {
        match self {
            Sign::Any => (-bound, bound),
            Sign::Nonneg => (0.0, bound),
            Sign::Nonpos => (-bound, 0.0),
            Sign::Zero => (0.0, 0.0),
        }
    }
}
