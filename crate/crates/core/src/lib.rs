//! Certificates of uniform convexity for images of smooth maps, and their use
//! to solve nonconvex constrained problems with global solutions, Lagrange
//! multipliers and zero duality gap.

pub mod calculus;
pub mod certify;
pub mod cone;
pub mod error;
pub mod geometry;
pub mod imagecheck;
pub mod linalg;
pub mod nlp;
mod numfmt;
pub mod optim;
pub mod sampling;
pub mod trs;

pub use calculus::{LipschitzBound, QuadraticComponent, Region, RegularityBound, SmoothMap};
pub use certify::Certificate;
pub use cone::{Component, TargetSet};
pub use error::{Error, Result};
pub use geometry::{ConvexSet, ModulusBound};
pub use linalg::{Matrix, Vector};
