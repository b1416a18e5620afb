//! Conformal factor fields of flat cone-point metrics over planar domains.
//!
//! The field φ defines the metric e^{2φ}g. Away from cone points it is harmonic;
//! each cone point carries a charge k·q where q is π/2 for quad meshes and π/3
//! for triangle meshes. The modules cover domain geometry, a P1 background
//! solver, field evaluation, the four boundary/charge conditions, recovery of
//! charges from boundary data, and tracing of cross-field geodesics.
#![no_std]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic_cases;
pub mod background_solver;
pub mod conditions;
pub mod geodesics;
pub mod geometry;
pub mod inverse_poisson;
pub mod phi_field;

mod linalg;
mod math;
mod quadrature;

pub use geometry::{BoundaryLoop, CurveSegment, DomainSpec, JunctionInfo, Point, Quantum};

pub use phi_field::{ConeClass, ConePoint, PhiField};
