//! Finite-element toolkit for optimal thin insulation in the Robin limit.
//!
//! A body `Ω ⊂ ℝ²` is wrapped in an insulating layer of thickness `h ≥ 0`
//! on `∂Ω` with prescribed total mass `m`. In the limit of a thin, poorly
//! conducting layer the temperature satisfies `(1/k) u + h ∂u/∂ν = 0` on
//! the boundary. The crate solves
//!
//! * the heat-source problem: minimize the energy over admissible `h`
//!   ([`energy`]),
//! * the decay-rate problem: minimize the first Robin eigenvalue over
//!   admissible `h`, including symmetry breaking on the disc ([`eigen`],
//!   [`analysis`]),
//!
//! on P1 triangulations ([`mesh`], [`fem`]) with sparse iterative solvers
//! ([`sparse`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result};
pub use fem::{RobinConfig, ScalarField, ThicknessField};
pub use mesh::Mesh2D;
