//! Central paths of log-barrier problems over polytopes.
//!
//! The crate computes points on the central path of
//!
//! ```text
//!     max  c'x + mu * sum_i ln(s_i)   s.t.  Ax + s = b,  s >= 0
//! ```
//!
//! by damped Newton iteration on the primal-dual optimality system, samples
//! whole paths adaptively in `mu`, composes path bundles under affine maps,
//! and writes the result as SVG drawings or STL meshes.
//!
//! Module map:
//!
//! - [`model`]: problem data, assumption checks, barrier objective.
//! - [`solver`]: KKT residual, Newton step, centering.
//! - [`sampler`]: endpoint estimates and adaptive `mu` schedules.
//! - [`geometry`]: k-gons, rotations, affine transport, leaf objectives,
//!   closed-form paths in the disc and the cube/cylinder.
//! - [`solids`]: Platonic solids and facet enumeration.
//! - [`compose`]: scenes built from placed path bundles.
//! - [`svg`]: SVG output.
//! - [`mesh`]: tube sweeps, flat extrusion and STL output.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compose;
pub mod geometry;
pub mod mesh;
pub mod model;
mod numeric;
pub mod sampler;
pub mod solids;
pub mod solver;
pub mod svg;

mod error;

pub use error::Error;
