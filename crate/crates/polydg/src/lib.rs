//! Polytopal discontinuous Galerkin solver for the two-dimensional complex
//! Ginzburg-Landau equation.
//!
//! The library is organized along the pipeline of a DG computation:
//!
//! - [`mesh`]: polygonal partitions of the unit square and unit disk
//!   (structured non-convex, Voronoi, mixed families) with full edge topology,
//! - [`quadrature`]: exact-to-degree integration over polygons and edges,
//! - [`space`]: broken polynomial spaces with per-cell orthonormal bases,
//! - [`forms`]: mass / interior-penalty stiffness / nonlinearity-weighted
//!   operators, load vectors, norms and the elliptic (Ritz) projection,
//! - [`solver`]: complex sparse matrices and preconditioned Krylov solvers,
//! - [`stepper`]: the weighted implicit-explicit theta time scheme,
//! - [`verify`]: manufactured solutions, convergence tables and the
//!   inequality property suites,
//! - [`config`]: JSON run configurations for the `polydg` binary.

pub mod config;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
