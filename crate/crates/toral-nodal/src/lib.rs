//! Desk-scale computational companion to the spectral geometry of nodal
//! sets on the flat torus `T^d = R^d/Z^d`.
//!
//! The crate is organized around the objects it computes with:
//!
//! * [`lattice`] — exact enumeration of lattice points on spheres and
//!   their cluster/separation structure;
//! * [`eigenfun`] — toral Laplace eigenfunctions as sparse trigonometric
//!   polynomials, their holomorphic extensions and short-sum estimates;
//! * [`surface`] — graph hypersurfaces, curvature machinery and the
//!   complexified patches `Sigma(v, tau)`;
//! * [`oscillatory`] — quadrature of the oscillatory integrals `J` and
//!   decay diagnostics;
//! * [`restriction`] — mean-square restriction quantities, lower-bound
//!   certificates and the cap-propagation engine;
//! * [`classical`] — exact Legendre polynomial checks and the Laurent
//!   polynomial bridge used by the function-field argument.

pub mod classical;
pub mod eigenfun;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod lattice;
pub mod oscillatory;
pub mod quadrature;
pub mod restriction;
pub mod surface;

pub use error::{Error, Result};
