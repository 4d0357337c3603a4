//! Equilibria of charged deformable conductors.
//!
//! The crate couples a Lagrangian description of an elastic body (a simplicial
//! mesh with a conductor subdomain and a clamped boundary portion) with an
//! Eulerian description of its deformed image on a uniform Cartesian grid. The
//! electrostatic part of the energy is `Q² / (2 cap)`, where `cap` is either the
//! self-capacity of the deformed conductor or its capacity relative to the
//! deformed body.
//!
//! Module map:
//!
//! * [`geometry`]: grids, set masks, exact distance transforms, thinnings and
//!   thickenings, regular-domain diagnostics.
//! * [`deformation`]: reference meshes, piecewise-affine deformations,
//!   distortion and admissibility diagnostics, rasterization of deformed images.
//! * [`capacity`]: discrete capacitary potentials, relative and self capacity.
//! * [`energy`]: the polyconvex material model and the two electroelastic
//!   functionals.
//! * [`optimize`]: pattern search and gradient-hybrid minimization.
//! * [`verify`]: numerical checks of capacity monotonicity, continuity and
//!   Koch prefractal behaviour.

pub mod capacity;
pub mod deformation;
pub mod energy;
mod error;
pub use error::Reason;
pub mod geometry;
pub mod optimize;
pub mod parallel;
pub mod verify;

pub use error::{Error, Result};
