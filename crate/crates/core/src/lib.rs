//! Constraint-based models of parallel mechanisms as polynomial systems.
//!
//! The crate builds the configuration space of a mechanism as the zero set of
//! a polynomial constraint map `F`, and provides the numerical machinery to
//! study its singular points:
//!
//! * [`numeric`] — dense rank / null-space / tangent estimation with explicit
//!   tolerance semantics,
//! * [`mechanism`] — the Delta platform (original and tilde coordinates) and
//!   the planar crank-slider as [`mechanism::FormalManipulator`]s,
//! * [`symmetry`] — the order-6 dihedral action on Delta configurations by
//!   signed block permutations,
//! * [`catalog`] — closed-form singular configurations, their 24-point orbit,
//!   and a rank-deficiency search over the variety,
//! * [`geom`] — analytic continuation of sphere/circle intersection branches,
//! * [`witness`] — four-path tangent-span certificates showing a singular
//!   configuration is not a manifold point,
//! * [`classify`] — configuration-space / endeffector / actuator singularity
//!   classification at a configuration,
//! * [`curve`] — a planar curve with an algebraic singularity that is still a
//!   manifold point, as a contrast case.

pub mod catalog;
pub mod classify;
pub mod curve;
mod error;
pub mod geom;
pub mod mechanism;
pub mod numeric;
pub mod symmetry;
pub mod witness;

pub use error::Error;

// Re-exported so downstream users can build the vector types appearing in
// this crate's public API without pinning their own copy.
pub use nalgebra;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
