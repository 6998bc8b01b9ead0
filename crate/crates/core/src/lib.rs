//! Discrete toolbox for the obstacle problem on uniform grids: the solution
//! operator and its directional derivatives, generalized derivative elements
//! described by node sets and by nonnegative node measures, relaxed solves
//! with such measures, and stationarity audits for tracking-type control
//! problems with the obstacle problem as constraint.
//!
//! Conventions shared by all modules:
//! * primal functions store nodal values, duals store integrated loads, and
//!   every pairing is a plain dot product ([`mesh`]);
//! * node measures may carry `+inf` masses, which eliminate nodes from the
//!   relaxed systems ([`measures`]);
//! * classification of contact sets is thresholded and deterministic, with
//!   ties going to the active side ([`obstacle`]).

pub mod control;
pub mod derivatives;
pub mod error;
pub mod measures;
pub mod mesh;
pub mod obstacle;

pub use error::Error;
