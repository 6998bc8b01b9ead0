//! Failure modes shared by the solvers and constructions in this crate.

use std::fmt;

/// Errors reported by solvers, constructions, and checked preconditions.
///
/// Programming mistakes (mismatched grids inside a single object, wrong
/// vector lengths) panic instead; this enum covers conditions a caller can
/// hit with well-formed but unlucky or inconsistent data.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands live on different grids.
    GridMismatch,
    /// An iterative solver ran out of its iteration budget.
    SolverStall {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// The constraint set is empty or the data contains values that make
    /// the problem meaningless (`+inf` obstacle entries, NaN).
    Infeasible { detail: String },
    /// The active-set iteration cycled and the fallback sweep also failed
    /// to reach the requested residual.
    NoConvergence {
        iterations: usize,
        residual: f64,
    },
    /// A node selection was required to stay inside the biactive set but
    /// contained the given node.
    InvalidSelection { node: usize },
    /// A derivative element was paired with an obstacle result other than
    /// the one it was built from.
    AnchorMismatch,
    /// Input violated a documented precondition of the construction.
    Precondition { detail: String },
    /// The penalization path made the objective worse beyond tolerance.
    StalledPath {
        step: usize,
        objective_before: f64,
        objective_after: f64,
    },
    /// A schedule or node list that must be nonempty (or ordered) was not.
    BadSchedule { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridMismatch => write!(f, "operands live on different grids"),
            Error::SolverStall {
                solver,
                iterations,
                residual,
            } => write!(
                f,
                "{solver} stalled after {iterations} iterations (relative residual {residual:.3e})"
            ),
            Error::Infeasible { detail } => write!(f, "infeasible problem: {detail}"),
            Error::NoConvergence {
                iterations,
                residual,
            } => write!(
                f,
                "obstacle iteration failed to converge after {iterations} iterations \
                 (residual {residual:.3e})"
            ),
            Error::InvalidSelection { node } => {
                write!(f, "selection contains node {node} outside the biactive set")
            }
            Error::AnchorMismatch => {
                write!(f, "derivative element does not belong to this obstacle result")
            }
            Error::Precondition { detail } => write!(f, "precondition violated: {detail}"),
            Error::StalledPath {
                step,
                objective_before,
                objective_after,
            } => write!(
                f,
                "penalization path stalled at step {step}: objective rose from \
                 {objective_before:.6e} to {objective_after:.6e}"
            ),
            Error::BadSchedule { detail } => write!(f, "bad schedule: {detail}"),
        }
    }
}

impl std::error::Error for Error {}
