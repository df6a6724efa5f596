//! The linear degenerate model operator
//!
//! `L f = f_t − (z² a11 f_zz + 2z a12 f_zy + a22 f_yy + b1 z f_z + b2 f_y + c f)`
//!
//! on the half space `z ≥ 0`, and its split solution `f = f° + z^p f̃`: a
//! one-dimensional problem for the trace `f°` and a uniformly parabolic
//! problem for `f̃` in `w = ln z`.
//!
//! The transformed coefficients come from substituting the split into `L`
//! by the chain rule. The literal reference formulas are kept as
//! [`CoefficientSet::Printed`] so the two can be compared on the splitting
//! identity.

mod coefficients;
mod linalg;
mod operator;
mod solve;

pub use coefficients::{
    derived_c, printed_c_bracket, Coefficient, CoefficientFn, CoefficientSet, CoefficientValues, ModelCoefficients,
    TraceValues, TransformedCoefficients,
};
pub use operator::{
    apply_model_operator, boundary_residual, discrepancy_report, reconstruct, splitting_defect, tilde_residual,
    BoundaryField, DiscrepancyEntry, DiscrepancyReport, TildeField,
};
pub use solve::{
    solve_boundary_problem, solve_tilde_problem, BoundaryProblem, BoundarySide, Source2, Source3, TildeProblem,
    TildeYSide, TimeStepping, WSide,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ellipticity fails at (z or w, y, t) = {at:?}: smallest eigenvalue {min_eigenvalue} < {lambda}")]
    Ellipticity { at: [f64; 3], min_eigenvalue: f64, lambda: f64 },
    #[error("stencil violation: {0}")]
    Stencil(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("window too small: {0}")]
    Window(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
}
