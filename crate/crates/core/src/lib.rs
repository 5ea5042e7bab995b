//! Numerical core for the averaging principle of oscillating fully nonlinear obstacle
//! problems: the sublinear generator `G`, the coefficient catalog and driver assembly,
//! time-averaged drivers, a monotone explicit obstacle-PDE solver and a trinomial
//! reflected/penalized G-BSDE lattice.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

pub mod averaging;
pub mod coefficients;
pub mod error;
pub mod g;
pub mod lattice;
pub mod pde;
mod quadrature;
pub mod report;

pub use averaging::{average_driver, AveragedDriver, AveragingMode};
pub use coefficients::{
    assemble_driver, eval_coefficient, validate_assumptions, Coefficient, CoefficientValue, DriverEval, Epsilon,
    Expr, ProblemSpec, SampleRegion, Spatial, StateFactor, Temporal, Term,
};
pub use error::{Error, Result};
pub use g::{check_nondegenerate, g_value, CovarianceSet, SymMatrix};
pub use lattice::{
    check_supported, penalization_sweep, solve_penalized_bsde, solve_reflected_bsde, Lattice, LatticeMode, LatticeSolution,
    PenalizationSweep,
};
pub use pde::{
    resolve_steps, solve_obstacle_pde, stability_steps, sup_norm_diff, DriverKind, FieldKind, Grid1D, NormDiff,
    SolutionField, SolverOptions, Steps, Window,
};
pub use report::{Check, ValidationReport};
