//! Shared numerical machinery: orthogonal least squares, box-constrained
//! nonlinear least squares, multi-start, and exhaustive grid search.

pub mod boxed;
pub mod grid;
pub mod linalg;

pub use boxed::{multi_start, solve_boxed, solve_from, BoxedProblem, Solution, SolverOptions};
pub use grid::{grid_minimize, par_grid_minimize, GridMin, GridSpec};
pub use linalg::{lsq_solve, LsqSolution, Matrix, Qr, Scalar};
