//! Adaptive locally stabilised P1-P0 mixed finite elements for nearly
//! incompressible plane elasticity.
//!
//! The pipeline per level is: assemble the saddle-point system on a
//! red-green-blue refined triangulation, solve it directly, estimate the error
//! with the residual or the local Poisson problem estimator, mark by bulk
//! chasing and refine.

pub mod assembly;
pub mod basis;
pub mod driver;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod mesh;
pub mod problems;
pub mod solve;
pub mod sparse;

pub use assembly::{assemble_saddle_system, apply_dirichlet, Formulation, MaterialParams, SaddleSystem};
pub use driver::{adaptive_loop, adaptive_loop_with, compute_rates, emit_csv, ConvergenceRow, ConvergenceTable, EstimatorKind, LevelState, MaterialInput, RefinementMode, RunConfig};
pub use error::{Error, Result};
pub use estimators::{ErrorIndicators, PoissonIndicators};
pub use geometry::Point;
pub use mesh::{Domain, Mesh};
pub use problems::{make_problem, EnergyError, Problem, ProblemId};
pub use solve::{solve_direct, MixedSolution};
