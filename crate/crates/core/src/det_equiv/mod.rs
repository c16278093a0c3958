//! Deterministic equivalents: large-system approximations of the ergodic
//! SINR that need no channel draws.

mod derivative;
mod fixed_point;
mod model;
pub mod operator;
mod sinr;
mod zf_limit;

pub use derivative::{solve_derivative, DerivativeSolution, DerivativeSystem, ResolventSystem};
pub use fixed_point::{solve_fixed_point, FixedPointSolution, SolverOptions};
pub use model::{mrt_cell, rzf_cell, zf_cell, CellOps, LinearCell, MrtCell};
pub use operator::{DiagonalOp, Operator};
pub use sinr::{de_sinr, de_sinr_many, write_csv, Backend, DeOptions, DeSinr, DeSolution};
pub use zf_limit::{solve_zf_limit, ZfLimitSolution};

#[cfg(test)]
mod tests;
