//! Monotone finite-volume entropy solver for inhomogeneous scalar
//! conservation laws on 1D/2D boxes, with discrete norms and the Kruzkov
//! entropy-residual audit.

mod entropy;
mod grid;
mod scheme;

pub use entropy::{
    entropy_residual, expansion_shock_data, uniform_k_grid, EntropyAudit, TestFunctionFamily,
};
pub use grid::{l1_ball_distance, linf, tv, Grid, GridSolution};
pub use scheme::{solve, SolveOptions};
